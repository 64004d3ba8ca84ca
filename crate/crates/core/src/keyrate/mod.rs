//! Asymptotic key rate of the conference key protocol with selective
//! advantage distillation.
//!
//! A block of two rounds is kept when every Bob with CAD enabled sees the
//! same Left/Right parity as Alice. Conditioned on that, Eve's uncertainty
//! about Alice's surviving bit is lower bounded by
//!
//! ```text
//! H(A|EM) ≥ min_ν 1 − (1/p_a) Σ_{(x,z) ∈ A_C} Q_x Q_z h(τ_{x,z})
//! τ_{x,z} = ½ (1 − |(Q_x − 2ν_x)(Q_z − 2ν_z)| / (Q_x Q_z))
//! ```
//!
//! over `0 ≤ ν_Δ ≤ Q_Δ`, `Σ ν_Δ = Q_X`. The rate per transmitted state is
//! `(p_a / 2)(H(A|EM) − max_j h(Q_j^CAD))`.

mod optimize;

use std::fmt;

use rayon::prelude::*;

pub use optimize::OptimizerConfig;

use crate::bits::{enumerate_patterns, BitPattern};
use crate::entropy::{clamp_probability, h};
use crate::error::{Result, ScadError};
use crate::noise::ErrorDistribution;

/// Slack allowed on the `ν` constraints when evaluating a caller-supplied vector.
const NU_FEASIBILITY_TOL: f64 = 1e-8;

/// Which Bobs run CAD. The all-zero mask denotes the plain protocol.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CadMask(BitPattern);

impl CadMask {
    pub fn new(pattern: BitPattern) -> Self {
        Self(pattern)
    }

    pub fn parse(s: &str, p: usize) -> Result<Self> {
        BitPattern::parse(s, p).map(Self)
    }

    pub fn none(p: usize) -> Self {
        Self(BitPattern::zero(p))
    }

    pub fn all(p: usize) -> Self {
        Self(BitPattern::ones(p))
    }

    pub fn pattern(self) -> BitPattern {
        self.0
    }

    pub fn width(self) -> usize {
        self.0.width()
    }

    pub fn is_none(self) -> bool {
        self.0.value() == 0
    }

    /// Whether Bob `bob` (zero based) runs CAD.
    pub fn bit(self, bob: usize) -> bool {
        self.0.bit(bob)
    }

    /// Every mask of width `p` in ascending numeric order.
    pub fn all_masks(p: usize) -> Result<impl Iterator<Item = CadMask>> {
        Ok(enumerate_patterns(p)?.map(CadMask))
    }
}

impl fmt::Display for CadMask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

fn check_mask(d: &ErrorDistribution, mask: CadMask) -> Result<()> {
    if mask.width() != d.parties() {
        return Err(ScadError::Width {
            expected: d.parties(),
            got: mask.width(),
        });
    }
    Ok(())
}

/// Pairs of Left/Right error patterns that pass every enabled parity check.
pub fn acceptance_set(mask: CadMask) -> Vec<(BitPattern, BitPattern)> {
    let p = mask.width();
    let m = mask.pattern();
    let patterns: Vec<BitPattern> = enumerate_patterns(p).expect("mask width valid").collect();
    let mut out = Vec::with_capacity(1 << (2 * p - m.popcount() as usize));
    for &x in &patterns {
        for &z in &patterns {
            if x.xor(z).and(m).value() == 0 {
                out.push((x, z));
            }
        }
    }
    out
}

/// Probability that a two-round block is accepted.
///
/// Since `(x ⊕ z) ∧ C = 0` iff `x ∧ C = z ∧ C`, this is the sum of squared
/// masses of the classes of patterns that agree on the CAD bits.
pub fn p_accept(d: &ErrorDistribution, mask: CadMask) -> Result<f64> {
    check_mask(d, mask)?;
    let m = mask.pattern().value() as usize;
    let mut class_mass = vec![0.0; d.probs().len()];
    for (v, &q) in d.probs().iter().enumerate() {
        class_mass[v & m] += q;
    }
    let p_a: f64 = class_mass.iter().map(|s| s * s).sum();
    if p_a <= 0.0 {
        return Err(ScadError::DegenerateAcceptance);
    }
    Ok(p_a.min(1.0))
}

/// `τ = ½(1 − |(q_x − 2ν_x)(q_z − 2ν_z)| / (q_x q_z))`; both `q` must be positive.
pub fn tau(q_x: f64, q_z: f64, nu_x: f64, nu_z: f64) -> f64 {
    debug_assert!(q_x > 0.0 && q_z > 0.0);
    let ratio = ((q_x - 2.0 * nu_x) * (q_z - 2.0 * nu_z)).abs() / (q_x * q_z);
    (0.5 * (1.0 - ratio)).clamp(0.0, 0.5)
}

/// Phase-error weights `ν_Δ`, one per error pattern.
#[derive(Debug, Clone, PartialEq)]
pub struct NuVector {
    p: usize,
    nu: Vec<f64>,
}

impl NuVector {
    pub fn from_dense(p: usize, nu: Vec<f64>) -> Result<Self> {
        if nu.len() != 1 << p {
            return Err(ScadError::Width {
                expected: 1 << p,
                got: nu.len(),
            });
        }
        Ok(Self { p, nu })
    }

    pub fn zeros(p: usize) -> Self {
        Self {
            p,
            nu: vec![0.0; 1 << p],
        }
    }

    pub fn get(&self, delta: BitPattern) -> f64 {
        self.nu[delta.value() as usize]
    }

    pub fn values(&self) -> &[f64] {
        &self.nu
    }

    pub fn total(&self) -> f64 {
        self.nu.iter().sum()
    }

    /// Checks `0 ≤ ν_Δ ≤ Q_Δ` and `Σ ν = Q_X` within `tol`.
    pub fn check_feasible(&self, d: &ErrorDistribution, tol: f64) -> Result<()> {
        if self.p != d.parties() {
            return Err(ScadError::Width {
                expected: d.parties(),
                got: self.p,
            });
        }
        for (v, (&nu, &q)) in self.nu.iter().zip(d.probs()).enumerate() {
            if nu < -tol || nu > q + tol {
                return Err(ScadError::Infeasible(format!(
                    "nu[{}] = {nu} outside [0, {q}]",
                    BitPattern::new(v as u32, self.p)?
                )));
            }
        }
        let total = self.total();
        if (total - d.qx()).abs() > tol {
            return Err(ScadError::Infeasible(format!(
                "sum of nu = {total} but Q_X = {}",
                d.qx()
            )));
        }
        Ok(())
    }
}

/// Value of the entropy bound's objective at a particular `ν`.
pub fn entropy_objective(d: &ErrorDistribution, mask: CadMask, nu: &NuVector) -> Result<f64> {
    check_mask(d, mask)?;
    nu.check_feasible(d, NU_FEASIBILITY_TOL)?;
    let p_a = p_accept(d, mask)?;
    Ok(objective_unchecked(d, mask, nu.values(), p_a))
}

fn objective_unchecked(d: &ErrorDistribution, mask: CadMask, nu: &[f64], p_a: f64) -> f64 {
    let m = mask.pattern().value() as usize;
    let q = d.probs();
    let active: Vec<usize> = (0..q.len()).filter(|&v| q[v] > 0.0).collect();
    let mut s = 0.0;
    for &x in &active {
        for &z in &active {
            if (x ^ z) & m == 0 {
                s += q[x] * q[z] * h(tau(q[x], q[z], nu[x], nu[z]));
            }
        }
    }
    (1.0 - s / p_a).clamp(0.0, 1.0)
}

/// Lower bound on `H(A|EM)` with the default optimizer settings.
pub fn entropy_bound(d: &ErrorDistribution, mask: CadMask) -> Result<(f64, NuVector)> {
    entropy_bound_with(d, mask, &OptimizerConfig::default())
}

pub fn entropy_bound_with(
    d: &ErrorDistribution,
    mask: CadMask,
    cfg: &OptimizerConfig,
) -> Result<(f64, NuVector)> {
    check_mask(d, mask)?;
    if d.qx() > 1.0 {
        return Err(ScadError::Infeasible(format!(
            "Q_X = {} exceeds total pattern mass",
            d.qx()
        )));
    }
    let p_a = p_accept(d, mask)?;
    let min = optimize::minimize(d, mask, p_a, cfg);
    let value = objective_unchecked(d, mask, &min.nu, p_a);
    Ok((
        value,
        NuVector {
            p: d.parties(),
            nu: min.nu,
        },
    ))
}

/// Error rate between Alice and Bob `bob` (zero based) on accepted blocks.
pub fn post_cad_error(d: &ErrorDistribution, mask: CadMask, bob: usize) -> Result<f64> {
    check_mask(d, mask)?;
    let q = d.marginal_link_error(bob)?;
    if mask.bit(bob) {
        Ok((q * q / p_accept(d, mask)?).min(1.0))
    } else {
        Ok(q)
    }
}

/// Left-bit disagreement rate of Bob `bob` on accepted blocks, summed
/// over the distribution: `P(accept, x_j = 1) / p_a`.
///
/// Agrees with [`post_cad_error`] when Bob `bob` is the only CAD Bob or
/// runs no CAD under independent links. With further CAD Bobs the squared
/// marginal there omits the chance that the other checks pass, so
/// [`post_cad_error`] is an upper bound on this value.
pub fn expected_post_cad_error(d: &ErrorDistribution, mask: CadMask, bob: usize) -> Result<f64> {
    check_mask(d, mask)?;
    if bob >= d.parties() {
        return Err(ScadError::Index {
            index: bob,
            len: d.parties(),
        });
    }
    let m = mask.pattern().value() as usize;
    let flag = 1usize << (d.parties() - 1 - bob);
    let mut class_mass = vec![0.0; d.probs().len()];
    let mut class_err = vec![0.0; d.probs().len()];
    for (v, &q) in d.probs().iter().enumerate() {
        class_mass[v & m] += q;
        if v & flag != 0 {
            class_err[v & m] += q;
        }
    }
    let joint: f64 = class_mass.iter().zip(&class_err).map(|(a, e)| a * e).sum();
    Ok((joint / p_accept(d, mask)?).clamp(0.0, 1.0))
}

/// Error-correction leakage `max_j h(Q_j)`.
pub fn leak_ec(post_errors: &[f64]) -> Result<f64> {
    if post_errors.is_empty() {
        return Err(ScadError::Empty("post-CAD error rates"));
    }
    post_errors.iter().try_fold(0.0f64, |acc, &q| {
        Ok(acc.max(h(clamp_probability(q, "post-CAD error rate")?)))
    })
}

/// Rate of the protocol without CAD: `1 − h(Q_X) − max_j h(Q_AB_j)`.
pub fn no_cad_rate(d: &ErrorDistribution) -> f64 {
    let leak = d.marginals().into_iter().map(h).fold(0.0, f64::max);
    1.0 - h(d.qx().min(1.0)) - leak
}

#[derive(Debug, Clone, PartialEq)]
pub struct KeyRateReport {
    pub mask: CadMask,
    pub p_accept: f64,
    pub entropy_bound: f64,
    /// Per-Bob error rate on the distilled key, Bob 1 first.
    pub post_cad_errors: Vec<f64>,
    pub leak_ec: f64,
    /// Secret bits per transmitted GHZ state; may be negative.
    pub rate: f64,
    /// Minimising `ν`; absent for the plain protocol.
    pub minimizer: Option<NuVector>,
    pub baseline_rate: f64,
}

impl KeyRateReport {
    /// Key bits per round before the entropy difference: `p_a / 2` with CAD
    /// (two rounds per block), `1` without.
    pub fn rate_scale(&self) -> f64 {
        if self.mask.is_none() {
            1.0
        } else {
            0.5 * self.p_accept
        }
    }

    pub fn rate_clamped(&self) -> f64 {
        self.rate.max(0.0)
    }
}

/// Full report for a nonzero mask.
pub fn key_rate(d: &ErrorDistribution, mask: CadMask) -> Result<KeyRateReport> {
    key_rate_with(d, mask, &OptimizerConfig::default())
}

pub fn key_rate_with(
    d: &ErrorDistribution,
    mask: CadMask,
    cfg: &OptimizerConfig,
) -> Result<KeyRateReport> {
    check_mask(d, mask)?;
    if mask.is_none() {
        return Err(ScadError::Infeasible(
            "mask 0 is the plain protocol; use no_cad_report".into(),
        ));
    }
    let p_a = p_accept(d, mask)?;
    let (entropy_bound, nu) = entropy_bound_with(d, mask, cfg)?;
    let post_cad_errors = (0..d.parties())
        .map(|j| post_cad_error(d, mask, j))
        .collect::<Result<Vec<_>>>()?;
    let leak = leak_ec(&post_cad_errors)?;
    Ok(KeyRateReport {
        mask,
        p_accept: p_a,
        entropy_bound,
        post_cad_errors,
        leak_ec: leak,
        rate: 0.5 * p_a * (entropy_bound - leak),
        minimizer: Some(nu),
        baseline_rate: no_cad_rate(d),
    })
}

/// Report for the plain protocol, expressed in the same fields: every round
/// is kept, the entropy term is `1 − h(Q_X)`.
pub fn no_cad_report(d: &ErrorDistribution) -> KeyRateReport {
    let post = d.marginals();
    let leak = post.iter().map(|&q| h(q)).fold(0.0, f64::max);
    let entropy_bound = 1.0 - h(d.qx().min(1.0));
    let rate = no_cad_rate(d);
    KeyRateReport {
        mask: CadMask::none(d.parties()),
        p_accept: 1.0,
        entropy_bound,
        post_cad_errors: post,
        leak_ec: leak,
        rate,
        minimizer: None,
        baseline_rate: rate,
    }
}

/// Report for any mask, routing the zero mask to the plain protocol.
pub fn report_for(
    d: &ErrorDistribution,
    mask: CadMask,
    cfg: &OptimizerConfig,
) -> Result<KeyRateReport> {
    if mask.is_none() {
        check_mask(d, mask)?;
        Ok(no_cad_report(d))
    } else {
        key_rate_with(d, mask, cfg)
    }
}

/// Rates differing by less than this count as tied.
const TIE_TOL: f64 = 1e-10;

/// Best of all `2^p` masks, preferring fewer CAD parties, then the lower
/// mask value, among (near-)ties.
pub fn best_mask(d: &ErrorDistribution) -> Result<(CadMask, KeyRateReport)> {
    best_mask_with(d, &OptimizerConfig::default())
}

pub fn best_mask_with(
    d: &ErrorDistribution,
    cfg: &OptimizerConfig,
) -> Result<(CadMask, KeyRateReport)> {
    let mut masks: Vec<CadMask> = CadMask::all_masks(d.parties())?.collect();
    masks.sort_by_key(|m| (m.pattern().popcount(), m.pattern().value()));
    let reports = masks
        .par_iter()
        .map(|&m| match report_for(d, m, cfg) {
            Err(ScadError::DegenerateAcceptance) => Ok(None),
            other => other.map(Some),
        })
        .collect::<Result<Vec<_>>>()?;
    let mut best: Option<KeyRateReport> = None;
    for r in reports.into_iter().flatten() {
        match &best {
            Some(b) if r.rate <= b.rate + TIE_TOL => {}
            _ => best = Some(r),
        }
    }
    let best = best.expect("mask 0 always yields a report");
    Ok((best.mask, best))
}
