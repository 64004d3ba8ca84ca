//! Pass/fail checks behind `scad validate` and `scad oracle`.
//!
//! Monte Carlo checks compare each seed's estimate with the analytic value
//! at 3σ, where σ is the binomial standard error under the analytic value.
//! A check passes when at most `allowed_misses(seeds)` seeds fall outside.
//! Oracle checks run the dense-state computation for `p ≤ 3`.

use std::fmt::Write as _;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Deserialize;
use toml::Spanned;

use crate::bits::{enumerate_patterns, BitPattern};
use crate::error::{Result, ScadError};
use crate::keyrate::{
    best_mask_with, entropy_bound_with, expected_post_cad_error, key_rate_with, p_accept,
    post_cad_error, CadMask, OptimizerConfig,
};
use crate::noise::ErrorDistribution;
use crate::oracle::{
    cad_input, conditional_entropy, conditioned_rho_aem, delayed_cad_circuit,
    delayed_cad_closed_form, ghz_state, message_entropies, AttackState, MAX_ORACLE_PARTIES,
};
use crate::scenario::{Diag, ScenarioSpec};
use crate::sim::{run_sim, SimConfig};

pub const SIGMAS: f64 = 3.0;
pub const FIDELITY_TOL: f64 = 1e-10;
pub const ENTROPY_TOL: f64 = 1e-9;
pub const P_ACCEPT_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub detail: String,
    pub pass: bool,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Report {
    pub title: String,
    pub checks: Vec<Check>,
    pub notices: Vec<String>,
}

impl Report {
    fn push(&mut self, name: String, pass: bool, detail: String) {
        self.checks.push(Check { name, detail, pass });
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn failures(&self) -> usize {
        self.checks.iter().filter(|c| !c.pass).count()
    }

    pub fn render(&self) -> String {
        let mut out = format!("# {}\n", self.title);
        for n in &self.notices {
            let _ = writeln!(out, "notice: {n}");
        }
        let width = self.checks.iter().map(|c| c.name.len()).max().unwrap_or(0);
        for c in &self.checks {
            let tag = if c.pass { "PASS" } else { "FAIL" };
            let _ = writeln!(out, "{tag}  {:width$}  {}", c.name, c.detail);
        }
        let _ = writeln!(
            out,
            "{} checks, {} failed",
            self.checks.len(),
            self.failures()
        );
        out
    }
}

/// Seeds allowed outside 3σ: 3% of the seeds, but at least one so that
/// short runs are not dominated by the 0.27% two-sided tail.
pub fn allowed_misses(seeds: usize) -> usize {
    (seeds * 3 / 100).max(1).min(seeds.saturating_sub(1))
}

#[derive(Debug, Clone)]
pub struct ValidateOptions {
    pub rounds: u64,
    pub seeds: usize,
    pub seed: u64,
    /// Random attacks per mask for the oracle soundness check.
    pub attacks: usize,
    /// Added to every analytic value; a nonzero value must make the run fail.
    pub perturb: f64,
    pub optimizer: OptimizerConfig,
}

impl Default for ValidateOptions {
    fn default() -> Self {
        Self {
            rounds: 2_000_000,
            seeds: 10,
            seed: 1,
            attacks: 10,
            perturb: 0.0,
            optimizer: OptimizerConfig::default(),
        }
    }
}

/// Count of seeds whose estimate lies within `SIGMAS·σ` of `expected`.
fn within(estimates: &[(f64, f64)], expected: f64) -> usize {
    estimates
        .iter()
        .filter(|&&(hat, n)| {
            let sigma = (expected * (1.0 - expected) / n).max(0.0).sqrt();
            (hat - expected).abs() <= SIGMAS * sigma
        })
        .count()
}

fn mc_checks(
    report: &mut Report,
    spec: &ScenarioSpec,
    q: f64,
    mask: CadMask,
    opts: &ValidateOptions,
) -> Result<()> {
    let scenario = spec.scenario_at(q)?;
    let d = ErrorDistribution::from_scenario(&scenario);
    let p = d.parties();
    let configs = (0..opts.seeds)
        .map(|i| {
            SimConfig::new(
                scenario.clone(),
                mask,
                opts.rounds,
                opts.seed.wrapping_add(i as u64),
            )
        })
        .collect::<Result<Vec<_>>>()?;
    let runs: Vec<_> = configs.par_iter().map(run_sim).collect();
    let need = opts.seeds - allowed_misses(opts.seeds);

    let pa = (p_accept(&d, mask)? + opts.perturb).clamp(0.0, 1.0);
    let est: Vec<(f64, f64)> = runs
        .iter()
        .map(|r| (r.p_accept_hat, r.blocks_total as f64))
        .collect();
    let ok = within(&est, pa);
    let mean = est.iter().map(|e| e.0).sum::<f64>() / est.len() as f64;
    report.push(
        format!("mc p_accept Q={q} mask={mask}"),
        ok >= need,
        format!(
            "{ok}/{} seeds within 3σ of {pa:.6} (mean {mean:.6})",
            opts.seeds
        ),
    );

    for j in 0..p {
        let exact = (expected_post_cad_error(&d, mask, j)? + opts.perturb).clamp(0.0, 1.0);
        let est: Vec<(f64, f64)> = runs
            .iter()
            .filter_map(|r| r.post_error_hat[j].map(|e| (e, r.blocks_accepted as f64)))
            .collect();
        let ok = within(&est, exact);
        let mean = est.iter().map(|e| e.0).sum::<f64>() / est.len().max(1) as f64;
        let formula = if mask.is_none() {
            exact
        } else {
            post_cad_error(&d, mask, j)?
        };
        report.push(
            format!("mc post_error B{} Q={q} mask={mask}", j + 1),
            ok >= need,
            format!(
                "{ok}/{} seeds within 3σ of {exact:.6} (mean {mean:.6}; rate formula uses {formula:.6})",
                opts.seeds
            ),
        );
    }
    Ok(())
}

/// Exact-versus-bound row for one attack.
fn soundness(
    report: &mut Report,
    label: String,
    a: &AttackState,
    mask: CadMask,
    opts: &ValidateOptions,
) -> Result<()> {
    let d = a.error_distribution()?;
    let (bound, _) = entropy_bound_with(&d, mask, &opts.optimizer)?;
    let analytic = p_accept(&d, mask)? + opts.perturb;
    let (rho, p_acc) = conditioned_rho_aem(a, mask)?;
    let exact = conditional_entropy(&rho, "A", &["E", "M"])?;
    let margin = exact - (bound + opts.perturb);
    let dp = (p_acc - analytic).abs();
    report.push(
        label,
        margin >= -ENTROPY_TOL && dp <= P_ACCEPT_TOL,
        format!("H(A|EM) {exact:.10} - bound = {margin:.3e}; |Δp_accept| = {dp:.1e}"),
    );
    Ok(())
}

fn oracle_checks(
    report: &mut Report,
    spec: &ScenarioSpec,
    points: &[f64],
    masks: &[CadMask],
    opts: &ValidateOptions,
) -> Result<()> {
    let p = spec.parties();
    if p > MAX_ORACLE_PARTIES {
        report.notices.push(format!(
            "oracle checks skipped: p = {p} exceeds {MAX_ORACLE_PARTIES}"
        ));
        return Ok(());
    }
    for &mask in masks.iter().filter(|m| !m.is_none()) {
        for &q in points {
            let d = ErrorDistribution::from_scenario(&spec.scenario_at(q)?);
            let r = match key_rate_with(&d, mask, &opts.optimizer) {
                Ok(r) => r,
                Err(ScadError::DegenerateAcceptance) => continue,
                Err(e) => return Err(e),
            };
            let nu = r.minimizer.expect("nonzero mask has a minimizer");
            let a = AttackState::from_phase_weights(&d, &nu)?;
            soundness(
                report,
                format!("oracle minimizer Q={q} mask={mask}"),
                &a,
                mask,
                opts,
            )?;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        for k in 0..opts.attacks {
            let a = AttackState::random(p, &mut rng)?;
            soundness(
                report,
                format!("oracle random #{k} mask={mask}"),
                &a,
                mask,
                opts,
            )?;
        }
    }
    Ok(())
}

/// Monte Carlo and oracle checks at the scenario's validation points, for every
/// listed mask (`best` resolved per point).
pub fn run_validate(spec: &ScenarioSpec, opts: &ValidateOptions) -> Result<Report> {
    if opts.seeds == 0 {
        return Err(ScadError::Domain {
            what: "seed count",
            value: 0.0,
            range: ">= 1",
        });
    }
    let mut report = Report {
        title: format!(
            "validate {} ({} rounds x {} seeds)",
            spec.name, opts.rounds, opts.seeds
        ),
        ..Report::default()
    };
    let points = spec.validation_points();
    let mut all_masks = spec.explicit_masks();
    for &q in &points {
        let mut masks = spec.explicit_masks();
        if spec.wants_best() {
            let d = ErrorDistribution::from_scenario(&spec.scenario_at(q)?);
            let (m, _) = best_mask_with(&d, &opts.optimizer)?;
            if !masks.contains(&m) {
                masks.push(m);
                masks.sort();
            }
            if !all_masks.contains(&m) {
                all_masks.push(m);
            }
        }
        for m in masks {
            mc_checks(&mut report, spec, q, m, opts)?;
        }
    }
    all_masks.sort();
    oracle_checks(&mut report, spec, &points, &all_masks, opts)?;
    Ok(report)
}

/// Smallest fidelity between the circuit output and the closed form over
/// every basis input `|g(x;y)⟩|g(z;w)⟩`.
pub fn circuit_min_fidelity(mask: CadMask) -> Result<f64> {
    let p = mask.width();
    if p > MAX_ORACLE_PARTIES {
        return Err(ScadError::PartyCount(p));
    }
    let pats: Vec<BitPattern> = enumerate_patterns(p)?.collect();
    let mut worst: f64 = 1.0;
    for &x in &pats {
        for &z in &pats {
            for y in [false, true] {
                for w in [false, true] {
                    let input = cad_input(&ghz_state(x, y), &ghz_state(z, w))?;
                    let out = delayed_cad_circuit(&input, mask)?;
                    let want = delayed_cad_closed_form(x, y, z, w, mask)?;
                    worst = worst.min(want.overlap(&out)?);
                }
            }
        }
    }
    Ok(worst)
}

/// Explicit attack with the masks to check it against.
#[derive(Debug, Clone, PartialEq)]
pub struct AttackFile {
    pub attack: AttackState,
    pub masks: Vec<CadMask>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAttack {
    parties: Spanned<usize>,
    masks: Spanned<Vec<Spanned<String>>>,
    lambda: Spanned<std::collections::BTreeMap<String, Spanned<[f64; 2]>>>,
}

impl AttackFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| ScadError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text, path)
    }

    /// Format:
    ///
    /// ```toml
    /// parties = 2
    /// masks = ["11", "10"]
    ///
    /// [lambda]            # "Δ" = [λ_Δ^0, λ_Δ^1]; missing patterns are 0
    /// "00" = [0.85, 0.05]
    /// "11" = [0.06, 0.04]
    /// ```
    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let diag = Diag { path, text };
        let raw: RawAttack = toml::from_str(text).map_err(|e| ScadError::Config {
            path: path.to_path_buf(),
            line: e.span().map_or(0, |s| diag.line(s)),
            msg: e.message().trim().to_string(),
        })?;
        let p = *raw.parties.get_ref();
        if !(1..=MAX_ORACLE_PARTIES).contains(&p) {
            return Err(diag.err(
                raw.parties.span(),
                format!("parties = {p}; the oracle handles 1 to {MAX_ORACLE_PARTIES}"),
            ));
        }
        let mut masks = Vec::new();
        for m in raw.masks.get_ref() {
            let mask = CadMask::parse(m.get_ref().trim(), p).map_err(|_| {
                diag.err(
                    m.span(),
                    format!("mask {:?} is not a {p}-bit string", m.get_ref()),
                )
            })?;
            masks.push(mask);
        }
        if masks.is_empty() {
            return Err(diag.err(raw.masks.span(), "mask list is empty"));
        }
        let mut lambdas = vec![0.0; 2 << p];
        for (key, v) in raw.lambda.get_ref() {
            let delta = BitPattern::parse(key, p).map_err(|_| {
                diag.err(v.span(), format!("pattern {key:?} is not a {p}-bit string"))
            })?;
            let [l0, l1] = *v.get_ref();
            if !(l0 >= 0.0 && l1 >= 0.0) {
                return Err(diag.err(v.span(), format!("weights for {key:?} must be nonnegative")));
            }
            lambdas[2 * delta.value() as usize] = l0;
            lambdas[2 * delta.value() as usize + 1] = l1;
        }
        let attack =
            AttackState::new(p, lambdas).map_err(|e| diag.err(raw.lambda.span(), e.to_string()))?;
        Ok(Self { attack, masks })
    }
}

/// Circuit identity, exact acceptance, soundness of the bound and message
/// symmetry for one attack.
pub fn oracle_check(a: &AttackState, masks: &[CadMask], opts: &ValidateOptions) -> Result<Report> {
    let mut report = Report {
        title: format!("oracle p={}", a.parties()),
        ..Report::default()
    };
    for &mask in masks {
        if mask.width() != a.parties() {
            return Err(ScadError::Width {
                expected: a.parties(),
                got: mask.width(),
            });
        }
        let f = circuit_min_fidelity(mask)?;
        report.push(
            format!("circuit vs closed form mask={mask}"),
            f >= 1.0 - FIDELITY_TOL,
            format!("min fidelity {f:.15}"),
        );
        if mask.is_none() {
            report.notices.push(format!(
                "mask {mask} is the plain protocol; entropy checks skipped"
            ));
            continue;
        }
        soundness(&mut report, format!("soundness mask={mask}"), a, mask, opts)?;
        let (rho, _) = conditioned_rho_aem(a, mask)?;
        let [h0, h1] = message_entropies(&rho)?;
        report.push(
            format!("message symmetry mask={mask}"),
            (h0 - h1).abs() <= ENTROPY_TOL,
            format!("H(A|E,M=0) {h0:.10}, H(A|E,M=1) {h1:.10}"),
        );
    }
    Ok(report)
}
