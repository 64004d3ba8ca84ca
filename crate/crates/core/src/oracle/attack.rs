use num_complex::Complex64;
use rand::Rng;

use super::state::{Layout, PureState};
use crate::bits::{check_width, enumerate_patterns, BitPattern};
use crate::error::{Result, ScadError};
use crate::keyrate::{p_accept, CadMask, NuVector};
use crate::noise::ErrorDistribution;

const SUM_TOL: f64 = 1e-10;

/// `(|0,x⟩ + (−1)^y |1,x̄⟩)/√2` with registers `A` (1 qubit) and `B` (p qubits).
pub fn ghz_state(x: BitPattern, y: bool) -> PureState {
    let p = x.width();
    let layout = Layout::contiguous(&[("A", 1), ("B", p)]).expect("valid layout");
    let mut amps = vec![Complex64::new(0.0, 0.0); 2 << p];
    let s = std::f64::consts::FRAC_1_SQRT_2;
    amps[x.value() as usize] = Complex64::new(s, 0.0);
    amps[(1 << p) | x.complement().value() as usize] = Complex64::new(if y { -s } else { s }, 0.0);
    PureState::from_parts(amps, layout)
}

/// Collective attack diagonal in the GHZ basis: weight `λ_Δ^y` on each
/// GHZ state `g(Δ; y)`, each paired with its own orthonormal Eve state.
#[derive(Debug, Clone, PartialEq)]
pub struct AttackState {
    p: usize,
    /// Indexed by `2·Δ + y`.
    lambdas: Vec<f64>,
}

impl AttackState {
    pub fn new(p: usize, lambdas: Vec<f64>) -> Result<Self> {
        check_width(p)?;
        if lambdas.len() != 2 << p {
            return Err(ScadError::Width {
                expected: 2 << p,
                got: lambdas.len(),
            });
        }
        for (i, &l) in lambdas.iter().enumerate() {
            if l < 0.0 || l.is_nan() {
                return Err(ScadError::Negative {
                    pattern: format!("{}/{}", BitPattern::new((i >> 1) as u32, p)?, i & 1),
                    value: l,
                });
            }
        }
        let total: f64 = lambdas.iter().sum();
        if (total - 1.0).abs() > SUM_TOL {
            return Err(ScadError::NotNormalized(total));
        }
        Ok(Self { p, lambdas })
    }

    /// Splits each `Q^Z_Δ` into `λ^0 = Q − ν` and `λ^1 = ν`.
    pub fn from_phase_weights(d: &ErrorDistribution, nu: &NuVector) -> Result<Self> {
        nu.check_feasible(d, SUM_TOL)?;
        let lambdas = d
            .probs()
            .iter()
            .zip(nu.values())
            .flat_map(|(&q, &v)| [(q - v).max(0.0), v.clamp(0.0, q)])
            .collect();
        Self::new(d.parties(), lambdas)
    }

    /// Random attack: a flat Dirichlet draw mixed with the noiseless point
    /// by a uniform weight, so both low and high noise levels appear.
    pub fn random<R: Rng + ?Sized>(p: usize, rng: &mut R) -> Result<Self> {
        check_width(p)?;
        let mut l: Vec<f64> = (0..2 << p)
            .map(|_| -(1.0 - rng.random::<f64>()).ln())
            .collect();
        let total: f64 = l.iter().sum();
        let t = rng.random::<f64>();
        l.iter_mut().for_each(|x| *x *= (1.0 - t) / total);
        l[0] += t;
        let total: f64 = l.iter().sum();
        l.iter_mut().for_each(|x| *x /= total);
        Self::new(p, l)
    }

    pub fn parties(&self) -> usize {
        self.p
    }

    pub fn lambdas(&self) -> &[f64] {
        &self.lambdas
    }

    pub fn lambda(&self, delta: BitPattern, y: bool) -> f64 {
        self.lambdas[2 * delta.value() as usize + usize::from(y)]
    }

    /// Observed statistics: `Q^Z_Δ = λ_Δ^0 + λ_Δ^1`, `Q_X = Σ_Δ λ_Δ^1`.
    pub fn error_distribution(&self) -> Result<ErrorDistribution> {
        let probs = self.lambdas.chunks_exact(2).map(|c| c[0] + c[1]).collect();
        let qx = self.lambdas.iter().skip(1).step_by(2).sum::<f64>().min(1.0);
        ErrorDistribution::from_dense(self.p, probs, qx)
    }

    /// `ν_Δ = λ_Δ^1`.
    pub fn phase_weights(&self) -> NuVector {
        let nu = self.lambdas.iter().skip(1).step_by(2).copied().collect();
        NuVector::from_dense(self.p, nu).expect("width matches")
    }

    /// Norms and overlap `(⟨F⁰|F⁰⟩, ⟨F¹|F¹⟩, Re⟨F⁰|F¹⟩)` of Eve's states for
    /// every accepted `(x, z)` after a two-round block, with normalization
    /// `2·p_a`.
    pub fn overlap_pairs(&self, mask: CadMask) -> Result<(Vec<(f64, f64, f64)>, f64)> {
        let d = self.error_distribution()?;
        let p_a = p_accept(&d, mask)?;
        let c = mask.pattern();
        let mut pairs = Vec::new();
        for x in enumerate_patterns(self.p)? {
            for z in enumerate_patterns(self.p)? {
                if x.xor(z).and(c).value() != 0 {
                    continue;
                }
                let n = d.prob(x) * d.prob(z);
                let re = (self.lambda(x, false) - self.lambda(x, true))
                    * (self.lambda(z, false) - self.lambda(z, true));
                pairs.push((n, n, re));
            }
        }
        Ok((pairs, 2.0 * p_a))
    }
}

/// `Σ_{Δ,y} √λ_Δ^y |g(Δ; y)⟩ ⊗ |e_{Δ,y}⟩` with registers `A`, `B` and
/// `E` (p+1 qubits, basis index `2·Δ + y`).
pub fn attack_state(a: &AttackState) -> Result<PureState> {
    let p = a.p;
    let layout = Layout::contiguous(&[("A", 1), ("B", p), ("E", p + 1)])?;
    let e_bits = p + 1;
    let mut amps = vec![Complex64::new(0.0, 0.0); 1 << (2 * p + 2)];
    let s = std::f64::consts::FRAC_1_SQRT_2;
    for (e, &l) in a.lambdas.iter().enumerate() {
        if l == 0.0 {
            continue;
        }
        let x = e >> 1;
        let sign = if e & 1 == 1 { -1.0 } else { 1.0 };
        let xbar = !x & ((1 << p) - 1);
        let amp = l.sqrt() * s;
        amps[(x << e_bits) | e] += Complex64::new(amp, 0.0);
        amps[(((1 << p) | xbar) << e_bits) | e] += Complex64::new(sign * amp, 0.0);
    }
    let state = PureState::from_parts(amps, layout);
    let norm = state.norm_sqr();
    if (norm - 1.0).abs() > SUM_TOL {
        return Err(ScadError::NotNormalized(norm));
    }
    Ok(state)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn bits(s: &str) -> BitPattern {
        BitPattern::parse(s, s.len()).unwrap()
    }

    #[test]
    fn ghz_examples() {
        let g = ghz_state(bits("101"), true);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        for (i, a) in g.amplitudes().iter().enumerate() {
            let want = match i {
                0b0101 => s,
                0b1010 => -s,
                _ => 0.0,
            };
            assert_eq!(a.re, want, "index {i:04b}");
        }
        let bell = ghz_state(bits("0"), false);
        assert_eq!(bell.amplitudes()[0].re, s);
        assert_eq!(bell.amplitudes()[3].re, s);
    }

    #[test]
    fn ghz_basis_is_orthonormal() {
        let p = 3;
        let all: Vec<PureState> = enumerate_patterns(p)
            .unwrap()
            .flat_map(|x| [ghz_state(x, false), ghz_state(x, true)])
            .collect();
        for (i, a) in all.iter().enumerate() {
            for (j, b) in all.iter().enumerate() {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((a.inner(b).unwrap().re - want).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn validates_weights() {
        assert!(AttackState::new(2, vec![0.25; 4]).is_err());
        assert!(AttackState::new(2, vec![0.2; 8]).is_err());
        let mut l = vec![0.0; 8];
        l[0] = 1.1;
        l[1] = -0.1;
        assert!(matches!(
            AttackState::new(2, l),
            Err(ScadError::Negative { .. })
        ));
    }

    #[test]
    fn noiseless_attack_is_product() {
        let mut l = vec![0.0; 8];
        l[0] = 1.0;
        let a = AttackState::new(2, l).unwrap();
        let psi = attack_state(&a).unwrap();
        let ghz = ghz_state(bits("00"), false);
        let e0 = PureState::basis(&[("E", 3, 0)]).unwrap();
        assert!((psi.overlap(&ghz.tensor(&e0).unwrap()).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn statistics_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let a = AttackState::random(2, &mut rng).unwrap();
        let d = a.error_distribution().unwrap();
        let b = AttackState::from_phase_weights(&d, &a.phase_weights()).unwrap();
        for (x, y) in a.lambdas().iter().zip(b.lambdas()) {
            assert!((x - y).abs() < 1e-15);
        }
        assert!((d.qx() - a.phase_weights().total()).abs() < 1e-15);
    }

    /// Projects the AB marginal onto each GHZ basis state.
    fn ghz_diagonal(a: &AttackState) -> Vec<f64> {
        let p = a.parties();
        let rho = attack_state(a).unwrap().reduced(&["A", "B"]).unwrap();
        let m = rho.matrix();
        let mut out = Vec::new();
        for x in enumerate_patterns(p).unwrap() {
            for y in [false, true] {
                let g = nalgebra::DVector::from_column_slice(ghz_state(x, y).amplitudes());
                out.push((g.adjoint() * m * &g)[(0, 0)].re);
            }
        }
        out
    }

    #[test]
    fn marginal_is_ghz_diagonal_with_weights() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..10 {
            let a = AttackState::random(2, &mut rng).unwrap();
            for (got, want) in ghz_diagonal(&a).iter().zip(a.lambdas()) {
                assert!((got - want).abs() < 1e-12);
            }
        }
        let uniform = AttackState::new(2, vec![0.125; 8]).unwrap();
        let rho = attack_state(&uniform)
            .unwrap()
            .reduced(&["A", "B"])
            .unwrap();
        for i in 0..8 {
            for j in 0..8 {
                let want = if i == j { 0.125 } else { 0.0 };
                assert!((rho.matrix()[(i, j)].re - want).abs() < 1e-15);
            }
        }
    }
}
