//! Star-network noise: per-Bob bit-flip rates and the resulting
//! distribution over error patterns.

use crate::bits::{check_width, enumerate_patterns, BitPattern};
use crate::error::{Result, ScadError};

const NORMALIZATION_TOL: f64 = 1e-9;

/// Per-Bob link noise `Q_AB_i` plus the phase error rate `Q_X`.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseScenario {
    link_noise: Vec<f64>,
    qx: f64,
}

impl NoiseScenario {
    pub fn new(link_noise: Vec<f64>, qx: f64) -> Result<Self> {
        if link_noise.len() < 2 {
            return Err(ScadError::PartyCount(link_noise.len()));
        }
        check_width(link_noise.len())?;
        for &q in &link_noise {
            if !(0.0..0.5).contains(&q) {
                return Err(ScadError::Domain {
                    what: "link noise",
                    value: q,
                    range: "[0, 0.5)",
                });
            }
        }
        if !(0.0..=0.5).contains(&qx) {
            return Err(ScadError::Domain {
                what: "phase error rate",
                value: qx,
                range: "[0, 0.5]",
            });
        }
        Ok(Self { link_noise, qx })
    }

    /// Every Bob at noise `q`, with `Q_X = q`.
    pub fn homogeneous(p: usize, q: f64) -> Result<Self> {
        Self::new(vec![q; p], q)
    }

    pub fn parties(&self) -> usize {
        self.link_noise.len()
    }

    pub fn link_noise(&self) -> &[f64] {
        &self.link_noise
    }

    pub fn qx(&self) -> f64 {
        self.qx
    }
}

/// Probability `Q^Z_Δ` of every Bob error pattern, stored densely over all
/// `2^p` patterns, together with the phase error rate.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorDistribution {
    p: usize,
    probs: Vec<f64>,
    qx: f64,
}

impl ErrorDistribution {
    /// Independent-link product distribution.
    pub fn from_scenario(s: &NoiseScenario) -> Self {
        let p = s.parties();
        let probs = enumerate_patterns(p)
            .expect("scenario width already validated")
            .map(|delta| {
                s.link_noise
                    .iter()
                    .enumerate()
                    .map(|(i, &q)| if delta.bit(i) { q } else { 1.0 - q })
                    .product()
            })
            .collect();
        Self { p, probs, qx: s.qx }
    }

    /// Builds a distribution from explicit pattern probabilities; patterns
    /// not listed get probability zero.
    pub fn direct<I>(p: usize, entries: I, qx: f64) -> Result<Self>
    where
        I: IntoIterator<Item = (BitPattern, f64)>,
    {
        check_width(p)?;
        let mut probs = vec![0.0; 1 << p];
        for (delta, prob) in entries {
            if delta.width() != p {
                return Err(ScadError::Width {
                    expected: p,
                    got: delta.width(),
                });
            }
            probs[delta.value() as usize] += prob;
        }
        Self::from_dense(p, probs, qx)
    }

    /// Dense constructor; `probs[v]` is the probability of the pattern with value `v`.
    pub fn from_dense(p: usize, probs: Vec<f64>, qx: f64) -> Result<Self> {
        check_width(p)?;
        if probs.len() != 1 << p {
            return Err(ScadError::Width {
                expected: 1 << p,
                got: probs.len(),
            });
        }
        for (v, &q) in probs.iter().enumerate() {
            if q < 0.0 || q.is_nan() {
                return Err(ScadError::Negative {
                    pattern: BitPattern::new(v as u32, p)?.to_string(),
                    value: q,
                });
            }
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > NORMALIZATION_TOL {
            return Err(ScadError::NotNormalized(total));
        }
        if !(0.0..=1.0).contains(&qx) {
            return Err(ScadError::Domain {
                what: "phase error rate",
                value: qx,
                range: "[0, 1]",
            });
        }
        Ok(Self { p, probs, qx })
    }

    pub fn parties(&self) -> usize {
        self.p
    }

    pub fn qx(&self) -> f64 {
        self.qx
    }

    /// Same bit-error statistics with a different phase error rate.
    pub fn with_qx(&self, qx: f64) -> Result<Self> {
        Self::from_dense(self.p, self.probs.clone(), qx)
    }

    #[inline]
    pub fn prob(&self, delta: BitPattern) -> f64 {
        self.probs[delta.value() as usize]
    }

    /// Dense probabilities indexed by pattern value.
    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// Bit error rate `Q_AB_j` between Alice and Bob `bob` (zero based).
    pub fn marginal_link_error(&self, bob: usize) -> Result<f64> {
        if bob >= self.p {
            return Err(ScadError::Index {
                index: bob,
                len: self.p,
            });
        }
        let shift = self.p - 1 - bob;
        Ok(self
            .probs
            .iter()
            .enumerate()
            .filter(|(v, _)| (v >> shift) & 1 == 1)
            .map(|(_, q)| q)
            .sum())
    }

    pub fn marginals(&self) -> Vec<f64> {
        (0..self.p)
            .map(|j| self.marginal_link_error(j).expect("index in range"))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pat(s: &str) -> BitPattern {
        s.parse().unwrap()
    }

    #[test]
    fn noiseless_is_point_mass() {
        let d = ErrorDistribution::from_scenario(&NoiseScenario::new(vec![0.0, 0.0], 0.0).unwrap());
        assert_eq!(d.probs(), &[1.0, 0.0, 0.0, 0.0]);
        assert_eq!(d.marginals(), vec![0.0, 0.0]);
    }

    #[test]
    fn product_values_two_bobs() {
        let d = ErrorDistribution::from_scenario(&NoiseScenario::new(vec![0.1, 0.1], 0.1).unwrap());
        let expect = [0.81, 0.09, 0.09, 0.01];
        for (got, want) in d.probs().iter().zip(expect) {
            assert!((got - want).abs() < 1e-15);
        }
        assert!((d.probs().iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert!((d.marginal_link_error(0).unwrap() - 0.1).abs() < 1e-15);
    }

    #[test]
    fn homogeneous_depends_on_weight_only() {
        let d = ErrorDistribution::from_scenario(&NoiseScenario::homogeneous(3, 0.07).unwrap());
        for a in enumerate_patterns(3).unwrap() {
            for b in enumerate_patterns(3).unwrap() {
                if a.popcount() == b.popcount() {
                    assert!((d.prob(a) - d.prob(b)).abs() < 1e-16);
                }
            }
        }
    }

    #[test]
    fn graded_marginals() {
        let q = 0.02;
        let d = ErrorDistribution::from_scenario(
            &NoiseScenario::new(vec![q, 2.0 * q, 3.0 * q], q).unwrap(),
        );
        let m = d.marginals();
        for (got, want) in m.iter().zip([0.02, 0.04, 0.06]) {
            assert!((got - want).abs() < 1e-15);
        }
        assert!(d.marginal_link_error(3).is_err());
    }

    #[test]
    fn direct_distributions() {
        let d = ErrorDistribution::direct(2, [(pat("00"), 1.0)], 0.0).unwrap();
        assert_eq!(d.prob(pat("00")), 1.0);

        let d = ErrorDistribution::direct(2, [(pat("00"), 0.9), (pat("11"), 0.1)], 0.05).unwrap();
        assert!((d.marginal_link_error(0).unwrap() - 0.1).abs() < 1e-15);
        assert!((d.marginal_link_error(1).unwrap() - 0.1).abs() < 1e-15);

        let err = ErrorDistribution::direct(2, [(pat("00"), 0.8)], 0.0).unwrap_err();
        assert!(matches!(err, ScadError::NotNormalized(_)));
        let err = ErrorDistribution::direct(2, [(pat("00"), 1.1), (pat("01"), -0.1)], 0.0);
        assert!(matches!(err, Err(ScadError::Negative { .. })));
        assert!(ErrorDistribution::direct(2, [(pat("000"), 1.0)], 0.0).is_err());
    }

    #[test]
    fn scenario_validation() {
        assert!(NoiseScenario::new(vec![0.1], 0.1).is_err());
        assert!(NoiseScenario::new(vec![0.1, 0.5], 0.1).is_err());
        assert!(NoiseScenario::new(vec![0.1, -0.1], 0.1).is_err());
        assert!(NoiseScenario::new(vec![0.1, 0.1], 0.6).is_err());
        assert!(NoiseScenario::new(vec![0.1, 0.1], 0.5).is_ok());
    }

    fn scenario() -> impl Strategy<Value = NoiseScenario> {
        (2usize..=7)
            .prop_flat_map(|p| (prop::collection::vec(0.0f64..0.4999, p), 0.0f64..=0.5))
            .prop_map(|(links, qx)| NoiseScenario::new(links, qx).unwrap())
    }

    proptest! {
        #[test]
        fn sums_to_one_and_round_trips(s in scenario()) {
            let d = ErrorDistribution::from_scenario(&s);
            prop_assert!((d.probs().iter().sum::<f64>() - 1.0).abs() < 1e-10);
            for (j, &q) in s.link_noise().iter().enumerate() {
                prop_assert!((d.marginal_link_error(j).unwrap() - q).abs() < 1e-12);
            }
        }

        #[test]
        fn permutation_equivariance(s in scenario(), seed in any::<u64>()) {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let p = s.parties();
            let mut perm: Vec<usize> = (0..p).collect();
            perm.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            let links: Vec<f64> = perm.iter().map(|&i| s.link_noise()[i]).collect();
            let permuted = NoiseScenario::new(links, s.qx()).unwrap();
            let d = ErrorDistribution::from_scenario(&s);
            let dp = ErrorDistribution::from_scenario(&permuted);
            for delta in enumerate_patterns(p).unwrap() {
                prop_assert!((dp.prob(delta) - d.prob(delta.permute(&perm))).abs() < 1e-15);
            }
        }
    }
}
