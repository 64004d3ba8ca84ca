//! Seeded Monte Carlo run of the classical S-CAD accept/reject rule on
//! raw keys drawn from the independent-link noise model.
//!
//! Only error patterns relative to Alice are sampled. Alice's own bits
//! never influence acceptance or disagreement counts.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::bits::BitPattern;
use crate::error::{Result, ScadError};
use crate::keyrate::CadMask;
use crate::noise::NoiseScenario;

/// Generator used by [`run_sim`], seeded with `ChaCha8Rng::seed_from_u64`.
pub const RNG_ALGORITHM: &str = "ChaCha8Rng(seed_from_u64)";

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub scenario: NoiseScenario,
    pub mask: CadMask,
    /// Number of GHZ rounds; two rounds form one block.
    pub rounds: u64,
    pub seed: u64,
}

impl SimConfig {
    pub fn new(scenario: NoiseScenario, mask: CadMask, rounds: u64, seed: u64) -> Result<Self> {
        if rounds < 2 || !rounds.is_multiple_of(2) {
            return Err(ScadError::Domain {
                what: "round count",
                value: rounds as f64,
                range: "even and >= 2",
            });
        }
        if mask.width() != scenario.parties() {
            return Err(ScadError::Width {
                expected: scenario.parties(),
                got: mask.width(),
            });
        }
        Ok(Self {
            scenario,
            mask,
            rounds,
            seed,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimResult {
    pub blocks_total: u64,
    pub blocks_accepted: u64,
    pub p_accept_hat: f64,
    /// Per-Bob disagreement rate with Alice on accepted Left bits; `None`
    /// when no block was accepted.
    pub post_error_hat: Vec<Option<f64>>,
    pub stderr_p_accept: f64,
    pub rng: &'static str,
}

/// Draws one round's error pattern: Bob `i` disagrees with Alice with
/// probability `Q_AB_i`, independently of the other Bobs.
pub fn sample_round<R: Rng + ?Sized>(s: &NoiseScenario, rng: &mut R) -> BitPattern {
    sample_flips(s.link_noise(), rng).expect("scenario width already validated")
}

/// Same draw for arbitrary per-Bob flip probabilities in `[0, 1]`.
pub fn sample_flips<R: Rng + ?Sized>(flip: &[f64], rng: &mut R) -> Result<BitPattern> {
    let value = flip.iter().fold(0u32, |acc, &q| {
        (acc << 1) | u32::from(rng.random::<f64>() < q)
    });
    BitPattern::new(value, flip.len())
}

/// Block acceptance: every CAD Bob sees the same error bit in both rounds.
#[inline]
pub fn accepts(left: BitPattern, right: BitPattern, mask: CadMask) -> bool {
    left.xor(right).and(mask.pattern()).value() == 0
}

/// Acceptance flag of each consecutive `(2k, 2k+1)` block.
pub fn accepted_blocks(rounds: &[BitPattern], mask: CadMask) -> Vec<bool> {
    rounds
        .chunks_exact(2)
        .map(|b| accepts(b[0], b[1], mask))
        .collect()
}

/// Pairs already permuted rounds into consecutive Left/Right blocks and
/// tallies acceptance and Left-bit disagreement.
pub fn distill(rounds: &[BitPattern], mask: CadMask) -> SimResult {
    let p = mask.width();
    let mut accepted = 0u64;
    let mut errors = vec![0u64; p];
    for block in rounds.chunks_exact(2) {
        let (left, right) = (block[0], block[1]);
        if !accepts(left, right, mask) {
            continue;
        }
        accepted += 1;
        for (j, e) in errors.iter_mut().enumerate() {
            *e += u64::from(left.bit(j));
        }
    }
    let total = (rounds.len() / 2) as u64;
    let p_hat = if total == 0 {
        0.0
    } else {
        accepted as f64 / total as f64
    };
    let stderr = if total == 0 {
        0.0
    } else {
        (p_hat * (1.0 - p_hat) / total as f64).sqrt()
    };
    let post_error_hat = errors
        .into_iter()
        .map(|e| (accepted > 0).then(|| e as f64 / accepted as f64))
        .collect();
    SimResult {
        blocks_total: total,
        blocks_accepted: accepted,
        p_accept_hat: p_hat,
        post_error_hat,
        stderr_p_accept: stderr,
        rng: RNG_ALGORITHM,
    }
}

/// Samples `rounds` error patterns, applies one global shuffle, then pairs
/// consecutive rounds. Deterministic in the config.
pub fn run_sim(c: &SimConfig) -> SimResult {
    let mut rng = ChaCha8Rng::seed_from_u64(c.seed);
    let mut rounds: Vec<BitPattern> = (0..c.rounds)
        .map(|_| sample_round(&c.scenario, &mut rng))
        .collect();
    rounds.shuffle(&mut rng);
    distill(&rounds, c.mask)
}
