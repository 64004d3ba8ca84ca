//! Analysis toolkit for selective classical advantage distillation (S-CAD)
//! in GHZ-based quantum conference key agreement.
//!
//! * [`noise`] builds error-pattern distributions for star networks.
//! * [`keyrate`] evaluates acceptance probabilities, the entropy bound and
//!   the asymptotic key rate for any CAD on/off mask.
//! * [`sim`] is a seeded Monte Carlo run of the classical accept/reject rule.
//! * [`oracle`] is an exact dense-state check of the delayed-measurement
//!   circuit and of the entropy bound for explicit attacks.
//! * [`scenario`], [`sweep`] and [`validate`] drive the command-line tool.

pub mod bits;
pub mod entropy;
pub mod error;
pub mod keyrate;
pub mod noise;
pub mod oracle;
pub mod scenario;
pub mod sim;
pub mod sweep;
pub mod validate;

pub use bits::{enumerate_patterns, BitPattern};
pub use entropy::binary_entropy;
pub use error::{Result, ScadError};
pub use keyrate::{
    acceptance_set, best_mask, entropy_bound, entropy_objective, expected_post_cad_error, key_rate,
    leak_ec, no_cad_rate, p_accept, post_cad_error, tau, CadMask, KeyRateReport, NuVector,
    OptimizerConfig,
};
pub use noise::{ErrorDistribution, NoiseScenario};
