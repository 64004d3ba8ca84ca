//! Exact dense-state checks at small party counts.
//!
//! Builds GHZ states and GHZ-diagonal collective attacks, runs the coherent
//! (delayed-measurement) S-CAD circuit on two blocks, and computes Eve's
//! exact uncertainty `H(A|EM)` on the accepted raw key bit.

mod attack;
mod circuit;
mod density;
mod state;

pub use attack::{attack_state, ghz_state, AttackState};
pub use circuit::{cad_input, delayed_cad_circuit, delayed_cad_closed_form};
pub use density::{conditional_entropy, DensityState, EIGEN_FLOOR, PSD_SLACK};
pub use state::{PureState, Register};

use crate::entropy::h;
use crate::error::{Result, ScadError};
use crate::keyrate::CadMask;
use state::Layout;

/// Largest party count the dense oracle accepts.
pub const MAX_ORACLE_PARTIES: usize = 3;

const NORM_TOL: f64 = 1e-10;

/// Accepted-block state `ρ_AEM` of Alice's Left key bit, Eve's two
/// ancillas and Alice's parity message, together with the exact acceptance
/// probability. Registers are `A` (1), `E` (2p+2, Left then Right) and `M` (1).
pub fn conditioned_rho_aem(a: &AttackState, mask: CadMask) -> Result<(DensityState, f64)> {
    let p = a.parties();
    if p > MAX_ORACLE_PARTIES {
        return Err(ScadError::PartyCount(p));
    }
    if mask.width() != p {
        return Err(ScadError::Width {
            expected: p,
            got: mask.width(),
        });
    }
    let psi = attack_state(a)?;
    let out = delayed_cad_circuit(&cad_input(&psi, &psi)?, mask)?;
    let (p_acc, post) = out
        .project("rej", 0)
        .map_err(|_| ScadError::DegenerateAcceptance)?;
    let rho = post.reduced(&["AL", "EL", "ER", "M"])?;
    let layout = Layout::contiguous(&[("A", 1), ("E", 2 * p + 2), ("M", 1)])?;
    let rho = DensityState::from_parts(rho.matrix().clone(), layout)
        .dephase("A")?
        .dephase("M")?;
    Ok((rho, p_acc))
}

/// Exact `H(A|EM)` after accepted S-CAD, and the acceptance probability.
pub fn exact_entropy(a: &AttackState, mask: CadMask) -> Result<(f64, f64)> {
    let (rho, p_acc) = conditioned_rho_aem(a, mask)?;
    Ok((conditional_entropy(&rho, "A", &["E", "M"])?, p_acc))
}

/// `H(A|E, M=m)` for both messages.
pub fn message_entropies(rho: &DensityState) -> Result<[f64; 2]> {
    let mut out = [0.0; 2];
    for (m, slot) in out.iter_mut().enumerate() {
        let (_, cond) = rho.condition("M", m)?;
        *slot = conditional_entropy(&cond, "A", &["E"])?;
    }
    Ok(out)
}

/// Lower bound on `H(A|E)` for a state `(1/M) Σ_a |a⟩⟨a| ⊗ Σ_i |F_i^a⟩⟨F_i^a|`
/// given, per `i`, the norms `⟨F_i^0|F_i^0⟩`, `⟨F_i^1|F_i^1⟩` and
/// `Re⟨F_i^0|F_i^1⟩`.
pub fn overlap_bound(pairs: &[(f64, f64, f64)], norm: f64) -> Result<f64> {
    let total: f64 = pairs.iter().map(|&(a, b, _)| a + b).sum();
    if (total - norm).abs() > NORM_TOL {
        return Err(ScadError::NotNormalized(total / norm));
    }
    let mut bound = 0.0;
    for &(n0, n1, re) in pairs {
        if n0 < 0.0 || n1 < 0.0 {
            return Err(ScadError::Domain {
                what: "squared norm",
                value: n0.min(n1),
                range: "[0, inf)",
            });
        }
        if re.abs() > (n0 * n1).sqrt() * (1.0 + 1e-12) + 1e-300 {
            return Err(ScadError::Domain {
                what: "overlap",
                value: re,
                range: "|Re<F0|F1>| <= sqrt(<F0|F0><F1|F1>)",
            });
        }
        if n0 == 0.0 || n1 == 0.0 {
            continue;
        }
        let s = n0 + n1;
        let nu = 0.5 + ((n0 - n1).powi(2) + 4.0 * re * re).sqrt() / (2.0 * s);
        bound += s / norm * (h(n0 / s) - h(nu.min(1.0)));
    }
    Ok(bound)
}
