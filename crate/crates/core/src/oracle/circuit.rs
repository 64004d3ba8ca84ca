use num_complex::Complex64;

use super::state::{Layout, PureState};
use crate::bits::BitPattern;
use crate::error::{Result, ScadError};
use crate::keyrate::CadMask;

/// Two blocks side by side with fresh `M` and `rej` ancillas. Every
/// register `X` of the left block becomes `XL`, of the right block `XR`.
/// Both blocks need `A` (1 qubit) and `B` registers of equal size.
pub fn cad_input(left: &PureState, right: &PureState) -> Result<PureState> {
    let p = left.qubits("B")?.len();
    if right.qubits("B")?.len() != p {
        return Err(ScadError::Width {
            expected: p,
            got: right.qubits("B")?.len(),
        });
    }
    let l = left.renamed(|n| format!("{n}L"))?;
    let r = right.renamed(|n| format!("{n}R"))?;
    let anc = PureState::basis(&[("M", 1, 0), ("rej", p, 0)])?;
    l.tensor(&r)?.tensor(&anc)
}

fn single(state: &PureState, name: &str) -> Result<usize> {
    match state.qubits(name)? {
        [q] => Ok(*q),
        other => Err(ScadError::State(format!(
            "register {name:?} has {} qubits, expected 1",
            other.len()
        ))),
    }
}

fn sized<'a>(state: &'a PureState, name: &str, p: usize) -> Result<&'a [usize]> {
    let q = state.qubits(name)?;
    if q.len() != p {
        return Err(ScadError::State(format!(
            "register {name:?} has {} qubits, expected {p}",
            q.len()
        )));
    }
    Ok(q)
}

/// Coherent S-CAD: Alice's parity into `M`, then for each CAD Bob his
/// parity into `rej_j` followed by `M` into `rej_j`, leaving
/// `rej_j = x_j ⊕ z_j`. Any other registers pass through untouched.
pub fn delayed_cad_circuit(state: &PureState, mask: CadMask) -> Result<PureState> {
    let p = mask.width();
    let (al, ar, m) = (
        single(state, "AL")?,
        single(state, "AR")?,
        single(state, "M")?,
    );
    let bl = sized(state, "BL", p)?.to_vec();
    let br = sized(state, "BR", p)?.to_vec();
    let rej = sized(state, "rej", p)?.to_vec();
    let mut out = state.clone();
    out.dcnot(al, ar, m)?;
    for j in (0..p).filter(|&j| mask.bit(j)) {
        out.dcnot(bl[j], br[j], rej[j])?;
        out.cnot(m, rej[j])?;
    }
    Ok(out)
}

/// Output of [`delayed_cad_circuit`] on `|g(x;y)⟩_L |g(z;w)⟩_R |0⟩_M |0⟩_rej`
/// written directly: `|(x⊕z)∧C⟩_rej ⊗ 2^{-1/2} Σ_m (−1)^{wm} |m⟩_M ⊗
/// |g(x, m, z⊕m^p; y⊕w)⟩` over `AL BL AR BR`.
pub fn delayed_cad_closed_form(
    x: BitPattern,
    y: bool,
    z: BitPattern,
    w: bool,
    mask: CadMask,
) -> Result<PureState> {
    let p = mask.width();
    for pat in [x, z] {
        if pat.width() != p {
            return Err(ScadError::Width {
                expected: p,
                got: pat.width(),
            });
        }
    }
    let layout = Layout::contiguous(&[
        ("AL", 1),
        ("BL", p),
        ("AR", 1),
        ("BR", p),
        ("M", 1),
        ("rej", p),
    ])?;
    let ones = (1usize << p) - 1;
    let (xv, zv) = (x.value() as usize, z.value() as usize);
    let rej = (xv ^ zv) & mask.pattern().value() as usize;
    let mut amps = vec![Complex64::new(0.0, 0.0); 1 << layout.n()];
    for m in 0..2usize {
        for a in 0..2usize {
            let sign = (usize::from(w) * m) ^ ((usize::from(y) ^ usize::from(w)) * a);
            let amp = if sign == 1 { -0.5 } else { 0.5 };
            let fill = |bit: usize| if bit == 1 { ones } else { 0 };
            let bl = xv ^ fill(a);
            let br = zv ^ fill(m) ^ fill(a);
            let mut idx = a;
            idx = (idx << p) | bl;
            idx = (idx << 1) | (m ^ a);
            idx = (idx << p) | br;
            idx = (idx << 1) | m;
            idx = (idx << p) | rej;
            amps[idx] += Complex64::new(amp, 0.0);
        }
    }
    Ok(PureState::from_parts(amps, layout))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bits::enumerate_patterns;
    use crate::oracle::attack::ghz_state;

    fn basis_inputs(p: usize) -> impl Iterator<Item = (BitPattern, bool, BitPattern, bool)> {
        let pats: Vec<BitPattern> = enumerate_patterns(p).unwrap().collect();
        let mut out = Vec::new();
        for &x in &pats {
            for &z in &pats {
                for y in [false, true] {
                    for w in [false, true] {
                        out.push((x, y, z, w));
                    }
                }
            }
        }
        out.into_iter()
    }

    #[test]
    fn circuit_matches_closed_form_on_basis_inputs() {
        for p in 1..=2 {
            for mask in CadMask::all_masks(p).unwrap() {
                for (x, y, z, w) in basis_inputs(p) {
                    let input = cad_input(&ghz_state(x, y), &ghz_state(z, w)).unwrap();
                    let out = delayed_cad_circuit(&input, mask).unwrap();
                    let want = delayed_cad_closed_form(x, y, z, w, mask).unwrap();
                    assert!((want.norm_sqr() - 1.0).abs() < 1e-15);
                    let f = want.overlap(&out).unwrap();
                    assert!(f >= 1.0 - 1e-10, "p={p} {mask} {x}/{y} {z}/{w}: {f}");
                }
            }
        }
    }

    #[test]
    fn no_cad_leaves_rej_untouched() {
        let p = 2;
        for (x, y, z, w) in basis_inputs(p) {
            let input = cad_input(&ghz_state(x, y), &ghz_state(z, w)).unwrap();
            let out = delayed_cad_circuit(&input, CadMask::none(p)).unwrap();
            for v in 1..1 << p {
                assert!(out.project("rej", v).is_err(), "rej = {v} reachable");
            }
        }
    }

    #[test]
    fn perfect_blocks_always_accept() {
        for p in 1..=3 {
            let g = ghz_state(BitPattern::zero(p), false);
            let out = delayed_cad_circuit(&cad_input(&g, &g).unwrap(), CadMask::all(p)).unwrap();
            let (prob, _) = out.project("rej", 0).unwrap();
            assert!((prob - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn malformed_registers_are_rejected() {
        let g = ghz_state(BitPattern::zero(2), false);
        let input = cad_input(&g, &g).unwrap();
        assert!(delayed_cad_circuit(&input, CadMask::all(3)).is_err());
        let bare = g
            .tensor(&PureState::basis(&[("M", 1, 0)]).unwrap())
            .unwrap();
        assert!(matches!(
            delayed_cad_circuit(&bare, CadMask::all(2)),
            Err(ScadError::MissingRegister(_))
        ));
        let g3 = ghz_state(BitPattern::zero(3), false);
        assert!(cad_input(&g, &g3).is_err());
    }
}
