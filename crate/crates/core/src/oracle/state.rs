use std::collections::HashMap;

use num_complex::Complex64;

use super::density::DensityState;
use crate::error::{Result, ScadError};

const NORM_TOL: f64 = 1e-12;

/// Named group of qubits. Qubit 0 is the most significant bit of a basis
/// index, and a register's first qubit is the most significant bit of its
/// value.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Register {
    pub name: String,
    pub qubits: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct Layout {
    n: usize,
    registers: Vec<Register>,
}

impl Layout {
    pub(crate) fn new(n: usize, registers: Vec<Register>) -> Result<Self> {
        let mut seen = vec![false; n];
        let mut dup = Vec::new();
        for r in &registers {
            for &q in &r.qubits {
                if q >= n {
                    return Err(ScadError::State(format!(
                        "register {:?} names qubit {q} of {n}",
                        r.name
                    )));
                }
                if seen[q] {
                    dup.push(q);
                }
                seen[q] = true;
            }
        }
        if !dup.is_empty() {
            return Err(ScadError::LabelCollision(dup));
        }
        if let Some(q) = seen.iter().position(|s| !s) {
            return Err(ScadError::State(format!("qubit {q} is in no register")));
        }
        for (i, a) in registers.iter().enumerate() {
            if registers[..i].iter().any(|b| b.name == a.name) {
                return Err(ScadError::State(format!("duplicate register {:?}", a.name)));
            }
        }
        Ok(Self { n, registers })
    }

    /// Contiguous registers in the given order.
    pub(crate) fn contiguous(sizes: &[(&str, usize)]) -> Result<Self> {
        let mut next = 0;
        let registers = sizes
            .iter()
            .map(|&(name, k)| {
                let r = Register {
                    name: name.to_string(),
                    qubits: (next..next + k).collect(),
                };
                next += k;
                r
            })
            .collect();
        Self::new(next, registers)
    }

    pub(crate) fn qubits(&self, name: &str) -> Result<&[usize]> {
        self.registers
            .iter()
            .find(|r| r.name == name)
            .map(|r| r.qubits.as_slice())
            .ok_or_else(|| ScadError::MissingRegister(name.to_string()))
    }

    pub(crate) fn n(&self) -> usize {
        self.n
    }

    pub(crate) fn registers(&self) -> &[Register] {
        &self.registers
    }

    /// Qubits of the named registers, in order, checking the names are distinct.
    pub(crate) fn gather(&self, names: &[&str]) -> Result<Vec<usize>> {
        for (i, a) in names.iter().enumerate() {
            if names[..i].contains(a) {
                return Err(ScadError::State(format!("register {a:?} listed twice")));
            }
        }
        let mut out = Vec::new();
        for name in names {
            out.extend_from_slice(self.qubits(name)?);
        }
        Ok(out)
    }

    /// Layout of the named registers packed contiguously in the listed order.
    pub(crate) fn packed(&self, names: &[&str]) -> Result<Layout> {
        let sizes: Vec<(&str, usize)> = names
            .iter()
            .map(|&n| Ok((n, self.qubits(n)?.len())))
            .collect::<Result<_>>()?;
        Layout::contiguous(&sizes)
    }

    #[inline]
    pub(crate) fn shift(&self, q: usize) -> usize {
        self.n - 1 - q
    }
}

/// Reads the sub-index formed by `qubits` (first qubit most significant).
#[inline]
pub(crate) fn extract(index: usize, shifts: &[usize]) -> usize {
    shifts
        .iter()
        .fold(0, |acc, &s| (acc << 1) | ((index >> s) & 1))
}

/// Dense pure state over labelled qubit registers.
#[derive(Debug, Clone, PartialEq)]
pub struct PureState {
    amplitudes: Vec<Complex64>,
    layout: Layout,
}

impl PureState {
    pub fn new(amplitudes: Vec<Complex64>, registers: Vec<Register>) -> Result<Self> {
        if !amplitudes.len().is_power_of_two() {
            return Err(ScadError::State(format!(
                "{} amplitudes is not a power of two",
                amplitudes.len()
            )));
        }
        let n = amplitudes.len().trailing_zeros() as usize;
        let s = Self {
            amplitudes,
            layout: Layout::new(n, registers)?,
        };
        let norm = s.norm_sqr();
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(ScadError::NotNormalized(norm));
        }
        Ok(s)
    }

    pub(crate) fn from_parts(amplitudes: Vec<Complex64>, layout: Layout) -> Self {
        debug_assert_eq!(amplitudes.len(), 1 << layout.n());
        Self { amplitudes, layout }
    }

    /// Computational basis state with each contiguous register set to the
    /// given value.
    pub fn basis(registers: &[(&str, usize, u64)]) -> Result<Self> {
        let sizes: Vec<(&str, usize)> = registers.iter().map(|&(n, k, _)| (n, k)).collect();
        let layout = Layout::contiguous(&sizes)?;
        let mut index = 0usize;
        for &(name, k, v) in registers {
            if k < 64 && v >> k != 0 {
                return Err(ScadError::State(format!(
                    "value {v} does not fit register {name:?} of {k} qubits"
                )));
            }
            index = (index << k) | v as usize;
        }
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); 1 << layout.n()];
        amplitudes[index] = Complex64::new(1.0, 0.0);
        Ok(Self { amplitudes, layout })
    }

    pub fn num_qubits(&self) -> usize {
        self.layout.n()
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn registers(&self) -> &[Register] {
        self.layout.registers()
    }

    pub fn qubits(&self, name: &str) -> Result<&[usize]> {
        self.layout.qubits(name)
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    /// `self ⊗ other`; register names must be disjoint.
    pub fn tensor(&self, other: &PureState) -> Result<Self> {
        let shift = self.num_qubits();
        let mut registers = self.registers().to_vec();
        for r in other.registers() {
            registers.push(Register {
                name: r.name.clone(),
                qubits: r.qubits.iter().map(|q| q + shift).collect(),
            });
        }
        let layout = Layout::new(shift + other.num_qubits(), registers)?;
        let mut amplitudes = Vec::with_capacity(self.dim() * other.dim());
        for a in &self.amplitudes {
            amplitudes.extend(other.amplitudes.iter().map(|b| a * b));
        }
        Ok(Self { amplitudes, layout })
    }

    /// Same state with every register renamed by `f`.
    pub fn renamed(&self, f: impl Fn(&str) -> String) -> Result<Self> {
        let registers = self
            .registers()
            .iter()
            .map(|r| Register {
                name: f(&r.name),
                qubits: r.qubits.clone(),
            })
            .collect();
        Ok(Self {
            amplitudes: self.amplitudes.clone(),
            layout: Layout::new(self.num_qubits(), registers)?,
        })
    }

    /// Rearranges the qubits so the named registers are contiguous in the
    /// given order. Every register must be listed.
    pub fn reordered(&self, order: &[&str]) -> Result<Self> {
        if order.len() != self.registers().len() {
            return Err(ScadError::State(format!(
                "reorder lists {} of {} registers",
                order.len(),
                self.registers().len()
            )));
        }
        let src = self.layout.gather(order)?;
        let layout = self.layout.packed(order)?;
        let shifts: Vec<usize> = src.iter().map(|&q| self.layout.shift(q)).collect();
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); self.dim()];
        for (i, &a) in self.amplitudes.iter().enumerate() {
            amplitudes[extract(i, &shifts)] = a;
        }
        Ok(Self { amplitudes, layout })
    }

    fn same_layout(&self, other: &PureState) -> Result<()> {
        if self.layout != other.layout {
            return Err(ScadError::State(
                "states have different register layouts".into(),
            ));
        }
        Ok(())
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &PureState) -> Result<Complex64> {
        self.same_layout(other)?;
        Ok(self
            .amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum())
    }

    /// `|⟨self|other⟩|`.
    pub fn overlap(&self, other: &PureState) -> Result<f64> {
        Ok(self.inner(other)?.norm())
    }

    fn check_distinct(&self, qubits: &[usize]) -> Result<()> {
        for (i, &q) in qubits.iter().enumerate() {
            if q >= self.num_qubits() {
                return Err(ScadError::Index {
                    index: q,
                    len: self.num_qubits(),
                });
            }
            if qubits[..i].contains(&q) {
                return Err(ScadError::LabelCollision(qubits.to_vec()));
            }
        }
        Ok(())
    }

    pub fn cnot(&mut self, control: usize, target: usize) -> Result<()> {
        self.check_distinct(&[control, target])?;
        let c = 1usize << self.layout.shift(control);
        let t = 1usize << self.layout.shift(target);
        for i in 0..self.dim() {
            if i & c != 0 && i & t == 0 {
                self.amplitudes.swap(i, i | t);
            }
        }
        Ok(())
    }

    /// `|a, b, t⟩ → |a, b, t ⊕ a ⊕ b⟩` as two CNOTs onto `target`.
    pub fn dcnot(&mut self, c1: usize, c2: usize, target: usize) -> Result<()> {
        self.check_distinct(&[c1, c2, target])?;
        self.cnot(c1, target)?;
        self.cnot(c2, target)
    }

    /// Postselects `register = value`. Returns the outcome probability and
    /// the normalized post-measurement state, with the register kept.
    pub fn project(&self, register: &str, value: usize) -> Result<(f64, Self)> {
        let shifts: Vec<usize> = self
            .qubits(register)?
            .iter()
            .map(|&q| self.layout.shift(q))
            .collect();
        let mut amplitudes = self.amplitudes.clone();
        for (i, a) in amplitudes.iter_mut().enumerate() {
            if extract(i, &shifts) != value {
                *a = Complex64::new(0.0, 0.0);
            }
        }
        let prob: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum();
        if prob <= 0.0 {
            return Err(ScadError::State(format!(
                "outcome {value} of {register:?} has probability zero"
            )));
        }
        let s = prob.sqrt().recip();
        amplitudes.iter_mut().for_each(|a| *a *= s);
        Ok((
            prob,
            Self {
                amplitudes,
                layout: self.layout.clone(),
            },
        ))
    }

    /// Reduced density operator on the named registers, packed in the
    /// listed order. Only nonzero amplitudes are visited.
    pub fn reduced(&self, keep: &[&str]) -> Result<DensityState> {
        let kept = self.layout.gather(keep)?;
        let layout = self.layout.packed(keep)?;
        let traced: Vec<usize> = (0..self.num_qubits())
            .filter(|q| !kept.contains(q))
            .collect();
        let ks: Vec<usize> = kept.iter().map(|&q| self.layout.shift(q)).collect();
        let ts: Vec<usize> = traced.iter().map(|&q| self.layout.shift(q)).collect();
        let mut groups: HashMap<usize, Vec<(usize, Complex64)>> = HashMap::new();
        for (i, &a) in self.amplitudes.iter().enumerate() {
            if a != Complex64::new(0.0, 0.0) {
                groups
                    .entry(extract(i, &ts))
                    .or_default()
                    .push((extract(i, &ks), a));
            }
        }
        let dim = 1usize << kept.len();
        let mut rho = nalgebra::DMatrix::<Complex64>::zeros(dim, dim);
        for entries in groups.values() {
            for &(k1, a1) in entries {
                for &(k2, a2) in entries {
                    rho[(k1, k2)] += a1 * a2.conj();
                }
            }
        }
        Ok(DensityState::from_parts(rho, layout))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn random_state(n: usize, seed: u64) -> PureState {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut amps: Vec<Complex64> = (0..1 << n)
            .map(|_| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
            .collect();
        let norm: f64 = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        amps.iter_mut().for_each(|a| *a /= norm);
        let layout = Layout::contiguous(&[("q", n)]).unwrap();
        PureState::from_parts(amps, layout)
    }

    #[test]
    fn validates_layout_and_norm() {
        let r = |name: &str, q: Vec<usize>| Register {
            name: name.into(),
            qubits: q,
        };
        let amps = vec![c(1.0), c(0.0), c(0.0), c(0.0)];
        assert!(PureState::new(amps.clone(), vec![r("a", vec![0]), r("b", vec![1])]).is_ok());
        assert!(matches!(
            PureState::new(amps.clone(), vec![r("a", vec![0]), r("b", vec![0])]),
            Err(ScadError::LabelCollision(_))
        ));
        assert!(PureState::new(amps.clone(), vec![r("a", vec![0])]).is_err());
        assert!(PureState::new(amps.clone(), vec![r("a", vec![0]), r("a", vec![1])]).is_err());
        assert!(PureState::new(vec![c(1.0); 3], vec![r("a", vec![0])]).is_err());
        assert!(matches!(
            PureState::new(vec![c(1.0), c(1.0)], vec![r("a", vec![0])]),
            Err(ScadError::NotNormalized(_))
        ));
    }

    #[test]
    fn dcnot_truth_table() {
        for (input, output) in [
            (0b110, 0b110),
            (0b100, 0b101),
            (0b010, 0b011),
            (0b111, 0b111),
        ] {
            let mut s = PureState::basis(&[("q", 3, input)]).unwrap();
            s.dcnot(0, 1, 2).unwrap();
            let want = PureState::basis(&[("q", 3, output)]).unwrap();
            assert_eq!(s.overlap(&want).unwrap(), 1.0);
        }
        let mut s = PureState::basis(&[("q", 3, 0)]).unwrap();
        assert!(matches!(
            s.dcnot(0, 0, 2),
            Err(ScadError::LabelCollision(_))
        ));
        assert!(s.cnot(1, 1).is_err());
        assert!(s.cnot(0, 3).is_err());
    }

    #[test]
    fn tensor_and_reorder() {
        let a = PureState::basis(&[("a", 2, 0b10)]).unwrap();
        let b = PureState::basis(&[("b", 1, 1)]).unwrap();
        let ab = a.tensor(&b).unwrap();
        assert_eq!(ab.amplitudes()[0b101], c(1.0));
        let ba = ab.reordered(&["b", "a"]).unwrap();
        assert_eq!(ba.amplitudes()[0b110], c(1.0));
        assert_eq!(ba.qubits("a").unwrap(), &[1, 2]);
        assert!(a.tensor(&a).is_err());
        assert!(ab.reordered(&["b"]).is_err());
    }

    #[test]
    fn projection_probability() {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let s = PureState::new(
            vec![c(h), c(0.0), c(0.0), c(h)],
            vec![
                Register {
                    name: "a".into(),
                    qubits: vec![0],
                },
                Register {
                    name: "b".into(),
                    qubits: vec![1],
                },
            ],
        )
        .unwrap();
        let (p, post) = s.project("b", 1).unwrap();
        assert!((p - 0.5).abs() < 1e-15);
        assert!((post.amplitudes()[3].re - 1.0).abs() < 1e-15);
        assert!(s.project("c", 0).is_err());
    }

    proptest! {
        #[test]
        fn dcnot_is_an_involution(seed in any::<u64>(), c1 in 0usize..4, c2 in 0usize..4, t in 0usize..4) {
            prop_assume!(c1 != c2 && c1 != t && c2 != t);
            let s = random_state(4, seed);
            let mut u = s.clone();
            u.dcnot(c1, c2, t).unwrap();
            prop_assert!((u.norm_sqr() - 1.0).abs() < 1e-12);
            u.dcnot(c1, c2, t).unwrap();
            prop_assert_eq!(u, s);
        }

        #[test]
        fn reduced_state_has_unit_trace(seed in any::<u64>()) {
            let s = random_state(4, seed);
            let s = PureState::from_parts(
                s.amplitudes().to_vec(),
                Layout::contiguous(&[("x", 1), ("y", 2), ("z", 1)]).unwrap(),
            );
            let rho = s.reduced(&["z", "x"]).unwrap();
            prop_assert!((rho.trace() - 1.0).abs() < 1e-12);
            prop_assert_eq!(rho.dim(), 4);
        }
    }
}
