use nalgebra::DMatrix;
use num_complex::Complex64;

use super::state::{extract, Layout, Register};
use crate::error::{Result, ScadError};

const TRACE_TOL: f64 = 1e-10;
const HERMITIAN_TOL: f64 = 1e-10;
/// Most negative eigenvalue accepted as round-off.
pub const PSD_SLACK: f64 = -1e-10;
/// Eigenvalues below this contribute nothing to the entropy.
pub const EIGEN_FLOOR: f64 = 1e-14;

/// Density operator over labelled qubit registers.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityState {
    matrix: DMatrix<Complex64>,
    layout: Layout,
}

impl DensityState {
    /// Validates Hermiticity, unit trace and positivity.
    pub fn new(matrix: DMatrix<Complex64>, registers: Vec<Register>) -> Result<Self> {
        let dim = matrix.nrows();
        if dim != matrix.ncols() || !dim.is_power_of_two() {
            return Err(ScadError::State(format!(
                "density matrix of shape {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        let layout = Layout::new(dim.trailing_zeros() as usize, registers)?;
        for i in 0..dim {
            for j in 0..=i {
                if (matrix[(i, j)] - matrix[(j, i)].conj()).norm() > HERMITIAN_TOL {
                    return Err(ScadError::State(format!("not Hermitian at ({i}, {j})")));
                }
            }
        }
        let s = Self { matrix, layout };
        let tr = s.trace();
        if (tr - 1.0).abs() > TRACE_TOL {
            return Err(ScadError::NotNormalized(tr));
        }
        s.spectrum()?;
        Ok(s)
    }

    pub(crate) fn from_parts(matrix: DMatrix<Complex64>, layout: Layout) -> Self {
        Self { matrix, layout }
    }

    /// `|ψ⟩⟨ψ|` of a state vector laid out in contiguous registers.
    pub fn pure(amplitudes: &[Complex64], registers: &[(&str, usize)]) -> Result<Self> {
        let layout = Layout::contiguous(registers)?;
        if amplitudes.len() != 1 << layout.n() {
            return Err(ScadError::Width {
                expected: 1 << layout.n(),
                got: amplitudes.len(),
            });
        }
        let v = nalgebra::DVector::from_column_slice(amplitudes);
        Self::new(&v * v.adjoint(), layout.registers().to_vec())
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    pub fn registers(&self) -> &[Register] {
        self.layout.registers()
    }

    pub fn trace(&self) -> f64 {
        self.matrix.diagonal().iter().map(|z| z.re).sum()
    }

    fn shifts(&self, qubits: &[usize]) -> Vec<usize> {
        qubits.iter().map(|&q| self.layout.shift(q)).collect()
    }

    /// Partial trace onto the named registers, packed in the listed order.
    pub fn reduce(&self, keep: &[&str]) -> Result<Self> {
        let kept = self.layout.gather(keep)?;
        let layout = self.layout.packed(keep)?;
        let traced: Vec<usize> = (0..self.layout.n()).filter(|q| !kept.contains(q)).collect();
        let (ks, ts) = (self.shifts(&kept), self.shifts(&traced));
        let dim = 1usize << kept.len();
        let mut out = DMatrix::<Complex64>::zeros(dim, dim);
        let key: Vec<(usize, usize)> = (0..self.dim())
            .map(|i| (extract(i, &ks), extract(i, &ts)))
            .collect();
        for j in 0..self.dim() {
            let (kj, tj) = key[j];
            for (i, &(ki, ti)) in key.iter().enumerate() {
                let z = self.matrix[(i, j)];
                if ti == tj && z != Complex64::new(0.0, 0.0) {
                    out[(ki, kj)] += z;
                }
            }
        }
        Ok(Self {
            matrix: out,
            layout,
        })
    }

    /// Measures `register` in the computational basis without recording
    /// the outcome.
    pub fn dephase(&self, register: &str) -> Result<Self> {
        let s = self.shifts(self.layout.qubits(register)?);
        let mut m = self.matrix.clone();
        for j in 0..self.dim() {
            let vj = extract(j, &s);
            for i in 0..self.dim() {
                if extract(i, &s) != vj {
                    m[(i, j)] = Complex64::new(0.0, 0.0);
                }
            }
        }
        Ok(Self {
            matrix: m,
            layout: self.layout.clone(),
        })
    }

    /// Conditions on `register = value`: returns the outcome probability
    /// and the normalized state on the remaining registers.
    pub fn condition(&self, register: &str, value: usize) -> Result<(f64, Self)> {
        let rest: Vec<&str> = self
            .registers()
            .iter()
            .map(|r| r.name.as_str())
            .filter(|&n| n != register)
            .collect();
        let s = self.shifts(self.layout.qubits(register)?);
        let rest_q = self.layout.gather(&rest)?;
        let rs = self.shifts(&rest_q);
        let layout = self.layout.packed(&rest)?;
        let idx: Vec<usize> = (0..self.dim())
            .filter(|&i| extract(i, &s) == value)
            .collect();
        let dim = 1usize << rest_q.len();
        let mut m = DMatrix::<Complex64>::zeros(dim, dim);
        for &i in &idx {
            for &j in &idx {
                m[(extract(i, &rs), extract(j, &rs))] = self.matrix[(i, j)];
            }
        }
        let prob: f64 = m.diagonal().iter().map(|z| z.re).sum();
        if prob <= 0.0 {
            return Err(ScadError::State(format!(
                "outcome {value} of {register:?} has probability zero"
            )));
        }
        Ok((
            prob,
            Self {
                matrix: m / Complex64::new(prob, 0.0),
                layout,
            },
        ))
    }

    /// Eigenvalues, computed per block of the connected components of the
    /// nonzero pattern.
    pub fn spectrum(&self) -> Result<Vec<f64>> {
        let dim = self.dim();
        let mut parent: Vec<usize> = (0..dim).collect();
        fn root(parent: &mut [usize], mut i: usize) -> usize {
            while parent[i] != i {
                parent[i] = parent[parent[i]];
                i = parent[i];
            }
            i
        }
        for j in 0..dim {
            for i in 0..j {
                if self.matrix[(i, j)] != Complex64::new(0.0, 0.0) {
                    let (a, b) = (root(&mut parent, i), root(&mut parent, j));
                    if a != b {
                        parent[a] = b;
                    }
                }
            }
        }
        let mut blocks: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
        for i in 0..dim {
            let r = root(&mut parent, i);
            blocks.entry(r).or_default().push(i);
        }
        let mut eig = Vec::with_capacity(dim);
        for idx in blocks.values() {
            if idx.len() == 1 {
                eig.push(self.matrix[(idx[0], idx[0])].re);
                continue;
            }
            let b = DMatrix::from_fn(idx.len(), idx.len(), |r, c| self.matrix[(idx[r], idx[c])]);
            eig.extend(b.symmetric_eigenvalues().iter().copied());
        }
        if let Some(&low) = eig.iter().min_by(|a, b| a.total_cmp(b)) {
            if low < PSD_SLACK {
                return Err(ScadError::NotPsd(low));
            }
        }
        Ok(eig)
    }

    /// Von Neumann entropy in bits.
    pub fn entropy(&self) -> Result<f64> {
        Ok(self
            .spectrum()?
            .into_iter()
            .filter(|&l| l > EIGEN_FLOOR)
            .map(|l| -l * l.log2())
            .sum())
    }
}

/// `H(target | side) = H(target, side) − H(side)` in bits.
pub fn conditional_entropy(rho: &DensityState, target: &str, side: &[&str]) -> Result<f64> {
    if side.contains(&target) {
        return Err(ScadError::State(format!(
            "{target:?} is also a side register"
        )));
    }
    let mut joint = vec![target];
    joint.extend_from_slice(side);
    let h_joint = rho.reduce(&joint)?.entropy()?;
    let h_side = if side.is_empty() {
        0.0
    } else {
        rho.reduce(side)?.entropy()?
    };
    Ok(h_joint - h_side)
}
