//! Python module `scad_py`: masks, noise scenarios, key rates, the Monte
//! Carlo simulator, sweeps and the small-system oracle.
//!
//! Masks and patterns cross the boundary as bit strings with Bob 1
//! leftmost. Configuration and domain errors raise `ValueError`, file
//! errors raise `OSError`.

use std::path::PathBuf;

use pyo3::exceptions::{PyOSError, PyValueError};
use pyo3::prelude::*;

use scad::keyrate::{report_for, OptimizerConfig};
use scad::oracle::{exact_entropy as oracle_entropy, AttackState};
use scad::scenario::ScenarioSpec;
use scad::sim::{run_sim, SimConfig};
use scad::sweep::{search_rows, sweep_rows, write_csv, SweepRow};
use scad::{BitPattern, ScadError};

fn py_err(e: ScadError) -> PyErr {
    match e {
        ScadError::Io { .. } => PyOSError::new_err(e.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

/// CAD on/off pattern; `"10"` means Bob 1 runs CAD and Bob 2 does not.
#[pyclass(frozen, eq, hash, ord, skip_from_py_object)]
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CadMask(pub scad::CadMask);

#[pymethods]
impl CadMask {
    #[new]
    fn py_new(bits: &str) -> PyResult<Self> {
        scad::CadMask::parse(bits, bits.len())
            .map(CadMask)
            .map_err(py_err)
    }

    #[staticmethod]
    fn all(p: usize) -> PyResult<Self> {
        scad::bits::check_width(p).map_err(py_err)?;
        Ok(CadMask(scad::CadMask::all(p)))
    }

    #[staticmethod]
    fn none(p: usize) -> PyResult<Self> {
        scad::bits::check_width(p).map_err(py_err)?;
        Ok(CadMask(scad::CadMask::none(p)))
    }

    #[getter]
    fn bits(&self) -> String {
        self.0.to_string()
    }

    #[getter]
    fn width(&self) -> usize {
        self.0.width()
    }

    fn is_none(&self) -> bool {
        self.0.is_none()
    }

    fn __str__(&self) -> String {
        self.0.to_string()
    }

    fn __repr__(&self) -> String {
        format!("CadMask('{}')", self.0)
    }
}

/// Per-Bob link noise `Q_AB_i` and the X-basis error `Q_X`.
#[pyclass(frozen, skip_from_py_object)]
#[derive(Clone)]
pub struct NoiseScenario(pub scad::NoiseScenario);

#[pymethods]
impl NoiseScenario {
    #[new]
    fn py_new(links: Vec<f64>, qx: f64) -> PyResult<Self> {
        scad::NoiseScenario::new(links, qx)
            .map(NoiseScenario)
            .map_err(py_err)
    }

    #[staticmethod]
    fn homogeneous(p: usize, q: f64) -> PyResult<Self> {
        scad::NoiseScenario::homogeneous(p, q)
            .map(NoiseScenario)
            .map_err(py_err)
    }

    #[getter]
    fn links(&self) -> Vec<f64> {
        self.0.link_noise().to_vec()
    }

    #[getter]
    fn qx(&self) -> f64 {
        self.0.qx()
    }

    #[getter]
    fn parties(&self) -> usize {
        self.0.parties()
    }

    fn distribution(&self) -> ErrorDistribution {
        ErrorDistribution(scad::ErrorDistribution::from_scenario(&self.0))
    }

    fn __repr__(&self) -> String {
        format!(
            "NoiseScenario(links={:?}, qx={})",
            self.0.link_noise(),
            self.0.qx()
        )
    }
}

/// Error-pattern probabilities `Q^Z_Δ`, dense by pattern value.
#[pyclass(frozen, skip_from_py_object)]
#[derive(Clone)]
pub struct ErrorDistribution(pub scad::ErrorDistribution);

#[pymethods]
impl ErrorDistribution {
    #[new]
    fn py_new(p: usize, probs: Vec<f64>, qx: f64) -> PyResult<Self> {
        scad::ErrorDistribution::from_dense(p, probs, qx)
            .map(ErrorDistribution)
            .map_err(py_err)
    }

    #[getter]
    fn probs(&self) -> Vec<f64> {
        self.0.probs().to_vec()
    }

    #[getter]
    fn qx(&self) -> f64 {
        self.0.qx()
    }

    #[getter]
    fn parties(&self) -> usize {
        self.0.parties()
    }

    fn prob(&self, pattern: &str) -> PyResult<f64> {
        let d = BitPattern::parse(pattern, self.0.parties()).map_err(py_err)?;
        Ok(self.0.prob(d))
    }

    fn marginals(&self) -> Vec<f64> {
        self.0.marginals()
    }
}

#[pyclass(frozen, get_all, skip_from_py_object)]
#[derive(Clone)]
pub struct KeyRateReport {
    pub mask: String,
    pub p_accept: f64,
    pub entropy_bound: f64,
    pub post_cad_errors: Vec<f64>,
    pub leak_ec: f64,
    pub rate: f64,
    pub rate_clamped: f64,
    pub baseline_rate: f64,
    /// Minimising `ν` by pattern value; `None` for the plain protocol.
    pub minimizer: Option<Vec<f64>>,
}

impl From<scad::KeyRateReport> for KeyRateReport {
    fn from(r: scad::KeyRateReport) -> Self {
        Self {
            mask: r.mask.to_string(),
            p_accept: r.p_accept,
            entropy_bound: r.entropy_bound,
            post_cad_errors: r.post_cad_errors.clone(),
            leak_ec: r.leak_ec,
            rate: r.rate,
            rate_clamped: r.rate_clamped(),
            baseline_rate: r.baseline_rate,
            minimizer: r.minimizer.map(|n| n.values().to_vec()),
        }
    }
}

#[pymethods]
impl KeyRateReport {
    fn __repr__(&self) -> String {
        format!(
            "KeyRateReport(mask='{}', p_accept={}, entropy_bound={}, leak_ec={}, rate={})",
            self.mask, self.p_accept, self.entropy_bound, self.leak_ec, self.rate
        )
    }
}

#[pyclass(frozen, get_all, skip_from_py_object)]
pub struct SimResult {
    pub blocks_total: u64,
    pub blocks_accepted: u64,
    pub p_accept_hat: f64,
    pub post_error_hat: Vec<Option<f64>>,
    pub stderr_p_accept: f64,
    pub rng: &'static str,
}

#[pyfunction]
fn binary_entropy(x: f64) -> PyResult<f64> {
    scad::binary_entropy(x).map_err(py_err)
}

#[pyfunction]
fn p_accept(d: &ErrorDistribution, mask: &CadMask) -> PyResult<f64> {
    scad::p_accept(&d.0, mask.0).map_err(py_err)
}

/// `(bound, nu)`: the minimised entropy term and its minimiser.
#[pyfunction]
fn entropy_bound(d: &ErrorDistribution, mask: &CadMask) -> PyResult<(f64, Vec<f64>)> {
    let (v, nu) = scad::entropy_bound(&d.0, mask.0).map_err(py_err)?;
    Ok((v, nu.values().to_vec()))
}

#[pyfunction]
fn post_cad_error(d: &ErrorDistribution, mask: &CadMask, bob: usize) -> PyResult<f64> {
    scad::post_cad_error(&d.0, mask.0, bob).map_err(py_err)
}

#[pyfunction]
fn expected_post_cad_error(d: &ErrorDistribution, mask: &CadMask, bob: usize) -> PyResult<f64> {
    scad::expected_post_cad_error(&d.0, mask.0, bob).map_err(py_err)
}

#[pyfunction]
fn no_cad_rate(d: &ErrorDistribution) -> f64 {
    scad::no_cad_rate(&d.0)
}

/// Report for any mask; the all-zero mask is the plain protocol.
#[pyfunction]
fn key_rate(d: &ErrorDistribution, mask: &CadMask) -> PyResult<KeyRateReport> {
    report_for(&d.0, mask.0, &OptimizerConfig::default())
        .map(Into::into)
        .map_err(py_err)
}

#[pyfunction]
fn best_mask(d: &ErrorDistribution) -> PyResult<KeyRateReport> {
    scad::best_mask(&d.0).map(|(_, r)| r.into()).map_err(py_err)
}

#[pyfunction]
#[pyo3(signature = (scenario, mask, rounds, seed = 0))]
fn simulate(
    scenario: &NoiseScenario,
    mask: &CadMask,
    rounds: u64,
    seed: u64,
) -> PyResult<SimResult> {
    let c = SimConfig::new(scenario.0.clone(), mask.0, rounds, seed).map_err(py_err)?;
    let r = run_sim(&c);
    Ok(SimResult {
        blocks_total: r.blocks_total,
        blocks_accepted: r.blocks_accepted,
        p_accept_hat: r.p_accept_hat,
        post_error_hat: r.post_error_hat,
        stderr_p_accept: r.stderr_p_accept,
        rng: r.rng,
    })
}

fn row_tuple(r: &SweepRow) -> (f64, String, f64, f64, f64, f64, f64, f64) {
    (
        r.q,
        r.mask.to_string(),
        r.p_accept,
        r.entropy_bound,
        r.leak_ec,
        r.rate_raw,
        r.rate_clamped,
        r.baseline_rate,
    )
}

type Row = (f64, String, f64, f64, f64, f64, f64, f64);

/// Runs a scenario file; rows follow the CSV column order. With `out` the
/// CSV is written as well. `search=True` keeps only the best mask per `Q`.
#[pyfunction]
#[pyo3(signature = (spec, out = None, search = false))]
fn sweep(py: Python<'_>, spec: PathBuf, out: Option<PathBuf>, search: bool) -> PyResult<Vec<Row>> {
    let spec = ScenarioSpec::load(&spec).map_err(py_err)?;
    let cfg = OptimizerConfig::default();
    let rows = py
        .detach(|| {
            if search {
                search_rows(&spec, &cfg)
            } else {
                sweep_rows(&spec, &cfg)
            }
        })
        .map_err(py_err)?;
    if let Some(p) = out {
        write_csv(&rows, &p).map_err(py_err)?;
    }
    Ok(rows.iter().map(row_tuple).collect())
}

/// Exact `(H(A|EM), p_accept)` for a GHZ-diagonal attack with weights
/// indexed `2·Δ + y`, `p ≤ 3`.
#[pyfunction]
fn exact_entropy(p: usize, lambdas: Vec<f64>, mask: &CadMask) -> PyResult<(f64, f64)> {
    let a = AttackState::new(p, lambdas).map_err(py_err)?;
    oracle_entropy(&a, mask.0).map_err(py_err)
}

#[pymodule]
pub fn scad_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<CadMask>()?;
    m.add_class::<NoiseScenario>()?;
    m.add_class::<ErrorDistribution>()?;
    m.add_class::<KeyRateReport>()?;
    m.add_class::<SimResult>()?;
    m.add_function(wrap_pyfunction!(binary_entropy, m)?)?;
    m.add_function(wrap_pyfunction!(p_accept, m)?)?;
    m.add_function(wrap_pyfunction!(entropy_bound, m)?)?;
    m.add_function(wrap_pyfunction!(post_cad_error, m)?)?;
    m.add_function(wrap_pyfunction!(expected_post_cad_error, m)?)?;
    m.add_function(wrap_pyfunction!(no_cad_rate, m)?)?;
    m.add_function(wrap_pyfunction!(key_rate, m)?)?;
    m.add_function(wrap_pyfunction!(best_mask, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(sweep, m)?)?;
    m.add_function(wrap_pyfunction!(exact_entropy, m)?)?;
    Ok(())
}
