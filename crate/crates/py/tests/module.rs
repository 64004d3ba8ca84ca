use pyo3::prelude::*;
use pyo3::types::PyDict;
use scad_py::scad_py;

fn run(code: &str) {
    pyo3::append_to_inittab!(scad_py);
    Python::attach(|py| {
        let globals = PyDict::new(py);
        let code = std::ffi::CString::new(code).unwrap();
        py.run(&code, Some(&globals), None)
            .inspect_err(|e| e.display(py))
            .unwrap();
    });
}

#[test]
fn module_exposes_types_and_operations() {
    run(r#"
import scad_py as s
d = s.NoiseScenario.homogeneous(2, 0.1).distribution()
m = s.CadMask("11")
assert abs(s.p_accept(d, m) - 0.6724) < 1e-12
r = s.key_rate(d, m)
assert r.mask == "11" and 0 < r.entropy_bound < 1
assert s.key_rate(d, s.CadMask("00")).rate == r.baseline_rate
try:
    s.CadMask("")
    raise AssertionError("empty mask accepted")
except ValueError:
    pass
"#);
}
