use std::ffi::CString;

use pyo3::prelude::*;
use pyo3::types::PyDict;

fn run(code: &str) {
    Python::attach(|py| {
        let module = pyo3::wrap_pymodule!(thermobeam_py::thermobeam_module)(py);
        let globals = PyDict::new(py);
        globals.set_item("tb", module).unwrap();
        let code = CString::new(code).unwrap();
        if let Err(e) = py.run(&code, Some(&globals), None) {
            e.print(py);
            panic!("python snippet failed");
        }
    });
}

#[test]
fn params_and_regimes() {
    run(r#"
p = tb.PhysicalParams(rho1=2.0, alpha1=2.0)
assert tb.classify_regime(p) == ("FAST", 1)
p.rho1 = 0.5
assert p.regime() == ("SLOW", 2)
assert tb.PhysicalParams(kappa=0.0).validate() != []
"#);
}

#[test]
fn model_is_dissipative_and_solvable() {
    run(r#"
m = tb.Model(tb.Config('{"mesh": {"n1": 6, "n2": 6}}'))
s = m.initial_state()
a = m.apply(s)
e = m.energy(s)
assert abs(m.inner(a, s) + m.dissipation(s)) <= 1e-12 * 2 * e
back = m.apply(m.solve(s))
d = [x - y for x, y in zip(back, s)]
assert m.energy(d) <= 1e-20 * e
assert m.spectral_abscissa() < 0
"#);
}

#[test]
fn bad_input_raises_value_error() {
    run(r#"
try:
    tb.Config('{"mesh": {"n1": 1}}').validate()
    tb.Model(tb.Config('{"mesh": {"n1": 1}}'))
except ValueError:
    pass
else:
    raise AssertionError("accepted a one-element span")
try:
    tb.log_grid(2.0, 1.0, 10)
except ValueError:
    pass
else:
    raise AssertionError("accepted a reversed grid")
"#);
}
