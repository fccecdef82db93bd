use pyo3::ffi::c_str;
use pyo3::prelude::*;
use zmcount_py::zmcount_module;

#[test]
fn module_runs_in_embedded_interpreter() {
    pyo3::append_to_inittab!(zmcount_module);
    Python::attach(|py| {
        let code = c_str!(
            r#"
import zmcount
m = zmcount.Model("zmp", "gar1", zmcount.Params(0.2, 0.8, 2.0, 4.0))
counts, lam = m.simulate(500, 3)
assert len(counts) == 500 and min(lam) > 0
assert abs(m.filter([3, 0, 5, 2, 0])["lambda"][0] - 2.153284671532847) < 1e-14
fit = zmcount.fit(counts, start=m.params)
assert fit.converged
try:
    zmcount.Model("zmq", "gar1", m.params)
    raise AssertionError("unknown family accepted")
except ValueError:
    pass
"#
        );
        py.run(code, None, None).unwrap();
    });
}
