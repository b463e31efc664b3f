//! Drives the module through an embedded interpreter.

use pyo3::prelude::*;
use pyo3::types::PyDict;

fn corpus(rel: &str) -> String {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/corpus").join(rel).display().to_string()
}

fn with_module<F: FnOnce(Python<'_>, &Bound<'_, PyModule>)>(f: F) {
    Python::initialize();
    Python::attach(|py| {
        let m = PyModule::new(py, "riva").unwrap();
        riva::init_module(&m).unwrap();
        f(py, &m);
    });
}

#[test]
fn history_gates_on_distinct_tools() {
    with_module(|py, m| {
        let h = m.getattr("ToolHistory").unwrap().call1((2,)).unwrap();
        h.call_method1("add_goal", ("web-up",)).unwrap();
        h.call_method1("record", ("web-up", "exec")).unwrap();
        assert!(h.call_method1("record", ("web-up", "exec")).is_err());
        assert!(!h.call_method1("is_conclusive", ("web-up",)).unwrap().extract::<bool>().unwrap());
        h.call_method1("record", ("web-up", "get_logs")).unwrap();
        assert!(h.call_method1("is_conclusive", ("web-up",)).unwrap().extract::<bool>().unwrap());
        let d = h.call_method0("to_dict").unwrap();
        assert!(d.is_instance_of::<PyDict>());
        let err = m.getattr("ToolHistory").unwrap().call1((0,)).unwrap_err();
        assert!(err.is_instance_of::<pyo3::exceptions::PyValueError>(py));
    });
}

#[test]
fn scenario_runs_return_dicts() {
    with_module(|_py, m| {
        let s = m.getattr("Scenario").unwrap().call1((corpus("scenarios/s3_checkout_errors.json"),)).unwrap();
        let run = s.call_method1("run", ("riva", 2, "get_logs", 1)).unwrap();
        let report = run.get_item("report").unwrap();
        assert!(report.get_item("success").unwrap().extract::<bool>().unwrap());
        assert!(s.call_method1("run", ("riva", 0)).is_err());
        assert!(s.call_method1("run", ("riva", 2, "disk")).is_err());
    });
}
