use pyo3::prelude::*;
use pyo3::types::{PyDict, PyModule};

fn with_module<F: FnOnce(&Bound<'_, PyModule>)>(f: F) {
    Python::initialize();
    Python::attach(|py| {
        let m = PyModule::new(py, "lsynth").unwrap();
        lsynth_py::lsynth_module(&m).unwrap();
        f(&m);
    });
}

#[test]
fn metrics_through_python() {
    with_module(|m| {
        let (mae, sd, r2, _, rmse): (f64, f64, f64, Option<f64>, f64) =
            m.getattr("evaluate_counts").unwrap().call1((vec![4.0, 5.0, 9.0], vec![3.0, 5.0, 7.0])).unwrap().extract().unwrap();
        assert_eq!((mae, sd, rmse), (1.0, (2.0f64 / 3.0).sqrt(), (5.0f64 / 3.0).sqrt()));
        assert_eq!(r2, 0.375);
        let cell: String = m.getattr("table_cell").unwrap().call1((vec![1.0, 2.0], vec![1.0, 2.0])).unwrap().extract().unwrap();
        assert_eq!(cell, "0.00 (0.00, 1.00)");
        assert!(m.getattr("evaluate_counts").unwrap().call1((Vec::<f64>::new(), Vec::<f64>::new())).is_err());
    });
}

#[test]
fn simulation_through_python() {
    with_module(|m| {
        let py = m.py();
        let kw = PyDict::new(py);
        kw.set_item("resolution", 64).unwrap();
        let a = m.getattr("render_plant").unwrap().call((("maize"), 5u64, 18u32), Some(&kw)).unwrap();
        let b = m.getattr("render_plant").unwrap().call((("maize"), 5u64, 18u32), Some(&kw)).unwrap();
        let (pa, ca): (Vec<u8>, u32) = a.extract().unwrap();
        let (pb, cb): (Vec<u8>, u32) = b.extract().unwrap();
        assert_eq!((pa, ca), (pb, cb));
        let err = m.getattr("simulate").unwrap().call1(("sunflower", 1u64)).unwrap_err();
        assert!(err.is_instance_of::<pyo3::exceptions::PyKeyError>(py));
        let names: Vec<String> = m.getattr("preset_names").unwrap().call0().unwrap().extract().unwrap();
        assert_eq!(names.len(), 6);
    });
}
