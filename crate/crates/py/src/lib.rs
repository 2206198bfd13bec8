use pyo3::prelude::*; #[pymodule] fn surfns_py(_m: &Bound<PyModule>) -> PyResult<()> { Ok(()) }
