//! Python bindings: power and projection math, trace statistics, the quota
//! cap and whole simulations driven by JSON config plus CSV text.

use engine::fleet::{Fleet, Projection, ServerSpec as Spec};
use engine::metrics::summarize;
use engine::policy::{emissions_rate as rate, max_quota_for_target as cap};
use engine::sim::{parse_config, run, write_records_csv};
use engine::traces::{compute_stats as stats, parse_carbon_traces, parse_workload_traces, ParseOptions};
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

#[pyclass(name = "ServerSpec", module = "carbon_containers", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyServerSpec {
    inner: Spec,
}

#[pymethods]
impl PyServerSpec {
    #[new]
    #[pyo3(signature = (id, capacity_multiple, cores, base_power_w, peak_power_w, memory_gb))]
    fn new(id: &str, capacity_multiple: f64, cores: u32, base_power_w: f64, peak_power_w: f64, memory_gb: f64) -> PyResult<Self> {
        let inner = Spec::new(id, capacity_multiple, cores, base_power_w, peak_power_w, memory_gb).map_err(value_err)?;
        Ok(PyServerSpec { inner })
    }

    #[getter]
    fn id(&self) -> &str {
        &self.inner.id
    }

    #[getter]
    fn capacity_multiple(&self) -> f64 {
        self.inner.capacity_multiple
    }

    #[getter]
    fn cores(&self) -> u32 {
        self.inner.cores
    }

    #[getter]
    fn base_power_w(&self) -> f64 {
        self.inner.base_power_w
    }

    #[getter]
    fn peak_power_w(&self) -> f64 {
        self.inner.peak_power_w
    }

    #[getter]
    fn memory_gb(&self) -> f64 {
        self.inner.memory_gb
    }

    fn power(&self, utilization: f64) -> PyResult<f64> {
        self.inner.power(utilization).map_err(value_err)
    }

    #[pyo3(signature = (demand, quota = 1.0))]
    fn project<'py>(&self, py: Python<'py>, demand: f64, quota: f64) -> PyResult<Bound<'py, PyDict>> {
        projection_dict(py, &self.inner.project(demand, quota).map_err(value_err)?)
    }

    #[pyo3(signature = (observed_utilization, quota = 1.0))]
    fn infer_demand(&self, observed_utilization: f64, quota: f64) -> PyResult<f64> {
        self.inner.infer_demand(observed_utilization, quota).map_err(value_err)
    }

    fn __repr__(&self) -> String {
        let s = &self.inner;
        format!(
            "ServerSpec(id={:?}, capacity_multiple={}, cores={}, base_power_w={}, peak_power_w={}, memory_gb={})",
            s.id, s.capacity_multiple, s.cores, s.base_power_w, s.peak_power_w, s.memory_gb
        )
    }
}

fn projection_dict<'py>(py: Python<'py>, p: &Projection) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("server_id", &p.server_id)?;
    d.set_item("utilization", p.utilization)?;
    d.set_item("granted", p.granted)?;
    d.set_item("power_w", p.power_w)?;
    d.set_item("throttle_baseline_units", p.throttle_baseline_units)?;
    Ok(d)
}

/// Watts drawn by `server` at `utilization` in [0, 1].
#[pyfunction]
fn power(server: &PyServerSpec, utilization: f64) -> PyResult<f64> {
    server.power(utilization)
}

/// Demand in baseline units projected onto `server` under `quota`.
#[pyfunction]
#[pyo3(signature = (demand, server, quota = 1.0))]
fn project<'py>(py: Python<'py>, demand: f64, server: &PyServerSpec, quota: f64) -> PyResult<Bound<'py, PyDict>> {
    server.project(py, demand, quota)
}

#[pyfunction]
#[pyo3(signature = (observed_utilization, server, quota = 1.0))]
fn infer_demand(observed_utilization: f64, server: &PyServerSpec, quota: f64) -> PyResult<f64> {
    server.infer_demand(observed_utilization, quota)
}

/// Mean, population standard deviation and coefficient of variation.
#[pyfunction]
fn compute_stats<'py>(py: Python<'py>, series: Vec<f64>) -> PyResult<Bound<'py, PyDict>> {
    let s = stats(&series).map_err(value_err)?;
    let d = PyDict::new(py);
    d.set_item("mean", s.mean)?;
    d.set_item("stddev", s.stddev)?;
    d.set_item("cov", s.cov)?;
    Ok(d)
}

/// g/hr for a draw in watts at an intensity in g/kWh.
#[pyfunction]
fn emissions_rate(power_w: f64, intensity: f64) -> f64 {
    rate(power_w, intensity)
}

#[pyfunction]
#[pyo3(signature = (server, intensity, c_target, epsilon = 0.05))]
fn max_quota_for_target(server: &PyServerSpec, intensity: f64, c_target: f64, epsilon: f64) -> f64 {
    cap(&server.inner, intensity, c_target, epsilon)
}

/// The standard fleet, 0.25x to 4x of a 100/200 W baseline.
#[pyfunction]
fn default_fleet() -> Vec<PyServerSpec> {
    Fleet::standard()
        .servers()
        .iter()
        .map(|s| PyServerSpec { inner: s.clone() })
        .collect()
}

/// Runs one job against one region. Returns `{"summary": dict, "records_csv": str}`.
#[pyfunction]
#[pyo3(signature = (config_json, workload_csv, carbon_csv, job, region = None))]
fn simulate<'py>(
    py: Python<'py>,
    config_json: &str,
    workload_csv: &str,
    carbon_csv: &str,
    job: &str,
    region: Option<&str>,
) -> PyResult<Bound<'py, PyDict>> {
    let cfg = parse_config(config_json).map_err(value_err)?;
    let trace = parse_workload_traces(workload_csv.as_bytes(), ParseOptions::default())
        .map_err(value_err)?
        .into_iter()
        .find(|w| w.job_id == job)
        .ok_or_else(|| PyValueError::new_err(format!("job `{job}` not in workload")))?;
    let carbon = parse_carbon_traces(carbon_csv.as_bytes(), ParseOptions::default()).map_err(value_err)?;
    let ct = match region {
        Some(r) => carbon
            .into_iter()
            .find(|t| t.region == r)
            .ok_or_else(|| PyValueError::new_err(format!("region `{r}` not in carbon trace")))?,
        None if carbon.len() == 1 => carbon.into_iter().next().unwrap(),
        None => return Err(PyValueError::new_err("carbon trace holds several regions; pass region")),
    };
    let result = py.detach(|| run(&trace, &ct, &cfg)).map_err(value_err)?;
    let summary = summarize(&result, &cfg).map_err(value_err)?;
    let mut records = Vec::new();
    write_records_csv(&result, &mut records).map_err(value_err)?;

    let json = py.import("json")?;
    let out = PyDict::new(py);
    out.set_item("summary", json.call_method1("loads", (summary.to_json().to_string(),))?)?;
    out.set_item("records_csv", String::from_utf8(records).map_err(value_err)?)?;
    Ok(out)
}

#[pymodule]
fn carbon_containers(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyServerSpec>()?;
    m.add_function(wrap_pyfunction!(power, m)?)?;
    m.add_function(wrap_pyfunction!(project, m)?)?;
    m.add_function(wrap_pyfunction!(infer_demand, m)?)?;
    m.add_function(wrap_pyfunction!(compute_stats, m)?)?;
    m.add_function(wrap_pyfunction!(emissions_rate, m)?)?;
    m.add_function(wrap_pyfunction!(max_quota_for_target, m)?)?;
    m.add_function(wrap_pyfunction!(default_fleet, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    Ok(())
}
