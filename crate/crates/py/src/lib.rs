//! Python bindings: run and judge scenarios, drive a session tick by tick,
//! and read the wire schema.

use std::path::PathBuf;

use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use teleop_core::log::{columns, RunLog};
use teleop_core::service::plot::export_plot_data as export_plots;
use teleop_core::service::wire::schema as wire_schema;
use teleop_core::service::{first_divergence, replay as replay_log, run_trace, Session as CoreSession, Trace};
use teleop_core::sim::{evaluate_scenario, Scenario};
use teleop_core::{Config, PilotInput};

create_exception!(teleop, TeleopError, PyException);

fn err(e: impl std::fmt::Display) -> PyErr {
    TeleopError::new_err(e.to_string())
}

fn load_config(path: Option<PathBuf>) -> PyResult<Config> {
    path.map_or_else(|| Ok(Config::default()), |p| Config::load(&p).map_err(err))
}

/// JSON value to native Python objects through the stdlib `json` module.
fn to_py<'py>(py: Python<'py>, v: &impl serde::Serialize) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(v).map_err(err)?;
    py.import("json")?.call_method1("loads", (text,))
}

fn from_py<T: serde::de::DeserializeOwned>(obj: &Bound<'_, PyAny>) -> PyResult<T> {
    let text: String = obj.py().import("json")?.call_method1("dumps", (obj,))?.extract()?;
    serde_json::from_str(&text).map_err(err)
}

/// Pilot input from a dict; missing keys default to zero and `P` modes.
fn pilot_input(obj: Option<&Bound<'_, PyAny>>) -> PyResult<PilotInput> {
    let Some(obj) = obj else {
        return Ok(PilotInput::default());
    };
    let mut base = serde_json::to_value(PilotInput::default()).map_err(err)?;
    let given: serde_json::Value = from_py(obj)?;
    let (Some(base_map), serde_json::Value::Object(given)) = (base.as_object_mut(), given) else {
        return Err(TeleopError::new_err("pilot input must be a dict"));
    };
    for (k, v) in given {
        if !base_map.contains_key(&k) {
            return Err(TeleopError::new_err(format!("unknown pilot input field `{k}`")));
        }
        base_map.insert(k, v);
    }
    serde_json::from_value(base).map_err(err)
}

/// Flat `key = value` listing of the default configuration.
#[pyfunction]
fn default_config() -> String {
    Config::default().to_toml_string()
}

/// Wire schema as a dict.
#[pyfunction]
fn schema(py: Python<'_>) -> PyResult<Bound<'_, PyAny>> {
    to_py(py, &wire_schema())
}

/// Run a scenario from a pilot trace and return its evaluation. The log is
/// written to `out` when given.
#[pyfunction]
#[pyo3(signature = (scenario, trace=None, config=None, out=None))]
fn run(
    py: Python<'_>,
    scenario: PathBuf,
    trace: Option<PathBuf>,
    config: Option<PathBuf>,
    out: Option<PathBuf>,
) -> PyResult<Bound<'_, PyAny>> {
    let cfg = load_config(config)?;
    let scenario = Scenario::load(&scenario).map_err(err)?;
    let trace_path = trace
        .or_else(|| scenario.trace.clone())
        .ok_or_else(|| TeleopError::new_err("scenario has no trace; pass one"))?;
    let trace = Trace::load(&trace_path).map_err(err)?;
    let log = py.detach(|| run_trace(&scenario, &trace, &cfg)).map_err(err)?;
    if let Some(out) = out {
        log.save(&out).map_err(err)?;
    }
    to_py(py, &evaluate_scenario(&log).map_err(err)?)
}

#[pyfunction]
fn evaluate(py: Python<'_>, log: PathBuf) -> PyResult<Bound<'_, PyAny>> {
    let log = RunLog::load(&log).map_err(err)?;
    to_py(py, &evaluate_scenario(&log).map_err(err)?)
}

/// Re-simulate a log. Returns None when identical, else `(row, column)` of
/// the first difference.
#[pyfunction]
fn replay(py: Python<'_>, log: PathBuf) -> PyResult<Option<(usize, String)>> {
    let original = RunLog::load(&log).map_err(err)?;
    let again = py.detach(|| replay_log(&original)).map_err(err)?;
    Ok(first_divergence(&original, &again))
}

#[pyfunction]
fn export_plot_data(log: PathBuf, out: PathBuf) -> PyResult<Vec<PathBuf>> {
    export_plots(&RunLog::load(&log).map_err(err)?, &out).map_err(err)
}

/// One session stepped from Python.
#[pyclass(module = "teleop")]
struct Session {
    inner: CoreSession,
}

impl Session {
    fn row<'py>(&self, py: Python<'py>, values: Vec<f64>) -> PyResult<Bound<'py, PyDict>> {
        let d = PyDict::new(py);
        for (k, v) in self.inner.log.columns.iter().zip(values) {
            d.set_item(k, v)?;
        }
        Ok(d)
    }
}

#[pymethods]
impl Session {
    #[new]
    #[pyo3(signature = (scenario, config=None, first_input=None))]
    fn new(scenario: PathBuf, config: Option<PathBuf>, first_input: Option<&Bound<'_, PyAny>>) -> PyResult<Self> {
        let cfg = load_config(config)?;
        let scenario = Scenario::load(&scenario).map_err(err)?;
        let first = pilot_input(first_input)?;
        Ok(Self {
            inner: CoreSession::new(&scenario, &cfg, &first).map_err(err)?,
        })
    }

    /// Advance one tick; returns the logged row as a dict.
    #[pyo3(signature = (input=None))]
    fn step<'py>(&mut self, py: Python<'py>, input: Option<&Bound<'py, PyAny>>) -> PyResult<Bound<'py, PyDict>> {
        let u = pilot_input(input)?;
        let record = self.inner.step(u).map_err(err)?;
        self.row(py, record.values())
    }

    /// Zero-torque fault tick; ends the session.
    fn safe_stop<'py>(&mut self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let record = self.inner.safe_stop().map_err(err)?;
        self.row(py, record.values())
    }

    #[getter]
    fn done(&self) -> bool {
        self.inner.done()
    }

    #[getter]
    fn tick(&self) -> u64 {
        self.inner.tick
    }

    #[getter]
    fn t(&self) -> f64 {
        self.inner.t()
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.inner.log.save(&path).map_err(err)
    }

    fn evaluate<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &evaluate_scenario(&self.inner.log).map_err(err)?)
    }
}

/// Log column names in order.
#[pyfunction(name = "columns")]
fn log_columns() -> Vec<String> {
    columns()
}

#[pymodule]
fn teleop(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("TeleopError", m.py().get_type::<TeleopError>())?;
    m.add_class::<Session>()?;
    m.add_function(wrap_pyfunction!(default_config, m)?)?;
    m.add_function(wrap_pyfunction!(schema, m)?)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add_function(wrap_pyfunction!(replay, m)?)?;
    m.add_function(wrap_pyfunction!(export_plot_data, m)?)?;
    m.add_function(wrap_pyfunction!(log_columns, m)?)?;
    Ok(())
}
