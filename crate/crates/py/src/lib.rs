//! Python bindings: configs, the pipeline verbs, stored models and metrics.

use std::path::PathBuf;

use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;

use hyena_core::evaluation;
use hyena_core::linear;
use hyena_core::pipeline::commands::parse_date;
use hyena_core::pipeline::{self as pl, exit_code, NamedModel};
use hyena_core::series::DayRange;

create_exception!(hyena, HyenaError, PyException);
create_exception!(hyena, ConfigError, HyenaError);
create_exception!(hyena, DataError, HyenaError);
create_exception!(hyena, ArtifactError, HyenaError);

fn to_py(e: hyena_core::Error) -> PyErr {
    let msg = e.to_string();
    match exit_code(&e) {
        2 => ConfigError::new_err(msg),
        3 => DataError::new_err(msg),
        4 => ArtifactError::new_err(msg),
        _ => HyenaError::new_err(msg),
    }
}

fn range(start: &str, end: Option<&str>) -> PyResult<DayRange> {
    let first = parse_date(start).map_err(to_py)?;
    let last = match end {
        Some(e) => parse_date(e).map_err(to_py)?,
        None => first,
    };
    DayRange::new(first, last).map_err(to_py)
}

/// A pipeline configuration (the TOML file format).
#[pyclass(name = "PipelineConfig", from_py_object)]
#[derive(Clone)]
struct PyConfig {
    inner: pl::PipelineConfig,
}

#[pymethods]
impl PyConfig {
    /// Built-in defaults: synthetic data, all five models.
    #[new]
    #[pyo3(signature = (seed=None, models=None))]
    fn new(seed: Option<u64>, models: Option<Vec<String>>) -> PyResult<Self> {
        let mut inner = pl::PipelineConfig::default();
        if let Some(s) = seed {
            inner.seed = s;
        }
        if let Some(m) = models {
            inner.models = m;
        }
        inner.validate().map_err(to_py)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn from_toml(text: &str) -> PyResult<Self> {
        Ok(Self {
            inner: pl::PipelineConfig::from_toml_str(text).map_err(to_py)?,
        })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Self {
            inner: pl::PipelineConfig::load(&path).map_err(to_py)?,
        })
    }

    fn to_toml(&self) -> PyResult<String> {
        self.inner.to_toml_string().map_err(to_py)
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.inner.seed
    }

    #[setter]
    fn set_seed(&mut self, seed: u64) {
        self.inner.seed = seed;
    }

    #[getter]
    fn models(&self) -> Vec<String> {
        self.inner.models.clone()
    }

    #[setter]
    fn set_models(&mut self, models: Vec<String>) -> PyResult<()> {
        let mut c = self.inner.clone();
        c.models = models;
        c.validate().map_err(to_py)?;
        self.inner = c;
        Ok(())
    }

    /// `{"stage1": (first, last), "stage2": ..., "test": ...}` as ISO dates.
    fn ranges(&self) -> PyResult<Vec<(String, (String, String))>> {
        let r = self.inner.resolve_ranges().map_err(to_py)?;
        Ok([("stage1", r.stage1), ("stage2", r.stage2), ("test", r.test)]
            .into_iter()
            .map(|(k, d)| (k.to_string(), (d.first.to_string(), d.last.to_string())))
            .collect())
    }

    /// sha256 of the settings that determine the trained models.
    fn fingerprint(&self) -> PyResult<String> {
        self.inner.fingerprint().map_err(to_py)
    }

    fn __repr__(&self) -> String {
        format!("PipelineConfig(seed={}, models={:?})", self.inner.seed, self.inner.models)
    }
}

/// A trained model read from an artifact.
#[pyclass(name = "Model")]
struct PyModel {
    inner: NamedModel,
    fingerprint: String,
}

#[pymethods]
impl PyModel {
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        let (inner, fingerprint) = pl::load_model(&path).map_err(to_py)?;
        Ok(Self { inner, fingerprint })
    }

    #[getter]
    fn name(&self) -> String {
        self.inner.name.clone()
    }

    #[getter]
    fn fingerprint(&self) -> String {
        self.fingerprint.clone()
    }

    /// Last time point (exclusive) of load the model was trained on, as
    /// `(date, period)`.
    #[getter]
    fn trained_through(&self) -> (String, u8) {
        let t = self.inner.trained_through;
        (t.date.to_string(), t.period)
    }

    /// Half-hourly forecasts for `start..=end` using the config's data.
    /// Load inside the range is never read.
    #[pyo3(signature = (config, start, end=None))]
    fn predict(&self, config: &PyConfig, start: &str, end: Option<&str>) -> PyResult<Vec<f64>> {
        let r = range(start, end)?;
        let data = config.inner.load_data().map_err(to_py)?;
        let visible = data.with_load_before(r.start()).map_err(to_py)?;
        self.inner.predict(&visible, r).map_err(to_py)
    }

    /// Optimizer history for the neural models, `None` otherwise.
    fn train_losses(&self) -> Option<(Vec<f64>, Vec<f64>, usize)> {
        self.inner
            .train_report()
            .map(|r| (r.train_loss.clone(), r.validation_loss.clone(), r.best_epoch))
    }

    fn __repr__(&self) -> String {
        format!("Model(name={:?})", self.inner.name)
    }
}

/// Fit every configured model; returns the trained model names.
#[pyfunction]
fn train(py: Python<'_>, config: &PyConfig, out: PathBuf) -> PyResult<Vec<String>> {
    let cfg = config.inner.clone();
    let models = py.detach(|| pl::cmd_train(&cfg, &out)).map_err(to_py)?;
    Ok(models.into_iter().map(|m| m.name).collect())
}

/// Backtest the stored models; returns `(model, mape, rmse)` rows.
#[pyfunction]
fn evaluate(py: Python<'_>, config: &PyConfig, out: PathBuf) -> PyResult<Vec<(String, f64, f64)>> {
    let cfg = config.inner.clone();
    let report = py.detach(|| pl::cmd_evaluate(&cfg, &out)).map_err(to_py)?;
    Ok(report.models.into_iter().map(|m| (m.model, m.mape, m.rmse)).collect())
}

/// Day-ahead forecasts from one artifact, also written to `out_file`.
#[pyfunction]
#[pyo3(signature = (config, artifact, out_file, start, end=None))]
fn forecast(
    config: &PyConfig,
    artifact: PathBuf,
    out_file: PathBuf,
    start: &str,
    end: Option<&str>,
) -> PyResult<Vec<f64>> {
    let r = range(start, end)?;
    pl::cmd_forecast(&config.inner, &artifact, r, &out_file).map_err(to_py)
}

/// Write the configured synthetic dataset as CSV files under `out`.
#[pyfunction]
fn synth(config: &PyConfig, out: PathBuf) -> PyResult<()> {
    pl::cmd_synth(&config.inner, &out).map_err(to_py)
}

/// Stage-2 feature importance, ranked: `(feature, importance, selected)`.
#[pyfunction]
fn importance(config: &PyConfig, out: PathBuf) -> PyResult<Vec<(String, f64, bool)>> {
    let sc = pl::cmd_importance(&config.inner, &out).map_err(to_py)?;
    Ok(sc
        .importance
        .ranked()
        .into_iter()
        .map(|(n, v)| {
            let sel = sc.selected.contains(&n);
            (n, v, sel)
        })
        .collect())
}

#[pyfunction]
fn mape(actual: Vec<f64>, forecast: Vec<f64>) -> PyResult<f64> {
    evaluation::mape(&actual, &forecast).map_err(to_py)
}

#[pyfunction]
fn rmse(actual: Vec<f64>, forecast: Vec<f64>) -> PyResult<f64> {
    evaluation::rmse(&actual, &forecast).map_err(to_py)
}

/// `ε = ŷ − y`.
#[pyfunction]
fn residual(yhat: Vec<f64>, y: Vec<f64>) -> PyResult<Vec<f64>> {
    linear::residual(&yhat, &y).map_err(to_py)
}

/// `ŷ − ε̂`.
#[pyfunction]
fn recompose(yhat: Vec<f64>, eps_hat: Vec<f64>) -> PyResult<Vec<f64>> {
    linear::recompose(&yhat, &eps_hat).map_err(to_py)
}

#[pymodule]
fn hyena(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyConfig>()?;
    m.add_class::<PyModel>()?;
    m.add_function(wrap_pyfunction!(train, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add_function(wrap_pyfunction!(forecast, m)?)?;
    m.add_function(wrap_pyfunction!(synth, m)?)?;
    m.add_function(wrap_pyfunction!(importance, m)?)?;
    m.add_function(wrap_pyfunction!(mape, m)?)?;
    m.add_function(wrap_pyfunction!(rmse, m)?)?;
    m.add_function(wrap_pyfunction!(residual, m)?)?;
    m.add_function(wrap_pyfunction!(recompose, m)?)?;
    let py = m.py();
    m.add("HyenaError", py.get_type::<HyenaError>())?;
    m.add("ConfigError", py.get_type::<ConfigError>())?;
    m.add("DataError", py.get_type::<DataError>())?;
    m.add("ArtifactError", py.get_type::<ArtifactError>())?;
    Ok(())
}
