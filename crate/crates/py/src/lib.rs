//! Python bindings for `dynsurv`.
//!
//! Reports (evaluation, cross-validation) are returned as plain dicts built from
//! their JSON form.

use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use dynsurv_core::evaluation::{cross_validate, evaluate as evaluate_model, CvScheme, MetricConfig, Outcomes};
use dynsurv_core::fit::{bootstrap, FitSettings};
use dynsurv_core::io;
use dynsurv_core::prediction::{Method, PredictionQuery, Predictor, SurvivalPrediction};
use dynsurv_core::simulation::{simulate_dataset, Scenario, SimulationConfig};
use dynsurv_core::{ArchimedeanCopula, Dataset, Family, FittedJointModel, ObservedRecord, PredictionError};

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn runtime_err(e: impl std::fmt::Display) -> PyErr {
    PyRuntimeError::new_err(e.to_string())
}

fn family(name: &str) -> PyResult<Family> {
    Family::parse(name).ok_or_else(|| PyValueError::new_err(format!("unknown family '{name}'")))
}

fn methods(names: &[String], num_events: usize) -> PyResult<Vec<Method>> {
    let mut out = Vec::new();
    for n in names {
        if n.eq_ignore_ascii_case("all") {
            out.extend(Method::all(num_events));
        } else {
            out.push(Method::parse(n).ok_or_else(|| PyValueError::new_err(format!("unknown method '{n}'")))?);
        }
    }
    Ok(out)
}

fn json_to_py<'py, T: serde::Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(runtime_err)?;
    py.import("json")?.call_method1("loads", (text,))
}

/// Archimedean copula with generator `phi` and inverse generator `psi`.
#[pyclass(name = "Copula", frozen)]
struct PyCopula(ArchimedeanCopula);

#[pymethods]
impl PyCopula {
    #[new]
    fn new(family_name: &str, theta: f64) -> PyResult<Self> {
        Ok(PyCopula(ArchimedeanCopula::new(family(family_name)?, theta).map_err(value_err)?))
    }

    #[staticmethod]
    fn from_tau(family_name: &str, tau: f64) -> PyResult<Self> {
        Ok(PyCopula(ArchimedeanCopula::from_tau(family(family_name)?, tau).map_err(value_err)?))
    }

    #[getter]
    fn family(&self) -> &'static str {
        self.0.family().name()
    }

    #[getter]
    fn theta(&self) -> f64 {
        self.0.theta()
    }

    #[getter]
    fn tau(&self) -> f64 {
        self.0.tau()
    }

    fn phi(&self, u: f64) -> f64 {
        self.0.phi(u)
    }

    fn psi(&self, t: f64) -> f64 {
        self.0.psi(t)
    }

    /// d-th derivative of `psi` at `t`.
    fn psi_deriv(&self, t: f64, d: usize) -> PyResult<f64> {
        self.0.psi_deriv(t, d).map_err(value_err)
    }

    fn __repr__(&self) -> String {
        format!("Copula('{}', theta={})", self.0.family(), self.0.theta())
    }
}

/// Observed records: per subject, event times and indicators, follow-up and death flag.
#[pyclass(name = "Dataset", frozen)]
struct PyDataset(Dataset);

#[pymethods]
impl PyDataset {
    #[new]
    #[pyo3(signature = (times, events, followup, death, ids=None))]
    fn new(
        times: Vec<Vec<f64>>,
        events: Vec<Vec<bool>>,
        followup: Vec<f64>,
        death: Vec<bool>,
        ids: Option<Vec<String>>,
    ) -> PyResult<Self> {
        let n = followup.len();
        if times.len() != n || events.len() != n || death.len() != n || ids.as_ref().is_some_and(|i| i.len() != n) {
            return Err(PyValueError::new_err("all columns must have one entry per subject"));
        }
        let records = (0..n)
            .map(|i| ObservedRecord {
                id: ids.as_ref().map_or_else(|| (i + 1).to_string(), |v| v[i].clone()),
                times: times[i].clone(),
                events: events[i].clone(),
                followup: followup[i],
                death: death[i],
            })
            .collect();
        Ok(PyDataset(Dataset::new(records).map_err(value_err)?))
    }

    #[staticmethod]
    fn read_csv(path: &str) -> PyResult<Self> {
        let file = std::fs::File::open(path).map_err(|e| PyIOError::new_err(e.to_string()))?;
        Ok(PyDataset(io::read_dataset(file).map_err(value_err)?))
    }

    fn to_csv(&self) -> PyResult<String> {
        let mut buf = Vec::new();
        io::write_dataset(&mut buf, &self.0, None).map_err(runtime_err)?;
        String::from_utf8(buf).map_err(runtime_err)
    }

    #[getter]
    fn num_events(&self) -> usize {
        self.0.num_events()
    }

    #[getter]
    fn followup(&self) -> Vec<f64> {
        self.0.followups()
    }

    #[getter]
    fn death(&self) -> Vec<bool> {
        self.0.deaths()
    }

    fn event_times(&self, k: usize) -> PyResult<Vec<f64>> {
        self.check_event(k)?;
        Ok(self.0.event_times(k))
    }

    fn event_flags(&self, k: usize) -> PyResult<Vec<bool>> {
        self.check_event(k)?;
        Ok(self.0.event_flags(k))
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }
}

impl PyDataset {
    fn check_event(&self, k: usize) -> PyResult<()> {
        if k >= self.0.num_events() {
            return Err(PyValueError::new_err(format!("event index {k} out of range")));
        }
        Ok(())
    }
}

/// A conditional survival curve after the landmark.
#[pyclass(name = "Prediction", frozen)]
struct PyPrediction(SurvivalPrediction);

#[pymethods]
impl PyPrediction {
    #[getter]
    fn method(&self) -> String {
        self.0.method.to_string()
    }

    #[getter]
    fn landmark(&self) -> f64 {
        self.0.landmark
    }

    #[getter]
    fn times(&self) -> Vec<f64> {
        self.0.times.clone()
    }

    #[getter]
    fn values(&self) -> Vec<f64> {
        self.0.values.clone()
    }

    fn value_at(&self, t: f64) -> f64 {
        self.0.value_at(t)
    }

    /// Conditional mean survival time restricted at `restriction`.
    fn cmst(&self, restriction: f64) -> f64 {
        self.0.cmst(restriction)
    }

    /// Conditional quantile survival time; None when the curve never drops that far.
    fn cqst(&self, level: f64) -> PyResult<Option<f64>> {
        match self.0.cqst(level) {
            Ok(t) => Ok(Some(t)),
            Err(PredictionError::NotIdentified { .. }) => Ok(None),
            Err(e) => Err(value_err(e)),
        }
    }

    /// 95% prediction interval as (lower, upper, upper_censored).
    fn interval(&self, restriction: f64) -> PyResult<(f64, f64, bool)> {
        let i = self.0.interval(restriction).map_err(value_err)?;
        Ok((i.lower, i.upper, i.upper_censored))
    }
}

/// A fitted joint model.
#[pyclass(name = "Model", frozen)]
struct PyModel(FittedJointModel);

#[pymethods]
impl PyModel {
    #[getter]
    fn family(&self) -> &'static str {
        self.0.family.name()
    }

    #[getter]
    fn num_events(&self) -> usize {
        self.0.num_events
    }

    /// Kendall's tau among intermediate events, None for a single event.
    #[getter]
    fn tau_alpha(&self) -> Option<f64> {
        self.0.alpha.as_ref().map(|a| a.tau)
    }

    /// Kendall's tau between each intermediate event and the terminal event.
    #[getter]
    fn tau_thetas(&self) -> Vec<f64> {
        self.0.associations.iter().map(|a| a.tau).collect()
    }

    #[getter]
    fn loglik(&self) -> f64 {
        self.0.loglik
    }

    #[getter]
    fn aic(&self) -> f64 {
        self.0.aic
    }

    #[getter]
    fn horizon(&self) -> f64 {
        self.0.horizon
    }

    #[getter]
    fn warnings(&self) -> Vec<String> {
        self.0.diagnostics.warnings.clone()
    }

    /// Bootstrap percentile intervals as a dict, None when not computed.
    fn bootstrap_intervals<'py>(&self, py: Python<'py>) -> PyResult<Option<Bound<'py, PyDict>>> {
        let Some(b) = &self.0.bootstrap else { return Ok(None) };
        let d = PyDict::new(py);
        d.set_item("replicates", b.replicates)?;
        d.set_item("failed", b.failed)?;
        d.set_item("tau_alpha", b.tau_alpha.as_ref().map(|i| (i.lower, i.upper)))?;
        let thetas: Vec<(f64, f64)> = b.tau_thetas.iter().map(|i| (i.lower, i.upper)).collect();
        d.set_item("tau_thetas", thetas)?;
        Ok(Some(d))
    }

    /// Predicts survival after the landmark given observed events `{k: time}`
    /// (zero-based k). Pk methods whose event is missing fall back to P0.
    #[pyo3(signature = (events, method="dp", restriction=None))]
    fn predict(&self, events: Vec<(usize, f64)>, method: &str, restriction: Option<f64>) -> PyResult<PyPrediction> {
        let m = Method::parse(method).ok_or_else(|| PyValueError::new_err(format!("unknown method '{method}'")))?;
        let query = PredictionQuery::new("query", events);
        let (p, _) = Predictor::from_model(&self.0)
            .predict_or_p0(&query, m, restriction)
            .map_err(value_err)?;
        Ok(PyPrediction(p))
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string(&self.0).map_err(runtime_err)
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(PyModel(serde_json::from_str(text).map_err(value_err)?))
    }
}

/// Fits the joint model with default settings.
#[pyfunction]
#[pyo3(signature = (data, family="frank", bootstrap_replicates=None, seed=1))]
fn fit(data: &PyDataset, family: &str, bootstrap_replicates: Option<usize>, seed: u64) -> PyResult<PyModel> {
    let fam = self::family(family)?;
    let settings = FitSettings::default();
    let mut model = dynsurv_core::fit_joint_model(&data.0, fam, &settings).map_err(runtime_err)?;
    if let Some(b) = bootstrap_replicates {
        model.bootstrap = Some(bootstrap(&data.0, fam, &settings, b, seed).map_err(runtime_err)?);
    }
    Ok(PyModel(model))
}

/// Simulates a built-in scenario ("ex1", "ex2", "ex3"). Returns
/// `(train, test, test_deaths)`, where `test_deaths` are the latent terminal times.
#[pyfunction]
#[pyo3(signature = (scenario, k=3, tau_alpha=0.5, censor_upper=20.0, n_train=100, n_test=None, seed=1, family="frank"))]
#[allow(clippy::too_many_arguments)]
fn simulate(
    scenario: &str,
    k: usize,
    tau_alpha: f64,
    censor_upper: f64,
    n_train: usize,
    n_test: Option<usize>,
    seed: u64,
    family: &str,
) -> PyResult<(PyDataset, PyDataset, Vec<f64>)> {
    let sc = Scenario::parse(scenario).ok_or_else(|| PyValueError::new_err(format!("unknown scenario '{scenario}'")))?;
    let mut cfg = SimulationConfig::preset(sc, k, tau_alpha, censor_upper, n_train, seed);
    cfg.family = self::family(family)?;
    if let Some(n) = n_test {
        cfg.n_test = n;
    }
    let sim = simulate_dataset(&cfg).map_err(value_err)?;
    let deaths = sim.test_latent.iter().map(|l| l.death).collect();
    Ok((PyDataset(sim.train), PyDataset(sim.test), deaths))
}

/// Scores `methods` on `data`. With `deaths` (latent terminal times) the point
/// errors and coverage use the truth instead of censoring weights.
#[pyfunction]
#[pyo3(signature = (model, data, deaths=None, methods=vec!["all".to_string()], restriction=None))]
fn evaluate<'py>(
    py: Python<'py>,
    model: &PyModel,
    data: &PyDataset,
    deaths: Option<Vec<f64>>,
    methods: Vec<String>,
    restriction: Option<f64>,
) -> PyResult<Bound<'py, PyAny>> {
    let config = MetricConfig { restriction, ..MetricConfig::default() };
    let mut outcomes = Outcomes::observed(data.0.records(), &model.0.censoring, config.ipcw);
    if let Some(d) = deaths {
        if d.len() != data.0.len() {
            return Err(PyValueError::new_err("deaths must have one entry per subject"));
        }
        outcomes = outcomes.with_oracle(&d);
    }
    let ms = self::methods(&methods, model.0.num_events)?;
    let report = evaluate_model(&Predictor::from_model(&model.0), data.0.records(), &outcomes, &ms, &config);
    json_to_py(py, &report)
}

/// K-fold cross-validation of fit plus prediction.
#[pyfunction]
#[pyo3(signature = (data, family="frank", folds=3, repeats=1, methods=vec!["all".to_string()], seed=1))]
fn crossval<'py>(
    py: Python<'py>,
    data: &PyDataset,
    family: &str,
    folds: usize,
    repeats: usize,
    methods: Vec<String>,
    seed: u64,
) -> PyResult<Bound<'py, PyAny>> {
    let scheme = CvScheme::KFold { folds, repeats };
    let ms = self::methods(&methods, data.0.num_events())?;
    let report = cross_validate(
        &data.0,
        self::family(family)?,
        &FitSettings::default(),
        &scheme,
        &ms,
        &MetricConfig::default(),
        seed,
    )
    .map_err(runtime_err)?;
    json_to_py(py, &report)
}

#[pymodule]
fn dynsurv(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyCopula>()?;
    m.add_class::<PyDataset>()?;
    m.add_class::<PyModel>()?;
    m.add_class::<PyPrediction>()?;
    m.add_function(wrap_pyfunction!(fit, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add_function(wrap_pyfunction!(crossval, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
