//! Python bindings. Structured results cross the boundary as JSON and come
//! back as plain dicts and lists.

use std::path::PathBuf;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use riva_core::agents::{Solution, TaskType};
use riva_core::harness::{
    self, evaluate as run_suite, AgentKind, BackendChoice, BackendFactory, EvalOptions, FaultCondition, RunSpec,
    Scenario as CoreScenario, Suite,
};
use riva_core::history::{GoalOrigin, ToolCall, ToolExecutionRecord, ToolHistory as CoreHistory};
use riva_core::spec::{self, PropertyId, Scalar};

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn from_json(py: Python<'_>, text: &str) -> PyResult<Py<PyAny>> {
    Ok(py.import("json")?.call_method1("loads", (text,))?.unbind())
}

fn to_json(py: Python<'_>, obj: &Bound<'_, PyAny>) -> PyResult<String> {
    py.import("json")?.call_method1("dumps", (obj,))?.extract()
}

fn backend(selector: &str) -> PyResult<BackendFactory> {
    let choice = BackendChoice::parse(selector, "gpt-oss:120b", None, 0.0).map_err(value_err)?;
    BackendFactory::new(choice).map_err(value_err)
}

/// Parses a specification document into a dict.
#[pyfunction]
fn parse_spec(py: Python<'_>, text: &str) -> PyResult<Py<PyAny>> {
    let s = spec::parse_spec(text).map_err(value_err)?;
    from_json(py, &serde_json::to_string(&s).expect("spec serializes"))
}

/// Scores an answer against a ground-truth dict as returned by
/// `Scenario.ground_truth()`.
#[pyfunction]
#[pyo3(signature = (task_type, answer, ground_truth, aliases = Vec::new()))]
fn score(
    py: Python<'_>,
    task_type: &str,
    answer: Option<String>,
    ground_truth: &Bound<'_, PyAny>,
    aliases: Vec<String>,
) -> PyResult<bool> {
    let task: TaskType = serde_json::from_value(serde_json::Value::String(task_type.into())).map_err(value_err)?;
    let truth = serde_json::from_str(&to_json(py, ground_truth)?).map_err(value_err)?;
    let solution = answer.map(|answer| Solution { task_type: task, answer });
    Ok(harness::score(task, solution.as_ref(), &truth, &aliases))
}

/// Runs a whole suite and returns the aggregate report as a dict.
#[pyfunction]
#[pyo3(signature = (suite_path, backend = "scripted", workers = 1, out_dir = None))]
fn evaluate(
    py: Python<'_>,
    suite_path: PathBuf,
    backend: &str,
    workers: usize,
    out_dir: Option<PathBuf>,
) -> PyResult<Py<PyAny>> {
    let suite = Suite::load(&suite_path).map_err(value_err)?;
    let factory = self::backend(backend)?;
    let opts = EvalOptions { workers, out_dir, record_exploratory: false };
    let report = py
        .detach(|| run_suite(&suite, &factory, &opts))
        .map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    from_json(py, &report.to_json())
}

/// A loaded scenario file.
#[pyclass(frozen)]
struct Scenario {
    inner: CoreScenario,
}

#[pymethods]
impl Scenario {
    #[new]
    fn new(path: PathBuf) -> PyResult<Self> {
        Ok(Self { inner: CoreScenario::load(&path).map_err(value_err)? })
    }

    #[getter]
    fn name(&self) -> &str {
        self.inner.name()
    }

    #[getter]
    fn task_type(&self) -> String {
        self.inner.file.task_type.to_string()
    }

    fn ground_truth(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        let env = self.inner.environment(self.inner.file.seed).map_err(value_err)?;
        from_json(py, &serde_json::to_string(&self.inner.ground_truth(&env)).expect("truth serializes"))
    }

    /// `{property: [tool, ...]}` for the surfaces this scenario exposes.
    fn available_tools(&self) -> Vec<(String, Vec<String>)> {
        self.inner.available_tools()
    }

    /// Runs one agent once and returns `{"report", "trajectory", "history"}`.
    #[allow(clippy::too_many_arguments)]
    #[pyo3(signature = (agent = "riva", k = 2, fault = "none", seed = None, max_steps = 45, backend = "scripted"))]
    fn run(
        &self,
        py: Python<'_>,
        agent: &str,
        k: usize,
        fault: &str,
        seed: Option<u64>,
        max_steps: usize,
        backend: &str,
    ) -> PyResult<Py<PyAny>> {
        if k == 0 {
            return Err(PyValueError::new_err("k must be ≥ 1"));
        }
        let agent = match agent.parse::<AgentKind>().map_err(value_err)? {
            AgentKind::Riva { .. } => AgentKind::Riva { k },
            other => other,
        };
        let condition: FaultCondition = fault.parse().map_err(value_err)?;
        let factory = self::backend(backend)?;
        let chat = factory.for_scenario(&self.inner).map_err(value_err)?;
        let spec = RunSpec {
            agent,
            condition,
            repetition: 0,
            seed: seed.unwrap_or(self.inner.file.seed),
            max_steps,
            record_exploratory: false,
        };
        let a = py
            .detach(|| harness::run_task(&self.inner, &spec, chat.as_ref()))
            .map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
        let history = a.outcome.history.as_ref().map(|h| h.to_json()).unwrap_or_else(|| "null".into());
        let text = format!(
            r#"{{"report": {}, "trajectory": {}, "history": {}}}"#,
            serde_json::to_string(&a.report).expect("report serializes"),
            a.outcome.trajectory.to_json(),
            history
        );
        from_json(py, &text)
    }

    fn __repr__(&self) -> String {
        format!("Scenario({:?}, {})", self.inner.name(), self.inner.file.task_type)
    }
}

/// The shared per-property record store.
#[pyclass]
struct ToolHistory {
    inner: CoreHistory,
}

fn scalar(v: &Bound<'_, PyAny>) -> PyResult<Scalar> {
    if let Ok(b) = v.extract::<bool>() {
        Ok(Scalar::Bool(b))
    } else if let Ok(i) = v.extract::<i64>() {
        Ok(Scalar::Int(i))
    } else if let Ok(f) = v.extract::<f64>() {
        Ok(Scalar::Float(f))
    } else {
        Ok(Scalar::Str(v.extract::<String>()?))
    }
}

#[pymethods]
impl ToolHistory {
    #[new]
    fn new(k: usize) -> PyResult<Self> {
        Ok(Self { inner: CoreHistory::new(k).map_err(value_err)? })
    }

    #[getter]
    fn k(&self) -> usize {
        self.inner.k()
    }

    #[pyo3(signature = (property, from_spec = true))]
    fn add_goal(&mut self, property: &str, from_spec: bool) -> PyResult<()> {
        let origin = if from_spec { GoalOrigin::FromSpec } else { GoalOrigin::AgentAdded };
        self.inner.add_goal(PropertyId::new(property), origin).map_err(value_err)
    }

    /// Appends a record and returns its index.
    #[pyo3(signature = (property, tool, args = None, result = String::new(), analysis = String::new()))]
    fn record(
        &mut self,
        property: &str,
        tool: &str,
        args: Option<std::collections::BTreeMap<String, Bound<'_, PyAny>>>,
        result: String,
        analysis: String,
    ) -> PyResult<usize> {
        let mut call = ToolCall::new(tool);
        for (k, v) in args.unwrap_or_default() {
            call = call.arg(&k, scalar(&v)?);
        }
        let rec = ToolExecutionRecord { command: call, result, analysis };
        self.inner.record(&PropertyId::new(property), rec).map_err(value_err)
    }

    fn abandon_goal(&mut self, property: &str) -> PyResult<()> {
        self.inner.abandon_goal(&PropertyId::new(property)).map_err(value_err)
    }

    fn is_conclusive(&self, property: &str) -> PyResult<bool> {
        self.inner.is_conclusive(&PropertyId::new(property)).map_err(value_err)
    }

    fn used_tools(&self, property: &str) -> PyResult<Vec<String>> {
        self.inner.used_tools(&PropertyId::new(property)).map_err(value_err)
    }

    fn to_dict(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        from_json(py, &self.inner.to_json())
    }

    fn __len__(&self) -> usize {
        self.inner.goals().count()
    }
}

#[pymodule]
fn riva(m: &Bound<'_, PyModule>) -> PyResult<()> {
    init_module(m)
}

/// Populates `m` with the module contents. Exposed so embedding hosts and
/// tests can build the module without importing the shared library.
pub fn init_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_function(wrap_pyfunction!(parse_spec, m)?)?;
    m.add_function(wrap_pyfunction!(score, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add_class::<Scenario>()?;
    m.add_class::<ToolHistory>()?;
    Ok(())
}
