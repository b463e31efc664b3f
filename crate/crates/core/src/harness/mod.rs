//! Scenario loading, scoring, the repetition protocol and report export.

mod report;
mod scenario;
mod scoring;

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

pub use report::{
    cdf_csv, empirical_cdf, export, runs_csv, AggregateReport, CdfPoint, ConditionSummary, ExportFormat,
    GroupSummary, RunReport, TaskSummary, SCHEMA_VERSION,
};
pub use scenario::{GroundTruthOverrides, Scenario, ScenarioFile};
pub use scoring::{kind_phrases, normalize, score};

use crate::agents::{prompts, run_react, run_riva, OrchestratorConfig, RunOutcome, Termination, Trajectory};
use crate::env::GroundTruth;
use crate::llm::{BackendError, ChatBackend, HttpBackend, HttpConfig, ReplayBackend, ScriptedBackend};
use crate::spec::VerdictValue;
use crate::toolkit::{ToolFaultConfig, ToolRegistry, GET_LOGS, READ_METRICS};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum HarnessError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(String),
    #[error(transparent)]
    Backend(#[from] BackendError),
}

impl HarnessError {
    pub(crate) fn io(path: &Path, e: std::io::Error) -> Self {
        HarnessError::Io(format!("{}: {e}", path.display()))
    }
}

/// Which agent runs a task.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum AgentKind {
    Riva { k: usize },
    React,
}

impl fmt::Display for AgentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AgentKind::Riva { k } => write!(f, "riva-k{k}"),
            AgentKind::React => f.write_str("react"),
        }
    }
}

impl FromStr for AgentKind {
    type Err = HarnessError;

    /// Accepts `react`, `riva` (K=2), `riva:<k>` and `riva-k<k>`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || HarnessError::Config(format!("unknown agent {s:?}; use react, riva, riva:<k> or riva-k<k>"));
        match s {
            "react" => Ok(AgentKind::React),
            "riva" => Ok(AgentKind::Riva { k: 2 }),
            _ => {
                let k = s
                    .strip_prefix("riva:")
                    .or_else(|| s.strip_prefix("riva-k"))
                    .ok_or_else(bad)?
                    .parse::<usize>()
                    .map_err(|_| bad())?;
                if k == 0 {
                    return Err(HarnessError::Config("k must be ≥ 1".into()));
                }
                Ok(AgentKind::Riva { k })
            }
        }
    }
}

impl Serialize for AgentKind {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for AgentKind {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Which tools are silently faulted during a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FaultCondition {
    None,
    GetLogs,
    ReadMetrics,
    Both,
}

impl FaultCondition {
    pub const ALL: [FaultCondition; 4] =
        [FaultCondition::None, FaultCondition::GetLogs, FaultCondition::ReadMetrics, FaultCondition::Both];

    pub fn fault_config(self) -> ToolFaultConfig {
        match self {
            FaultCondition::None => ToolFaultConfig::none(),
            FaultCondition::GetLogs => ToolFaultConfig::of([GET_LOGS]),
            FaultCondition::ReadMetrics => ToolFaultConfig::of([READ_METRICS]),
            FaultCondition::Both => ToolFaultConfig::of([GET_LOGS, READ_METRICS]),
        }
    }
}

impl fmt::Display for FaultCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FaultCondition::None => "none",
            FaultCondition::GetLogs => "get_logs",
            FaultCondition::ReadMetrics => "read_metrics",
            FaultCondition::Both => "both",
        })
    }
}

impl FromStr for FaultCondition {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        FaultCondition::ALL
            .into_iter()
            .find(|c| c.to_string() == s)
            .ok_or_else(|| HarnessError::Config(format!("unknown fault condition {s:?}; use none, get_logs, read_metrics or both")))
    }
}

/// Where agent replies come from.
#[derive(Debug, Clone, PartialEq)]
pub enum BackendChoice {
    /// Each scenario's own script when it has one, else the built-in policy.
    Scripted,
    /// One script file for every run.
    ScriptFile(PathBuf),
    Http(HttpConfig),
    /// Replays the counted replies of a recorded `trajectory.json`.
    Replay(PathBuf),
}

impl BackendChoice {
    /// Parses `scripted`, `scripted:<path>`, `replay:<trajectory.json>` or
    /// `http:<base-url>`.
    pub fn parse(s: &str, model: &str, api_key_env: Option<String>, temperature: f64) -> Result<Self, HarnessError> {
        if s == "scripted" {
            Ok(BackendChoice::Scripted)
        } else if let Some(p) = s.strip_prefix("scripted:") {
            Ok(BackendChoice::ScriptFile(PathBuf::from(p)))
        } else if let Some(p) = s.strip_prefix("replay:") {
            Ok(BackendChoice::Replay(PathBuf::from(p)))
        } else if let Some(url) = s.strip_prefix("http:").filter(|u| !u.is_empty()) {
            let mut c = HttpConfig::new(url, model);
            c.api_key_env = api_key_env;
            c.temperature = temperature;
            Ok(BackendChoice::Http(c))
        } else {
            Err(HarnessError::Config(format!(
                "unknown backend {s:?}; use scripted, scripted:<script.json>, replay:<trajectory.json> or http:<base-url>"
            )))
        }
    }
}

/// Builds backends for runs; HTTP clients are created once and shared.
pub struct BackendFactory {
    choice: BackendChoice,
    shared: Option<Arc<dyn ChatBackend>>,
    recorded: Option<Trajectory>,
}

impl BackendFactory {
    pub fn new(choice: BackendChoice) -> Result<Self, HarnessError> {
        let shared: Option<Arc<dyn ChatBackend>> = match &choice {
            BackendChoice::Http(c) => Some(Arc::new(HttpBackend::new(c.clone())?)),
            BackendChoice::ScriptFile(p) => Some(Arc::new(ScriptedBackend::from_path(p)?)),
            BackendChoice::Scripted | BackendChoice::Replay(_) => None,
        };
        let recorded = match &choice {
            BackendChoice::Replay(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| HarnessError::io(p, e))?;
                Some(
                    serde_json::from_str(&text)
                        .map_err(|e| HarnessError::Config(format!("{}: {e}", p.display())))?,
                )
            }
            _ => None,
        };
        Ok(Self { choice, shared, recorded })
    }

    pub fn choice(&self) -> &BackendChoice {
        &self.choice
    }

    pub fn for_scenario(&self, scenario: &Scenario) -> Result<Arc<dyn ChatBackend>, HarnessError> {
        if let Some(b) = &self.shared {
            return Ok(b.clone());
        }
        if let Some(t) = &self.recorded {
            return Ok(Arc::new(replay_backend(t)));
        }
        Ok(match scenario.script_path() {
            Some(p) => Arc::new(ScriptedBackend::from_path(&p)?),
            None => Arc::new(ScriptedBackend::policy()),
        })
    }
}

/// Replays a recorded run: the counted replies in order.
pub fn replay_backend(trajectory: &Trajectory) -> ReplayBackend {
    ReplayBackend::new(trajectory.steps.iter().filter(|s| s.counted).map(|s| s.payload.clone()))
}

/// One run and everything it produced.
#[derive(Debug, Clone)]
pub struct RunArtifacts {
    pub report: RunReport,
    pub outcome: RunOutcome,
    pub ground_truth: GroundTruth,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunSpec {
    pub agent: AgentKind,
    pub condition: FaultCondition,
    pub repetition: usize,
    pub seed: u64,
    pub max_steps: usize,
    pub record_exploratory: bool,
}

/// Runs one task once. Backend failures end up in the report, not as errors.
pub fn run_task(scenario: &Scenario, run: &RunSpec, backend: &dyn ChatBackend) -> Result<RunArtifacts, HarnessError> {
    let mut env = scenario.environment(run.seed)?;
    let truth = scenario.ground_truth(&env);
    let mut registry = ToolRegistry::standard();
    // A tool on a surface the scenario does not expose stays unreachable
    // even when faulted; the fault only changes what reachable tools return.
    let mut faults = run.condition.fault_config();
    faults
        .faulted_tools
        .retain(|t| registry.surface_of(t).is_some_and(|s| env.surfaces().contains(&s)));
    registry.apply_fault(faults).map_err(|e| HarnessError::Config(e.to_string()))?;
    let task = scenario.agent_task();
    let outcome = match run.agent {
        AgentKind::Riva { k } => {
            let config = OrchestratorConfig {
                k,
                max_steps: run.max_steps,
                record_exploratory: run.record_exploratory,
                ..OrchestratorConfig::default()
            };
            run_riva(&task, &mut env, &registry, backend, &config)
        }
        AgentKind::React => run_react(&task, &mut env, &registry, backend, run.max_steps),
    }
    .map_err(|e| HarnessError::Config(e.to_string()))?;

    let usage = outcome.trajectory.cumulative_usage();
    let submitted = outcome.trajectory.terminated_by == Termination::Submit;
    let success = submitted && score(task.task_type, outcome.solution.as_ref(), &truth, &scenario.file.aliases);
    let k = match run.agent {
        AgentKind::Riva { k } => k,
        AgentKind::React => 0,
    };
    let gating_violations = outcome
        .verdicts
        .values()
        .filter(|v| v.value != VerdictValue::Inconclusive && v.evidence.len() != k)
        .count();
    let report = RunReport {
        task_id: scenario.name().to_string(),
        task_type: task.task_type,
        agent: run.agent,
        condition: run.condition,
        repetition: run.repetition,
        seed: run.seed,
        success,
        steps: outcome.trajectory.counted_steps(),
        max_context_tokens: usage.max_context_tokens,
        total_tokens: usage.total.total_tokens,
        prompt_tokens: usage.total.prompt_tokens,
        completion_tokens: usage.total.completion_tokens,
        tokens_estimated: usage.estimated,
        terminated_by: outcome.trajectory.terminated_by,
        prompt_template_hash: prompts::template_hash(),
        backend: backend.describe(),
        temperature: backend.temperature(),
        answer: outcome.solution.as_ref().map(|s| s.answer.clone()),
        conclusive_goals: outcome.history.as_ref().map_or(0, |h| h.conclusive_count()),
        verdicts: outcome.verdicts.iter().map(|(id, v)| (id.to_string(), v.value)).collect(),
        gating_violations,
        error: outcome.trajectory.error.clone(),
    };
    Ok(RunArtifacts { report, outcome, ground_truth: truth })
}

/// Writes `runs/<task>/<agent>/<condition>/<rep>/{trajectory,history,report}.json`.
pub fn write_run(out_dir: &Path, a: &RunArtifacts) -> Result<PathBuf, HarnessError> {
    let r = &a.report;
    let dir = out_dir
        .join("runs")
        .join(&r.task_id)
        .join(r.agent.to_string())
        .join(r.condition.to_string())
        .join(r.repetition.to_string());
    std::fs::create_dir_all(&dir).map_err(|e| HarnessError::io(&dir, e))?;
    let history = match &a.outcome.history {
        Some(h) => h.to_json(),
        None => "null".to_string(),
    };
    for (name, body) in [
        ("trajectory.json", a.outcome.trajectory.to_json()),
        ("history.json", history),
        ("report.json", serde_json::to_string_pretty(r).expect("report serializes")),
    ] {
        let p = dir.join(name);
        std::fs::write(&p, body + "\n").map_err(|e| HarnessError::io(&p, e))?;
    }
    Ok(dir)
}

fn default_agents() -> Vec<AgentKind> {
    vec![AgentKind::React, AgentKind::Riva { k: 2 }]
}

fn default_conditions() -> Vec<FaultCondition> {
    FaultCondition::ALL.to_vec()
}

fn default_repetitions() -> usize {
    5
}

fn default_max_steps() -> usize {
    45
}

/// Suite definition file. Scenario paths are relative to the suite file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuiteFile {
    pub name: String,
    pub scenarios: Vec<PathBuf>,
    #[serde(default = "default_agents")]
    pub agents: Vec<AgentKind>,
    #[serde(default = "default_conditions")]
    pub conditions: Vec<FaultCondition>,
    #[serde(default = "default_repetitions")]
    pub repetitions: usize,
    /// One seed per repetition; defaults to the scenario seed plus the
    /// repetition index.
    #[serde(default)]
    pub seeds: Option<Vec<u64>>,
    #[serde(default = "default_max_steps")]
    pub max_steps: usize,
}

#[derive(Debug, Clone)]
pub struct Suite {
    pub file: SuiteFile,
    pub scenarios: Vec<Scenario>,
}

impl Suite {
    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        let file: SuiteFile =
            serde_json::from_str(&text).map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
        let dir = path.parent().unwrap_or(Path::new("."));
        let scenarios = file.scenarios.iter().map(|p| Scenario::load(&dir.join(p))).collect::<Result<_, _>>()?;
        let suite = Self { file, scenarios };
        suite.validate()?;
        Ok(suite)
    }

    pub fn new(file: SuiteFile, scenarios: Vec<Scenario>) -> Result<Self, HarnessError> {
        let suite = Self { file, scenarios };
        suite.validate()?;
        Ok(suite)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let f = &self.file;
        if f.repetitions == 0 {
            return Err(HarnessError::Config("repetitions must be ≥ 1".into()));
        }
        if f.max_steps == 0 {
            return Err(HarnessError::Config("max_steps must be ≥ 1".into()));
        }
        if let Some(seeds) = &f.seeds {
            if seeds.len() != f.repetitions {
                return Err(HarnessError::Config(format!(
                    "{} seeds given for {} repetitions",
                    seeds.len(),
                    f.repetitions
                )));
            }
            let distinct: std::collections::BTreeSet<_> = seeds.iter().collect();
            if distinct.len() != seeds.len() {
                return Err(HarnessError::Config("seeds must be distinct".into()));
            }
        }
        let mut names = std::collections::BTreeSet::new();
        for s in &self.scenarios {
            if !names.insert(s.name()) {
                return Err(HarnessError::Config(format!("duplicate scenario name {:?}", s.name())));
            }
        }
        Ok(())
    }

    pub fn seed(&self, scenario: &Scenario, repetition: usize) -> u64 {
        match &self.file.seeds {
            Some(seeds) => seeds[repetition],
            None => scenario.file.seed + repetition as u64,
        }
    }
}

#[derive(Debug, Clone)]
pub struct EvalOptions {
    pub workers: usize,
    /// Artifacts are written here as each run finishes.
    pub out_dir: Option<PathBuf>,
    pub record_exploratory: bool,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self { workers: 1, out_dir: None, record_exploratory: false }
    }
}

/// Runs the full cross product of scenarios, agents, conditions and
/// repetitions. Individual run failures are recorded in their reports.
pub fn evaluate(suite: &Suite, backends: &BackendFactory, opts: &EvalOptions) -> Result<AggregateReport, HarnessError> {
    if matches!(backends.choice(), BackendChoice::Replay(_)) {
        return Err(HarnessError::Config("replay backends drive a single run; use `run`".into()));
    }
    let mut jobs = Vec::new();
    for (si, s) in suite.scenarios.iter().enumerate() {
        for agent in &suite.file.agents {
            for condition in &suite.file.conditions {
                for rep in 0..suite.file.repetitions {
                    jobs.push((
                        si,
                        RunSpec {
                            agent: *agent,
                            condition: *condition,
                            repetition: rep,
                            seed: suite.seed(s, rep),
                            max_steps: suite.file.max_steps,
                            record_exploratory: opts.record_exploratory,
                        },
                    ));
                }
            }
        }
    }
    let backends_per_scenario = suite
        .scenarios
        .iter()
        .map(|s| backends.for_scenario(s))
        .collect::<Result<Vec<_>, _>>()?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.workers.max(1))
        .build()
        .map_err(|e| HarnessError::Config(e.to_string()))?;
    let reports: Vec<RunReport> = pool.install(|| {
        jobs.par_iter()
            .map(|(si, run)| {
                let scenario = &suite.scenarios[*si];
                match run_task(scenario, run, backends_per_scenario[*si].as_ref()) {
                    Ok(a) => {
                        let mut report = a.report.clone();
                        if let Some(dir) = &opts.out_dir {
                            if let Err(e) = write_run(dir, &a) {
                                report.error = Some(e.to_string());
                            }
                        }
                        report
                    }
                    Err(e) => failed_report(scenario, run, e),
                }
            })
            .collect()
    });
    let report = AggregateReport::from_runs(&suite.file.name, reports);
    if let Some(dir) = &opts.out_dir {
        export(&report, ExportFormat::Json, &dir.join("aggregate.json"))?;
        export(&report, ExportFormat::Csv, &dir.join("runs.csv"))?;
        export(&report, ExportFormat::CdfCsv, &dir.join("cdf.csv"))?;
    }
    Ok(report)
}

fn failed_report(scenario: &Scenario, run: &RunSpec, e: HarnessError) -> RunReport {
    RunReport {
        task_id: scenario.name().to_string(),
        task_type: scenario.file.task_type,
        agent: run.agent,
        condition: run.condition,
        repetition: run.repetition,
        seed: run.seed,
        success: false,
        steps: 0,
        max_context_tokens: 0,
        total_tokens: 0,
        prompt_tokens: 0,
        completion_tokens: 0,
        tokens_estimated: false,
        terminated_by: Termination::BackendFailure,
        prompt_template_hash: prompts::template_hash(),
        backend: String::new(),
        temperature: None,
        answer: None,
        conclusive_goals: 0,
        verdicts: Default::default(),
        gating_violations: 0,
        error: Some(e.to_string()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn agent_labels_round_trip() {
        for s in ["react", "riva-k2", "riva-k3"] {
            assert_eq!(s.parse::<AgentKind>().unwrap().to_string(), s);
        }
        assert_eq!("riva:3".parse::<AgentKind>().unwrap(), AgentKind::Riva { k: 3 });
        assert_eq!("riva".parse::<AgentKind>().unwrap(), AgentKind::Riva { k: 2 });
        assert!("riva:0".parse::<AgentKind>().is_err());
        assert!("gpt".parse::<AgentKind>().is_err());
    }

    #[test]
    fn conditions_parse() {
        for c in FaultCondition::ALL {
            assert_eq!(c.to_string().parse::<FaultCondition>().unwrap(), c);
        }
        assert_eq!(FaultCondition::Both.fault_config().faulted_tools.len(), 2);
    }

    #[test]
    fn backend_selectors() {
        assert_eq!(BackendChoice::parse("scripted", "m", None, 0.0).unwrap(), BackendChoice::Scripted);
        assert_eq!(
            BackendChoice::parse("scripted:x.json", "m", None, 0.0).unwrap(),
            BackendChoice::ScriptFile("x.json".into())
        );
        assert!(matches!(BackendChoice::parse("http:http://h/v1", "m", None, 0.0).unwrap(), BackendChoice::Http(_)));
        assert!(BackendChoice::parse("ollama", "m", None, 0.0).is_err());
    }
}
