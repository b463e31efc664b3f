use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{AgentKind, FaultCondition, HarnessError};
use crate::agents::{Termination, TaskType};
use crate::spec::VerdictValue;

pub const SCHEMA_VERSION: u32 = 1;

/// Outcome of one run. Contains no timings, so scripted reports are
/// reproducible byte for byte.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub task_id: String,
    pub task_type: TaskType,
    pub agent: AgentKind,
    pub condition: FaultCondition,
    pub repetition: usize,
    pub seed: u64,
    pub success: bool,
    pub steps: usize,
    pub max_context_tokens: u64,
    pub total_tokens: u64,
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
    pub tokens_estimated: bool,
    pub terminated_by: Termination,
    pub prompt_template_hash: String,
    pub backend: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub temperature: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub answer: Option<String>,
    /// Goals holding K distinct records at the end of the run.
    pub conclusive_goals: usize,
    pub verdicts: BTreeMap<String, VerdictValue>,
    /// Satisfied/Violated verdicts whose evidence does not cite exactly K records.
    pub gating_violations: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl RunReport {
    pub fn key(&self) -> (String, String, FaultCondition, usize) {
        (self.task_id.clone(), self.agent.to_string(), self.condition, self.repetition)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CdfPoint {
    pub value: u64,
    pub cumulative_fraction: f64,
}

/// Empirical CDF: one point per distinct value.
pub fn empirical_cdf(values: &[u64]) -> Vec<CdfPoint> {
    let mut v = values.to_vec();
    v.sort_unstable();
    let n = v.len() as f64;
    let mut out: Vec<CdfPoint> = Vec::new();
    for (i, x) in v.iter().enumerate() {
        let point = CdfPoint { value: *x, cumulative_fraction: (i + 1) as f64 / n };
        match out.last_mut() {
            Some(last) if last.value == *x => *last = point,
            _ => out.push(point),
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSummary {
    pub agent: AgentKind,
    pub condition: FaultCondition,
    pub task_type: TaskType,
    pub runs: usize,
    pub successes: usize,
    pub success_rate: f64,
    pub steps_cdf: Vec<CdfPoint>,
    pub total_tokens_cdf: Vec<CdfPoint>,
    pub max_context_tokens_cdf: Vec<CdfPoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionSummary {
    pub agent: AgentKind,
    pub condition: FaultCondition,
    pub runs: usize,
    pub successes: usize,
    /// Successes over all runs.
    pub success_rate_over_runs: f64,
    /// Mean of the per-task success rates.
    pub success_rate_over_tasks: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskSummary {
    pub task_id: String,
    pub agent: AgentKind,
    pub condition: FaultCondition,
    pub repetitions: usize,
    pub successes: usize,
    pub success_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateReport {
    pub schema_version: u32,
    pub suite: String,
    pub prompt_template_hash: String,
    pub groups: Vec<GroupSummary>,
    pub conditions: Vec<ConditionSummary>,
    pub tasks: Vec<TaskSummary>,
    pub runs: Vec<RunReport>,
}

fn rate(successes: usize, runs: usize) -> f64 {
    if runs == 0 {
        0.0
    } else {
        successes as f64 / runs as f64
    }
}

impl AggregateReport {
    pub fn from_runs(suite: &str, mut runs: Vec<RunReport>) -> Self {
        runs.sort_by_key(RunReport::key);

        let mut groups: BTreeMap<(String, FaultCondition, TaskType), Vec<&RunReport>> = BTreeMap::new();
        let mut tasks: BTreeMap<(String, FaultCondition, String), Vec<&RunReport>> = BTreeMap::new();
        for r in &runs {
            groups.entry((r.agent.to_string(), r.condition, r.task_type)).or_default().push(r);
            tasks.entry((r.agent.to_string(), r.condition, r.task_id.clone())).or_default().push(r);
        }

        let groups: Vec<GroupSummary> = groups
            .into_values()
            .map(|rs| {
                let successes = rs.iter().filter(|r| r.success).count();
                let col = |f: fn(&RunReport) -> u64| rs.iter().map(|r| f(r)).collect::<Vec<_>>();
                GroupSummary {
                    agent: rs[0].agent,
                    condition: rs[0].condition,
                    task_type: rs[0].task_type,
                    runs: rs.len(),
                    successes,
                    success_rate: rate(successes, rs.len()),
                    steps_cdf: empirical_cdf(&col(|r| r.steps as u64)),
                    total_tokens_cdf: empirical_cdf(&col(|r| r.total_tokens)),
                    max_context_tokens_cdf: empirical_cdf(&col(|r| r.max_context_tokens)),
                }
            })
            .collect();

        let tasks: Vec<TaskSummary> = tasks
            .into_values()
            .map(|rs| {
                let successes = rs.iter().filter(|r| r.success).count();
                TaskSummary {
                    task_id: rs[0].task_id.clone(),
                    agent: rs[0].agent,
                    condition: rs[0].condition,
                    repetitions: rs.len(),
                    successes,
                    success_rate: rate(successes, rs.len()),
                }
            })
            .collect();

        let mut by_condition: BTreeMap<(String, FaultCondition), Vec<&TaskSummary>> = BTreeMap::new();
        for t in &tasks {
            by_condition.entry((t.agent.to_string(), t.condition)).or_default().push(t);
        }
        let conditions = by_condition
            .into_values()
            .map(|ts| {
                let runs: usize = ts.iter().map(|t| t.repetitions).sum();
                let successes: usize = ts.iter().map(|t| t.successes).sum();
                ConditionSummary {
                    agent: ts[0].agent,
                    condition: ts[0].condition,
                    runs,
                    successes,
                    success_rate_over_runs: rate(successes, runs),
                    success_rate_over_tasks: ts.iter().map(|t| t.success_rate).sum::<f64>() / ts.len() as f64,
                }
            })
            .collect();

        Self {
            schema_version: SCHEMA_VERSION,
            suite: suite.to_string(),
            prompt_template_hash: crate::agents::prompts::template_hash(),
            groups,
            conditions,
            tasks,
            runs,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn condition(&self, agent: AgentKind, condition: FaultCondition) -> Option<&ConditionSummary> {
        self.conditions.iter().find(|c| c.agent == agent && c.condition == condition)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExportFormat {
    Json,
    Csv,
    CdfCsv,
}

impl std::str::FromStr for ExportFormat {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "json" => Ok(ExportFormat::Json),
            "csv" => Ok(ExportFormat::Csv),
            "cdf-csv" => Ok(ExportFormat::CdfCsv),
            other => Err(HarnessError::Config(format!("unknown export format {other:?}; use json, csv or cdf-csv"))),
        }
    }
}

const RUN_COLUMNS: [&str; 13] = [
    "task_id",
    "task_type",
    "agent",
    "condition",
    "repetition",
    "seed",
    "success",
    "steps",
    "max_context_tokens",
    "total_tokens",
    "tokens_estimated",
    "terminated_by",
    "answer",
];

fn csv_err(e: csv::Error) -> HarnessError {
    HarnessError::Io(e.to_string())
}

/// One row per run.
pub fn runs_csv(report: &AggregateReport, out: impl Write) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(RUN_COLUMNS).map_err(csv_err)?;
    for r in &report.runs {
        w.write_record([
            r.task_id.clone(),
            r.task_type.to_string(),
            r.agent.to_string(),
            r.condition.to_string(),
            r.repetition.to_string(),
            r.seed.to_string(),
            r.success.to_string(),
            r.steps.to_string(),
            r.max_context_tokens.to_string(),
            r.total_tokens.to_string(),
            r.tokens_estimated.to_string(),
            r.terminated_by.to_string(),
            r.answer.clone().unwrap_or_default(),
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(|e| HarnessError::Io(e.to_string()))
}

/// Columns `metric,value,cumulative_fraction`; one CDF per agent and
/// condition for steps, total tokens and maximum context size.
pub fn cdf_csv(report: &AggregateReport, out: impl Write) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["metric", "value", "cumulative_fraction"]).map_err(csv_err)?;
    let mut groups: BTreeMap<(String, FaultCondition), Vec<&RunReport>> = BTreeMap::new();
    for r in &report.runs {
        groups.entry((r.agent.to_string(), r.condition)).or_default().push(r);
    }
    for ((agent, condition), rs) in groups {
        let metrics: [(&str, Vec<u64>); 3] = [
            ("steps", rs.iter().map(|r| r.steps as u64).collect()),
            ("total_tokens", rs.iter().map(|r| r.total_tokens).collect()),
            ("max_context_tokens", rs.iter().map(|r| r.max_context_tokens).collect()),
        ];
        for (name, values) in metrics {
            for p in empirical_cdf(&values) {
                w.write_record([
                    format!("{agent}/{condition}/{name}"),
                    p.value.to_string(),
                    p.cumulative_fraction.to_string(),
                ])
                .map_err(csv_err)?;
            }
        }
    }
    w.flush().map_err(|e| HarnessError::Io(e.to_string()))
}

pub fn export(report: &AggregateReport, format: ExportFormat, path: &Path) -> Result<(), HarnessError> {
    let file = std::fs::File::create(path).map_err(|e| HarnessError::io(path, e))?;
    let mut out = std::io::BufWriter::new(file);
    match format {
        ExportFormat::Json => {
            out.write_all(report.to_json().as_bytes()).map_err(|e| HarnessError::io(path, e))?;
            out.write_all(b"\n").map_err(|e| HarnessError::io(path, e))?;
        }
        ExportFormat::Csv => runs_csv(report, &mut out)?,
        ExportFormat::CdfCsv => cdf_csv(report, &mut out)?,
    }
    out.flush().map_err(|e| HarnessError::io(path, e))
}
