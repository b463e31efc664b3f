//! Verifier and tool-generation agents, the ReAct baseline, and the
//! orchestration loop tying them to the tool history.

pub mod policy;
pub mod prompts;
pub mod protocol;
mod react;
mod riva;
mod session;
pub mod trajectory;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::history::ToolHistory;
use crate::spec::{PropertyId, Specification, Verdict};

pub use react::run_react;
pub use riva::run_riva;
pub use trajectory::{Step, StepKind, Termination, Trajectory, UsageSummary};

/// Who produced a trajectory step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Actor {
    Verifier,
    Toolgen,
    React,
    Orchestrator,
}

impl fmt::Display for Actor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Actor::Verifier => "verifier",
            Actor::Toolgen => "toolgen",
            Actor::React => "react",
            Actor::Orchestrator => "orchestrator",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskType {
    Detection,
    Localization,
    Analysis,
}

impl fmt::Display for TaskType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TaskType::Detection => "detection",
            TaskType::Localization => "localization",
            TaskType::Analysis => "analysis",
        })
    }
}

/// The submitted answer of a run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Solution {
    pub task_type: TaskType,
    pub answer: String,
}

/// What the agents are told about the task. Ground truth stays out.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentTask {
    pub id: String,
    pub task_type: TaskType,
    pub spec: Specification,
    /// Original specification text, shown verbatim to the agents.
    pub spec_text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrchestratorConfig {
    /// Distinct tools required before a goal may be concluded.
    pub k: usize,
    /// Cap on counted steps (backend replies) per run.
    pub max_steps: usize,
    /// Also keep exploratory calls of the tool generator in the history.
    pub record_exploratory: bool,
    /// Generation attempts per request before the request is starved.
    pub toolgen_retry_limit: usize,
    /// Keep a history snapshot after every mutation.
    pub snapshot_history: bool,
}

impl Default for OrchestratorConfig {
    fn default() -> Self {
        Self { k: 2, max_steps: 45, record_exploratory: false, toolgen_retry_limit: 3, snapshot_history: false }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConfigError {
    #[error("k must be at least 1")]
    InvalidK,
    #[error("max_steps must be at least 1")]
    InvalidMaxSteps,
    #[error("toolgen_retry_limit must be at least 1")]
    InvalidRetryLimit,
}

impl OrchestratorConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.k == 0 {
            return Err(ConfigError::InvalidK);
        }
        if self.max_steps == 0 {
            return Err(ConfigError::InvalidMaxSteps);
        }
        if self.toolgen_retry_limit == 0 {
            return Err(ConfigError::InvalidRetryLimit);
        }
        Ok(())
    }
}

/// Everything a single agent run produces.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub trajectory: Trajectory,
    /// Absent for the ReAct baseline, which keeps no shared history.
    pub history: Option<ToolHistory>,
    pub verdicts: BTreeMap<PropertyId, Verdict>,
    pub solution: Option<Solution>,
    pub history_snapshots: Vec<ToolHistory>,
}
