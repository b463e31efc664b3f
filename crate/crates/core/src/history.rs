//! Shared tool-call history.
//!
//! Maps each goal (a property identifier) to at most `k` execution records.
//! Records for one goal must use pairwise-distinct tool names, are
//! append-only, and an abandoned goal stays abandoned.

use std::collections::BTreeMap;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::spec::{PropertyId, Scalar};

/// A tool invocation: tool name plus named scalar arguments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolCall {
    #[serde(rename = "tool")]
    pub tool_name: String,
    #[serde(default)]
    pub args: BTreeMap<String, Scalar>,
}

impl ToolCall {
    pub fn new(tool_name: impl Into<String>) -> Self {
        Self { tool_name: tool_name.into(), args: BTreeMap::new() }
    }

    pub fn arg(mut self, name: &str, value: impl Into<Scalar>) -> Self {
        self.args.insert(name.to_string(), value.into());
        self
    }

    /// `tool(a=1, b="x")` rendering used in prompts and logs.
    pub fn render(&self) -> String {
        let args: Vec<String> = self
            .args
            .iter()
            .map(|(k, v)| format!("{k}={}", v.to_literal()))
            .collect();
        format!("{}({})", self.tool_name, args.join(", "))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolExecutionRecord {
    #[serde(flatten)]
    pub command: ToolCall,
    /// Raw tool output. The empty string is a legitimate value.
    pub result: String,
    pub analysis: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GoalStatus {
    Open,
    Abandoned,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GoalOrigin {
    FromSpec,
    AgentAdded,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoalEntry {
    pub status: GoalStatus,
    pub origin: GoalOrigin,
    pub records: Vec<ToolExecutionRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GoalStatusView {
    pub property_id: PropertyId,
    pub record_count: usize,
    pub used_tool_names: Vec<String>,
    pub conclusive: bool,
    pub status: GoalStatus,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum HistoryError {
    #[error("unknown goal {0}")]
    UnknownGoal(PropertyId),
    #[error("goal {0} already used tool {1}")]
    DuplicateTool(PropertyId, String),
    #[error("goal {0} already holds k records")]
    GoalFull(PropertyId),
    #[error("goal {0} is abandoned")]
    GoalAbandoned(PropertyId),
    #[error("goal {0} already exists")]
    GoalExists(PropertyId),
    #[error("goal {0} is already abandoned")]
    AlreadyAbandoned(PropertyId),
    #[error("k must be at least 1")]
    InvalidK,
}

/// The per-run history shared by the verifier and the tool generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolHistory {
    k: usize,
    goals: IndexMap<PropertyId, GoalEntry>,
}

impl ToolHistory {
    pub fn new(k: usize) -> Result<Self, HistoryError> {
        if k == 0 {
            return Err(HistoryError::InvalidK);
        }
        Ok(Self { k, goals: IndexMap::new() })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn goals(&self) -> impl Iterator<Item = (&PropertyId, &GoalEntry)> {
        self.goals.iter()
    }

    pub fn goal(&self, id: &PropertyId) -> Result<&GoalEntry, HistoryError> {
        self.goals.get(id).ok_or_else(|| HistoryError::UnknownGoal(id.clone()))
    }

    pub fn contains(&self, id: &PropertyId) -> bool {
        self.goals.contains_key(id)
    }

    pub fn add_goal(&mut self, id: PropertyId, origin: GoalOrigin) -> Result<(), HistoryError> {
        if self.goals.contains_key(&id) {
            return Err(HistoryError::GoalExists(id));
        }
        self.goals.insert(id, GoalEntry { status: GoalStatus::Open, origin, records: Vec::new() });
        Ok(())
    }

    /// Appends a record; returns its index within the goal.
    pub fn record(&mut self, id: &PropertyId, rec: ToolExecutionRecord) -> Result<usize, HistoryError> {
        let k = self.k;
        let goal = self
            .goals
            .get_mut(id)
            .ok_or_else(|| HistoryError::UnknownGoal(id.clone()))?;
        if goal.status == GoalStatus::Abandoned {
            return Err(HistoryError::GoalAbandoned(id.clone()));
        }
        if goal.records.iter().any(|r| r.command.tool_name == rec.command.tool_name) {
            return Err(HistoryError::DuplicateTool(id.clone(), rec.command.tool_name));
        }
        if goal.records.len() >= k {
            return Err(HistoryError::GoalFull(id.clone()));
        }
        goal.records.push(rec);
        Ok(goal.records.len() - 1)
    }

    /// Tool names already recorded for the goal, in insertion order.
    pub fn used_tools(&self, id: &PropertyId) -> Result<Vec<String>, HistoryError> {
        Ok(self
            .goal(id)?
            .records
            .iter()
            .map(|r| r.command.tool_name.clone())
            .collect())
    }

    pub fn is_conclusive(&self, id: &PropertyId) -> Result<bool, HistoryError> {
        let g = self.goal(id)?;
        Ok(g.status == GoalStatus::Open && g.records.len() == self.k)
    }

    pub fn abandon_goal(&mut self, id: &PropertyId) -> Result<(), HistoryError> {
        let goal = self
            .goals
            .get_mut(id)
            .ok_or_else(|| HistoryError::UnknownGoal(id.clone()))?;
        if goal.status == GoalStatus::Abandoned {
            return Err(HistoryError::AlreadyAbandoned(id.clone()));
        }
        goal.status = GoalStatus::Abandoned;
        Ok(())
    }

    pub fn status_view(&self, id: &PropertyId) -> Result<GoalStatusView, HistoryError> {
        let g = self.goal(id)?;
        Ok(GoalStatusView {
            property_id: id.clone(),
            record_count: g.records.len(),
            used_tool_names: g.records.iter().map(|r| r.command.tool_name.clone()).collect(),
            conclusive: g.status == GoalStatus::Open && g.records.len() == self.k,
            status: g.status,
        })
    }

    /// Number of goals currently conclusive.
    pub fn conclusive_count(&self) -> usize {
        self.goals
            .values()
            .filter(|g| g.status == GoalStatus::Open && g.records.len() == self.k)
            .count()
    }

    /// Structural invariants: bounded size and distinct tools per goal.
    pub fn check_invariants(&self) -> Result<(), String> {
        for (id, g) in &self.goals {
            if g.records.len() > self.k {
                return Err(format!("goal {id} holds {} > k records", g.records.len()));
            }
            let mut names: Vec<&str> = g.records.iter().map(|r| r.command.tool_name.as_str()).collect();
            names.sort_unstable();
            if names.windows(2).any(|w| w[0] == w[1]) {
                return Err(format!("goal {id} repeats a tool"));
            }
        }
        Ok(())
    }

    /// True when `self` is a valid later state of `earlier`: every earlier goal
    /// is still present, its records are a prefix of the current ones, and
    /// abandonment was not undone.
    pub fn extends(&self, earlier: &ToolHistory) -> bool {
        self.k == earlier.k
            && earlier.goals.iter().all(|(id, old)| match self.goals.get(id) {
                None => false,
                Some(new) => {
                    new.origin == old.origin
                        && new.records.len() >= old.records.len()
                        && new.records[..old.records.len()] == old.records[..]
                        && !(old.status == GoalStatus::Abandoned && new.status == GoalStatus::Open)
                }
            })
    }

    /// JSON snapshot: `{k, goals: {id: {status, origin, records: [{tool, args, result, analysis}]}}}`.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("history serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}
