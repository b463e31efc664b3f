//! Ordered log of everything that happened in a run.

use serde::{Deserialize, Serialize};

use super::Actor;
use crate::llm::TokenUsage;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepKind {
    Reasoning,
    ToolInvocation,
    HistoryMutation,
    Submission,
    /// Orchestrator feedback: rejected actions, protocol violations.
    Feedback,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Step {
    pub index: usize,
    pub actor: Actor,
    pub kind: StepKind,
    /// Counted steps are backend replies; they consume the step budget.
    pub counted: bool,
    /// Conversation the reply belongs to; a new id means a fresh context.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub conversation: Option<usize>,
    pub payload: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub token_usage: Option<TokenUsage>,
    #[serde(default)]
    pub prompt_chars: usize,
    #[serde(default)]
    pub completion_chars: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Submit,
    StepCapReached,
    BackendFailure,
}

impl std::fmt::Display for Termination {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Termination::Submit => "submit",
            Termination::StepCapReached => "step_cap_reached",
            Termination::BackendFailure => "backend_failure",
        })
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct UsageSummary {
    pub total: TokenUsage,
    /// Largest single-call context (prompt plus completion tokens).
    pub max_context_tokens: u64,
    /// Some counts were estimated from characters.
    pub estimated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub steps: Vec<Step>,
    pub terminated_by: Termination,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(default)]
    pub tokens_estimated: bool,
}

impl Default for Trajectory {
    fn default() -> Self {
        Self { steps: Vec::new(), terminated_by: Termination::StepCapReached, error: None, tokens_estimated: false }
    }
}

impl Trajectory {
    pub fn push(&mut self, actor: Actor, kind: StepKind, payload: impl Into<String>) -> &mut Step {
        let index = self.steps.len();
        self.steps.push(Step {
            index,
            actor,
            kind,
            counted: false,
            conversation: None,
            payload: payload.into(),
            token_usage: None,
            prompt_chars: 0,
            completion_chars: 0,
        });
        self.steps.last_mut().expect("just pushed")
    }

    pub fn counted_steps(&self) -> usize {
        self.steps.iter().filter(|s| s.counted).count()
    }

    pub fn cumulative_usage(&self) -> UsageSummary {
        let mut sum = UsageSummary { estimated: self.tokens_estimated, ..UsageSummary::default() };
        for u in self.steps.iter().filter_map(|s| s.token_usage) {
            sum.total = sum.total + u;
            sum.max_context_tokens = sum.max_context_tokens.max(u.total_tokens);
        }
        sum
    }

    pub fn submissions(&self) -> usize {
        self.steps.iter().filter(|s| s.kind == StepKind::Submission).count()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("trajectory serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn usage_sums_and_tracks_peak() {
        let mut t = Trajectory::default();
        for (p, c) in [(10, 2), (30, 5), (20, 1)] {
            let s = t.push(Actor::Verifier, StepKind::Reasoning, "");
            s.counted = true;
            s.token_usage = Some(TokenUsage::new(p, c));
        }
        t.push(Actor::Orchestrator, StepKind::HistoryMutation, "x");
        let u = t.cumulative_usage();
        assert_eq!(u.total, TokenUsage::new(60, 8));
        assert_eq!(u.max_context_tokens, 35);
        assert_eq!(t.counted_steps(), 3);
    }
}
