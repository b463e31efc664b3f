//! Structured actions extracted from free-form agent replies.
//!
//! Actions are JSON objects with an `action` field. They may sit in fenced
//! `json` code blocks, any number of them, each holding an object or an
//! array of objects. A reply that is only JSON works too.

use std::collections::BTreeMap;

use serde::Deserialize;
use thiserror::Error;

use crate::history::ToolCall;
use crate::spec::{PropertyId, Scalar, VerdictValue};

#[derive(Debug, Clone, PartialEq)]
pub enum AgentAction {
    RequestGeneration { property: PropertyId },
    Conclude { property: PropertyId, verdict: VerdictValue, evidence: Vec<usize>, rationale: String },
    AddGoal { property: PropertyId, description: String },
    AbandonGoal { property: PropertyId },
    Submit { answer: String },
    Call { call: ToolCall },
    Explore { call: ToolCall },
    Record { analysis: String },
    GiveUp { reason: String },
}

impl AgentAction {
    pub fn name(&self) -> &'static str {
        match self {
            AgentAction::RequestGeneration { .. } => "request_generation",
            AgentAction::Conclude { .. } => "conclude",
            AgentAction::AddGoal { .. } => "add_goal",
            AgentAction::AbandonGoal { .. } => "abandon_goal",
            AgentAction::Submit { .. } => "submit",
            AgentAction::Call { .. } => "call",
            AgentAction::Explore { .. } => "explore",
            AgentAction::Record { .. } => "record",
            AgentAction::GiveUp { .. } => "give_up",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{diagnostic}")]
pub struct ParseFailure {
    pub diagnostic: String,
}

impl ParseFailure {
    fn new(d: impl Into<String>) -> Self {
        Self { diagnostic: d.into() }
    }
}

#[derive(Deserialize)]
#[serde(tag = "action", rename_all = "snake_case")]
enum Raw {
    RequestGeneration {
        property: String,
    },
    Conclude {
        property: String,
        verdict: VerdictValue,
        #[serde(default)]
        evidence: Vec<usize>,
        #[serde(default)]
        rationale: String,
    },
    AddGoal {
        property: String,
        #[serde(default)]
        description: String,
    },
    AbandonGoal {
        property: String,
    },
    Submit {
        answer: String,
    },
    Call {
        tool: String,
        #[serde(default)]
        args: BTreeMap<String, Scalar>,
    },
    Explore {
        tool: String,
        #[serde(default)]
        args: BTreeMap<String, Scalar>,
    },
    Record {
        analysis: String,
    },
    GiveUp {
        #[serde(default)]
        reason: String,
    },
}

impl From<Raw> for AgentAction {
    fn from(r: Raw) -> Self {
        match r {
            Raw::RequestGeneration { property } => AgentAction::RequestGeneration { property: property.into() },
            Raw::Conclude { property, verdict, evidence, rationale } => {
                AgentAction::Conclude { property: property.into(), verdict, evidence, rationale }
            }
            Raw::AddGoal { property, description } => AgentAction::AddGoal { property: property.into(), description },
            Raw::AbandonGoal { property } => AgentAction::AbandonGoal { property: property.into() },
            Raw::Submit { answer } => AgentAction::Submit { answer },
            Raw::Call { tool, args } => AgentAction::Call { call: ToolCall { tool_name: tool, args } },
            Raw::Explore { tool, args } => AgentAction::Explore { call: ToolCall { tool_name: tool, args } },
            Raw::Record { analysis } => AgentAction::Record { analysis },
            Raw::GiveUp { reason } => AgentAction::GiveUp { reason },
        }
    }
}

/// Contents of fenced blocks tagged `lang` (or untagged), in order.
pub fn fenced_blocks<'a>(text: &'a str, lang: &str) -> Vec<&'a str> {
    let mut out = Vec::new();
    let mut rest = text;
    while let Some(start) = rest.find("```") {
        let after = &rest[start + 3..];
        let Some(nl) = after.find('\n') else { break };
        let tag = after[..nl].trim();
        let body = &after[nl + 1..];
        let Some(end) = body.find("```") else { break };
        if tag == lang || tag.is_empty() {
            out.push(&body[..end]);
        }
        rest = &body[end + 3..];
    }
    out
}

fn parse_value(v: serde_json::Value, out: &mut Vec<AgentAction>) -> Result<(), ParseFailure> {
    match v {
        serde_json::Value::Array(items) => {
            for item in items {
                parse_value(item, out)?;
            }
            Ok(())
        }
        obj @ serde_json::Value::Object(_) => {
            let raw: Raw = serde_json::from_value(obj).map_err(|e| ParseFailure::new(format!("invalid action: {e}")))?;
            out.push(raw.into());
            Ok(())
        }
        other => Err(ParseFailure::new(format!("expected a JSON object, got {other}"))),
    }
}

/// All actions in a reply, in order.
pub fn parse_actions(text: &str) -> Result<Vec<AgentAction>, ParseFailure> {
    let blocks = fenced_blocks(text, "json");
    let sources: Vec<&str> = if blocks.is_empty() {
        let t = text.trim();
        if t.starts_with('{') || t.starts_with('[') {
            vec![t]
        } else {
            return Err(ParseFailure::new("no JSON action found; reply with a ```json block"));
        }
    } else {
        blocks
    };
    let mut out = Vec::new();
    for src in sources {
        let v: serde_json::Value =
            serde_json::from_str(src.trim()).map_err(|e| ParseFailure::new(format!("invalid JSON: {e}")))?;
        parse_value(v, &mut out)?;
    }
    if out.is_empty() {
        return Err(ParseFailure::new("no action in reply"));
    }
    Ok(out)
}

/// Exactly one action.
pub fn parse_action(text: &str) -> Result<AgentAction, ParseFailure> {
    let mut all = parse_actions(text)?;
    if all.len() != 1 {
        return Err(ParseFailure::new(format!("expected exactly one action, found {}", all.len())));
    }
    Ok(all.remove(0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fenced_and_bare_forms() {
        let fenced = "I will check.\n```json\n{\"action\":\"request_generation\",\"property\":\"p1\"}\n```\n";
        assert_eq!(
            parse_action(fenced).unwrap(),
            AgentAction::RequestGeneration { property: "p1".into() }
        );
        let bare = r#"{"action":"submit","answer":"web"}"#;
        assert_eq!(parse_action(bare).unwrap(), AgentAction::Submit { answer: "web".into() });
    }

    #[test]
    fn several_actions_in_order() {
        let text = "```json\n[{\"action\":\"conclude\",\"property\":\"p\",\"verdict\":\"violated\",\"evidence\":[0,1]},\n{\"action\":\"submit\",\"answer\":\"yes\"}]\n```";
        let a = parse_actions(text).unwrap();
        assert_eq!(a.len(), 2);
        assert_eq!(a[1].name(), "submit");
        assert!(parse_action(text).is_err());
    }

    #[test]
    fn tool_calls_keep_typed_arguments() {
        let a = parse_action(r#"{"action":"call","tool":"ping_node","args":{"id":1},"thought":"t"}"#).unwrap();
        assert_eq!(a, AgentAction::Call { call: ToolCall::new("ping_node").arg("id", 1) });
    }

    #[test]
    fn failures_carry_diagnostics() {
        assert!(parse_actions("just prose").unwrap_err().diagnostic.contains("no JSON action"));
        assert!(parse_actions("```json\n{\"action\":\"dance\"}\n```").unwrap_err().diagnostic.contains("invalid action"));
        assert!(parse_actions("```json\n{oops\n```").unwrap_err().diagnostic.contains("invalid JSON"));
    }

    #[test]
    fn other_fences_are_ignored() {
        let text = "```context\n{\"x\":1}\n```\n```json\n{\"action\":\"give_up\"}\n```";
        assert_eq!(parse_action(text).unwrap(), AgentAction::GiveUp { reason: String::new() });
    }
}
