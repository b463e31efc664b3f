//! Prompt templates and the context blocks embedded in user messages.

use serde_json::Value;
use sha2::{Digest, Sha256};

use super::Actor;
use crate::llm::{ChatMessage, Role};

pub const VERIFIER_TEMPLATE: &str = include_str!("../../prompts/verifier.txt");
pub const TOOLGEN_TEMPLATE: &str = include_str!("../../prompts/toolgen.txt");
pub const REACT_TEMPLATE: &str = include_str!("../../prompts/react.txt");

const VERIFIER_OPENING: &str = "You are the Verifier Agent";
const TOOLGEN_OPENING: &str = "You are the Tool Generation Agent";
const REACT_OPENING: &str = "You are an infrastructure verification assistant that reasons and acts";

/// SHA-256 over all templates; changes whenever any prompt changes.
pub fn template_hash() -> String {
    let mut h = Sha256::new();
    for t in [VERIFIER_TEMPLATE, TOOLGEN_TEMPLATE, REACT_TEMPLATE] {
        h.update(t.as_bytes());
        h.update([0u8]);
    }
    hex::encode(h.finalize())
}

pub fn verifier_system(k: usize) -> String {
    VERIFIER_TEMPLATE.replace("{{k}}", &k.to_string())
}

pub fn toolgen_system(manifest: &str) -> String {
    TOOLGEN_TEMPLATE.replace("{{tools}}", manifest)
}

pub fn react_system(manifest: &str) -> String {
    REACT_TEMPLATE.replace("{{tools}}", manifest)
}

/// Which agent a conversation belongs to, from its system prompt.
pub fn agent_of(messages: &[ChatMessage]) -> Option<Actor> {
    let system = messages.iter().find(|m| m.role == Role::System)?;
    let s = system.content.trim_start();
    if s.starts_with(VERIFIER_OPENING) {
        Some(Actor::Verifier)
    } else if s.starts_with(TOOLGEN_OPENING) {
        Some(Actor::Toolgen)
    } else if s.starts_with(REACT_OPENING) {
        Some(Actor::React)
    } else {
        None
    }
}

/// A user message: prose followed by a fenced `context` JSON block.
pub fn with_context(prose: &str, context: &Value) -> String {
    let json = serde_json::to_string_pretty(context).expect("context serializes");
    format!("{prose}\n\n```context\n{json}\n```\n")
}


/// The most recent context block in the conversation.
pub fn latest_context(messages: &[ChatMessage]) -> Option<Value> {
    messages
        .iter()
        .rev()
        .filter(|m| m.role == Role::User)
        .find_map(|m| extract_context(&m.content))
}

/// First JSON object in a fenced `context` block of `text`.
pub fn extract_context(text: &str) -> Option<Value> {
    let mut rest = text;
    while let Some(i) = rest.find("```context\n") {
        let body = &rest[i + "```context\n".len()..];
        let end = body.find("```")?;
        if let Ok(v) = serde_json::from_str::<Value>(body[..end].trim()) {
            if v.is_object() {
                return Some(v);
            }
        }
        rest = &body[end + 3..];
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn systems_are_recognised() {
        for (sys, who) in [
            (verifier_system(2), Actor::Verifier),
            (toolgen_system("[]"), Actor::Toolgen),
            (react_system("[]"), Actor::React),
        ] {
            assert_eq!(agent_of(&[ChatMessage::system(sys)]), Some(who));
        }
        assert_eq!(agent_of(&[ChatMessage::system("hello")]), None);
    }

    #[test]
    fn context_round_trips() {
        let ctx = json!({"k": 2, "goals": []});
        let msg = with_context("State:", &ctx);
        assert_eq!(extract_context(&msg), Some(ctx.clone()));
        let conv = vec![ChatMessage::system("s"), ChatMessage::user(msg), ChatMessage::user("retry please")];
        assert_eq!(latest_context(&conv), Some(ctx));
    }

    #[test]
    fn hash_is_stable_hex() {
        let h = template_hash();
        assert_eq!(h.len(), 64);
        assert_eq!(h, template_hash());
    }

    #[test]
    fn k_is_substituted() {
        assert!(verifier_system(3).contains("holds 3 records"));
        assert!(!verifier_system(3).contains("{{k}}"));
    }
}
