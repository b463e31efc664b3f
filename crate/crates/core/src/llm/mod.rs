//! Language-model backends.
//!
//! Every agent talks to a [`ChatBackend`]: a list of messages in, one reply
//! plus token usage out. [`ScriptedBackend`] is deterministic and needs no
//! network; [`HttpBackend`] speaks the common chat-completions protocol.

mod http;
mod scripted;

pub use http::{HttpBackend, HttpConfig};
pub use scripted::{Matcher, ReplayBackend, ScriptDefault, ScriptRule, ScriptedBackend};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

impl ChatMessage {
    pub fn system(content: impl Into<String>) -> Self {
        Self { role: Role::System, content: content.into() }
    }

    pub fn user(content: impl Into<String>) -> Self {
        Self { role: Role::User, content: content.into() }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        Self { role: Role::Assistant, content: content.into() }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenUsage {
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
    pub total_tokens: u64,
}

impl TokenUsage {
    pub fn new(prompt_tokens: u64, completion_tokens: u64) -> Self {
        Self { prompt_tokens, completion_tokens, total_tokens: prompt_tokens + completion_tokens }
    }

    /// Usage estimated from character counts, `ceil(chars / 4)` each.
    pub fn estimate(prompt_chars: usize, completion_chars: usize) -> Self {
        Self::new(estimate_tokens(prompt_chars), estimate_tokens(completion_chars))
    }
}

impl std::ops::Add for TokenUsage {
    type Output = TokenUsage;

    fn add(self, rhs: TokenUsage) -> TokenUsage {
        TokenUsage::new(
            self.prompt_tokens + rhs.prompt_tokens,
            self.completion_tokens + rhs.completion_tokens,
        )
    }
}

pub fn estimate_tokens(chars: usize) -> u64 {
    (chars as u64).div_ceil(4)
}

pub fn prompt_chars(messages: &[ChatMessage]) -> usize {
    messages.iter().map(|m| m.content.chars().count()).sum()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChatReply {
    pub text: String,
    pub usage: TokenUsage,
    /// Usage was estimated rather than reported by the provider.
    pub estimated: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BackendError {
    #[error("backend unavailable: {0}")]
    BackendUnavailable(String),
    #[error("malformed provider response: {0}")]
    MalformedProviderResponse(String),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
}

pub trait ChatBackend: Send + Sync {
    fn chat(&self, messages: &[ChatMessage]) -> Result<ChatReply, BackendError>;

    /// Short description recorded in run reports.
    fn describe(&self) -> String;

    /// Sampling temperature, when the backend has one.
    fn temperature(&self) -> Option<f64> {
        None
    }
}

/// Conversations must be non-empty and open with a system message.
pub fn check_messages(messages: &[ChatMessage]) -> Result<(), BackendError> {
    match messages.first() {
        None => Err(BackendError::InvalidRequest("empty message list".into())),
        Some(m) if m.role != Role::System => {
            Err(BackendError::InvalidRequest("first message must be the system prompt".into()))
        }
        Some(_) => Ok(()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn usage_total_is_the_sum() {
        let u = TokenUsage::new(100, 50);
        assert_eq!(u.total_tokens, 150);
        let s = u + TokenUsage::new(1, 2);
        assert_eq!(s, TokenUsage::new(101, 52));
    }

    #[test]
    fn estimates_round_up() {
        assert_eq!(estimate_tokens(0), 0);
        assert_eq!(estimate_tokens(1), 1);
        assert_eq!(estimate_tokens(8), 2);
        assert_eq!(estimate_tokens(9), 3);
    }

    #[test]
    fn message_list_must_start_with_system() {
        assert!(check_messages(&[]).is_err());
        assert!(check_messages(&[ChatMessage::user("hi")]).is_err());
        assert!(check_messages(&[ChatMessage::system("s"), ChatMessage::user("hi")]).is_ok());
    }
}
