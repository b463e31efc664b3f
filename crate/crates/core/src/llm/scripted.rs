use std::collections::VecDeque;
use std::path::Path;
use std::sync::Mutex;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::{check_messages, prompt_chars, BackendError, ChatBackend, ChatMessage, ChatReply, Role, TokenUsage};
use crate::agents::{policy, prompts, Actor};

/// Conditions on the conversation; all present conditions must hold.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Matcher {
    /// Which agent is asking: `verifier`, `toolgen` or `react`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub agent: Option<Actor>,
    /// Substring of the last user message.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub contains: Option<String>,
    /// Regular expression searched in the last user message.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub regex: Option<String>,
    /// 1-based count of assistant turns so far in this conversation, plus one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub turn: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScriptRule {
    #[serde(default)]
    pub when: Matcher,
    pub reply: String,
}

/// What to answer when no rule matches.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScriptDefault {
    /// Answer with the built-in deterministic agent policy.
    Policy,
    Reply(String),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ScriptFile {
    #[serde(default)]
    rules: Vec<ScriptRule>,
    #[serde(default = "default_policy")]
    default: ScriptDefault,
}

fn default_policy() -> ScriptDefault {
    ScriptDefault::Policy
}

/// Deterministic backend driven by match rules; first matching rule wins.
#[derive(Debug)]
pub struct ScriptedBackend {
    rules: Vec<(ScriptRule, Option<Regex>)>,
    default: ScriptDefault,
}

impl ScriptedBackend {
    pub fn new(rules: Vec<ScriptRule>, default: ScriptDefault) -> Result<Self, BackendError> {
        let rules = rules
            .into_iter()
            .map(|r| {
                let re = r
                    .when
                    .regex
                    .as_deref()
                    .map(Regex::new)
                    .transpose()
                    .map_err(|e| BackendError::InvalidRequest(format!("bad script regex: {e}")))?;
                Ok((r, re))
            })
            .collect::<Result<_, BackendError>>()?;
        Ok(Self { rules, default })
    }

    /// Backend answering every turn with the built-in policy.
    pub fn policy() -> Self {
        Self { rules: Vec::new(), default: ScriptDefault::Policy }
    }

    pub fn from_json(text: &str) -> Result<Self, BackendError> {
        let file: ScriptFile = serde_json::from_str(text)
            .map_err(|e| BackendError::InvalidRequest(format!("bad script: {e}")))?;
        Self::new(file.rules, file.default)
    }

    pub fn from_path(path: &Path) -> Result<Self, BackendError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| BackendError::InvalidRequest(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    fn matches(m: &Matcher, re: Option<&Regex>, messages: &[ChatMessage]) -> bool {
        let last_user = messages
            .iter()
            .rev()
            .find(|m| m.role == Role::User)
            .map(|m| m.content.as_str())
            .unwrap_or("");
        if let Some(agent) = m.agent {
            if prompts::agent_of(messages) != Some(agent) {
                return false;
            }
        }
        if let Some(s) = &m.contains {
            if !last_user.contains(s.as_str()) {
                return false;
            }
        }
        if let Some(re) = re {
            if !re.is_match(last_user) {
                return false;
            }
        }
        if let Some(turn) = m.turn {
            let assistant_turns = messages.iter().filter(|m| m.role == Role::Assistant).count();
            if assistant_turns + 1 != turn {
                return false;
            }
        }
        true
    }
}

impl ChatBackend for ScriptedBackend {
    fn chat(&self, messages: &[ChatMessage]) -> Result<ChatReply, BackendError> {
        check_messages(messages)?;
        let text = self
            .rules
            .iter()
            .find(|(r, re)| Self::matches(&r.when, re.as_ref(), messages))
            .map(|(r, _)| r.reply.clone())
            .unwrap_or_else(|| match &self.default {
                ScriptDefault::Policy => policy::respond(messages),
                ScriptDefault::Reply(s) => s.clone(),
            });
        let usage = TokenUsage::estimate(prompt_chars(messages), text.chars().count());
        Ok(ChatReply { text, usage, estimated: true })
    }

    fn describe(&self) -> String {
        if self.rules.is_empty() && self.default == ScriptDefault::Policy {
            "scripted:policy".into()
        } else {
            format!("scripted:{}-rules", self.rules.len())
        }
    }
}

/// Replays a fixed sequence of replies, one per call.
#[derive(Debug)]
pub struct ReplayBackend {
    replies: Mutex<VecDeque<String>>,
}

impl ReplayBackend {
    pub fn new<I, S>(replies: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self { replies: Mutex::new(replies.into_iter().map(Into::into).collect()) }
    }
}

impl ChatBackend for ReplayBackend {
    fn chat(&self, messages: &[ChatMessage]) -> Result<ChatReply, BackendError> {
        check_messages(messages)?;
        let text = self
            .replies
            .lock()
            .expect("replay queue poisoned")
            .pop_front()
            .ok_or_else(|| BackendError::BackendUnavailable("replay exhausted".into()))?;
        let usage = TokenUsage::estimate(prompt_chars(messages), text.chars().count());
        Ok(ChatReply { text, usage, estimated: true })
    }

    fn describe(&self) -> String {
        "replay".into()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn conv(system: &str, user: &str) -> Vec<ChatMessage> {
        vec![ChatMessage::system(system), ChatMessage::user(user)]
    }

    #[test]
    fn first_matching_rule_wins() {
        let b = ScriptedBackend::from_json(
            r#"{"rules":[
                {"when":{"contains":"alpha"},"reply":"one"},
                {"when":{"regex":"al.ha|beta"},"reply":"two"}
              ],
              "default":{"reply":"none"}}"#,
        )
        .unwrap();
        assert_eq!(b.chat(&conv("s", "alpha")).unwrap().text, "one");
        assert_eq!(b.chat(&conv("s", "beta")).unwrap().text, "two");
        assert_eq!(b.chat(&conv("s", "gamma")).unwrap().text, "none");
    }

    #[test]
    fn turn_counts_assistant_replies() {
        let b = ScriptedBackend::new(
            vec![ScriptRule { when: Matcher { turn: Some(2), ..Matcher::default() }, reply: "second".into() }],
            ScriptDefault::Reply("other".into()),
        )
        .unwrap();
        let mut m = conv("s", "u");
        assert_eq!(b.chat(&m).unwrap().text, "other");
        m.push(ChatMessage::assistant("x"));
        m.push(ChatMessage::user("y"));
        assert_eq!(b.chat(&m).unwrap().text, "second");
    }

    #[test]
    fn usage_is_estimated_from_characters() {
        let b = ScriptedBackend::new(vec![], ScriptDefault::Reply("abcde".into())).unwrap();
        let r = b.chat(&conv("1234", "5678")).unwrap();
        assert!(r.estimated);
        assert_eq!(r.usage, TokenUsage::new(2, 2));
    }

    #[test]
    fn replay_runs_dry() {
        let b = ReplayBackend::new(["a"]);
        assert_eq!(b.chat(&conv("s", "u")).unwrap().text, "a");
        assert!(matches!(b.chat(&conv("s", "u")), Err(BackendError::BackendUnavailable(_))));
    }

    #[test]
    fn bad_regex_is_rejected() {
        assert!(ScriptedBackend::from_json(r#"{"rules":[{"when":{"regex":"("},"reply":"x"}]}"#).is_err());
    }
}
