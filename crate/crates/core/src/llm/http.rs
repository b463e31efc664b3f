use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{check_messages, prompt_chars, BackendError, ChatBackend, ChatMessage, ChatReply, TokenUsage};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HttpConfig {
    /// Base URL of an OpenAI-compatible API, e.g. `http://localhost:8000/v1`.
    pub base_url: String,
    pub model: String,
    /// Name of the environment variable holding the bearer token.
    #[serde(default)]
    pub api_key_env: Option<String>,
    #[serde(default)]
    pub temperature: f64,
    /// Extra attempts after the first on transport errors, 429 and 5xx.
    #[serde(default = "default_retries")]
    pub max_retries: u32,
    #[serde(default = "default_backoff")]
    pub backoff_ms: u64,
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
}

fn default_retries() -> u32 {
    2
}

fn default_backoff() -> u64 {
    250
}

fn default_timeout() -> u64 {
    120
}

impl HttpConfig {
    pub fn new(base_url: impl Into<String>, model: impl Into<String>) -> Self {
        Self {
            base_url: base_url.into(),
            model: model.into(),
            api_key_env: None,
            temperature: 0.0,
            max_retries: default_retries(),
            backoff_ms: default_backoff(),
            timeout_secs: default_timeout(),
        }
    }
}

/// Chat-completions client. The API key is read from the environment at
/// construction and never serialized.
pub struct HttpBackend {
    config: HttpConfig,
    api_key: Option<String>,
    agent: ureq::Agent,
}

impl std::fmt::Debug for HttpBackend {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("HttpBackend").field("config", &self.config).finish_non_exhaustive()
    }
}

impl HttpBackend {
    pub fn new(config: HttpConfig) -> Result<Self, BackendError> {
        let api_key = match &config.api_key_env {
            Some(var) => Some(std::env::var(var).map_err(|_| {
                BackendError::InvalidRequest(format!("environment variable {var} is not set"))
            })?),
            None => None,
        };
        let agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(Duration::from_secs(config.timeout_secs)))
            .build()
            .into();
        Ok(Self { config, api_key, agent })
    }

    fn endpoint(&self) -> String {
        format!("{}/chat/completions", self.config.base_url.trim_end_matches('/'))
    }

    fn attempt(&self, body: &Value) -> Result<Value, Attempt> {
        let mut req = self.agent.post(&self.endpoint()).header("Content-Type", "application/json");
        if let Some(key) = &self.api_key {
            req = req.header("Authorization", format!("Bearer {key}"));
        }
        let mut resp = req.send_json(body).map_err(|e| Attempt::Retry(e.to_string()))?;
        let status = resp.status().as_u16();
        if status == 429 || status >= 500 {
            return Err(Attempt::Retry(format!("HTTP {status}")));
        }
        if status >= 400 {
            let text = resp.body_mut().read_to_string().unwrap_or_default();
            return Err(Attempt::Fatal(BackendError::BackendUnavailable(format!(
                "HTTP {status}: {}",
                text.chars().take(200).collect::<String>()
            ))));
        }
        resp.body_mut()
            .read_json::<Value>()
            .map_err(|e| Attempt::Fatal(BackendError::MalformedProviderResponse(e.to_string())))
    }
}

enum Attempt {
    Retry(String),
    Fatal(BackendError),
}

/// Extracts the reply text and, when reported, token usage.
fn parse_completion(v: &Value) -> Result<(String, Option<TokenUsage>), BackendError> {
    let text = v
        .pointer("/choices/0/message/content")
        .and_then(Value::as_str)
        .ok_or_else(|| BackendError::MalformedProviderResponse("missing choices[0].message.content".into()))?
        .to_string();
    let usage = v.get("usage").and_then(|u| {
        let p = u.get("prompt_tokens")?.as_u64()?;
        let c = u.get("completion_tokens")?.as_u64()?;
        Some(TokenUsage::new(p, c))
    });
    Ok((text, usage))
}

impl ChatBackend for HttpBackend {
    fn chat(&self, messages: &[ChatMessage]) -> Result<ChatReply, BackendError> {
        check_messages(messages)?;
        let body = json!({
            "model": self.config.model,
            "messages": messages,
            "temperature": self.config.temperature,
        });
        let mut last = String::new();
        for attempt in 0..=self.config.max_retries {
            if attempt > 0 {
                std::thread::sleep(Duration::from_millis(self.config.backoff_ms << (attempt - 1)));
            }
            match self.attempt(&body) {
                Ok(v) => {
                    let (text, usage) = parse_completion(&v)?;
                    return Ok(match usage {
                        Some(usage) => ChatReply { text, usage, estimated: false },
                        None => {
                            let usage = TokenUsage::estimate(prompt_chars(messages), text.chars().count());
                            ChatReply { text, usage, estimated: true }
                        }
                    });
                }
                Err(Attempt::Fatal(e)) => return Err(e),
                Err(Attempt::Retry(msg)) => last = msg,
            }
        }
        Err(BackendError::BackendUnavailable(format!(
            "{} after {} attempts: {last}",
            self.endpoint(),
            self.config.max_retries + 1
        )))
    }

    fn describe(&self) -> String {
        format!("http:{}", self.config.model)
    }

    fn temperature(&self) -> Option<f64> {
        Some(self.config.temperature)
    }
}
