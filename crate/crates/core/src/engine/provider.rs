//! Chat-completion providers.

use std::collections::{HashMap, VecDeque};
use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::Path;
use std::sync::{Mutex, OnceLock};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::prompts;
use crate::instruct::{ACT_PREDICTION_INSTRUCTION, UTTERANCE_GENERATION_INSTRUCTION};
use crate::scenario::TestScenario;
use crate::taxonomy::ActId;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChatRole {
    System,
    User,
    Assistant,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: ChatRole,
    pub content: String,
}

impl ChatMessage {
    pub fn user(content: impl Into<String>) -> Self {
        ChatMessage {
            role: ChatRole::User,
            content: content.into(),
        }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        ChatMessage {
            role: ChatRole::Assistant,
            content: content.into(),
        }
    }
}

/// One request and its verbatim reply.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatExchange {
    pub messages: Vec<ChatMessage>,
    pub reply: String,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ProviderError {
    #[error("transport error: {0}")]
    Transport(String),
    #[error("provider returned status {status}: {body}")]
    Status { status: u16, body: String },
    #[error("malformed provider response: {0}")]
    Malformed(String),
    #[error("scripted provider has no replies left")]
    Exhausted,
    #[error("replay provider does not recognise the prompt: {0}")]
    Unmatched(String),
}

/// A synchronous chat-completion backend.
pub trait ChatProvider: Send + Sync {
    fn complete(&self, messages: &[ChatMessage]) -> Result<String, ProviderError>;
}

impl<P: ChatProvider + ?Sized> ChatProvider for std::sync::Arc<P> {
    fn complete(&self, messages: &[ChatMessage]) -> Result<String, ProviderError> {
        (**self).complete(messages)
    }
}

impl<P: ChatProvider + ?Sized> ChatProvider for &P {
    fn complete(&self, messages: &[ChatMessage]) -> Result<String, ProviderError> {
        (**self).complete(messages)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProviderConfig {
    pub base_url: String,
    pub model: String,
    #[serde(default)]
    pub temperature: f64,
    #[serde(default = "default_max_tokens")]
    pub max_tokens: u32,
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
    #[serde(skip)]
    pub api_key: Option<String>,
}

fn default_max_tokens() -> u32 {
    512
}

fn default_timeout() -> u64 {
    60
}

pub const API_KEY_ENV: &str = "PROVIDER_API_KEY";
pub const BASE_URL_ENV: &str = "PROVIDER_BASE_URL";
const DEFAULT_BASE_URL: &str = "https://api.openai.com/v1";

impl ProviderConfig {
    pub fn new(base_url: impl Into<String>, model: impl Into<String>) -> Self {
        ProviderConfig {
            base_url: base_url.into(),
            model: model.into(),
            temperature: 0.0,
            max_tokens: default_max_tokens(),
            timeout_secs: default_timeout(),
            api_key: None,
        }
    }

    /// Base URL and bearer token from `PROVIDER_BASE_URL` and `PROVIDER_API_KEY`.
    pub fn from_env(model: impl Into<String>) -> Self {
        let mut c = ProviderConfig::new(
            std::env::var(BASE_URL_ENV).unwrap_or_else(|_| DEFAULT_BASE_URL.to_string()),
            model,
        );
        c.api_key = std::env::var(API_KEY_ENV).ok().filter(|k| !k.is_empty());
        c
    }
}

/// OpenAI-compatible `POST {base}/chat/completions` with bearer auth.
///
/// Request: `{"model", "messages": [{"role", "content"}], "temperature", "max_tokens"}`.
/// Reply: `choices[0].message.content`.
pub struct HttpProvider {
    config: ProviderConfig,
    client: OnceLock<reqwest::blocking::Client>,
}

#[derive(Deserialize)]
struct CompletionResponse {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    message: ChoiceMessage,
}

#[derive(Deserialize)]
struct ChoiceMessage {
    content: Option<String>,
}

impl HttpProvider {
    pub fn new(config: ProviderConfig) -> Result<Self, ProviderError> {
        if config.temperature.is_nan() || config.temperature < 0.0 {
            return Err(ProviderError::Malformed(format!(
                "temperature must be non-negative, got {}",
                config.temperature
            )));
        }
        Ok(HttpProvider {
            config,
            client: OnceLock::new(),
        })
    }

    pub fn config(&self) -> &ProviderConfig {
        &self.config
    }

    // Built on first use: the blocking client owns a runtime and must not be
    // created inside an async context.
    fn client(&self) -> &reqwest::blocking::Client {
        self.client.get_or_init(|| {
            reqwest::blocking::Client::builder()
                .timeout(Duration::from_secs(self.config.timeout_secs))
                .build()
                .expect("http client")
        })
    }
}

impl ChatProvider for HttpProvider {
    fn complete(&self, messages: &[ChatMessage]) -> Result<String, ProviderError> {
        let url = format!("{}/chat/completions", self.config.base_url.trim_end_matches('/'));
        let body = serde_json::json!({
            "model": self.config.model,
            "messages": messages,
            "temperature": self.config.temperature,
            "max_tokens": self.config.max_tokens,
        });
        let mut req = self.client().post(url).json(&body);
        if let Some(key) = &self.config.api_key {
            req = req.bearer_auth(key);
        }
        let resp = req.send().map_err(|e| ProviderError::Transport(e.to_string()))?;
        let status = resp.status();
        if !status.is_success() {
            return Err(ProviderError::Status {
                status: status.as_u16(),
                body: resp.text().unwrap_or_default(),
            });
        }
        let parsed: CompletionResponse = resp.json().map_err(|e| ProviderError::Malformed(e.to_string()))?;
        parsed
            .choices
            .into_iter()
            .next()
            .and_then(|c| c.message.content)
            .ok_or_else(|| ProviderError::Malformed("no choices[0].message.content".into()))
    }
}

/// Replies from a fixed queue and logs every exchange.
#[derive(Default)]
pub struct ScriptedProvider {
    replies: Mutex<VecDeque<String>>,
    log: Mutex<Vec<ChatExchange>>,
}

impl ScriptedProvider {
    pub fn new<S: Into<String>>(replies: impl IntoIterator<Item = S>) -> Self {
        ScriptedProvider {
            replies: Mutex::new(replies.into_iter().map(Into::into).collect()),
            log: Mutex::new(Vec::new()),
        }
    }

    pub fn push(&self, reply: impl Into<String>) {
        self.replies.lock().expect("lock").push_back(reply.into());
    }

    pub fn exchanges(&self) -> Vec<ChatExchange> {
        self.log.lock().expect("lock").clone()
    }

    pub fn calls(&self) -> usize {
        self.log.lock().expect("lock").len()
    }
}

impl ChatProvider for ScriptedProvider {
    fn complete(&self, messages: &[ChatMessage]) -> Result<String, ProviderError> {
        let reply = self
            .replies
            .lock()
            .expect("lock")
            .pop_front()
            .ok_or(ProviderError::Exhausted)?;
        self.log.lock().expect("lock").push(ChatExchange {
            messages: messages.to_vec(),
            reply: reply.clone(),
        });
        Ok(reply)
    }
}

/// Adapts a closure into a provider.
pub struct FnProvider<F>(pub F);

impl<F> ChatProvider for FnProvider<F>
where
    F: Fn(&[ChatMessage]) -> Result<String, ProviderError> + Send + Sync,
{
    fn complete(&self, messages: &[ChatMessage]) -> Result<String, ProviderError> {
        (self.0)(messages)
    }
}

/// Appends every exchange (including failures, with an empty reply) as one
/// JSON line to a log file.
pub struct RecordingProvider<P> {
    inner: P,
    file: Mutex<File>,
}

#[derive(Serialize)]
struct LoggedExchange<'a> {
    messages: &'a [ChatMessage],
    reply: Option<&'a str>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

impl<P: ChatProvider> RecordingProvider<P> {
    pub fn new(inner: P, path: impl AsRef<Path>) -> std::io::Result<Self> {
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(RecordingProvider {
            inner,
            file: Mutex::new(file),
        })
    }
}

impl<P: ChatProvider> ChatProvider for RecordingProvider<P> {
    fn complete(&self, messages: &[ChatMessage]) -> Result<String, ProviderError> {
        let result = self.inner.complete(messages);
        let entry = LoggedExchange {
            messages,
            reply: result.as_deref().ok(),
            error: result.as_ref().err().map(ToString::to_string),
        };
        let line = serde_json::to_string(&entry).expect("exchange serialises");
        let mut f = self.file.lock().expect("lock");
        writeln!(f, "{line}").map_err(|e| ProviderError::Transport(format!("prompt log: {e}")))?;
        result
    }
}

/// Answers every prompt with the gold act or gold utterance of the scenario
/// whose context it carries.
pub struct GoldReplayProvider {
    by_context: HashMap<String, (ActId, String)>,
    by_plain: HashMap<String, String>,
}

impl GoldReplayProvider {
    pub fn new(scenarios: &[TestScenario]) -> Self {
        GoldReplayProvider {
            by_context: scenarios
                .iter()
                .map(|s| (s.context.clone(), (s.target_act.clone(), s.gold_utterance.clone())))
                .collect(),
            by_plain: scenarios
                .iter()
                .map(|s| (s.plain_context.clone(), s.gold_utterance.clone()))
                .collect(),
        }
    }
}

fn between<'a>(text: &'a str, start: &str, end: &str) -> Option<&'a str> {
    let from = text.find(start)? + start.len();
    let len = text[from..].find(end)?;
    Some(&text[from..from + len])
}

impl ChatProvider for GoldReplayProvider {
    fn complete(&self, messages: &[ChatMessage]) -> Result<String, ProviderError> {
        let prompt = &messages
            .iter()
            .find(|m| m.role == ChatRole::User)
            .ok_or_else(|| ProviderError::Unmatched("no user message".into()))?
            .content;
        if let Some(plain) = between(
            prompt,
            prompts::BASELINE_CONTEXT_HEADER,
            prompts::BASELINE_CONTENT_HEADER,
        ) {
            return self
                .by_plain
                .get(plain)
                .cloned()
                .ok_or_else(|| ProviderError::Unmatched("baseline context".into()));
        }
        let ctx = between(prompt, prompts::TASK_CONTEXT_MARKER, prompts::CONTENT_MARKER)
            .ok_or_else(|| ProviderError::Unmatched("no task scenario".into()))?;
        let (act, utterance) = self
            .by_context
            .get(ctx)
            .ok_or_else(|| ProviderError::Unmatched("task context".into()))?;
        if prompt.contains(ACT_PREDICTION_INSTRUCTION) {
            Ok(act.to_string())
        } else if prompt.contains(UTTERANCE_GENERATION_INSTRUCTION) {
            Ok(utterance.clone())
        } else {
            Err(ProviderError::Unmatched("unknown prompt kind".into()))
        }
    }
}
