use std::collections::VecDeque;
use std::time::Duration;

use arena_baselines::Policy;
use arena_core::{AgentAction, Observation, TaskSpec};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::parse::close_truncated;
use crate::prompt::{Prompt, STOP_SEQUENCES};

pub struct AgentRequest<'a> {
    pub task: &'a TaskSpec,
    pub step: usize,
    pub prompt: &'a Prompt,
    /// Structured view for scripted agents; remote agents only see `prompt`.
    pub observation: &'a Observation,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenUsage {
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

impl std::ops::AddAssign for TokenUsage {
    fn add_assign(&mut self, rhs: Self) {
        self.prompt_tokens += rhs.prompt_tokens;
        self.completion_tokens += rhs.completion_tokens;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentReply {
    pub text: String,
    pub usage: Option<TokenUsage>,
}

impl AgentReply {
    pub fn text(text: impl Into<String>) -> Self {
        Self { text: text.into(), usage: None }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AgentError {
    /// Worth retrying: timeouts, connection failures, 5xx and 429 replies.
    #[error("transient agent failure: {0}")]
    Transient(String),
    #[error("agent failure: {0}")]
    Fatal(String),
}

pub trait Agent: Send {
    fn name(&self) -> &str;
    fn respond(&mut self, request: &AgentRequest<'_>) -> Result<AgentReply, AgentError>;
}

/// Wraps a scripted policy; replies carry the action in a tag so the same
/// parsing path as for models is exercised.
pub struct ScriptedAgent {
    policy: Box<dyn Policy>,
}

impl ScriptedAgent {
    pub fn new(policy: Box<dyn Policy>) -> Self {
        Self { policy }
    }
}

impl Agent for ScriptedAgent {
    fn name(&self) -> &str {
        self.policy.name()
    }

    fn respond(&mut self, request: &AgentRequest<'_>) -> Result<AgentReply, AgentError> {
        let action = self.policy.act(request.observation);
        let wire = match &action {
            AgentAction::Malformed { raw, .. } => raw.clone(),
            a => a.to_wire(),
        };
        Ok(AgentReply::text(format!("<action>{wire}</action>")))
    }
}

/// Canned replies for tests. Records every prompt it receives.
pub struct StubAgent {
    replies: VecDeque<Result<String, AgentError>>,
    fallback: String,
    pub prompts: Vec<Prompt>,
}

impl StubAgent {
    pub fn new<I, S>(replies: I, fallback: impl Into<String>) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self {
            replies: replies.into_iter().map(|s| Ok(s.into())).collect(),
            fallback: fallback.into(),
            prompts: Vec::new(),
        }
    }

    /// Queue a failure to be returned on the next call.
    pub fn push_error(&mut self, err: AgentError) {
        self.replies.push_back(Err(err));
    }
}

impl Agent for StubAgent {
    fn name(&self) -> &str {
        "stub"
    }

    fn respond(&mut self, request: &AgentRequest<'_>) -> Result<AgentReply, AgentError> {
        self.prompts.push(request.prompt.clone());
        match self.replies.pop_front() {
            Some(Ok(text)) => Ok(AgentReply::text(close_truncated(&text))),
            Some(Err(e)) => Err(e),
            None => Ok(AgentReply::text(self.fallback.clone())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RemoteConfig {
    /// Full URL of a chat-completions style endpoint.
    pub endpoint: String,
    pub model: String,
    pub temperature: f64,
    pub headers: Vec<(String, String)>,
    pub timeout_secs: u64,
}

impl RemoteConfig {
    pub fn new(endpoint: impl Into<String>, model: impl Into<String>) -> Self {
        Self {
            endpoint: endpoint.into(),
            model: model.into(),
            temperature: 0.6,
            headers: Vec::new(),
            timeout_secs: 120,
        }
    }
}

/// Speaks a chat-completion request/response protocol over HTTP.
pub struct RemoteAgent {
    config: RemoteConfig,
    http: ureq::Agent,
}

impl RemoteAgent {
    pub fn new(config: RemoteConfig) -> Self {
        let http =
            ureq::Agent::config_builder().timeout_global(Some(Duration::from_secs(config.timeout_secs))).build().into();
        Self { config, http }
    }

    pub fn request_body(&self, prompt: &Prompt) -> Value {
        json!({
            "model": self.config.model,
            "messages": prompt.messages(),
            "temperature": self.config.temperature,
            "stop": STOP_SEQUENCES,
        })
    }
}

fn classify(err: ureq::Error) -> AgentError {
    match err {
        ureq::Error::StatusCode(code) if code == 429 || code >= 500 => {
            AgentError::Transient(format!("endpoint returned HTTP {code}"))
        }
        ureq::Error::StatusCode(code) => AgentError::Fatal(format!("endpoint returned HTTP {code}")),
        ureq::Error::Timeout(_) | ureq::Error::Io(_) | ureq::Error::ConnectionFailed | ureq::Error::HostNotFound => {
            AgentError::Transient(err.to_string())
        }
        other => AgentError::Fatal(other.to_string()),
    }
}

impl Agent for RemoteAgent {
    fn name(&self) -> &str {
        &self.config.model
    }

    fn respond(&mut self, request: &AgentRequest<'_>) -> Result<AgentReply, AgentError> {
        let mut req = self.http.post(&self.config.endpoint);
        for (k, v) in &self.config.headers {
            req = req.header(k.as_str(), v.as_str());
        }
        let body: Value = req
            .send_json(self.request_body(request.prompt))
            .map_err(classify)?
            .into_body()
            .read_json()
            .map_err(|e| AgentError::Transient(format!("unreadable response: {e}")))?;
        let text = body
            .pointer("/choices/0/message/content")
            .and_then(Value::as_str)
            .ok_or_else(|| AgentError::Fatal("response has no choices[0].message.content".into()))?;
        let usage = body.get("usage").map(|u| TokenUsage {
            prompt_tokens: u.get("prompt_tokens").and_then(Value::as_u64).unwrap_or(0),
            completion_tokens: u.get("completion_tokens").and_then(Value::as_u64).unwrap_or(0),
        });
        Ok(AgentReply { text: close_truncated(text), usage })
    }
}
