//! OpenAI-compatible chat-completion planner.
//!
//! One `POST {base_url}/chat/completions` per attempt, temperature 0, a
//! single choice. The reply text goes through the same parser as every
//! other planner. Wire shapes are documented in `docs/formats.md`.

use super::{build_prompt, parse_plan, DisruptionContext, Planner, PlannerError, PromptText, ProposedPlan};
use serde_json::{json, Value};
use std::cell::RefCell;
use std::collections::VecDeque;
use std::time::Duration;

pub const API_KEY_ENV: &str = "REASSIGND_API_KEY";

const SYSTEM_MESSAGE: &str =
    "You are the task reassignment planner of a central controller agent. Reply with a single JSON object.";

#[derive(Debug, Clone, PartialEq)]
pub struct ChatEndpointConfig {
    /// e.g. `https://api.openai.com/v1`; `/chat/completions` is appended.
    pub base_url: String,
    pub model: String,
    pub api_key: Option<String>,
    pub timeout: Duration,
}

impl ChatEndpointConfig {
    pub fn new(base_url: impl Into<String>, model: impl Into<String>) -> Self {
        Self {
            base_url: base_url.into(),
            model: model.into(),
            api_key: None,
            timeout: Duration::from_secs(60),
        }
    }

    /// Like [`ChatEndpointConfig::new`], reading the API key from `REASSIGND_API_KEY`.
    pub fn from_env(base_url: impl Into<String>, model: impl Into<String>) -> Self {
        let mut cfg = Self::new(base_url, model);
        cfg.api_key = std::env::var(API_KEY_ENV).ok().filter(|k| !k.is_empty());
        cfg
    }

    pub fn completions_url(&self) -> String {
        format!("{}/chat/completions", self.base_url.trim_end_matches('/'))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HttpReply {
    pub status: u16,
    pub body: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TransportError {
    Timeout,
    Io(String),
}

/// Moves one JSON request to the endpoint and returns the raw HTTP reply.
pub trait ChatTransport {
    fn post(
        &self,
        url: &str,
        api_key: Option<&str>,
        body: &Value,
        timeout: Duration,
    ) -> Result<HttpReply, TransportError>;
}

/// Blocking HTTP transport.
#[derive(Debug, Default, Clone)]
pub struct UreqTransport;

impl ChatTransport for UreqTransport {
    fn post(
        &self,
        url: &str,
        api_key: Option<&str>,
        body: &Value,
        timeout: Duration,
    ) -> Result<HttpReply, TransportError> {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build()
            .into();
        let mut request = agent.post(url).header("Content-Type", "application/json");
        if let Some(key) = api_key {
            request = request.header("Authorization", format!("Bearer {key}"));
        }
        let mut response = request.send_json(body).map_err(|e| match e {
            ureq::Error::Timeout(_) => TransportError::Timeout,
            other => TransportError::Io(other.to_string()),
        })?;
        let status = response.status().as_u16();
        let body = response.body_mut().read_to_string().map_err(|e| match e {
            ureq::Error::Timeout(_) => TransportError::Timeout,
            other => TransportError::Io(other.to_string()),
        })?;
        Ok(HttpReply { status, body })
    }
}

/// Request body for one attempt.
pub fn chat_request_body(model: &str, prompt: &PromptText) -> Value {
    json!({
        "model": model,
        "messages": [
            { "role": "system", "content": SYSTEM_MESSAGE },
            { "role": "user", "content": prompt.render() }
        ],
        "temperature": 0,
        "n": 1
    })
}

/// Pulls `choices[0].message.content` out of a successful reply.
pub fn extract_reply_content(reply: &HttpReply) -> Result<String, PlannerError> {
    if !(200..300).contains(&reply.status) {
        return Err(PlannerError::Http {
            status: reply.status,
            body: truncate(&reply.body, 512),
        });
    }
    let value: Value = serde_json::from_str(&reply.body).map_err(|e| PlannerError::BadReply(e.to_string()))?;
    value
        .pointer("/choices/0/message/content")
        .and_then(Value::as_str)
        .map(str::to_owned)
        .ok_or_else(|| PlannerError::BadReply("missing choices[0].message.content".into()))
}

fn truncate(s: &str, max: usize) -> String {
    match s.char_indices().nth(max) {
        Some((idx, _)) => format!("{}...", &s[..idx]),
        None => s.to_owned(),
    }
}

pub struct LlmPlanner<T: ChatTransport = UreqTransport> {
    endpoint: ChatEndpointConfig,
    transport: T,
}

impl LlmPlanner<UreqTransport> {
    pub fn http(endpoint: ChatEndpointConfig) -> Self {
        Self::new(endpoint, UreqTransport)
    }
}

impl<T: ChatTransport> LlmPlanner<T> {
    pub fn new(endpoint: ChatEndpointConfig, transport: T) -> Self {
        Self { endpoint, transport }
    }

    pub fn transport(&self) -> &T {
        &self.transport
    }

    /// One chat call with the context's prompt, parsed into a plan.
    pub fn plan(&mut self, ctx: &DisruptionContext) -> Result<ProposedPlan, PlannerError> {
        let prompt = build_prompt(ctx);
        let text = self.respond(ctx, &prompt)?;
        Ok(parse_plan(&text, ctx)?)
    }
}

impl<T: ChatTransport> Planner for LlmPlanner<T> {
    fn name(&self) -> &str {
        "llm"
    }

    fn respond(&mut self, _ctx: &DisruptionContext, prompt: &PromptText) -> Result<String, PlannerError> {
        let body = chat_request_body(&self.endpoint.model, prompt);
        let reply = self
            .transport
            .post(
                &self.endpoint.completions_url(),
                self.endpoint.api_key.as_deref(),
                &body,
                self.endpoint.timeout,
            )
            .map_err(|e| match e {
                TransportError::Timeout => PlannerError::Timeout,
                TransportError::Io(msg) => PlannerError::Transport(msg),
            })?;
        extract_reply_content(&reply)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ScriptedReply {
    /// 200 with a well-formed completion whose message content is this text.
    Content(String),
    /// Arbitrary status and body.
    Raw {
        status: u16,
        body: String,
    },
    Timeout,
}

/// In-process chat endpoint that answers from a script and records requests.
#[derive(Debug, Default)]
pub struct ScriptedEndpoint {
    replies: RefCell<VecDeque<ScriptedReply>>,
    requests: RefCell<Vec<(String, Option<String>, Value)>>,
}

impl ScriptedEndpoint {
    pub fn new(replies: impl IntoIterator<Item = ScriptedReply>) -> Self {
        Self {
            replies: RefCell::new(replies.into_iter().collect()),
            requests: RefCell::default(),
        }
    }

    /// `(url, api_key, body)` of every request received.
    pub fn requests(&self) -> Vec<(String, Option<String>, Value)> {
        self.requests.borrow().clone()
    }

    pub fn completion_body(content: &str) -> String {
        json!({
            "id": "chatcmpl-scripted",
            "object": "chat.completion",
            "created": 0,
            "model": "scripted",
            "choices": [{
                "index": 0,
                "message": { "role": "assistant", "content": content },
                "finish_reason": "stop"
            }]
        })
        .to_string()
    }
}

impl ChatTransport for ScriptedEndpoint {
    fn post(
        &self,
        url: &str,
        api_key: Option<&str>,
        body: &Value,
        _timeout: Duration,
    ) -> Result<HttpReply, TransportError> {
        self.requests
            .borrow_mut()
            .push((url.to_owned(), api_key.map(str::to_owned), body.clone()));
        match self.replies.borrow_mut().pop_front() {
            Some(ScriptedReply::Content(text)) => Ok(HttpReply {
                status: 200,
                body: Self::completion_body(&text),
            }),
            Some(ScriptedReply::Raw { status, body }) => Ok(HttpReply { status, body }),
            Some(ScriptedReply::Timeout) => Err(TransportError::Timeout),
            None => Ok(HttpReply {
                status: 503,
                body: "script exhausted".into(),
            }),
        }
    }
}

impl<T: ChatTransport + ?Sized> ChatTransport for &T {
    fn post(
        &self,
        url: &str,
        api_key: Option<&str>,
        body: &Value,
        timeout: Duration,
    ) -> Result<HttpReply, TransportError> {
        (**self).post(url, api_key, body, timeout)
    }
}
