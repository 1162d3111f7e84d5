//! Client for OpenAI-compatible chat-completion endpoints with
//! schema-constrained output.

use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::agents::{
    check_schema, schema_hash, AgentBackend, AgentError, FixtureRecord, FixtureWriter, GenerationRequest, Message,
};

pub const DEFAULT_API_KEY_ENV: &str = "MANEUVERGPT_API_KEY";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LlmConfig {
    pub endpoint_url: String,
    pub model_name: String,
    /// Name of the environment variable holding the key. The key itself is
    /// never part of any config.
    pub api_key_env_var: String,
    pub require_auth: bool,
    /// Seconds per attempt.
    pub timeout: f64,
    pub max_retries: u32,
    pub temperature: f64,
    /// Seconds before the first retry.
    pub backoff_base: f64,
    pub backoff_factor: f64,
}

impl Default for LlmConfig {
    fn default() -> Self {
        Self {
            endpoint_url: "https://api.openai.com/v1/chat/completions".into(),
            model_name: "gpt-4o".into(),
            api_key_env_var: DEFAULT_API_KEY_ENV.into(),
            require_auth: true,
            timeout: 30.0,
            max_retries: 2,
            temperature: 0.2,
            backoff_base: 1.0,
            backoff_factor: 2.0,
        }
    }
}

impl LlmConfig {
    pub fn check(&self) -> Result<(), String> {
        if !(self.timeout.is_finite() && self.timeout > 0.0) {
            return Err(format!("timeout must be > 0, got {}", self.timeout));
        }
        if !(self.backoff_base >= 0.0 && self.backoff_factor >= 1.0) {
            return Err("backoff_base must be >= 0 and backoff_factor >= 1".into());
        }
        if !(0.0..=2.0).contains(&self.temperature) {
            return Err(format!("temperature {} outside [0, 2]", self.temperature));
        }
        Ok(())
    }

    /// Delay before retry number `attempt` (1-based).
    pub fn backoff(&self, attempt: u32) -> Duration {
        Duration::from_secs_f64(self.backoff_base * self.backoff_factor.powi(attempt as i32 - 1))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HttpResponse {
    pub status: u16,
    pub body: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TransportError {
    Timeout,
    Io(String),
}

pub trait Transport: Send + Sync {
    fn post_json(
        &self,
        url: &str,
        headers: &[(String, String)],
        body: &str,
        timeout: Duration,
    ) -> Result<HttpResponse, TransportError>;
}

/// Blocking HTTP transport.
#[derive(Debug, Default, Clone)]
pub struct UreqTransport;

impl Transport for UreqTransport {
    fn post_json(
        &self,
        url: &str,
        headers: &[(String, String)],
        body: &str,
        timeout: Duration,
    ) -> Result<HttpResponse, TransportError> {
        let agent: ureq::Agent =
            ureq::Agent::config_builder().timeout_global(Some(timeout)).http_status_as_error(false).build().into();
        let mut req = agent.post(url).header("Content-Type", "application/json");
        for (k, v) in headers {
            req = req.header(k.as_str(), v.as_str());
        }
        let mut resp = req.send(body).map_err(|e| match e {
            ureq::Error::Timeout(_) => TransportError::Timeout,
            other => TransportError::Io(other.to_string()),
        })?;
        let status = resp.status().as_u16();
        let body = resp.body_mut().read_to_string().map_err(|e| match e {
            ureq::Error::Timeout(_) => TransportError::Timeout,
            other => TransportError::Io(other.to_string()),
        })?;
        Ok(HttpResponse { status, body })
    }
}

pub struct LlmClient {
    config: LlmConfig,
    transport: Arc<dyn Transport>,
    sleep: fn(Duration),
}

impl LlmClient {
    pub fn new(config: LlmConfig) -> Self {
        Self::with_transport(config, Arc::new(UreqTransport))
    }

    pub fn with_transport(config: LlmConfig, transport: Arc<dyn Transport>) -> Self {
        Self { config, transport, sleep: std::thread::sleep }
    }

    pub fn config(&self) -> &LlmConfig {
        &self.config
    }

    fn api_key(&self) -> Result<Option<String>, AgentError> {
        match std::env::var(&self.config.api_key_env_var) {
            Ok(k) if !k.is_empty() => Ok(Some(k)),
            _ if self.config.require_auth => Err(AgentError::AuthMissing(self.config.api_key_env_var.clone())),
            _ => Ok(None),
        }
    }

    pub fn request_body(&self, messages: &[Message], schema: &Value) -> Value {
        json!({
            "model": self.config.model_name,
            "temperature": self.config.temperature,
            "messages": messages,
            "response_format": {
                "type": "json_schema",
                "json_schema": { "name": "maneuver_plan", "strict": true, "schema": schema }
            }
        })
    }

    /// Sends one structured-output request, retrying transport failures,
    /// 429, 5xx and non-conforming content.
    pub fn complete_structured(&self, messages: &[Message], schema: &Value) -> Result<Value, AgentError> {
        let key = self.api_key()?;
        let mut headers = Vec::new();
        if let Some(k) = key {
            headers.push(("Authorization".to_string(), format!("Bearer {k}")));
        }
        let body = self.request_body(messages, schema).to_string();
        let timeout = Duration::from_secs_f64(self.config.timeout);
        let mut last = AgentError::BackendUnavailable("no attempt made".into());
        for attempt in 0..=self.config.max_retries {
            if attempt > 0 {
                (self.sleep)(self.config.backoff(attempt));
            }
            let outcome = self.transport.post_json(&self.config.endpoint_url, &headers, &body, timeout);
            last = match outcome {
                Err(TransportError::Timeout) => AgentError::Timeout,
                Err(TransportError::Io(e)) => AgentError::BackendUnavailable(e),
                Ok(r) if r.status == 429 => AgentError::RateLimited,
                Ok(r) if r.status >= 500 => AgentError::BackendUnavailable(format!("HTTP {}", r.status)),
                Ok(r) if !(200..300).contains(&r.status) => {
                    return Err(AgentError::BackendUnavailable(format!("HTTP {}: {}", r.status, truncate(&r.body))))
                }
                Ok(r) => match extract_content(&r.body).and_then(|doc| check_schema(&doc, schema).map(|_| doc)) {
                    Ok(doc) => return Ok(doc),
                    Err(e) => e,
                },
            };
            log::warn!("attempt {} failed: {last}", attempt + 1);
        }
        Err(last)
    }
}

fn truncate(s: &str) -> &str {
    match s.char_indices().nth(200) {
        Some((i, _)) => &s[..i],
        None => s,
    }
}

/// Pulls the JSON document out of `choices[0].message.content`.
fn extract_content(body: &str) -> Result<Value, AgentError> {
    let v: Value =
        serde_json::from_str(body).map_err(|e| AgentError::SchemaViolation(format!("response is not JSON: {e}")))?;
    let content = v
        .pointer("/choices/0/message/content")
        .and_then(Value::as_str)
        .ok_or_else(|| AgentError::SchemaViolation("response has no choices[0].message.content".into()))?;
    serde_json::from_str(content).map_err(|e| AgentError::SchemaViolation(format!("content is not JSON: {e}")))
}

/// Live backend. With a recorder attached, every successful call is
/// appended to a fixture for later replay.
pub struct LlmBackend {
    client: LlmClient,
    recorder: Option<FixtureWriter>,
}

impl LlmBackend {
    pub fn new(client: LlmClient) -> Self {
        Self { client, recorder: None }
    }

    pub fn recording(mut self, writer: FixtureWriter) -> Self {
        self.recorder = Some(writer);
        self
    }
}

impl AgentBackend for LlmBackend {
    fn name(&self) -> &str {
        "llm"
    }

    fn generate(&mut self, request: &GenerationRequest) -> Result<Value, AgentError> {
        let doc = self.client.complete_structured(&request.messages, &request.output_schema)?;
        if let Some(w) = &self.recorder {
            w.append(&FixtureRecord {
                request_messages: request.messages.clone(),
                output_schema_hash: schema_hash(&request.output_schema),
                response_json: doc.clone(),
            })?;
        }
        Ok(doc)
    }
}
