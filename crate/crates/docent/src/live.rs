//! Chat-completion provider over HTTPS.
//!
//! Configuration comes from the environment:
//!
//! - `DOCENT_LLM_ENDPOINT`: full URL of a chat-completions endpoint
//! - `DOCENT_LLM_MODEL`: model identifier
//! - `DOCENT_LLM_API_KEY`: bearer token (optional for local servers)

use std::time::Duration;

use docent_core::gen::{FinishStatus, Provider, ProviderError, ProviderRequest, ProviderResponse};
use serde::{Deserialize, Serialize};

pub const ENDPOINT_VAR: &str = "DOCENT_LLM_ENDPOINT";
pub const MODEL_VAR: &str = "DOCENT_LLM_MODEL";
pub const API_KEY_VAR: &str = "DOCENT_LLM_API_KEY";

#[derive(Debug, Clone, PartialEq)]
pub struct LiveConfig {
    pub endpoint: String,
    pub model: String,
    pub api_key: Option<String>,
    pub timeout: Duration,
}

impl LiveConfig {
    pub fn from_env() -> Result<Self, ProviderError> {
        let var = |name: &str| std::env::var(name).ok().filter(|v| !v.trim().is_empty());
        let endpoint = var(ENDPOINT_VAR).ok_or_else(|| ProviderError::Unavailable(format!("{ENDPOINT_VAR} is not set")))?;
        let model = var(MODEL_VAR).ok_or_else(|| ProviderError::Unavailable(format!("{MODEL_VAR} is not set")))?;
        Ok(LiveConfig {
            endpoint,
            model,
            api_key: var(API_KEY_VAR),
            timeout: Duration::from_secs(120),
        })
    }
}

#[derive(Serialize)]
struct Message<'a> {
    role: &'a str,
    content: &'a str,
}

#[derive(Serialize)]
struct ChatRequest<'a> {
    model: &'a str,
    messages: Vec<Message<'a>>,
    temperature: f64,
    max_tokens: u32,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    message: ReplyMessage,
    #[serde(default)]
    finish_reason: Option<String>,
}

#[derive(Deserialize)]
struct ReplyMessage {
    #[serde(default)]
    content: Option<String>,
}

pub struct LiveProvider {
    config: LiveConfig,
    agent: ureq::Agent,
}

impl LiveProvider {
    pub fn new(config: LiveConfig) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(config.timeout))
            .http_status_as_error(false)
            .build()
            .into();
        LiveProvider { config, agent }
    }

    pub fn from_env() -> Result<Self, ProviderError> {
        LiveConfig::from_env().map(Self::new)
    }
}

fn body<'a>(model: &'a str, request: &'a ProviderRequest) -> ChatRequest<'a> {
    let mut messages = Vec::with_capacity(2);
    if !request.system.is_empty() {
        messages.push(Message {
            role: "system",
            content: &request.system,
        });
    }
    messages.push(Message {
        role: "user",
        content: &request.user,
    });
    ChatRequest {
        model,
        messages,
        temperature: request.temperature,
        max_tokens: request.max_tokens,
    }
}

fn parse_reply(reply: ChatResponse) -> Result<ProviderResponse, ProviderError> {
    let choice = reply
        .choices
        .into_iter()
        .next()
        .ok_or_else(|| ProviderError::BadResponse("no choices".into()))?;
    let text = choice.message.content.unwrap_or_default();
    if text.trim().is_empty() {
        return Err(ProviderError::BadResponse("empty content".into()));
    }
    let finish = match choice.finish_reason.as_deref() {
        Some("length") => FinishStatus::Truncated,
        _ => FinishStatus::Complete,
    };
    Ok(ProviderResponse { text, finish })
}

impl Provider for LiveProvider {
    fn complete(&mut self, request: &ProviderRequest) -> Result<ProviderResponse, ProviderError> {
        let mut call = self.agent.post(&self.config.endpoint);
        if let Some(key) = &self.config.api_key {
            call = call.header("Authorization", &format!("Bearer {key}"));
        }
        let mut response = call
            .send_json(body(&self.config.model, request))
            .map_err(|e| ProviderError::Unavailable(e.to_string()))?;
        let status = response.status().as_u16();
        if status == 429 || status >= 500 {
            return Err(ProviderError::Unavailable(format!("HTTP {status}")));
        }
        if status >= 400 {
            return Err(ProviderError::BadResponse(format!("HTTP {status}")));
        }
        let reply: ChatResponse = response
            .body_mut()
            .read_json()
            .map_err(|e| ProviderError::BadResponse(e.to_string()))?;
        parse_reply(reply)
    }
}
