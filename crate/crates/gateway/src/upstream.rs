//! Chat-completion client for the configured upstream endpoint.

use std::sync::Arc;
use std::time::Duration;

use literacy_core::config::UpstreamConfig;
use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

use crate::transport::{Transport, TransportError};

const EXCERPT_CHARS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

impl ChatMessage {
    pub fn user(content: impl Into<String>) -> Self {
        Self {
            role: Role::User,
            content: content.into(),
        }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        Self {
            role: Role::Assistant,
            content: content.into(),
        }
    }
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
#[error("{}", match .status {
    Some(s) => format!("upstream returned {s}: {}", .excerpt),
    None => format!("upstream unreachable: {}", .excerpt),
})]
pub struct UpstreamError {
    /// HTTP status, `None` for timeouts and connection failures.
    pub status: Option<u16>,
    pub excerpt: String,
    pub retriable: bool,
}

#[derive(Deserialize)]
struct Completion {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    message: ChoiceMessage,
}

#[derive(Deserialize)]
struct ChoiceMessage {
    content: String,
}

#[derive(Clone)]
pub struct UpstreamClient {
    config: UpstreamConfig,
    transport: Arc<dyn Transport>,
}

fn excerpt(s: &str) -> String {
    s.chars().take(EXCERPT_CHARS).collect()
}

impl UpstreamClient {
    pub fn new(config: UpstreamConfig, transport: Arc<dyn Transport>) -> Self {
        Self { config, transport }
    }

    pub fn endpoint(&self) -> &url::Url {
        &self.config.endpoint
    }

    /// One request carrying `history` followed by `text` as the user turn.
    pub async fn complete(
        &self,
        history: &[ChatMessage],
        text: &str,
    ) -> Result<String, UpstreamError> {
        let mut messages = history.to_vec();
        messages.push(ChatMessage::user(text));
        let body = json!({ "model": self.config.model, "messages": messages });
        let resp = self
            .transport
            .post_json(
                &self.config.endpoint,
                self.config.api_key.as_ref().map(|k| k.expose()),
                &body,
                Duration::from_secs(self.config.timeout_secs),
            )
            .await
            .map_err(|e| UpstreamError {
                status: None,
                excerpt: e.to_string(),
                retriable: matches!(e, TransportError::Timeout | TransportError::Connect(_)),
            })?;
        if !(200..300).contains(&resp.status) {
            return Err(UpstreamError {
                status: Some(resp.status),
                excerpt: excerpt(&resp.body),
                retriable: resp.status == 429 || resp.status >= 500,
            });
        }
        let parsed: Completion = serde_json::from_str(&resp.body).map_err(|e| UpstreamError {
            status: Some(resp.status),
            excerpt: format!("unreadable completion: {e}"),
            retriable: false,
        })?;
        parsed
            .choices
            .into_iter()
            .next()
            .map(|c| c.message.content)
            .ok_or_else(|| UpstreamError {
                status: Some(resp.status),
                excerpt: "completion has no choices".into(),
                retriable: false,
            })
    }
}
