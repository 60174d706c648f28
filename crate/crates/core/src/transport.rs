//! Provider errors and the JSON-over-HTTP call shared by the live chat and
//! embedding adapters.

use std::time::Duration;

use serde_json::Value;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ProviderError {
    #[error("transport failure (status {status:?}): {message}")]
    Transport { status: Option<u16>, message: String },
    #[error("provider misconfigured: {0}")]
    Config(String),
    #[error("unexpected provider response: {0}")]
    BadResponse(String),
}

impl ProviderError {
    /// Connection failures, rate limiting and server errors are worth retrying.
    pub fn is_retryable(&self) -> bool {
        match self {
            ProviderError::Transport { status: None, .. } => true,
            ProviderError::Transport {
                status: Some(code), ..
            } => *code == 408 || *code == 429 || *code >= 500,
            _ => false,
        }
    }
}

/// POSTs `body` as JSON with an optional bearer token and returns the decoded
/// JSON response. Non-2xx statuses become [`ProviderError::Transport`].
pub fn post_json(
    url: &str,
    api_key: Option<&str>,
    body: &Value,
    timeout: Duration,
) -> Result<Value, ProviderError> {
    let agent: ureq::Agent = ureq::Agent::config_builder()
        .timeout_global(Some(timeout))
        .http_status_as_error(false)
        .build()
        .into();
    let mut request = agent.post(url).header("Content-Type", "application/json");
    if let Some(key) = api_key {
        request = request.header("Authorization", format!("Bearer {key}"));
    }
    let mut response = request
        .send_json(body)
        .map_err(|e| ProviderError::Transport {
            status: None,
            message: e.to_string(),
        })?;
    let status = response.status().as_u16();
    let text = response
        .body_mut()
        .read_to_string()
        .map_err(|e| ProviderError::Transport {
            status: Some(status),
            message: e.to_string(),
        })?;
    if !(200..300).contains(&status) {
        let mut message = text;
        message.truncate(500);
        return Err(ProviderError::Transport {
            status: Some(status),
            message,
        });
    }
    serde_json::from_str(&text).map_err(|e| ProviderError::BadResponse(e.to_string()))
}
