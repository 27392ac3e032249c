use serde_json::{json, Value};

use super::{LlmError, Prompt, Provider, ProviderConfig};

/// Chat-completion client: posts `{model, messages, temperature}` and reads
/// `choices[0].message.content`.
#[derive(Debug)]
pub struct HttpProvider {
    agent: ureq::Agent,
    endpoint: String,
    api_key: Option<String>,
}

impl HttpProvider {
    pub fn new(config: &ProviderConfig) -> Result<Self, LlmError> {
        let endpoint = config
            .endpoint
            .clone()
            .filter(|e| !e.is_empty())
            .ok_or_else(|| LlmError::Config("http_api provider requires an endpoint".into()))?;
        let api_key = match &config.api_key_env {
            Some(var) => Some(
                std::env::var(var).map_err(|_| LlmError::Config(format!("environment variable {var} is not set")))?,
            ),
            None => None,
        };
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(config.timeout()))
            .http_status_as_error(false)
            .build()
            .into();
        Ok(Self { agent, endpoint, api_key })
    }
}

impl Provider for HttpProvider {
    fn generate(&self, prompt: &Prompt, config: &ProviderConfig) -> Result<String, LlmError> {
        let body = json!({
            "model": config.model_name.as_deref().unwrap_or(""),
            "messages": [{"role": "user", "content": prompt.text}],
            "temperature": config.temperature,
        });
        let mut request = self.agent.post(&self.endpoint).header("Content-Type", "application/json");
        if let Some(key) = &self.api_key {
            request = request.header("Authorization", format!("Bearer {key}"));
        }
        let mut response = request.send_json(&body).map_err(|e| map_error(e, config))?;
        let status = response.status().as_u16();
        let payload: Value =
            response.body_mut().read_json().map_err(|e| LlmError::Transport(format!("reading response body: {e}")))?;
        match status {
            200..=299 => completion_text(&payload),
            408 | 429 | 500..=599 => Err(LlmError::Transport(format!("HTTP {status}: {payload}"))),
            _ => Err(LlmError::ProviderRefusal(format!("HTTP {status}: {payload}"))),
        }
    }
}

fn map_error(err: ureq::Error, config: &ProviderConfig) -> LlmError {
    match err {
        ureq::Error::Timeout(_) => LlmError::Timeout(config.timeout()),
        other => LlmError::Transport(other.to_string()),
    }
}

fn completion_text(payload: &Value) -> Result<String, LlmError> {
    let choice = &payload["choices"][0];
    if choice["finish_reason"] == "content_filter" {
        return Err(LlmError::ProviderRefusal("response blocked by content filter".into()));
    }
    choice["message"]["content"]
        .as_str()
        .map(str::to_string)
        .ok_or_else(|| LlmError::ProviderRefusal(format!("no completion text in response: {payload}")))
}
