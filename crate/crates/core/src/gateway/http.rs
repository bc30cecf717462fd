//! Client for hosted models speaking the OpenAI-compatible
//! `/chat/completions` protocol.

use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{CompletionRequest, Determinism, Provider, ProviderError, Tier};

/// Environment variable holding the bearer token for the hosted provider.
pub const API_KEY_ENV: &str = "QUILLMATE_API_KEY";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProviderProfile {
    pub name: String,
    /// Base URL, e.g. `https://api.openai.com/v1`.
    pub endpoint: String,
    pub fast_model: String,
    pub strong_model: String,
    #[serde(default = "default_timeout_secs")]
    pub timeout_secs: u64,
}

fn default_timeout_secs() -> u64 {
    60
}

impl ProviderProfile {
    pub fn model_for(&self, tier: Tier) -> &str {
        match tier {
            Tier::Fast => &self.fast_model,
            Tier::Strong => &self.strong_model,
        }
    }
}

pub struct HttpProvider {
    profile: ProviderProfile,
    api_key: Option<String>,
    agent: ureq::Agent,
}

impl HttpProvider {
    pub fn new(profile: ProviderProfile, api_key: Option<String>) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(profile.timeout_secs)))
            .http_status_as_error(false)
            .build()
            .into();
        HttpProvider {
            profile,
            api_key,
            agent,
        }
    }

    /// Reads the API key from [`API_KEY_ENV`].
    pub fn from_env(profile: ProviderProfile) -> Self {
        let key = std::env::var(API_KEY_ENV).ok().filter(|k| !k.is_empty());
        Self::new(profile, key)
    }

    pub fn request_body(&self, request: &CompletionRequest) -> Value {
        let temperature = match request.determinism {
            Determinism::Deterministic => 0.0,
            Determinism::Creative => 0.8,
        };
        json!({
            "model": self.profile.model_for(request.tier),
            "messages": [{ "role": "user", "content": request.rendered_prompt }],
            "max_tokens": request.max_length,
            "temperature": temperature,
        })
    }
}

fn classify(status: u16, body: &str) -> ProviderError {
    let msg = format!("HTTP {status}: {}", body.chars().take(200).collect::<String>());
    match status {
        408 => ProviderError::Timeout,
        429 | 500..=599 => ProviderError::Transient(msg),
        _ => ProviderError::Fatal(msg),
    }
}

impl Provider for HttpProvider {
    fn name(&self) -> &str {
        &self.profile.name
    }

    fn complete(&self, request: &CompletionRequest) -> Result<String, ProviderError> {
        let url = format!("{}/chat/completions", self.profile.endpoint.trim_end_matches('/'));
        let mut call = self.agent.post(&url);
        if let Some(key) = &self.api_key {
            call = call.header("Authorization", &format!("Bearer {key}"));
        }
        let mut response = call
            .send_json(self.request_body(request))
            .map_err(|e| match e {
                ureq::Error::Timeout(_) => ProviderError::Timeout,
                other => ProviderError::Transient(other.to_string()),
            })?;
        let status = response.status().as_u16();
        let text = response
            .body_mut()
            .read_to_string()
            .map_err(|e| ProviderError::Transient(e.to_string()))?;
        if !(200..300).contains(&status) {
            return Err(classify(status, &text));
        }
        let value: Value =
            serde_json::from_str(&text).map_err(|e| ProviderError::Fatal(e.to_string()))?;
        value["choices"][0]["message"]["content"]
            .as_str()
            .map(str::to_string)
            .ok_or_else(|| ProviderError::Fatal("response has no choices[0].message.content".into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::{Bindings, Gateway, TemplateId};

    fn profile() -> ProviderProfile {
        ProviderProfile {
            name: "hosted".into(),
            endpoint: "http://127.0.0.1:9".into(),
            fast_model: "small".into(),
            strong_model: "large".into(),
            timeout_secs: 1,
        }
    }

    #[test]
    fn body_uses_tier_model_and_determinism() {
        let p = HttpProvider::new(profile(), None);
        let mut b = Bindings::new();
        b.insert("old_style".into(), "a".into());
        b.insert("new_style".into(), "b".into());
        let req = Gateway::mock().request(TemplateId::StyleCompare, b).unwrap();
        let body = p.request_body(&req);
        assert_eq!(body["model"], "small");
        assert_eq!(body["temperature"], 0.0);
    }

    #[test]
    fn status_classification() {
        assert!(matches!(classify(429, ""), ProviderError::Transient(_)));
        assert!(matches!(classify(503, ""), ProviderError::Transient(_)));
        assert!(matches!(classify(401, ""), ProviderError::Fatal(_)));
        assert_eq!(classify(408, ""), ProviderError::Timeout);
    }
}
