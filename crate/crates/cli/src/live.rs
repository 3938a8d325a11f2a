//! Chat-completion client for any server speaking the common
//! `POST {endpoint}/chat/completions` JSON format.

use std::fmt;
use std::thread;
use std::time::Duration;

use poetslate_core::chain::{BackendError, CompletionBackend, CompletionRequest};
use serde::{Deserialize, Serialize};
use serde_json::json;

pub const DEFAULT_API_KEY_ENV: &str = "POETSLATE_API_KEY";
const REDACTED: &str = "[redacted]";
const MAX_ERROR_BODY: usize = 300;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BackendConfig {
    pub endpoint: String,
    pub model: String,
    pub temperature: f64,
    pub max_tokens: u32,
    pub timeout_ms: u64,
    pub retries: u32,
    /// First retry delay; doubles on each further attempt.
    pub backoff_ms: u64,
    /// Environment variable holding the bearer token.
    pub api_key_env: String,
}

impl Default for BackendConfig {
    fn default() -> Self {
        Self {
            endpoint: "https://api.openai.com/v1".into(),
            model: "gpt-4".into(),
            temperature: 0.7,
            max_tokens: 256,
            timeout_ms: 30_000,
            retries: 2,
            backoff_ms: 500,
            api_key_env: DEFAULT_API_KEY_ENV.into(),
        }
    }
}

/// Bearer token; never printed.
#[derive(Clone)]
struct Credential(String);

impl fmt::Debug for Credential {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(REDACTED)
    }
}

#[derive(Clone, Debug)]
pub struct LiveBackend {
    config: BackendConfig,
    credential: Option<Credential>,
}

impl LiveBackend {
    /// Reads the token from the configured environment variable, if set.
    pub fn from_env(config: BackendConfig) -> Self {
        let token = std::env::var(&config.api_key_env).ok().filter(|t| !t.is_empty());
        Self::new(config, token)
    }

    pub fn new(config: BackendConfig, token: Option<String>) -> Self {
        Self {
            config,
            credential: token.map(Credential),
        }
    }

    pub fn has_credential(&self) -> bool {
        self.credential.is_some()
    }

    fn url(&self) -> String {
        format!("{}/chat/completions", self.config.endpoint.trim_end_matches('/'))
    }

    fn scrub(&self, text: &str) -> String {
        match &self.credential {
            Some(Credential(token)) if !token.is_empty() => text.replace(token.as_str(), REDACTED),
            _ => text.to_owned(),
        }
    }

    fn attempt(&self, client: &reqwest::blocking::Client, prompt: &str) -> Result<String, BackendError> {
        let body = json!({
            "model": self.config.model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": self.config.temperature,
            "max_tokens": self.config.max_tokens,
        });
        let mut request = client.post(self.url()).json(&body);
        if let Some(Credential(token)) = &self.credential {
            request = request.bearer_auth(token);
        }
        let response = request.send().map_err(|e| self.transport_error(&e))?;
        let status = response.status();
        let text = response.text().map_err(|e| self.transport_error(&e))?;
        if !status.is_success() {
            let mut message = self.scrub(text.trim());
            if message.len() > MAX_ERROR_BODY {
                let cut = (0..=MAX_ERROR_BODY).rev().find(|i| message.is_char_boundary(*i)).unwrap_or(0);
                message.truncate(cut);
                message.push_str("...");
            }
            return Err(BackendError::Http {
                status: status.as_u16(),
                message,
            });
        }
        parse_completion(&text).map_err(|e| BackendError::Malformed(self.scrub(&e)))
    }

    fn transport_error(&self, e: &reqwest::Error) -> BackendError {
        if e.is_timeout() {
            BackendError::Timeout
        } else {
            BackendError::Transport(self.scrub(&e.to_string()))
        }
    }
}

#[derive(Deserialize)]
struct CompletionBody {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    message: Message,
}

#[derive(Deserialize)]
struct Message {
    content: Option<String>,
}

fn parse_completion(text: &str) -> Result<String, String> {
    let body: CompletionBody = serde_json::from_str(text).map_err(|e| e.to_string())?;
    let choice = body.choices.into_iter().next().ok_or("no choices in response")?;
    Ok(choice.message.content.unwrap_or_default())
}

impl CompletionBackend for LiveBackend {
    fn id(&self) -> &str {
        "live"
    }

    fn complete(&self, request: &CompletionRequest<'_>) -> Result<String, BackendError> {
        // Built per call: a blocking client must not be dropped on an async
        // runtime thread, and chains run on the blocking pool.
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_millis(self.config.timeout_ms))
            .build()
            .map_err(|e| self.transport_error(&e))?;
        let mut attempt = 0;
        loop {
            match self.attempt(&client, request.prompt) {
                Err(e) if e.is_transient() && attempt < self.config.retries => {
                    let delay = self.config.backoff_ms.saturating_mul(1 << attempt.min(16));
                    tracing::warn!(stage = request.stage.number(), attempt, error = %e, "retrying completion");
                    thread::sleep(Duration::from_millis(delay));
                    attempt += 1;
                }
                other => return other,
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn debug_hides_the_token() {
        let b = LiveBackend::new(BackendConfig::default(), Some("sk-very-secret".into()));
        let shown = format!("{b:?}");
        assert!(!shown.contains("sk-very-secret"));
        assert!(shown.contains(REDACTED));
    }

    #[test]
    fn completion_body_parses() {
        let text = r#"{"choices":[{"index":0,"message":{"role":"assistant","content":"hello there"}}]}"#;
        assert_eq!(parse_completion(text).unwrap(), "hello there");
        assert!(parse_completion(r#"{"choices":[]}"#).is_err());
        assert!(parse_completion("not json").is_err());
    }

    #[test]
    fn url_joins_cleanly() {
        let c = BackendConfig { endpoint: "http://localhost:9000/v1/".into(), ..BackendConfig::default() };
        assert_eq!(LiveBackend::new(c, None).url(), "http://localhost:9000/v1/chat/completions");
    }
}
