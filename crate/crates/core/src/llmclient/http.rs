use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{BackendError, CompletionBackend, RetryPolicy};
use crate::promptgen::Prompt;

/// Bearer token for HTTP backends is read from this variable only.
pub const API_KEY_ENV: &str = "FUZZGPT_API_KEY";

/// Completions-style request body.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionRequest {
    pub model: String,
    pub prompt: String,
    pub temperature: f64,
    pub top_p: f64,
    pub max_tokens: u32,
    pub n: u32,
    pub stop: Vec<String>,
    /// Only sent for chat-style prompts.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub system: Option<String>,
}

impl CompletionRequest {
    pub fn from_prompt(model: &str, prompt: &Prompt) -> Self {
        Self {
            model: model.to_string(),
            prompt: prompt.text.clone(),
            temperature: prompt.sampling.temperature,
            top_p: prompt.sampling.top_p,
            max_tokens: prompt.sampling.max_tokens,
            n: prompt.sampling.n_samples,
            stop: prompt.stop_sequences.clone(),
            system: prompt.system.clone(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
struct ChatMessage {
    content: String,
}

#[derive(Debug, Clone, Deserialize)]
pub struct Choice {
    #[serde(default)]
    text: Option<String>,
    #[serde(default)]
    message: Option<ChatMessage>,
}

#[derive(Debug, Clone, Deserialize)]
pub struct CompletionResponse {
    pub choices: Vec<Choice>,
}

impl CompletionResponse {
    pub fn texts(self) -> Result<Vec<String>, BackendError> {
        self.choices
            .into_iter()
            .map(|c| {
                c.text
                    .or(c.message.map(|m| m.content))
                    .ok_or_else(|| BackendError::Protocol("choice without text".into()))
            })
            .collect()
    }
}

pub struct HttpBackend {
    client: reqwest::blocking::Client,
    endpoint: String,
    model: String,
    max_in_flight: usize,
    retry: RetryPolicy,
    api_key: Option<String>,
}

impl HttpBackend {
    pub fn new(
        endpoint: String,
        model: String,
        max_in_flight: usize,
        retry: RetryPolicy,
    ) -> Result<Self, BackendError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(120))
            .build()
            .map_err(|e| BackendError::Spec(e.to_string()))?;
        Ok(Self {
            client,
            endpoint,
            model,
            max_in_flight,
            retry,
            api_key: std::env::var(API_KEY_ENV).ok().filter(|k| !k.is_empty()),
        })
    }

    fn attempt(&self, body: &CompletionRequest) -> Result<Vec<String>, (bool, String)> {
        let mut req = self.client.post(&self.endpoint).json(body);
        if let Some(key) = &self.api_key {
            req = req.bearer_auth(key);
        }
        let resp = req.send().map_err(|e| (true, e.to_string()))?;
        let status = resp.status();
        if !status.is_success() {
            let retryable = status.is_server_error() || status.as_u16() == 429;
            let text = resp.text().unwrap_or_default();
            return Err((retryable, format!("HTTP {status}: {text}")));
        }
        let parsed: CompletionResponse = resp.json().map_err(|e| (false, e.to_string()))?;
        parsed.texts().map_err(|e| (false, e.to_string()))
    }
}

impl CompletionBackend for HttpBackend {
    fn complete(&self, prompt: &Prompt) -> Result<Vec<String>, BackendError> {
        prompt
            .sampling
            .validate()
            .map_err(|e| BackendError::InvalidPrompt(e.to_string()))?;
        let body = CompletionRequest::from_prompt(&self.model, prompt);
        let mut attempts = 0;
        loop {
            attempts += 1;
            match self.attempt(&body) {
                Ok(mut texts) => {
                    texts.truncate(prompt.sampling.n_samples as usize);
                    return Ok(texts);
                }
                Err((retryable, message)) => {
                    if !retryable || attempts >= self.retry.attempts {
                        return Err(BackendError::Http { attempts, message });
                    }
                    let delay = self
                        .retry
                        .backoff_ms
                        .saturating_mul(1 << (attempts - 1).min(16));
                    log::warn!("attempt {attempts} failed ({message}); retrying in {delay} ms");
                    thread::sleep(Duration::from_millis(delay));
                }
            }
        }
    }

    fn max_in_flight(&self) -> usize {
        self.max_in_flight
    }
}
