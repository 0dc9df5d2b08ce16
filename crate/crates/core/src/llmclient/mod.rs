//! Completion backends and the per-API generation schedule.

mod campaign;
mod http;
mod replay;

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

pub use campaign::{
    plan_prompts, run_campaign, split_description, CampaignError, CampaignOutput, CampaignPlan,
    GeneratedProgram, PromptFailure, PromptRecord,
};
pub use http::{CompletionRequest, CompletionResponse, HttpBackend, API_KEY_ENV};
pub use replay::{replay_key, RecordingBackend, ReplayBackend, ReplayFixture};

use crate::promptgen::Prompt;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum BackendError {
    #[error("request failed after {attempts} attempt(s): {message}")]
    Http { attempts: u32, message: String },
    #[error("no replay fixture for key {key}")]
    ReplayMiss { key: String },
    #[error("fixture error: {0}")]
    Fixture(String),
    #[error("malformed backend response: {0}")]
    Protocol(String),
    #[error("invalid prompt: {0}")]
    InvalidPrompt(String),
    #[error("invalid backend spec: {0}")]
    Spec(String),
}

/// Source of completions. Implementations must be shareable across worker
/// threads.
pub trait CompletionBackend: Send + Sync {
    /// Returns up to `prompt.sampling.n_samples` completions.
    fn complete(&self, prompt: &Prompt) -> Result<Vec<String>, BackendError>;

    /// Upper bound on concurrent requests.
    fn max_in_flight(&self) -> usize {
        1
    }
}

impl<B: CompletionBackend + ?Sized> CompletionBackend for Box<B> {
    fn complete(&self, prompt: &Prompt) -> Result<Vec<String>, BackendError> {
        (**self).complete(prompt)
    }

    fn max_in_flight(&self) -> usize {
        (**self).max_in_flight()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RetryPolicy {
    pub attempts: u32,
    pub backoff_ms: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            attempts: 3,
            backoff_ms: 500,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BackendTarget {
    Http { endpoint_url: String },
    Replay { fixture_dir: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BackendSpec {
    #[serde(flatten)]
    pub target: BackendTarget,
    #[serde(default = "default_model")]
    pub model_name: String,
    #[serde(default = "default_in_flight")]
    pub max_in_flight: usize,
    #[serde(default)]
    pub retry: RetryPolicy,
}

fn default_model() -> String {
    "code-davinci-002".to_string()
}

fn default_in_flight() -> usize {
    4
}

impl BackendSpec {
    /// `replay:DIR` or an `http(s)://` endpoint URL.
    pub fn parse(s: &str) -> Result<Self, BackendError> {
        let target = if let Some(dir) = s.strip_prefix("replay:") {
            BackendTarget::Replay {
                fixture_dir: PathBuf::from(dir),
            }
        } else if s.starts_with("http://") || s.starts_with("https://") {
            BackendTarget::Http {
                endpoint_url: s.to_string(),
            }
        } else {
            return Err(BackendError::Spec(format!(
                "`{s}`: expected replay:DIR or an http(s) URL"
            )));
        };
        Ok(Self {
            target,
            model_name: default_model(),
            max_in_flight: default_in_flight(),
            retry: RetryPolicy::default(),
        })
    }

    pub fn validate(&self) -> Result<(), BackendError> {
        if self.max_in_flight == 0 {
            return Err(BackendError::Spec("max_in_flight must be >= 1".into()));
        }
        if self.retry.attempts == 0 {
            return Err(BackendError::Spec("retry.attempts must be >= 1".into()));
        }
        Ok(())
    }

    pub fn build(&self) -> Result<Box<dyn CompletionBackend>, BackendError> {
        self.validate()?;
        Ok(match &self.target {
            BackendTarget::Http { endpoint_url } => Box::new(HttpBackend::new(
                endpoint_url.clone(),
                self.model_name.clone(),
                self.max_in_flight,
                self.retry,
            )?),
            BackendTarget::Replay { fixture_dir } => {
                Box::new(ReplayBackend::new(fixture_dir.clone()).with_in_flight(self.max_in_flight))
            }
        })
    }
}

/// Generation budget per target API.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Budget {
    pub programs_per_api: usize,
    pub prompts_per_api: usize,
    pub samples_per_prompt: usize,
}

impl Default for Budget {
    fn default() -> Self {
        Self {
            programs_per_api: 100,
            prompts_per_api: 10,
            samples_per_prompt: 10,
        }
    }
}

impl Budget {
    pub fn new(prompts_per_api: usize, samples_per_prompt: usize) -> Self {
        Self {
            programs_per_api: prompts_per_api * samples_per_prompt,
            prompts_per_api,
            samples_per_prompt,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.samples_per_prompt == 0 {
            return Err("samples_per_prompt must be >= 1".into());
        }
        if self.programs_per_api != self.prompts_per_api * self.samples_per_prompt {
            return Err(format!(
                "programs_per_api ({}) must equal prompts_per_api ({}) x samples_per_prompt ({})",
                self.programs_per_api, self.prompts_per_api, self.samples_per_prompt
            ));
        }
        Ok(())
    }
}
