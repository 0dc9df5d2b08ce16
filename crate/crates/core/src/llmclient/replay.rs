//! Offline completion source keyed by a hash of the prompt text and sampling
//! parameters. The model name is deliberately not part of the key.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{BackendError, CompletionBackend};
use crate::hashing::short_hash;
use crate::promptgen::Prompt;

#[derive(Serialize)]
struct KeyMaterial<'a> {
    text: &'a str,
    system: Option<&'a str>,
    temperature: f64,
    top_p: f64,
    max_tokens: u32,
    n: u32,
    stop: &'a [String],
}

/// Stable fixture key for a prompt.
pub fn replay_key(prompt: &Prompt) -> String {
    let material = KeyMaterial {
        text: &prompt.text,
        system: prompt.system.as_deref(),
        temperature: prompt.sampling.temperature,
        top_p: prompt.sampling.top_p,
        max_tokens: prompt.sampling.max_tokens,
        n: prompt.sampling.n_samples,
        stop: &prompt.stop_sequences,
    };
    let json = serde_json::to_vec(&material).expect("key material serializes");
    short_hash(&json, 32)
}

/// On-disk fixture, stored as `{fixture_dir}/{key}.json`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReplayFixture {
    pub key: String,
    /// The prompt text, kept for humans reading the fixture.
    #[serde(default)]
    pub prompt: String,
    pub completions: Vec<String>,
}

impl ReplayFixture {
    pub fn path(dir: &Path, key: &str) -> PathBuf {
        dir.join(format!("{key}.json"))
    }

    pub fn write(&self, dir: &Path) -> Result<(), BackendError> {
        fs::create_dir_all(dir).map_err(|e| BackendError::Fixture(e.to_string()))?;
        let json = serde_json::to_string_pretty(self).expect("fixture serializes");
        fs::write(Self::path(dir, &self.key), json + "\n")
            .map_err(|e| BackendError::Fixture(e.to_string()))
    }
}

pub struct ReplayBackend {
    dir: PathBuf,
    max_in_flight: usize,
}

impl ReplayBackend {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self {
            dir: dir.into(),
            max_in_flight: 1,
        }
    }

    pub fn with_in_flight(mut self, n: usize) -> Self {
        self.max_in_flight = n.max(1);
        self
    }
}

impl CompletionBackend for ReplayBackend {
    fn complete(&self, prompt: &Prompt) -> Result<Vec<String>, BackendError> {
        let key = replay_key(prompt);
        let path = ReplayFixture::path(&self.dir, &key);
        let data = match fs::read_to_string(&path) {
            Ok(d) => d,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                return Err(BackendError::ReplayMiss { key })
            }
            Err(e) => return Err(BackendError::Fixture(format!("{}: {e}", path.display()))),
        };
        let fixture: ReplayFixture = serde_json::from_str(&data)
            .map_err(|e| BackendError::Fixture(format!("{}: {e}", path.display())))?;
        Ok(fixture.completions)
    }

    fn max_in_flight(&self) -> usize {
        self.max_in_flight
    }
}

/// Passes requests to `inner` and writes each successful response as a
/// replay fixture.
pub struct RecordingBackend<B> {
    inner: B,
    dir: PathBuf,
}

impl<B: CompletionBackend> RecordingBackend<B> {
    pub fn new(inner: B, dir: impl Into<PathBuf>) -> Self {
        Self {
            inner,
            dir: dir.into(),
        }
    }
}

impl<B: CompletionBackend> CompletionBackend for RecordingBackend<B> {
    fn complete(&self, prompt: &Prompt) -> Result<Vec<String>, BackendError> {
        let completions = self.inner.complete(prompt)?;
        ReplayFixture {
            key: replay_key(prompt),
            prompt: prompt.text.clone(),
            completions: completions.clone(),
        }
        .write(&self.dir)?;
        Ok(completions)
    }

    fn max_in_flight(&self) -> usize {
        self.inner.max_in_flight()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::promptgen::{build_ft_inference_prompt, SamplingParams};

    struct Canned;

    impl CompletionBackend for Canned {
        fn complete(&self, prompt: &Prompt) -> Result<Vec<String>, BackendError> {
            Ok(vec![format!("echo {}", prompt.meta.target_api)])
        }
    }

    #[test]
    fn key_depends_on_text_and_sampling() {
        let a = build_ft_inference_prompt("m.a", true, SamplingParams::GENERATION);
        let b = build_ft_inference_prompt("m.b", true, SamplingParams::GENERATION);
        let mut c = a.clone();
        c.sampling.temperature = 0.5;
        assert_ne!(replay_key(&a), replay_key(&b));
        assert_ne!(replay_key(&a), replay_key(&c));
        assert_eq!(replay_key(&a), replay_key(&a.clone()));
        assert_eq!(replay_key(&a).len(), 32);
    }

    #[test]
    fn record_then_replay() {
        let dir = tempfile::tempdir().unwrap();
        let prompt = build_ft_inference_prompt("m.a", true, SamplingParams::GENERATION);
        let replay = ReplayBackend::new(dir.path());
        assert_eq!(
            replay.complete(&prompt),
            Err(BackendError::ReplayMiss {
                key: replay_key(&prompt)
            })
        );
        let rec = RecordingBackend::new(Canned, dir.path());
        assert_eq!(rec.complete(&prompt).unwrap(), vec!["echo m.a"]);
        assert_eq!(replay.complete(&prompt).unwrap(), vec!["echo m.a"]);
    }

    #[test]
    fn corrupt_fixture_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let prompt = build_ft_inference_prompt("m.a", true, SamplingParams::GENERATION);
        fs::write(ReplayFixture::path(dir.path(), &replay_key(&prompt)), "{").unwrap();
        assert!(matches!(
            ReplayBackend::new(dir.path()).complete(&prompt),
            Err(BackendError::Fixture(_))
        ));
    }
}
