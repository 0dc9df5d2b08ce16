//! Campaign configuration file. Field names mirror the command-line flags;
//! flags override whatever the file sets.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::executor::{ExecMode, Tolerances};
use crate::llmclient::{BackendSpec, Budget};
use crate::promptgen::{InstructStyle, Mode, SelectionKind};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Paths {
    pub snippets: Option<PathBuf>,
    pub dataset: Option<PathBuf>,
    pub apis: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CampaignConfig {
    pub mode: Mode,
    /// Target APIs; `paths.apis` is read into this field when set.
    pub apis: Vec<String>,
    pub backend: Option<BackendSpec>,
    pub budget: Budget,
    pub k_shot: usize,
    pub cot: bool,
    pub seed: u64,
    pub selection: SelectionKind,
    pub mmr_lambda: f64,
    pub instruct_style: InstructStyle,
    pub library: Option<String>,
    pub tolerances: Tolerances,
    pub timeout_s: f64,
    pub jobs: usize,
    pub oracles: Vec<ExecMode>,
    pub shim: Option<String>,
    pub backend_pair: [String; 2],
    pub paths: Paths,
}

impl Default for CampaignConfig {
    fn default() -> Self {
        Self {
            mode: Mode::Fs,
            apis: Vec::new(),
            backend: None,
            budget: Budget::default(),
            k_shot: 6,
            cot: true,
            seed: 42,
            selection: SelectionKind::Random,
            mmr_lambda: 0.5,
            instruct_style: InstructStyle::Baseline,
            library: None,
            tolerances: Tolerances::default(),
            timeout_s: 10.0,
            jobs: 1,
            oracles: vec![ExecMode::Plain],
            shim: None,
            backend_pair: ["reference".into(), "fast".into()],
            paths: Paths::default(),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("config {path}: {source}")]
    Parse {
        path: PathBuf,
        source: serde_json::Error,
    },
    #[error("invalid config: {}", .0.join("; "))]
    Invalid(Vec<String>),
}

impl CampaignConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        serde_json::from_str(&text).map_err(|source| ConfigError::Parse {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn load_or_default(path: Option<&Path>) -> Result<Self, ConfigError> {
        path.map_or_else(|| Ok(Self::default()), Self::load)
    }

    /// Collects every problem instead of stopping at the first.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let mut errs = Vec::new();
        if let Err(e) = self.budget.validate() {
            errs.push(format!("budget: {e}"));
        }
        if let Some(b) = &self.backend {
            if let Err(e) = b.validate() {
                errs.push(format!("backend: {e}"));
            }
        }
        if !(0.0..=1.0).contains(&self.mmr_lambda) {
            errs.push(format!("mmr_lambda: {} not in [0, 1]", self.mmr_lambda));
        }
        if !(self.timeout_s > 0.0 && self.timeout_s.is_finite()) {
            errs.push(format!("timeout_s: {} must be positive", self.timeout_s));
        }
        if self.jobs == 0 {
            errs.push("jobs: must be >= 1".into());
        }
        if !(self.tolerances.rtol >= 0.0 && self.tolerances.atol >= 0.0) {
            errs.push("tolerances: rtol and atol must be >= 0".into());
        }
        if self.oracles.is_empty() {
            errs.push("oracles: at least one oracle is required".into());
        }
        for (name, p) in [
            ("paths.snippets", &self.paths.snippets),
            ("paths.dataset", &self.paths.dataset),
            ("paths.apis", &self.paths.apis),
        ] {
            if let Some(p) = p {
                if !p.exists() {
                    errs.push(format!("{name}: {} does not exist", p.display()));
                }
            }
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(ConfigError::Invalid(errs))
        }
    }
}

/// Reads an API list: one name per line, `#` starts a comment.
pub fn read_api_list(path: &Path) -> std::io::Result<Vec<String>> {
    let text = fs::read_to_string(path)?;
    Ok(parse_api_list(&text))
}

pub fn parse_api_list(text: &str) -> Vec<String> {
    text.lines()
        .map(|l| l.split('#').next().unwrap_or("").trim())
        .filter(|l| !l.is_empty())
        .map(str::to_string)
        .collect()
}
