//! TOML run configuration. Flags override the file; the API key only comes
//! from the environment.

use std::fs;
use std::path::{Path, PathBuf};

use clap::ValueEnum;
use scene_forge::embedding::DEFAULT_EMBEDDING_MODEL;
use scene_forge::generation::{GenerationConfig, DEFAULT_CHAT_ENDPOINT};
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const DEFAULT_EMBEDDING_ENDPOINT: &str = "http://127.0.0.1:8080/v1/embeddings";
pub const DEFAULT_EMBEDDING_DIM: usize = 768;
pub const DEFAULT_CACHE_DIR: &str = ".scene-forge-cache";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ProviderKind {
    Live,
    Mock,
}

impl ProviderKind {
    pub fn name(self) -> &'static str {
        match self {
            ProviderKind::Live => "live",
            ProviderKind::Mock => "mock",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChatSettings {
    pub endpoint: String,
}

impl Default for ChatSettings {
    fn default() -> Self {
        Self {
            endpoint: DEFAULT_CHAT_ENDPOINT.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmbeddingSettings {
    pub endpoint: String,
    pub model: String,
    pub dim: usize,
    pub batch_size: usize,
}

impl Default for EmbeddingSettings {
    fn default() -> Self {
        Self {
            endpoint: DEFAULT_EMBEDDING_ENDPOINT.into(),
            model: DEFAULT_EMBEDDING_MODEL.into(),
            dim: DEFAULT_EMBEDDING_DIM,
            batch_size: 64,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub provider: Option<ProviderKind>,
    pub cache_dir: Option<PathBuf>,
    /// Extra mock fixtures: `<dir>/scene/<lemma>.txt`, `<dir>/atomic/<lemma>.txt`.
    pub fixtures_dir: Option<PathBuf>,
    pub max_in_flight: Option<usize>,
    pub generation: GenerationConfig,
    pub chat: ChatSettings,
    pub embedding: EmbeddingSettings,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }
}
