//! Run configuration (TOML) and run manifests.
//!
//! Every section is optional; missing keys take their defaults. Example:
//!
//! ```toml
//! seed = 7
//!
//! [grounding]
//! max_edges = 3
//! threshold = 0.15
//!
//! [kge]
//! dim = 32
//! epochs = 50
//!
//! [model]
//! gcn_dims = [32, 16]
//! lstm_hidden = 32
//! path_attention = true
//!
//! [encoder]
//! kind = "toy"
//! embed_dim = 16
//! hidden = 16
//!
//! [train]
//! epochs = 10
//! loss = "bce"
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kge::TransEConfig;
use crate::net::NetConfig;
use crate::pipeline::{GroundingConfig, TrainConfig};
use crate::util::sha256_hex;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum EncoderKind {
    #[default]
    Toy,
    Features,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EncoderConfig {
    pub kind: EncoderKind,
    pub embed_dim: usize,
    pub hidden: usize,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        EncoderConfig {
            kind: EncoderKind::Toy,
            embed_dim: 32,
            hidden: 64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExplainConfig {
    pub top_pairs: usize,
    pub top_paths: usize,
}

impl Default for ExplainConfig {
    fn default() -> Self {
        ExplainConfig {
            top_pairs: 3,
            top_paths: 2,
        }
    }
}

/// Hyperparameters of a run. Input and output locations are not part of
/// it; they are recorded with their content hashes in the run manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Master seed. The command line copies it into `kge.seed` and
    /// `train.seed`, and derives model, encoder, fallback and split seeds
    /// from it.
    pub seed: u64,
    /// Language filter for full-format ConceptNet dumps.
    pub language: String,
    /// Dev questions held out of `--dataset` when no `--dev` file is given.
    pub dev_holdout: usize,
    pub grounding: GroundingConfig,
    pub kge: TransEConfig,
    pub model: NetConfig,
    pub encoder: EncoderConfig,
    pub train: TrainConfig,
    pub explain: ExplainConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 42,
            language: "en".into(),
            dev_holdout: 0,
            grounding: GroundingConfig::default(),
            kge: TransEConfig::default(),
            model: NetConfig::default(),
            encoder: EncoderConfig::default(),
            train: TrainConfig::default(),
            explain: ExplainConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always representable")
    }

    /// Sets every seed of the run.
    pub fn set_seed(&mut self, seed: u64) {
        self.seed = seed;
        self.kge.seed = seed;
        self.train.seed = seed;
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        sha256_hex(serde_json::to_string(self).expect("plain data").as_bytes())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileDigest {
    /// File name without directories, so manifests do not depend on where
    /// a run happened.
    pub name: String,
    pub sha256: String,
}

impl FileDigest {
    pub fn of(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Ok(FileDigest {
            name: path
                .file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_default(),
            sha256: sha256_hex(&bytes),
        })
    }
}

/// Written next to every stage's outputs. Contains no timestamps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub version: String,
    pub config_hash: String,
    pub config: RunConfig,
    pub inputs: BTreeMap<String, FileDigest>,
    pub outputs: Vec<FileDigest>,
}

impl Manifest {
    pub fn new(command: &str, config: &RunConfig) -> Self {
        Manifest {
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            config_hash: config.hash(),
            config: config.clone(),
            inputs: BTreeMap::new(),
            outputs: Vec::new(),
        }
    }

    pub fn input(&mut self, role: &str, path: impl AsRef<Path>) -> Result<()> {
        self.inputs.insert(role.to_string(), FileDigest::of(path)?);
        Ok(())
    }

    pub fn output(&mut self, path: impl AsRef<Path>) -> Result<()> {
        self.outputs.push(FileDigest::of(path)?);
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}
