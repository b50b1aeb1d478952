//! Run configuration: one TOML or JSON file, then flag overrides.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::layout::{RoomType, N_CATEGORIES};
use crate::model::ModelConfig;
use crate::raster::RasterConfig;
use crate::synthgen::MIN_PER_TYPE;
use crate::training::TrainConfig;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Read { path: String, source: std::io::Error },
    #[error("{path}: {detail}")]
    Parse { path: String, detail: String },
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    /// Base scenes per room type before the fourfold rotation.
    pub n_per_type: usize,
    /// Room types to generate, in catalog order.
    pub room_types: Vec<RoomType>,
}

impl Default for DataConfig {
    fn default() -> Self {
        DataConfig { n_per_type: 25, room_types: RoomType::ALL.to_vec() }
    }
}

/// Grid used to render datasets and to score the raster round trip.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RasterSettings {
    /// At 64 px even the smallest catalog item in the largest room spans
    /// enough pixels for its covering box to keep IoU above 0.5.
    pub resolution: usize,
}

impl Default for RasterSettings {
    fn default() -> Self {
        RasterSettings { resolution: 64 }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Seeds dataset generation, initialisation and batching alike.
    pub seed: u64,
    pub data: DataConfig,
    pub raster: RasterSettings,
    /// The model grid is coarser than the raster grid by default to keep
    /// training cheap.
    pub model: ModelConfig,
    pub train: TrainConfig,
}

impl RunConfig {
    /// Parses `text`; `.json` files are JSON and everything else TOML.
    pub fn parse(text: &str, path: &Path) -> Result<Self, ConfigError> {
        let err = |detail: String| ConfigError::Parse { path: path.display().to_string(), detail };
        let mut cfg: RunConfig = if path.extension().is_some_and(|e| e == "json") {
            serde_json::from_str(text).map_err(|e| err(e.to_string()))?
        } else {
            toml::from_str(text).map_err(|e| err(e.to_string()))?
        };
        // [train].seed may be left out; if given it has to agree.
        if cfg.train.seed != TrainConfig::default().seed && cfg.train.seed != cfg.seed {
            return Err(ConfigError::Invalid(format!(
                "train.seed {} disagrees with seed {}; set only the top-level seed",
                cfg.train.seed, cfg.seed
            )));
        }
        cfg.train.seed = cfg.seed;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read { path: path.display().to_string(), source })?;
        Self::parse(&text, path)
    }

    pub fn set_seed(&mut self, seed: u64) {
        self.seed = seed;
        self.train.seed = seed;
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |e: &dyn std::fmt::Display| ConfigError::Invalid(e.to_string());
        RasterConfig::new(self.raster.resolution).map_err(|e| bad(&e))?;
        RasterConfig::new(self.model.resolution).map_err(|e| bad(&e))?;
        self.model.validate().map_err(|e| bad(&e))?;
        self.train.validate().map_err(|e| bad(&e))?;
        if self.model.n_cat != N_CATEGORIES {
            return Err(ConfigError::Invalid(format!("model.n_cat is {}, the catalog has {N_CATEGORIES} categories", self.model.n_cat)));
        }
        if self.data.n_per_type < MIN_PER_TYPE {
            return Err(ConfigError::Invalid(format!("data.n_per_type must be at least {MIN_PER_TYPE}, got {}", self.data.n_per_type)));
        }
        let t = &self.data.room_types;
        if t.is_empty() || t.windows(2).any(|w| w[0] >= w[1]) {
            return Err(ConfigError::Invalid("data.room_types must be non-empty, in catalog order, without repeats".into()));
        }
        if self.train.seed != self.seed {
            return Err(ConfigError::Invalid("train.seed must equal seed".into()));
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let text = serde_json::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(text.as_bytes()))
    }
}
