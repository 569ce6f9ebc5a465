use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{FrequencyModelConfig, ModelConfig, ModelDomain, SpatialModelConfig, TrainConfig, TrainMode};
use crate::pipeline::CorpusConfig;

/// Training protocol selected on the command line.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum RunMode {
    /// 75% of source images for training.
    Supervised,
    /// 25% of source images for training.
    Weak,
    /// Supervised split plus an unlabeled target corpus.
    Dann,
}

/// Fraction of source images used for training in weak mode.
pub const WEAK_FRACTION: f64 = 0.25;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BenchConfig {
    /// Timed training runs per model; the median is reported.
    pub repeats: usize,
    pub epochs: usize,
    /// Training-set sizes for the sample-count sweep; empty skips the sweep.
    pub sweep: Vec<usize>,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self { repeats: 3, epochs: 1, sweep: Vec::new() }
    }
}

/// Everything a command needs. Written back, fully resolved, as
/// `config.toml` next to every command's outputs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    /// Rayon worker threads for data preparation; training is single-threaded.
    pub workers: usize,
    pub domain: ModelDomain,
    pub mode: RunMode,
    pub corpus: CorpusConfig,
    pub spatial: SpatialModelConfig,
    pub frequency: FrequencyModelConfig,
    pub train: TrainConfig,
    pub bench: BenchConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            workers: 1,
            domain: ModelDomain::Spatial,
            mode: RunMode::Supervised,
            corpus: CorpusConfig::default(),
            spatial: SpatialModelConfig::default(),
            frequency: FrequencyModelConfig::default(),
            train: TrainConfig::default(),
            bench: BenchConfig::default(),
        }
    }
}

/// Command-line values that take precedence over the config file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub domain: Option<ModelDomain>,
    pub mode: Option<RunMode>,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<(Self, bool)> {
        let table: toml::Table = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let explicit_fraction = table
            .get("train")
            .and_then(|t| t.as_table())
            .is_some_and(|t| t.contains_key("train_fraction"));
        let cfg = RunConfig::deserialize(table).map_err(|e| Error::Config(e.to_string()))?;
        Ok((cfg, explicit_fraction))
    }

    /// Reads the optional config file, applies flag overrides and derives
    /// the dependent fields.
    pub fn resolve(path: Option<&Path>, overrides: &Overrides) -> Result<Self> {
        let (mut cfg, explicit_fraction) = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| Error::Config(format!("cannot read {}: {e}", p.display())))?;
                Self::from_toml(&text)?
            }
            None => (Self::default(), false),
        };
        if let Some(s) = overrides.seed {
            cfg.seed = s;
        }
        if let Some(w) = overrides.workers {
            cfg.workers = w;
        }
        if let Some(d) = overrides.domain {
            cfg.domain = d;
        }
        if let Some(m) = overrides.mode {
            cfg.mode = m;
        }
        if cfg.mode == RunMode::Weak {
            if explicit_fraction && cfg.train.train_fraction != WEAK_FRACTION {
                return Err(Error::Config(format!(
                    "mode weak trains on {WEAK_FRACTION} of the source images but train.train_fraction = {}",
                    cfg.train.train_fraction
                )));
            }
            cfg.train.train_fraction = WEAK_FRACTION;
        }
        cfg.train.seed = cfg.seed;
        cfg.train.mode = if cfg.mode == RunMode::Dann { TrainMode::Dann } else { TrainMode::Supervised };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.workers == 0 {
            return Err(Error::Config("workers must be at least 1".into()));
        }
        if self.bench.repeats == 0 || self.bench.epochs == 0 {
            return Err(Error::Config("bench repeats and epochs must be positive".into()));
        }
        self.corpus.validate()?;
        self.spatial.validate()?;
        self.frequency.validate()?;
        self.train.validate()
    }

    pub fn model_config(&self, domain: ModelDomain) -> ModelConfig {
        match domain {
            ModelDomain::Spatial => ModelConfig::Spatial(self.spatial.clone()),
            ModelDomain::Frequency => ModelConfig::Frequency(self.frequency.clone()),
        }
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }
}
