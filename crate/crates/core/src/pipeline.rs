//! Phantom corpora to labeled model inputs.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::artifacts::{build_dataset, CineSequence, DatasetConfig, LabeledSample};
use crate::data_io::{phantom_corpus, AugmentOps, PHANTOM_NOISE};
use crate::error::{Error, Result};
use crate::models::{preprocess, Inputs, LabeledSet, Model};

/// Seed offset separating dataset severity draws from phantom draws.
const SEVERITY_STREAM: u64 = 1 << 32;
const AUGMENT_STREAM: u64 = 2 << 32;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CorpusConfig {
    pub phantoms: usize,
    pub frames: usize,
    pub height: usize,
    pub width: usize,
    /// Target-domain phantoms: inverted contrast and doubled noise.
    pub shifted: bool,
    /// Gaussian noise standard deviation of source-domain phantoms.
    pub noise: f64,
    /// Per-sequence augmentation of the clean frames; `None` disables it.
    pub augment: Option<AugmentOps>,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        Self { phantoms: 200, frames: 4, height: 90, width: 90, shifted: false, noise: PHANTOM_NOISE, augment: None }
    }
}

impl CorpusConfig {
    pub fn validate(&self) -> Result<()> {
        if self.phantoms == 0 || self.frames == 0 {
            return Err(Error::Config("corpus needs at least one phantom and one frame".into()));
        }
        if self.height < 2 || self.width < 2 {
            return Err(Error::Config(format!("phantom size {}x{} too small", self.height, self.width)));
        }
        if !(self.noise.is_finite() && self.noise >= 0.0) {
            return Err(Error::Config(format!("phantom noise must be >= 0, got {}", self.noise)));
        }
        if let Some(a) = &self.augment {
            a.validate()?;
        }
        Ok(())
    }
}

/// Clean phantom sequences, augmented when configured.
pub fn clean_sequences(cfg: &CorpusConfig, seed: u64) -> Result<Vec<CineSequence>> {
    cfg.validate()?;
    let seqs = phantom_corpus(cfg.phantoms, seed, (cfg.height, cfg.width), cfg.frames, cfg.shifted, cfg.noise)?;
    let Some(ops) = cfg.augment.filter(|a| !a.is_identity()) else {
        return Ok(seqs);
    };
    seqs.into_par_iter()
        .enumerate()
        .map(|(i, seq)| {
            let draw = ops.draw(seed.wrapping_add(AUGMENT_STREAM).wrapping_add(i as u64));
            CineSequence::new(seq.frames().iter().map(|f| draw.apply(f)).collect())
        })
        .collect()
}

/// One clean and four corrupted samples per phantom frame.
pub fn synthesize(cfg: &CorpusConfig, seed: u64) -> Result<Vec<LabeledSample>> {
    let seqs = clean_sequences(cfg, seed)?;
    let ds = DatasetConfig { ranges: None, domain: Some(u8::from(cfg.shifted)) };
    build_dataset(&seqs, &ds, seed.wrapping_add(SEVERITY_STREAM))
}

/// Resizes, normalizes and ingests the sample images for `model`.
pub fn model_inputs(model: &Model, samples: &[LabeledSample]) -> Result<Inputs> {
    let size = model.config.input();
    let images = samples.par_iter().map(|s| preprocess(&s.image, size)).collect::<Result<Vec<_>>>()?;
    model.ingest_images(&images)
}

/// Model inputs with class labels; samples are grouped by source sequence.
pub fn labeled_set(model: &Model, samples: &[LabeledSample]) -> Result<LabeledSet> {
    let inputs = model_inputs(model, samples)?;
    let labels = samples.iter().map(|s| s.class().id() as usize).collect();
    let groups = samples.iter().map(|s| s.source.sequence).collect();
    LabeledSet::new(inputs, labels, groups)
}
