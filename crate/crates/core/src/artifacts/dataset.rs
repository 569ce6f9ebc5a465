use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::corrupt::{corrupt_aliasing, corrupt_cardiac, corrupt_gibbs, corrupt_respiratory, CineSequence};
use super::params::{
    AliasingParams, ArtifactClass, ArtifactParams, Axis, CardiacParams, GibbsParams, RespiratoryParams,
    SeverityRecord, NUM_CLASSES,
};
use crate::error::{Error, Result};
use crate::numerics::RealGrid2D;

/// Ranges severities are drawn from. Defaults depend on the image size.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeverityRanges {
    pub resp_amplitude_px: (f64, f64),
    pub resp_period_lines: (f64, f64),
    pub cardiac_lines: (usize, usize),
    pub cardiac_donor_offset: (usize, usize),
    pub gibbs_radius_px: (f64, f64),
    pub aliasing_factors: Vec<usize>,
}

impl SeverityRanges {
    pub fn for_dims(height: usize, width: usize) -> Self {
        let n = height.min(width) as f64;
        let lo = (height / 16).max(1).min(height);
        Self {
            resp_amplitude_px: (2.0, 10.0),
            resp_period_lines: (4.0, 32.0),
            cardiac_lines: (lo, (height / 4).max(lo)),
            cardiac_donor_offset: (1, 3),
            gibbs_radius_px: (n / 8.0, n / 3.0),
            aliasing_factors: vec![2, 3, 4],
        }
    }
}

fn coin_axis(rng: &mut ChaCha8Rng) -> Axis {
    if rng.random_bool(0.5) {
        Axis::Rows
    } else {
        Axis::Cols
    }
}

/// Deterministic severity draw for `(class, rng_seed)`.
pub fn sample_severity(class: ArtifactClass, rng_seed: u64, ranges: &SeverityRanges) -> SeverityRecord {
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let params = match class {
        ArtifactClass::Clean => None,
        ArtifactClass::Respiratory => Some(ArtifactParams::Respiratory(RespiratoryParams {
            amplitude_px: rng.random_range(ranges.resp_amplitude_px.0..=ranges.resp_amplitude_px.1),
            period_lines: rng.random_range(ranges.resp_period_lines.0..=ranges.resp_period_lines.1),
            phase_rad: rng.random_range(0.0..TAU),
            axis: coin_axis(&mut rng),
        })),
        ArtifactClass::Cardiac => Some(ArtifactParams::Cardiac(CardiacParams {
            n_replaced_lines: rng.random_range(ranges.cardiac_lines.0..=ranges.cardiac_lines.1),
            donor_offset: rng.random_range(ranges.cardiac_donor_offset.0..=ranges.cardiac_donor_offset.1),
            rng_seed: rng.random(),
        })),
        ArtifactClass::Gibbs => Some(ArtifactParams::Gibbs(GibbsParams {
            radius_px: rng.random_range(ranges.gibbs_radius_px.0..=ranges.gibbs_radius_px.1),
        })),
        ArtifactClass::Aliasing => Some(ArtifactParams::Aliasing(AliasingParams {
            factor: ranges.aliasing_factors[rng.random_range(0..ranges.aliasing_factors.len())],
            axis: coin_axis(&mut rng),
        })),
    };
    SeverityRecord { class_id: class, params, rng_seed }
}

/// Applies the corruption described by `record` to frame `frame` of `seq`.
pub fn apply_severity(seq: &CineSequence, frame: usize, record: &SeverityRecord) -> Result<RealGrid2D> {
    record.validate()?;
    let img = seq.frame(frame);
    match &record.params {
        None => Ok(img.clone()),
        Some(ArtifactParams::Respiratory(p)) => corrupt_respiratory(img, p),
        Some(ArtifactParams::Cardiac(p)) => corrupt_cardiac(seq, frame, p),
        Some(ArtifactParams::Gibbs(p)) => corrupt_gibbs(img, p),
        Some(ArtifactParams::Aliasing(p)) => corrupt_aliasing(img, p),
    }
}

/// Where a sample came from: clean sequence index and frame within it.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SourceRef {
    pub sequence: usize,
    pub frame: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LabeledSample {
    pub image: RealGrid2D,
    pub severity: SeverityRecord,
    pub source: SourceRef,
    /// 0 = source domain, 1 = target domain.
    pub domain: Option<u8>,
}

impl LabeledSample {
    pub fn class(&self) -> ArtifactClass {
        self.severity.class_id
    }
}

#[derive(Clone, Debug)]
pub struct DatasetConfig {
    /// Ranges to draw from; `None` derives them from the image size.
    pub ranges: Option<SeverityRanges>,
    pub domain: Option<u8>,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self { ranges: None, domain: Some(0) }
    }
}

struct Job {
    sequence: usize,
    frame: usize,
    class: ArtifactClass,
    seed: u64,
}

/// Expands clean sequences into one clean and one corrupted sample per
/// artifact class for every frame. Cardiac samples are only produced for
/// multi-frame sequences. Sample `i` uses seed `master_seed + i`.
pub fn build_dataset(clean: &[CineSequence], cfg: &DatasetConfig, master_seed: u64) -> Result<Vec<LabeledSample>> {
    if clean.is_empty() {
        return Err(Error::Dataset("empty clean corpus".into()));
    }
    let mut jobs = Vec::new();
    for (s, seq) in clean.iter().enumerate() {
        for f in 0..seq.len() {
            for class in ArtifactClass::ALL {
                if class == ArtifactClass::Cardiac && seq.len() < 2 {
                    continue;
                }
                let seed = master_seed.wrapping_add(jobs.len() as u64);
                jobs.push(Job { sequence: s, frame: f, class, seed });
            }
        }
    }
    jobs.par_iter()
        .map(|job| {
            let seq = &clean[job.sequence];
            let ranges = match &cfg.ranges {
                Some(r) => r.clone(),
                None => {
                    let (h, w) = seq.dims();
                    SeverityRanges::for_dims(h, w)
                }
            };
            let severity = sample_severity(job.class, job.seed, &ranges);
            let image = apply_severity(seq, job.frame, &severity)?;
            Ok(LabeledSample {
                image,
                severity,
                source: SourceRef { sequence: job.sequence, frame: job.frame },
                domain: cfg.domain,
            })
        })
        .collect()
}

pub fn class_balance(samples: &[LabeledSample]) -> [usize; NUM_CLASSES] {
    let mut counts = [0; NUM_CLASSES];
    for s in samples {
        counts[s.class().id() as usize] += 1;
    }
    counts
}
