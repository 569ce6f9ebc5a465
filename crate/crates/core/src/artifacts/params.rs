use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Artifact label. The discriminant is the class id used everywhere on disk.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "u8", try_from = "u8")]
pub enum ArtifactClass {
    Clean = 0,
    Respiratory = 1,
    Cardiac = 2,
    Gibbs = 3,
    Aliasing = 4,
}

pub const NUM_CLASSES: usize = 5;

impl ArtifactClass {
    pub const ALL: [ArtifactClass; NUM_CLASSES] = [
        ArtifactClass::Clean,
        ArtifactClass::Respiratory,
        ArtifactClass::Cardiac,
        ArtifactClass::Gibbs,
        ArtifactClass::Aliasing,
    ];

    pub fn id(self) -> u8 {
        self as u8
    }

    pub fn from_id(id: u8) -> Result<Self> {
        Self::ALL
            .get(id as usize)
            .copied()
            .ok_or_else(|| Error::param(format!("class id {id} out of range 0..{NUM_CLASSES}")))
    }

    pub fn name(self) -> &'static str {
        match self {
            ArtifactClass::Clean => "clean",
            ArtifactClass::Respiratory => "respiratory",
            ArtifactClass::Cardiac => "cardiac",
            ArtifactClass::Gibbs => "gibbs",
            ArtifactClass::Aliasing => "aliasing",
        }
    }
}

impl From<ArtifactClass> for u8 {
    fn from(c: ArtifactClass) -> u8 {
        c.id()
    }
}

impl TryFrom<u8> for ArtifactClass {
    type Error = Error;
    fn try_from(v: u8) -> Result<Self> {
        ArtifactClass::from_id(v)
    }
}

impl fmt::Display for ArtifactClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ArtifactClass {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        if let Ok(id) = s.parse::<u8>() {
            return Self::from_id(id);
        }
        Self::ALL
            .into_iter()
            .find(|c| c.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::param(format!("unknown artifact class {s:?}")))
    }
}

/// Which k-space axis is filled line by line (the phase-encode direction).
/// `Rows` means each k-space row is one acquired line.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    Rows,
    Cols,
}

impl FromStr for Axis {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "rows" | "row" | "y" => Ok(Axis::Rows),
            "cols" | "col" | "columns" | "x" => Ok(Axis::Cols),
            _ => Err(Error::param(format!("unknown axis {s:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RespiratoryParams {
    pub amplitude_px: f64,
    pub period_lines: f64,
    pub phase_rad: f64,
    pub axis: Axis,
}

impl RespiratoryParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.amplitude_px.is_finite() && self.amplitude_px >= 0.0) {
            return Err(Error::param(format!("respiratory amplitude must be >= 0, got {}", self.amplitude_px)));
        }
        if !(self.period_lines.is_finite() && self.period_lines >= 2.0) {
            return Err(Error::param(format!("respiratory period must be >= 2 lines, got {}", self.period_lines)));
        }
        if !self.phase_rad.is_finite() {
            return Err(Error::param("respiratory phase must be finite"));
        }
        Ok(())
    }

    /// Translation actually applied, in whole pixels.
    pub fn shift_px(&self) -> isize {
        self.amplitude_px.round() as isize
    }

    /// Whether k-space line `j` of `n_lines` comes from the translated
    /// acquisition. The pattern runs over the line's distance from DC so that
    /// lines `j` and `-j` always share a source and the reconstruction stays real.
    pub fn line_is_translated(&self, j: usize, n_lines: usize) -> bool {
        let offset = crate::numerics::signed_frequency(j, n_lines).unsigned_abs() as f64;
        (2.0 * std::f64::consts::PI * offset / self.period_lines + self.phase_rad).sin() > 0.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CardiacParams {
    pub n_replaced_lines: usize,
    pub donor_offset: usize,
    pub rng_seed: u64,
}

impl CardiacParams {
    pub fn validate(&self, height: usize) -> Result<()> {
        if self.donor_offset < 1 {
            return Err(Error::param("cardiac donor offset must be >= 1"));
        }
        if self.n_replaced_lines > height {
            return Err(Error::param(format!(
                "cannot replace {} lines of a {height}-line k-space",
                self.n_replaced_lines
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GibbsParams {
    pub radius_px: f64,
}

impl GibbsParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.radius_px.is_finite() && self.radius_px > 0.0) {
            return Err(Error::param(format!("Gibbs radius must be > 0, got {}", self.radius_px)));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AliasingParams {
    pub factor: usize,
    pub axis: Axis,
}

impl AliasingParams {
    pub fn validate(&self) -> Result<()> {
        if !(2..=4).contains(&self.factor) {
            return Err(Error::param(format!("aliasing factor must be 2, 3 or 4, got {}", self.factor)));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ArtifactParams {
    Respiratory(RespiratoryParams),
    Cardiac(CardiacParams),
    Gibbs(GibbsParams),
    Aliasing(AliasingParams),
}

impl ArtifactParams {
    pub fn class(&self) -> ArtifactClass {
        match self {
            ArtifactParams::Respiratory(_) => ArtifactClass::Respiratory,
            ArtifactParams::Cardiac(_) => ArtifactClass::Cardiac,
            ArtifactParams::Gibbs(_) => ArtifactClass::Gibbs,
            ArtifactParams::Aliasing(_) => ArtifactClass::Aliasing,
        }
    }
}

/// Reproducibility metadata for one sample.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeverityRecord {
    pub class_id: ArtifactClass,
    pub params: Option<ArtifactParams>,
    pub rng_seed: u64,
}

impl SeverityRecord {
    pub fn clean(rng_seed: u64) -> Self {
        Self { class_id: ArtifactClass::Clean, params: None, rng_seed }
    }

    pub fn validate(&self) -> Result<()> {
        match (self.class_id, &self.params) {
            (ArtifactClass::Clean, None) => Ok(()),
            (c, Some(p)) if p.class() == c => Ok(()),
            (c, p) => Err(Error::param(format!(
                "severity record class {c} inconsistent with params {:?}",
                p.map(|p| p.class())
            ))),
        }
    }
}
