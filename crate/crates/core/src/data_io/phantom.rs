//! Analytic multi-ellipse phantoms with a pulsating inner "ventricle".
//!
//! Coordinates are normalised: the image spans `[-1, 1]` on both axes, `y`
//! pointing down. Ellipse intensities add up and the result is clamped to
//! `[0, 1]` before noise.

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::artifacts::CineSequence;
use crate::error::{Error, Result};
use crate::numerics::RealGrid2D;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Ellipse {
    pub center: (f64, f64),
    /// Semi-axes along the rotated y and x directions.
    pub axes: (f64, f64),
    pub angle_deg: f64,
    /// Additive intensity, may be negative to carve darker regions.
    pub intensity: f64,
}

impl Ellipse {
    fn contains(&self, y: f64, x: f64, scale: f64) -> bool {
        let (s, c) = self.angle_deg.to_radians().sin_cos();
        let (dy, dx) = (y - self.center.0, x - self.center.1);
        let u = c * dy + s * dx;
        let v = -s * dy + c * dx;
        let (a, b) = (self.axes.0 * scale, self.axes.1 * scale);
        (u / a).powi(2) + (v / b).powi(2) <= 1.0
    }

    fn validate(&self) -> Result<()> {
        let finite = [self.center.0, self.center.1, self.axes.0, self.axes.1, self.angle_deg, self.intensity]
            .iter()
            .all(|v| v.is_finite());
        if !finite || self.axes.0 <= 0.0 || self.axes.1 <= 0.0 {
            return Err(Error::param(format!("invalid ellipse {self:?}")));
        }
        if !(-1.0..=1.0).contains(&self.intensity) {
            return Err(Error::param(format!("ellipse intensity {} outside [-1, 1]", self.intensity)));
        }
        Ok(())
    }
}

/// Inner ellipse whose size follows `1 + amplitude * sin(2 pi t / frames + phase)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Ventricle {
    pub ellipse: Ellipse,
    pub amplitude: f64,
    pub phase_rad: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhantomSpec {
    pub height: usize,
    pub width: usize,
    pub frames: usize,
    pub ellipses: Vec<Ellipse>,
    pub ventricle: Option<Ventricle>,
    /// Standard deviation of additive Gaussian noise.
    pub noise: f64,
    /// Maps `v -> 1 - v` inside the body support (anything an ellipse covers).
    pub invert_contrast: bool,
    pub seed: u64,
}

impl PhantomSpec {
    pub fn validate(&self) -> Result<()> {
        if self.height == 0 || self.width == 0 || self.frames == 0 {
            return Err(Error::param("phantom needs non-zero height, width and frame count"));
        }
        if !(self.noise.is_finite() && self.noise >= 0.0) {
            return Err(Error::param(format!("noise level must be >= 0, got {}", self.noise)));
        }
        for e in &self.ellipses {
            e.validate()?;
        }
        if let Some(v) = &self.ventricle {
            v.ellipse.validate()?;
            if !(v.amplitude.is_finite() && (0.0..1.0).contains(&v.amplitude) && v.phase_rad.is_finite()) {
                return Err(Error::param(format!("invalid ventricle {v:?}")));
            }
        }
        Ok(())
    }

    pub fn ventricle_scale(&self, frame: usize) -> f64 {
        match &self.ventricle {
            Some(v) => 1.0 + v.amplitude * (TAU * frame as f64 / self.frames as f64 + v.phase_rad).sin(),
            None => 1.0,
        }
    }
}

pub fn generate_phantom(spec: &PhantomSpec) -> Result<CineSequence> {
    spec.validate()?;
    let (h, w) = (spec.height, spec.width);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let noise = (spec.noise > 0.0).then(|| Normal::new(0.0, spec.noise).expect("positive sigma"));
    let mut frames = Vec::with_capacity(spec.frames);
    for t in 0..spec.frames {
        let scale = spec.ventricle_scale(t);
        let mut img = RealGrid2D::from_fn(h, w, |y, x| {
            let (py, px) = (2.0 * (y as f64 + 0.5) / h as f64 - 1.0, 2.0 * (x as f64 + 0.5) / w as f64 - 1.0);
            let mut v = 0.0;
            let mut inside = false;
            for e in &spec.ellipses {
                if e.contains(py, px, 1.0) {
                    v += e.intensity;
                    inside = true;
                }
            }
            if let Some(vent) = &spec.ventricle {
                if vent.ellipse.contains(py, px, scale) {
                    v += vent.ellipse.intensity;
                    inside = true;
                }
            }
            let v = v.clamp(0.0, 1.0);
            if spec.invert_contrast && inside {
                1.0 - v
            } else {
                v
            }
        });
        if let Some(n) = &noise {
            for v in img.data_mut() {
                *v = (*v + n.sample(&mut rng)).clamp(0.0, 1.0);
            }
        }
        frames.push(img);
    }
    CineSequence::new(frames)
}

/// Default noise standard deviation of source-domain phantoms.
pub const PHANTOM_NOISE: f64 = 0.05;

/// Random head-and-heart style phantom: a body ellipse, a few inner
/// structures and a bright ventricle. `target_domain` inverts contrast and
/// doubles the noise.
pub fn random_phantom_spec(seed: u64, height: usize, width: usize, frames: usize, target_domain: bool) -> PhantomSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ellipses = vec![Ellipse {
        center: (rng.random_range(-0.05..0.05), rng.random_range(-0.05..0.05)),
        axes: (rng.random_range(0.7..0.9), rng.random_range(0.6..0.85)),
        angle_deg: rng.random_range(-20.0..20.0),
        intensity: rng.random_range(0.3..0.5),
    }];
    let inner = rng.random_range(3..=6);
    for _ in 0..inner {
        ellipses.push(Ellipse {
            center: (rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5)),
            axes: (rng.random_range(0.05..0.25), rng.random_range(0.05..0.25)),
            angle_deg: rng.random_range(0.0..180.0),
            intensity: rng.random_range(-0.25..0.35),
        });
    }
    let ventricle = Ventricle {
        ellipse: Ellipse {
            center: (rng.random_range(-0.2..0.2), rng.random_range(-0.2..0.2)),
            axes: (rng.random_range(0.12..0.25), rng.random_range(0.1..0.2)),
            angle_deg: rng.random_range(0.0..180.0),
            intensity: rng.random_range(0.3..0.5),
        },
        amplitude: rng.random_range(0.1..0.25),
        phase_rad: rng.random_range(0.0..TAU),
    };
    PhantomSpec {
        height,
        width,
        frames,
        ellipses,
        ventricle: Some(ventricle),
        noise: if target_domain { 2.0 * PHANTOM_NOISE } else { PHANTOM_NOISE },
        invert_contrast: target_domain,
        seed: rng.random(),
    }
}

/// `count` random phantom sequences; sequence `i` uses seed `seed + i`.
/// `noise` is the source-domain level and is doubled for the target domain.
pub fn phantom_corpus(
    count: usize,
    seed: u64,
    size: (usize, usize),
    frames: usize,
    target_domain: bool,
    noise: f64,
) -> Result<Vec<CineSequence>> {
    (0..count)
        .into_par_iter()
        .map(|i| {
            let spec = random_phantom_spec(seed.wrapping_add(i as u64), size.0, size.1, frames, target_domain);
            generate_phantom(&PhantomSpec { noise: if target_domain { 2.0 * noise } else { noise }, ..spec })
        })
        .collect()
}
