use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::RealGrid2D;

/// Bilinear sample at fractional `(y, x)`; `None` outside the pixel-centre hull.
fn bilinear(img: &RealGrid2D, y: f64, x: f64) -> Option<f64> {
    let (h, w) = img.dims();
    let eps = 1e-9;
    if y < -eps || x < -eps || y > (h - 1) as f64 + eps || x > (w - 1) as f64 + eps {
        return None;
    }
    let y = y.clamp(0.0, (h - 1) as f64);
    let x = x.clamp(0.0, (w - 1) as f64);
    let (y0, x0) = (y.floor() as usize, x.floor() as usize);
    let (y1, x1) = ((y0 + 1).min(h - 1), (x0 + 1).min(w - 1));
    let (fy, fx) = (y - y0 as f64, x - x0 as f64);
    let top = img.get(y0, x0) * (1.0 - fx) + img.get(y0, x1) * fx;
    let bottom = img.get(y1, x0) * (1.0 - fx) + img.get(y1, x1) * fx;
    Some(top * (1.0 - fy) + bottom * fy)
}

/// Bilinear resize on a corner-aligned grid: output pixel `i` samples source
/// coordinate `i * (src - 1) / (dst - 1)`, so the corner pixels map onto each
/// other. A one-pixel output axis samples the source centre.
pub fn resize_bilinear(img: &RealGrid2D, height: usize, width: usize) -> Result<RealGrid2D> {
    let (h, w) = img.dims();
    if h < 2 || w < 2 {
        return Err(Error::param(format!("cannot resize a {h}x{w} image, need at least 2x2")));
    }
    if height == 0 || width == 0 {
        return Err(Error::param("resize target must be non-empty"));
    }
    if (h, w) == (height, width) {
        return Ok(img.clone());
    }
    let coord = |i: usize, src: usize, dst: usize| {
        if dst == 1 {
            (src - 1) as f64 / 2.0
        } else {
            i as f64 * (src - 1) as f64 / (dst - 1) as f64
        }
    };
    Ok(RealGrid2D::from_fn(height, width, |y, x| {
        bilinear(img, coord(y, h, height), coord(x, w, width)).expect("inside source")
    }))
}

/// Per-image min-max scaling to `[0, 1]`; constant images map to zeros.
pub fn normalize_minmax(img: &RealGrid2D) -> RealGrid2D {
    let (lo, hi) = img.min_max();
    if hi > lo {
        img.map(|v| (v - lo) / (hi - lo))
    } else {
        RealGrid2D::zeros(img.height(), img.width())
    }
}

pub fn flip_horizontal(img: &RealGrid2D) -> RealGrid2D {
    let w = img.width();
    RealGrid2D::from_fn(img.height(), w, |y, x| img.get(y, w - 1 - x))
}

pub fn flip_vertical(img: &RealGrid2D) -> RealGrid2D {
    let h = img.height();
    RealGrid2D::from_fn(h, img.width(), |y, x| img.get(h - 1 - y, x))
}

/// Counter-clockwise rotation about the image centre, output the same size as
/// the input. Uncovered pixels are zero. Multiples of 90 degrees on square
/// images are exact index permutations; everything else is bilinear.
pub fn rotate(img: &RealGrid2D, degrees: f64) -> RealGrid2D {
    let (h, w) = img.dims();
    let quarter = degrees / 90.0;
    if h == w && (quarter - quarter.round()).abs() < 1e-12 {
        let n = h;
        return match (quarter.round() as i64).rem_euclid(4) {
            0 => img.clone(),
            1 => RealGrid2D::from_fn(n, n, |y, x| img.get(x, n - 1 - y)),
            2 => RealGrid2D::from_fn(n, n, |y, x| img.get(n - 1 - y, n - 1 - x)),
            _ => RealGrid2D::from_fn(n, n, |y, x| img.get(n - 1 - x, y)),
        };
    }
    let (s, c) = degrees.to_radians().sin_cos();
    let (cy, cx) = ((h - 1) as f64 / 2.0, (w - 1) as f64 / 2.0);
    RealGrid2D::from_fn(h, w, |y, x| {
        // inverse map: rotate the output coordinate clockwise into the source
        let (dy, dx) = (y as f64 - cy, x as f64 - cx);
        let sx = c * dx - s * dy;
        let sy = s * dx + c * dy;
        bilinear(img, cy + sy, cx + sx).unwrap_or(0.0)
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AugmentOps {
    /// Flip left-right with probability 1/2.
    pub hflip: bool,
    /// Flip top-bottom with probability 1/2.
    pub vflip: bool,
    /// Rotation drawn uniformly from `[-max, max]` degrees; 0 disables.
    pub rotation_deg: f64,
    /// Constant offset drawn uniformly from `[-max, max]`; 0 disables.
    pub brightness: f64,
}

impl Default for AugmentOps {
    fn default() -> Self {
        Self { hflip: true, vflip: true, rotation_deg: 15.0, brightness: 0.1 }
    }
}

impl AugmentOps {
    pub fn none() -> Self {
        Self { hflip: false, vflip: false, rotation_deg: 0.0, brightness: 0.0 }
    }

    pub fn is_identity(&self) -> bool {
        !self.hflip && !self.vflip && self.rotation_deg == 0.0 && self.brightness == 0.0
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rotation_deg.is_finite() && self.rotation_deg >= 0.0)
            || !(self.brightness.is_finite() && self.brightness >= 0.0)
        {
            return Err(Error::param(format!("augmentation ranges must be finite and >= 0: {self:?}")));
        }
        Ok(())
    }

    /// Draws one concrete transform. Sequences share a draw so all frames
    /// move together.
    pub fn draw(&self, seed: u64) -> AugmentDraw {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let hflip = self.hflip && rng.random_bool(0.5);
        let vflip = self.vflip && rng.random_bool(0.5);
        let angle = if self.rotation_deg > 0.0 { rng.random_range(-self.rotation_deg..=self.rotation_deg) } else { 0.0 };
        let delta = if self.brightness > 0.0 { rng.random_range(-self.brightness..=self.brightness) } else { 0.0 };
        AugmentDraw { hflip, vflip, angle_deg: angle, brightness: delta, identity: self.is_identity() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AugmentDraw {
    pub hflip: bool,
    pub vflip: bool,
    pub angle_deg: f64,
    pub brightness: f64,
    identity: bool,
}

impl AugmentDraw {
    /// Applies flips, rotation, then brightness, and clamps to `[0, 1]`.
    pub fn apply(&self, img: &RealGrid2D) -> RealGrid2D {
        if self.identity {
            return img.clone();
        }
        let mut out = img.clone();
        if self.hflip {
            out = flip_horizontal(&out);
        }
        if self.vflip {
            out = flip_vertical(&out);
        }
        if self.angle_deg != 0.0 {
            out = rotate(&out, self.angle_deg);
        }
        let b = self.brightness;
        out.map(|v| (v + b).clamp(0.0, 1.0))
    }
}

/// Deterministic augmentation of one image.
pub fn augment(img: &RealGrid2D, ops: &AugmentOps, seed: u64) -> RealGrid2D {
    ops.draw(seed).apply(img)
}
