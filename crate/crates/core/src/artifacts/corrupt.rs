//! k-space corruptors. Each one transforms the image, edits k-space lines
//! or coefficients, and keeps the real part of the inverse transform.

use num_complex::Complex64;
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::params::{AliasingParams, Axis, CardiacParams, GibbsParams, RespiratoryParams};
use crate::error::{Error, Result};
use crate::numerics::{circ_shift, dft2, reconstruct, signed_frequency, ComplexGrid2D, RealGrid2D};

/// Ordered frames of one cine acquisition, all the same shape.
#[derive(Clone, Debug, PartialEq)]
pub struct CineSequence {
    frames: Vec<RealGrid2D>,
}

impl CineSequence {
    pub fn new(frames: Vec<RealGrid2D>) -> Result<Self> {
        let first = frames.first().ok_or_else(|| Error::param("cine sequence needs at least one frame"))?;
        if let Some(bad) = frames.iter().position(|f| !f.same_shape(first)) {
            return Err(Error::shape(format!(
                "frame {bad} is {:?}, frame 0 is {:?}",
                frames[bad].dims(),
                first.dims()
            )));
        }
        Ok(Self { frames })
    }

    pub fn single(frame: RealGrid2D) -> Self {
        Self { frames: vec![frame] }
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn frames(&self) -> &[RealGrid2D] {
        &self.frames
    }

    pub fn frame(&self, i: usize) -> &RealGrid2D {
        &self.frames[i]
    }

    pub fn dims(&self) -> (usize, usize) {
        self.frames[0].dims()
    }

    pub fn into_frames(self) -> Vec<RealGrid2D> {
        self.frames
    }
}

fn lines(axis: Axis, dims: (usize, usize)) -> usize {
    match axis {
        Axis::Rows => dims.0,
        Axis::Cols => dims.1,
    }
}

fn copy_line(dst: &mut ComplexGrid2D, src: &ComplexGrid2D, axis: Axis, j: usize) {
    match axis {
        Axis::Rows => dst.row_mut(j).copy_from_slice(src.row(j)),
        Axis::Cols => {
            for y in 0..dst.height() {
                dst.set(y, j, src.get(y, j));
            }
        }
    }
}

fn zero_line(k: &mut ComplexGrid2D, axis: Axis, j: usize) {
    let zero = Complex64::new(0.0, 0.0);
    match axis {
        Axis::Rows => k.row_mut(j).fill(zero),
        Axis::Cols => {
            for y in 0..k.height() {
                k.set(y, j, zero);
            }
        }
    }
}

/// Translated copy of `img` used by the respiratory corruptor.
pub fn respiratory_translation(img: &RealGrid2D, p: &RespiratoryParams) -> RealGrid2D {
    match p.axis {
        Axis::Rows => circ_shift(img, p.shift_px(), 0),
        Axis::Cols => circ_shift(img, 0, p.shift_px()),
    }
}

/// Respiratory ghosting: k-space lines alternate between the reference and
/// a translated acquisition following a sine pattern.
pub fn corrupt_respiratory(img: &RealGrid2D, p: &RespiratoryParams) -> Result<RealGrid2D> {
    p.validate()?;
    let reference = dft2(img)?;
    let translated = dft2(&respiratory_translation(img, p))?;
    let mut mixed = reference;
    let n = lines(p.axis, img.dims());
    for j in 0..n {
        if p.line_is_translated(j, n) {
            copy_line(&mut mixed, &translated, p.axis, j);
        }
    }
    Ok(reconstruct(&mixed)?.image)
}

/// Index of the frame that donates k-space lines to `target`.
pub fn donor_frame(n_frames: usize, target: usize, offset: usize) -> usize {
    let last = n_frames - 1;
    let forward = (target + offset).min(last);
    if forward != target {
        forward
    } else {
        target.saturating_sub(offset)
    }
}

/// Closes a set of k-space rows under `j -> -j (mod height)`, sorted.
pub fn conjugate_closure(rows: &[usize], height: usize) -> Vec<usize> {
    let mut out: Vec<usize> = rows.iter().flat_map(|&r| [r, (height - r) % height]).collect();
    out.sort_unstable();
    out.dedup();
    out
}

/// Rows replaced by a cardiac corruption of an image with `height` rows:
/// `n_replaced_lines` rows drawn uniformly, each with its conjugate partner.
pub fn cardiac_rows(p: &CardiacParams, height: usize) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(p.rng_seed);
    let drawn = sample(&mut rng, height, p.n_replaced_lines.min(height)).into_vec();
    conjugate_closure(&drawn, height)
}

/// Replaces the given k-space rows of `target`, plus their conjugate
/// partners, with those of `donor`. Pairing keeps the mixed k-space
/// Hermitian, so the reconstruction is exactly real.
pub fn replace_kspace_rows(target: &RealGrid2D, donor: &RealGrid2D, rows: &[usize]) -> Result<RealGrid2D> {
    if !target.same_shape(donor) {
        return Err(Error::shape(format!("target {:?} vs donor {:?}", target.dims(), donor.dims())));
    }
    if let Some(&r) = rows.iter().find(|&&r| r >= target.height()) {
        return Err(Error::param(format!("row {r} out of range for height {}", target.height())));
    }
    let mut k = dft2(target)?;
    let donor_k = dft2(donor)?;
    for r in conjugate_closure(rows, target.height()) {
        copy_line(&mut k, &donor_k, Axis::Rows, r);
    }
    Ok(reconstruct(&k)?.image)
}

/// Cardiac mis-triggering: random k-space rows of the target frame come
/// from a temporally neighbouring frame.
pub fn corrupt_cardiac(seq: &CineSequence, target_frame: usize, p: &CardiacParams) -> Result<RealGrid2D> {
    if seq.len() < 2 {
        return Err(Error::param("cardiac corruption needs a sequence of at least two frames"));
    }
    if target_frame >= seq.len() {
        return Err(Error::param(format!("target frame {target_frame} out of range for {} frames", seq.len())));
    }
    let (h, _) = seq.dims();
    p.validate(h)?;
    let donor = donor_frame(seq.len(), target_frame, p.donor_offset);
    let rows = cardiac_rows(p, h);
    replace_kspace_rows(seq.frame(target_frame), seq.frame(donor), &rows)
}

/// Ideal circular low-pass mask in the DC-centred frame, applied in place.
pub fn apply_lowpass(k: &mut ComplexGrid2D, radius: f64) {
    let (h, w) = k.dims();
    let r2 = radius * radius;
    for u in 0..h {
        let fy = signed_frequency(u, h) as f64;
        for v in 0..w {
            let fx = signed_frequency(v, w) as f64;
            if fy * fy + fx * fx > r2 {
                k.set(u, v, Complex64::new(0.0, 0.0));
            }
        }
    }
}

/// Gibbs ringing via an ideal low-pass filter of radius `radius_px`.
pub fn corrupt_gibbs(img: &RealGrid2D, p: &GibbsParams) -> Result<RealGrid2D> {
    p.validate()?;
    let mut k = dft2(img)?;
    apply_lowpass(&mut k, p.radius_px);
    Ok(reconstruct(&k)?.image)
}

/// Wrap-around aliasing: zero-fills every k-space line whose index is not a
/// multiple of `factor`. Image size is unchanged.
pub fn corrupt_aliasing(img: &RealGrid2D, p: &AliasingParams) -> Result<RealGrid2D> {
    p.validate()?;
    let mut k = dft2(img)?;
    for j in 0..lines(p.axis, img.dims()) {
        if j % p.factor != 0 {
            zero_line(&mut k, p.axis, j);
        }
    }
    Ok(reconstruct(&k)?.image)
}
