//! 2D discrete Fourier transforms of arbitrary size.
//!
//! Convention: the forward transform is unnormalized,
//! `X[u,v] = sum_{y,x} x[y,x] exp(-2 pi i (u y / H + v x / W))`,
//! and the inverse carries the `1 / (H W)` factor. The aliasing ghost
//! identity in `artifacts` depends on this pairing.

use std::cell::RefCell;

use num_complex::Complex64;
use rustfft::{FftDirection, FftPlanner};

use super::grid::{ComplexGrid2D, RealGrid2D};
use crate::error::Result;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn transform_rows(data: &mut [Complex64], width: usize, direction: FftDirection) {
    let fft = PLANNER.with(|p| p.borrow_mut().plan_fft(width, direction));
    fft.process(data);
}

fn transpose(src: &[Complex64], height: usize, width: usize, dst: &mut [Complex64]) {
    for y in 0..height {
        for x in 0..width {
            dst[x * height + y] = src[y * width + x];
        }
    }
}

/// In-place 2D transform of a row-major `height x width` buffer.
pub(crate) fn fft2_in_place(data: &mut [Complex64], height: usize, width: usize, direction: FftDirection) {
    debug_assert_eq!(data.len(), height * width);
    if width > 1 {
        transform_rows(data, width, direction);
    }
    if height > 1 {
        let mut scratch = vec![Complex64::new(0.0, 0.0); data.len()];
        transpose(data, height, width, &mut scratch);
        transform_rows(&mut scratch, height, direction);
        transpose(&scratch, width, height, data);
    }
}

/// Forward DFT of a real image.
pub fn dft2(img: &RealGrid2D) -> Result<ComplexGrid2D> {
    img.ensure_finite()?;
    dft2_complex(&img.to_complex())
}

/// Forward DFT of a complex grid.
pub fn dft2_complex(grid: &ComplexGrid2D) -> Result<ComplexGrid2D> {
    grid.ensure_finite()?;
    let (h, w) = grid.dims();
    let mut out = grid.clone();
    fft2_in_place(out.data_mut(), h, w, FftDirection::Forward);
    Ok(out)
}

/// Inverse DFT with `1 / (H W)` normalization.
pub fn idft2(k: &ComplexGrid2D) -> Result<ComplexGrid2D> {
    k.ensure_finite()?;
    let (h, w) = k.dims();
    let mut out = k.clone();
    fft2_in_place(out.data_mut(), h, w, FftDirection::Inverse);
    let scale = 1.0 / (h * w) as f64;
    out.data_mut().iter_mut().for_each(|c| *c *= scale);
    Ok(out)
}

/// A real image reconstructed from (possibly manipulated) k-space.
#[derive(Clone, Debug)]
pub struct Reconstruction {
    pub image: RealGrid2D,
    /// Largest magnitude of the discarded imaginary part.
    pub imag_residue: f64,
}

/// Inverse transform, keeping the real part as the image.
pub fn reconstruct(k: &ComplexGrid2D) -> Result<Reconstruction> {
    let spatial = idft2(k)?;
    Ok(Reconstruction { imag_residue: spatial.max_abs_imag(), image: spatial.real_part() })
}
