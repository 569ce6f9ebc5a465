//! Independent reference computations used as test oracles.

use std::f64::consts::PI;

use kspace_qa::numerics::{Complex64, ComplexGrid2D, RealGrid2D};

/// Direct double-sum DFT, unnormalized, `e^{-2 pi i (uy/H + vx/W)}`.
pub fn naive_dft2(img: &RealGrid2D) -> ComplexGrid2D {
    let (h, w) = img.dims();
    ComplexGrid2D::from_fn(h, w, |u, v| {
        let mut acc = Complex64::new(0.0, 0.0);
        for y in 0..h {
            for x in 0..w {
                let phase = -2.0 * PI * ((u * y) as f64 / h as f64 + (v * x) as f64 / w as f64);
                acc += Complex64::from_polar(img.get(y, x), phase);
            }
        }
        acc
    })
}

/// Pairwise-count AUC: P(score_pos > score_neg) + 0.5 P(tie).
pub fn mann_whitney_auc(scores: &[f64], positive: &[bool]) -> f64 {
    let (mut wins, mut pairs) = (0.0, 0.0);
    for (i, &si) in scores.iter().enumerate() {
        if !positive[i] {
            continue;
        }
        for (j, &sj) in scores.iter().enumerate() {
            if positive[j] {
                continue;
            }
            pairs += 1.0;
            if si > sj {
                wins += 1.0;
            } else if si == sj {
                wins += 0.5;
            }
        }
    }
    wins / pairs
}

/// Partial Fourier sum of a periodic square step over `n` samples keeping
/// harmonics `-k..=k`, evaluated directly from the series.
pub fn step_partial_sum(n: usize, k: usize) -> Vec<f64> {
    let step: Vec<f64> = (0..n).map(|x| if x < n / 2 { 1.0 } else { 0.0 }).collect();
    let coeff = |m: isize| -> Complex64 {
        let mut c = Complex64::new(0.0, 0.0);
        for (x, &v) in step.iter().enumerate() {
            c += Complex64::from_polar(v, -2.0 * PI * m as f64 * x as f64 / n as f64);
        }
        c / n as f64
    };
    let coeffs: Vec<(isize, Complex64)> = (-(k as isize)..=k as isize).map(|m| (m, coeff(m))).collect();
    (0..n)
        .map(|x| {
            coeffs
                .iter()
                .map(|&(m, c)| (c * Complex64::from_polar(1.0, 2.0 * PI * m as f64 * x as f64 / n as f64)).re)
                .sum()
        })
        .collect()
}
