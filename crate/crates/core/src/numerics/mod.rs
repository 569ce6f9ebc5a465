//! Real/complex grids, arbitrary-size 2D DFTs, circular shifts and a
//! reference circular convolution.

mod fft;
mod grid;
mod spatial;

pub use fft::{dft2, dft2_complex, idft2, reconstruct, Reconstruction};
pub use grid::{frequency_bin, signed_frequency, ComplexGrid2D, RealGrid2D};
pub use spatial::{circ_shift, conv2d_circular, zero_pad};

pub use num_complex::Complex64;
