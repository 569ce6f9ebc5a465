use super::grid::RealGrid2D;
use crate::error::{Error, Result};

/// Circular shift: `out[y][x] = img[(y - dy) mod H][(x - dx) mod W]`.
pub fn circ_shift(img: &RealGrid2D, dy: isize, dx: isize) -> RealGrid2D {
    let (h, w) = img.dims();
    let sy = dy.rem_euclid(h as isize) as usize;
    let sx = dx.rem_euclid(w as isize) as usize;
    RealGrid2D::from_fn(h, w, |y, x| img.get((y + h - sy) % h, (x + w - sx) % w))
}

/// Periodic-boundary convolution by direct summation.
///
/// `out[y][x] = sum_{m,n} img[m][n] * kernel[(y - m) mod H][(x - n) mod W]`.
/// Quartic in the side length; meant as a reference, not a workhorse.
pub fn conv2d_circular(img: &RealGrid2D, kernel: &RealGrid2D) -> Result<RealGrid2D> {
    if !img.same_shape(kernel) {
        return Err(Error::shape(format!(
            "circular convolution needs equal shapes, got {:?} and {:?} (zero-pad the kernel first)",
            img.dims(),
            kernel.dims()
        )));
    }
    let (h, w) = img.dims();
    Ok(RealGrid2D::from_fn(h, w, |y, x| {
        let mut acc = 0.0;
        for m in 0..h {
            let ky = (y + h - m) % h;
            for n in 0..w {
                acc += img.get(m, n) * kernel.get(ky, (x + w - n) % w);
            }
        }
        acc
    }))
}

/// Zero-pads `kernel` into the top-left corner of an `h x w` grid.
pub fn zero_pad(kernel: &RealGrid2D, h: usize, w: usize) -> Result<RealGrid2D> {
    if kernel.height() > h || kernel.width() > w {
        return Err(Error::shape(format!("cannot pad {:?} into {h}x{w}", kernel.dims())));
    }
    Ok(RealGrid2D::from_fn(h, w, |y, x| {
        if y < kernel.height() && x < kernel.width() {
            kernel.get(y, x)
        } else {
            0.0
        }
    }))
}
