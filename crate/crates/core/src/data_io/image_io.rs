//! Grayscale image and k-space files.
//!
//! Raw float grids (`.kqf`): magic `KQRF`, `u32` version, `u32` height,
//! `u32` width, then `height * width` little-endian `f32` values, row-major.
//!
//! Raw k-space (`.kqk`): magic `KQCK`, same header, then interleaved
//! little-endian `f64` (re, im) pairs.
//!
//! PNG and PGM rasters are read at 8 or 16 bits and scaled to `[0, 1]` by
//! dividing by 255 or 65535. They are written at 16 bits after clamping to
//! `[0, 1]` and rounding `v * 65535`.

use std::fs;
use std::io::Write;
use std::path::Path;

use image::{DynamicImage, ImageBuffer, Luma};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::numerics::{ComplexGrid2D, RealGrid2D};

pub const RAW_MAGIC: &[u8; 4] = b"KQRF";
pub const KSPACE_MAGIC: &[u8; 4] = b"KQCK";
const FORMAT_VERSION: u32 = 1;

fn fmt_err(path: &Path, msg: impl Into<String>) -> Error {
    Error::Format { path: path.to_path_buf(), msg: msg.into() }
}

fn header(magic: &[u8; 4], h: usize, w: usize) -> Vec<u8> {
    let mut out = Vec::with_capacity(16);
    out.extend_from_slice(magic);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(h as u32).to_le_bytes());
    out.extend_from_slice(&(w as u32).to_le_bytes());
    out
}

fn parse_header<'a>(path: &Path, bytes: &'a [u8], magic: &[u8; 4], scalar: usize) -> Result<(usize, usize, &'a [u8])> {
    if bytes.len() < 16 || &bytes[..4] != magic {
        return Err(fmt_err(path, "missing or wrong magic"));
    }
    let word = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap());
    if word(4) != FORMAT_VERSION {
        return Err(fmt_err(path, format!("unsupported version {}", word(4))));
    }
    let (h, w) = (word(8) as usize, word(12) as usize);
    if h == 0 || w == 0 {
        return Err(fmt_err(path, format!("degenerate dimensions {h}x{w}")));
    }
    let payload = &bytes[16..];
    if payload.len() != h * w * scalar {
        return Err(fmt_err(
            path,
            format!("header says {h}x{w} but payload has {} bytes, expected {}", payload.len(), h * w * scalar),
        ));
    }
    Ok((h, w, payload))
}

pub fn encode_raw(img: &RealGrid2D) -> Vec<u8> {
    let mut out = header(RAW_MAGIC, img.height(), img.width());
    out.reserve(img.len() * 4);
    for &v in img.data() {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    out
}

pub fn decode_raw(path: &Path, bytes: &[u8]) -> Result<RealGrid2D> {
    let (h, w, payload) = parse_header(path, bytes, RAW_MAGIC, 4)?;
    let data = payload.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64).collect();
    RealGrid2D::new(h, w, data).map_err(|e| fmt_err(path, e.to_string()))
}

fn is_raster(path: &Path) -> bool {
    matches!(
        path.extension().and_then(|e| e.to_str()).map(|e| e.to_ascii_lowercase()).as_deref(),
        Some("png" | "pgm" | "pnm")
    )
}

/// Loads a grayscale image. Raw float files keep their values; rasters are
/// scaled to `[0, 1]`.
pub fn load_image(path: &Path) -> Result<RealGrid2D> {
    let bytes = fs::read(path)?;
    if bytes.starts_with(RAW_MAGIC) {
        return decode_raw(path, &bytes);
    }
    let img = image::load_from_memory(&bytes).map_err(|e| fmt_err(path, e.to_string()))?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let data: Vec<f64> = match img {
        DynamicImage::ImageLuma8(buf) => buf.into_raw().into_iter().map(|v| v as f64 / 255.0).collect(),
        DynamicImage::ImageLuma16(buf) => buf.into_raw().into_iter().map(|v| v as f64 / 65535.0).collect(),
        other if other.color().has_color() || other.color().has_alpha() => {
            return Err(fmt_err(path, format!("expected a grayscale raster, got {:?}", other.color())))
        }
        other => other.into_luma16().into_raw().into_iter().map(|v| v as f64 / 65535.0).collect(),
    };
    RealGrid2D::new(h, w, data).map_err(|e| fmt_err(path, e.to_string()))
}

/// Writes a raw float file unless the extension names a raster format.
pub fn save_image(path: &Path, img: &RealGrid2D) -> Result<()> {
    img.ensure_finite()?;
    if !is_raster(path) {
        return write_atomic(path, &encode_raw(img));
    }
    let q: Vec<u16> = img.data().iter().map(|v| (v.clamp(0.0, 1.0) * 65535.0).round() as u16).collect();
    let buf: ImageBuffer<Luma<u16>, Vec<u16>> = ImageBuffer::from_raw(img.width() as u32, img.height() as u32, q)
        .ok_or_else(|| fmt_err(path, "raster buffer size"))?;
    buf.save(path).map_err(|e| fmt_err(path, e.to_string()))
}

pub fn save_kspace(path: &Path, k: &ComplexGrid2D) -> Result<()> {
    k.ensure_finite()?;
    let (h, w) = k.dims();
    let mut out = header(KSPACE_MAGIC, h, w);
    out.reserve(h * w * 16);
    for z in k.data() {
        out.extend_from_slice(&z.re.to_le_bytes());
        out.extend_from_slice(&z.im.to_le_bytes());
    }
    write_atomic(path, &out)
}

pub fn load_kspace(path: &Path) -> Result<ComplexGrid2D> {
    let bytes = fs::read(path)?;
    let (h, w, payload) = parse_header(path, &bytes, KSPACE_MAGIC, 16)?;
    let data = payload
        .chunks_exact(16)
        .map(|c| {
            Complex64::new(f64::from_le_bytes(c[..8].try_into().unwrap()), f64::from_le_bytes(c[8..].try_into().unwrap()))
        })
        .collect();
    ComplexGrid2D::new(h, w, data).map_err(|e| fmt_err(path, e.to_string()))
}

pub fn is_kspace_file(path: &Path) -> Result<bool> {
    let mut f = fs::File::open(path)?;
    let mut magic = [0u8; 4];
    Ok(std::io::Read::read_exact(&mut f, &mut magic).is_ok() && &magic == KSPACE_MAGIC)
}

pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp~");
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all().ok();
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn raw_round_trip_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.kqf");
        let img = RealGrid2D::from_fn(5, 7, |y, x| ((y * 7 + x) as f32 * 0.173).sin() as f64);
        save_image(&p, &img).unwrap();
        let back = load_image(&p).unwrap();
        assert!(img.data().iter().zip(back.data()).all(|(a, b)| a.to_bits() == b.to_bits()));
        let bytes = fs::read(&p).unwrap();
        assert_eq!(bytes.len(), 16 + 35 * 4);
    }

    #[test]
    fn truncated_raw_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.kqf");
        let mut bytes = encode_raw(&RealGrid2D::zeros(3, 3));
        bytes.pop();
        fs::write(&p, bytes).unwrap();
        let err = load_image(&p).unwrap_err().to_string();
        assert!(err.contains("payload"), "{err}");
    }

    #[test]
    fn black_raster_loads_as_zeros() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("black.png");
        image::GrayImage::new(6, 4).save(&p).unwrap();
        let img = load_image(&p).unwrap();
        assert_eq!(img.dims(), (4, 6));
        assert!(img.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn sixteen_bit_gradient_scales_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("grad.png");
        let vals: Vec<u16> = (0..64u32).map(|i| (i * 1040) as u16).collect();
        ImageBuffer::<Luma<u16>, _>::from_raw(8, 8, vals.clone()).unwrap().save(&p).unwrap();
        let img = load_image(&p).unwrap();
        for (a, &v) in img.data().iter().zip(&vals) {
            assert_eq!(*a, v as f64 / 65535.0);
        }
    }

    #[test]
    fn pgm_round_trip_quantized() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.pgm");
        let img = RealGrid2D::from_fn(4, 4, |y, x| (y * 4 + x) as f64 / 15.0);
        save_image(&p, &img).unwrap();
        let back = load_image(&p).unwrap();
        assert!(img.max_abs_diff(&back) <= 0.5 / 65535.0 + 1e-15);
    }

    #[test]
    fn kspace_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("k.kqk");
        let k = ComplexGrid2D::from_fn(3, 4, |y, x| Complex64::new(y as f64 * 1.1, -(x as f64) / 3.0));
        save_kspace(&p, &k).unwrap();
        assert!(is_kspace_file(&p).unwrap());
        assert_eq!(load_kspace(&p).unwrap(), k);
    }
}
