//! Forward/backward kernels for every layer type.
//!
//! Complex gradients follow the real-pair convention: for a real loss `L`
//! and `z = a + ib`, the stored gradient is `dL/da + i dL/db`.

use num_complex::Complex;
use rand::Rng;

use super::tensor::{gemm, ComplexTensor4, Mat, Real, Tensor4};
use crate::error::{Error, Result};
use crate::numerics::{frequency_bin, signed_frequency};

/// Parameter gradients (in parameter order) plus the input gradient.
#[derive(Clone, Debug, PartialEq)]
pub struct LayerGradients<T, X = Tensor4<T>> {
    pub params: Vec<Vec<T>>,
    pub input: Option<X>,
}

// ---------------------------------------------------------------- conv2d

fn conv_shapes<T: Real>(x: &Tensor4<T>, w: &Tensor4<T>) -> Result<(usize, usize, usize)> {
    let [cout, cin, kh, kw] = w.dims();
    if kh != kw || kh % 2 == 0 {
        return Err(Error::shape(format!("conv kernel must be square and odd, got {kh}x{kw}")));
    }
    if x.channels() != cin {
        return Err(Error::shape(format!("conv expects {cin} input channels, got {}", x.channels())));
    }
    Ok((cout, cin, kh))
}

/// Unrolls one item's `cin x H x W` planes into a `(cin*k*k) x (H*W)` matrix
/// with zero "same" padding.
fn im2col<T: Real>(item: &[T], cin: usize, h: usize, w: usize, k: usize, col: &mut [T]) {
    let pad = k / 2;
    let hw = h * w;
    for ci in 0..cin {
        let plane = &item[ci * hw..(ci + 1) * hw];
        for ky in 0..k {
            for kx in 0..k {
                let row = &mut col[((ci * k + ky) * k + kx) * hw..][..hw];
                let dx = kx as isize - pad as isize;
                let x_lo = (-dx).max(0) as usize;
                let x_hi = (w as isize - dx).min(w as isize).max(0) as usize;
                for y in 0..h {
                    let sy = y as isize + ky as isize - pad as isize;
                    let out = &mut row[y * w..(y + 1) * w];
                    if sy < 0 || sy >= h as isize || x_lo >= x_hi {
                        out.fill(T::zero());
                        continue;
                    }
                    let src = &plane[sy as usize * w..(sy as usize + 1) * w];
                    out[..x_lo].fill(T::zero());
                    out[x_hi..].fill(T::zero());
                    let s0 = (x_lo as isize + dx) as usize;
                    out[x_lo..x_hi].copy_from_slice(&src[s0..s0 + (x_hi - x_lo)]);
                }
            }
        }
    }
}

/// Adjoint of [`im2col`]: accumulates columns back into planes.
fn col2im<T: Real>(col: &[T], cin: usize, h: usize, w: usize, k: usize, item: &mut [T]) {
    let pad = k / 2;
    let hw = h * w;
    for ci in 0..cin {
        let plane = &mut item[ci * hw..(ci + 1) * hw];
        for ky in 0..k {
            for kx in 0..k {
                let row = &col[((ci * k + ky) * k + kx) * hw..][..hw];
                let dx = kx as isize - pad as isize;
                let x_lo = (-dx).max(0) as usize;
                let x_hi = (w as isize - dx).min(w as isize).max(0) as usize;
                if x_lo >= x_hi {
                    continue;
                }
                for y in 0..h {
                    let sy = y as isize + ky as isize - pad as isize;
                    if sy < 0 || sy >= h as isize {
                        continue;
                    }
                    let dst = &mut plane[sy as usize * w..(sy as usize + 1) * w];
                    let s0 = (x_lo as isize + dx) as usize;
                    for (d, &v) in dst[s0..s0 + (x_hi - x_lo)].iter_mut().zip(&row[y * w + x_lo..y * w + x_hi]) {
                        *d += v;
                    }
                }
            }
        }
    }
}

/// Stride-1 cross-correlation with zero "same" padding.
/// `weights` is `(out_channels, in_channels, k, k)`, `bias` has `out_channels` entries.
pub fn conv2d_forward<T: Real>(x: &Tensor4<T>, weights: &Tensor4<T>, bias: &[T]) -> Result<Tensor4<T>> {
    let (cout, cin, k) = conv_shapes(x, weights)?;
    if bias.len() != cout {
        return Err(Error::shape(format!("conv bias needs {cout} entries, got {}", bias.len())));
    }
    let [n, _, h, w] = x.dims();
    let hw = h * w;
    let kk = cin * k * k;
    let mut out = Tensor4::zeros([n, cout, h, w]);
    let mut col = vec![T::zero(); kk * hw];
    for b in 0..n {
        im2col(x.item(b), cin, h, w, k, &mut col);
        let y = out.item_mut(b);
        for (co, plane) in y.chunks_mut(hw).enumerate() {
            plane.fill(bias[co]);
        }
        gemm(T::one(), Mat::rm(weights.data(), cout, kk), Mat::rm(&col, kk, hw), T::one(), y);
    }
    Ok(out)
}

/// Gradients of [`conv2d_forward`]: `params = [d_weights, d_bias]`.
pub fn conv2d_backward<T: Real>(
    x: &Tensor4<T>,
    weights: &Tensor4<T>,
    upstream: &Tensor4<T>,
    want_input: bool,
) -> Result<LayerGradients<T>> {
    let (cout, cin, k) = conv_shapes(x, weights)?;
    let [n, _, h, w] = x.dims();
    if upstream.dims() != [n, cout, h, w] {
        return Err(Error::shape(format!(
            "conv upstream {:?} does not match output {:?}",
            upstream.dims(),
            [n, cout, h, w]
        )));
    }
    let hw = h * w;
    let kk = cin * k * k;
    let mut dw = vec![T::zero(); cout * kk];
    let mut db = vec![T::zero(); cout];
    let mut dx = want_input.then(|| Tensor4::zeros(x.dims()));
    let mut col = vec![T::zero(); kk * hw];
    for b in 0..n {
        let g = upstream.item(b);
        for (co, plane) in g.chunks(hw).enumerate() {
            db[co] += plane.iter().copied().sum::<T>();
        }
        im2col(x.item(b), cin, h, w, k, &mut col);
        // dW += G (cout x hw) * col^T (hw x kk)
        gemm(T::one(), Mat::rm(g, cout, hw), Mat::rm(&col, kk, hw).t(), T::one(), &mut dw);
        if let Some(dx) = dx.as_mut() {
            // dcol = W^T (kk x cout) * G (cout x hw)
            gemm(T::one(), Mat::rm(weights.data(), cout, kk).t(), Mat::rm(g, cout, hw), T::zero(), &mut col);
            col2im(&col, cin, h, w, k, dx.item_mut(b));
        }
    }
    Ok(LayerGradients { params: vec![dw, db], input: dx })
}

// ---------------------------------------------------------------- dense

/// `y = x W^T + b` on the flattened items of `x`; `weights` is `(out, in)` row-major.
pub fn dense_forward<T: Real>(x: &Tensor4<T>, weights: &[T], bias: &[T]) -> Result<Tensor4<T>> {
    let n = x.batch();
    let inputs = x.item_len();
    let outputs = bias.len();
    if weights.len() != outputs * inputs {
        return Err(Error::shape(format!(
            "dense weights {} do not match {outputs}x{inputs}",
            weights.len()
        )));
    }
    let mut y = vec![T::zero(); n * outputs];
    for row in y.chunks_mut(outputs) {
        row.copy_from_slice(bias);
    }
    gemm(T::one(), Mat::rm(x.data(), n, inputs), Mat::rm(weights, outputs, inputs).t(), T::one(), &mut y);
    Tensor4::matrix(n, outputs, y)
}

/// Gradients of [`dense_forward`]: `params = [d_weights, d_bias]`; the input
/// gradient has the shape of `x`.
pub fn dense_backward<T: Real>(x: &Tensor4<T>, weights: &[T], upstream: &Tensor4<T>) -> Result<LayerGradients<T>> {
    let n = x.batch();
    let inputs = x.item_len();
    let outputs = upstream.item_len();
    if upstream.batch() != n || weights.len() != outputs * inputs {
        return Err(Error::shape("dense backward shapes".to_string()));
    }
    let mut dw = vec![T::zero(); outputs * inputs];
    gemm(T::one(), Mat::rm(upstream.data(), n, outputs).t(), Mat::rm(x.data(), n, inputs), T::zero(), &mut dw);
    let mut db = vec![T::zero(); outputs];
    for row in upstream.data().chunks(outputs) {
        for (d, &g) in db.iter_mut().zip(row) {
            *d += g;
        }
    }
    let mut dx = vec![T::zero(); n * inputs];
    gemm(T::one(), Mat::rm(upstream.data(), n, outputs), Mat::rm(weights, outputs, inputs), T::zero(), &mut dx);
    Ok(LayerGradients { params: vec![dw, db], input: Some(Tensor4::new(x.dims(), dx)?) })
}

// ---------------------------------------------------------------- pooling

/// 2x2 stride-2 max pooling (odd trailing rows/columns are dropped).
/// Returns the output and, per output element, the flat input index of the max.
pub fn maxpool2_forward<T: Real>(x: &Tensor4<T>) -> Result<(Tensor4<T>, Vec<u32>)> {
    let [n, c, h, w] = x.dims();
    let (oh, ow) = (h / 2, w / 2);
    if oh == 0 || ow == 0 {
        return Err(Error::shape(format!("cannot 2x2-pool a {h}x{w} map")));
    }
    let mut out = Tensor4::zeros([n, c, oh, ow]);
    let mut arg = vec![0u32; n * c * oh * ow];
    let src = x.data();
    let dst = out.data_mut();
    for plane in 0..n * c {
        let base = plane * h * w;
        for oy in 0..oh {
            for ox in 0..ow {
                let i0 = base + 2 * oy * w + 2 * ox;
                let mut best = i0;
                for cand in [i0 + 1, i0 + w, i0 + w + 1] {
                    if src[cand] > src[best] {
                        best = cand;
                    }
                }
                let o = (plane * oh + oy) * ow + ox;
                dst[o] = src[best];
                arg[o] = best as u32;
            }
        }
    }
    Ok((out, arg))
}

pub fn maxpool2_backward<T: Real>(input_dims: [usize; 4], argmax: &[u32], upstream: &Tensor4<T>) -> Result<Tensor4<T>> {
    if argmax.len() != upstream.data().len() {
        return Err(Error::shape("maxpool upstream does not match cached indices"));
    }
    let mut dx = Tensor4::zeros(input_dims);
    let d = dx.data_mut();
    for (&i, &g) in argmax.iter().zip(upstream.data()) {
        d[i as usize] += g;
    }
    Ok(dx)
}

// ---------------------------------------------------------------- pointwise real

pub fn relu_forward<T: Real>(x: &Tensor4<T>) -> Tensor4<T> {
    x.map(|v| if v > T::zero() { v } else { T::zero() })
}

/// `x` is the forward input (or output; the sign pattern is the same).
pub fn relu_backward<T: Real>(x: &Tensor4<T>, upstream: &Tensor4<T>) -> Result<Tensor4<T>> {
    if x.dims() != upstream.dims() {
        return Err(Error::shape("relu upstream shape"));
    }
    let data = x.data().iter().zip(upstream.data()).map(|(&v, &g)| if v > T::zero() { g } else { T::zero() }).collect();
    Tensor4::new(x.dims(), data)
}

/// Inverted dropout. Outside training, or with `p == 0`, this is the identity
/// and no mask is returned.
pub fn dropout_forward<T: Real, R: Rng + ?Sized>(
    x: &Tensor4<T>,
    p: f64,
    training: bool,
    rng: &mut R,
) -> Result<(Tensor4<T>, Option<Vec<T>>)> {
    if !(0.0..1.0).contains(&p) {
        return Err(Error::param(format!("dropout probability must be in [0, 1), got {p}")));
    }
    if !training || p == 0.0 {
        return Ok((x.clone(), None));
    }
    let keep = T::lit(1.0 / (1.0 - p));
    let mask: Vec<T> = (0..x.data().len()).map(|_| if rng.random::<f64>() < p { T::zero() } else { keep }).collect();
    let data = x.data().iter().zip(&mask).map(|(&v, &m)| v * m).collect();
    Ok((Tensor4::new(x.dims(), data)?, Some(mask)))
}

pub fn dropout_backward<T: Real>(mask: Option<&[T]>, upstream: &Tensor4<T>) -> Result<Tensor4<T>> {
    match mask {
        None => Ok(upstream.clone()),
        Some(m) if m.len() == upstream.data().len() => {
            Tensor4::new(upstream.dims(), upstream.data().iter().zip(m).map(|(&g, &k)| g * k).collect())
        }
        Some(_) => Err(Error::shape("dropout mask does not match upstream")),
    }
}

// ---------------------------------------------------------------- gradient reversal

/// Identity.
pub fn grl_forward<T: Real>(x: &Tensor4<T>) -> Tensor4<T> {
    x.clone()
}

/// `-lambda * upstream`.
pub fn grl_backward<T: Real>(upstream: &Tensor4<T>, lambda: f64) -> Tensor4<T> {
    let l = T::lit(lambda);
    upstream.map(|g| -(l * g))
}

// ---------------------------------------------------------------- complex

/// `out[b, o] = sum_i filters[o, i] * x[b, i]`, elementwise complex products.
/// `filters` has dims `(out_channels, in_channels, H, W)`.
pub fn complex_pointwise_forward<T: Real>(
    x: &ComplexTensor4<T>,
    filters: &ComplexTensor4<T>,
) -> Result<ComplexTensor4<T>> {
    let [n, cin, h, w] = x.dims();
    let [cout, fcin, fh, fw] = filters.dims();
    if fcin != cin || (fh, fw) != (h, w) {
        return Err(Error::shape(format!(
            "pointwise filters {:?} do not fit input {:?}",
            filters.dims(),
            x.dims()
        )));
    }
    let mut out = ComplexTensor4::zeros([n, cout, h, w]);
    for b in 0..n {
        for o in 0..cout {
            let dst = out.channel_mut(b, o);
            for i in 0..cin {
                for ((d, &f), &v) in dst.iter_mut().zip(filters.channel(o, i)).zip(x.channel(b, i)) {
                    *d += f * v;
                }
            }
        }
    }
    Ok(out)
}

/// Returns `(d_filters, d_input)`: `dF[o,i] = sum_b G[b,o] conj(x[b,i])`,
/// `dX[b,i] = sum_o G[b,o] conj(F[o,i])`.
pub fn complex_pointwise_backward<T: Real>(
    x: &ComplexTensor4<T>,
    filters: &ComplexTensor4<T>,
    upstream: &ComplexTensor4<T>,
) -> Result<(ComplexTensor4<T>, ComplexTensor4<T>)> {
    let [n, cin, h, w] = x.dims();
    let [cout, ..] = filters.dims();
    if upstream.dims() != [n, cout, h, w] || filters.dims() != [cout, cin, h, w] {
        return Err(Error::shape("complex pointwise backward shapes"));
    }
    let mut df = ComplexTensor4::zeros(filters.dims());
    let mut dx = ComplexTensor4::zeros(x.dims());
    for b in 0..n {
        for o in 0..cout {
            let g = upstream.channel(b, o);
            for i in 0..cin {
                for ((d, &gv), &xv) in df.channel_mut(o, i).iter_mut().zip(g).zip(x.channel(b, i)) {
                    *d += gv * xv.conj();
                }
                for ((d, &gv), &fv) in dx.channel_mut(b, i).iter_mut().zip(g).zip(filters.channel(o, i)) {
                    *d += gv * fv.conj();
                }
            }
        }
    }
    Ok((df, dx))
}

/// modReLU: `z -> relu(|z| + b) z / |z|` with one bias per channel.
pub fn modrelu_forward<T: Real>(x: &ComplexTensor4<T>, bias: &[T]) -> Result<ComplexTensor4<T>> {
    if bias.len() != x.channels() {
        return Err(Error::shape(format!("modReLU needs {} biases, got {}", x.channels(), bias.len())));
    }
    let mut out = x.clone();
    for b in 0..x.batch() {
        for (c, &bc) in bias.iter().enumerate() {
            for z in out.channel_mut(b, c) {
                let r = z.norm();
                *z = if r > T::zero() && r + bc > T::zero() { *z * ((r + bc) / r) } else { Complex::new(T::zero(), T::zero()) };
            }
        }
    }
    Ok(out)
}

/// Returns `(d_bias, d_input)` for [`modrelu_forward`].
pub fn modrelu_backward<T: Real>(
    x: &ComplexTensor4<T>,
    bias: &[T],
    upstream: &ComplexTensor4<T>,
) -> Result<(Vec<T>, ComplexTensor4<T>)> {
    if upstream.dims() != x.dims() || bias.len() != x.channels() {
        return Err(Error::shape("modReLU backward shapes"));
    }
    let mut db = vec![T::zero(); bias.len()];
    let mut dx = ComplexTensor4::zeros(x.dims());
    for b in 0..x.batch() {
        for (c, &bc) in bias.iter().enumerate() {
            let zs = x.channel(b, c);
            let gs = upstream.channel(b, c);
            for ((d, &z), &g) in dx.channel_mut(b, c).iter_mut().zip(zs).zip(gs) {
                let r = z.norm();
                if !(r > T::zero() && r + bc > T::zero()) {
                    continue;
                }
                let s = T::one() + bc / r;
                let dot = g.re * z.re + g.im * z.im;
                db[c] += dot / r;
                *d = g * s - z * (bc * dot / (r * r * r));
            }
        }
    }
    Ok((db, dx))
}

/// Maps output bin `p` of an `out`-point crop to its bin in an `n`-point spectrum.
fn crop_source(p: usize, out: usize, n: usize) -> usize {
    frequency_bin(signed_frequency(p, out), n)
}

/// Keeps the centred `out_h x out_w` low-frequency block of each channel.
/// Input and output both use DFT ordering (DC at index 0).
pub fn spectral_pool<T: Real>(x: &ComplexTensor4<T>, out_h: usize, out_w: usize) -> Result<ComplexTensor4<T>> {
    let [n, c, h, w] = x.dims();
    if out_h == 0 || out_w == 0 || out_h > h || out_w > w {
        return Err(Error::shape(format!("spectral pool to {out_h}x{out_w} from {h}x{w}")));
    }
    let rows: Vec<usize> = (0..out_h).map(|p| crop_source(p, out_h, h)).collect();
    let cols: Vec<usize> = (0..out_w).map(|q| crop_source(q, out_w, w)).collect();
    let mut out = ComplexTensor4::zeros([n, c, out_h, out_w]);
    for b in 0..n {
        for ch in 0..c {
            let src = x.channel(b, ch);
            let dst = out.channel_mut(b, ch);
            for (p, &sy) in rows.iter().enumerate() {
                for (q, &sx) in cols.iter().enumerate() {
                    dst[p * out_w + q] = src[sy * w + sx];
                }
            }
        }
    }
    Ok(out)
}

pub fn spectral_pool_backward<T: Real>(input_dims: [usize; 4], upstream: &ComplexTensor4<T>) -> Result<ComplexTensor4<T>> {
    let [n, c, h, w] = input_dims;
    let [un, uc, out_h, out_w] = upstream.dims();
    if (un, uc) != (n, c) || out_h > h || out_w > w {
        return Err(Error::shape("spectral pool backward shapes"));
    }
    let rows: Vec<usize> = (0..out_h).map(|p| crop_source(p, out_h, h)).collect();
    let cols: Vec<usize> = (0..out_w).map(|q| crop_source(q, out_w, w)).collect();
    let mut dx = ComplexTensor4::zeros(input_dims);
    for b in 0..n {
        for ch in 0..c {
            let g = upstream.channel(b, ch);
            let dst = dx.channel_mut(b, ch);
            for (p, &sy) in rows.iter().enumerate() {
                for (q, &sx) in cols.iter().enumerate() {
                    dst[sy * w + sx] = g[p * out_w + q];
                }
            }
        }
    }
    Ok(dx)
}

/// Real features `[re(item) ..., im(item) ...]` per batch item.
pub fn complex_flatten<T: Real>(x: &ComplexTensor4<T>) -> Tensor4<T> {
    let m = x.item_len();
    let mut out = Vec::with_capacity(2 * x.data().len());
    for item in x.data().chunks(m) {
        out.extend(item.iter().map(|z| z.re));
        out.extend(item.iter().map(|z| z.im));
    }
    Tensor4::new([x.batch(), 2 * m, 1, 1], out).expect("consistent length")
}

pub fn complex_flatten_backward<T: Real>(input_dims: [usize; 4], upstream: &Tensor4<T>) -> Result<ComplexTensor4<T>> {
    let m = input_dims[1] * input_dims[2] * input_dims[3];
    if upstream.batch() != input_dims[0] || upstream.item_len() != 2 * m {
        return Err(Error::shape("complex flatten backward shapes"));
    }
    let mut data = Vec::with_capacity(input_dims[0] * m);
    for g in upstream.data().chunks(2 * m) {
        data.extend(g[..m].iter().zip(&g[m..]).map(|(&re, &im)| Complex::new(re, im)));
    }
    ComplexTensor4::new(input_dims, data)
}

// ---------------------------------------------------------------- loss

/// Row-wise softmax of a `(batch, classes)` tensor.
pub fn softmax<T: Real>(logits: &Tensor4<T>) -> Tensor4<T> {
    let k = logits.item_len();
    let mut out = logits.clone();
    for row in out.data_mut().chunks_mut(k) {
        let max = row.iter().copied().fold(T::neg_infinity(), T::max);
        let mut sum = T::zero();
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
    out
}

/// Mean cross-entropy over the batch and its gradient `(softmax - onehot) / batch`.
pub fn softmax_cross_entropy<T: Real>(logits: &Tensor4<T>, labels: &[usize]) -> Result<(T, Tensor4<T>)> {
    let n = logits.batch();
    let k = logits.item_len();
    if labels.len() != n {
        return Err(Error::shape(format!("{} labels for a batch of {n}", labels.len())));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= k) {
        return Err(Error::param(format!("label {bad} out of range for {k} classes")));
    }
    let mut grad = softmax(logits);
    let scale = T::one() / T::lit(n as f64);
    let mut loss = T::zero();
    for ((row, logit_row), &label) in grad.data_mut().chunks_mut(k).zip(logits.data().chunks(k)).zip(labels) {
        // log-sum-exp for the loss itself, so huge logits do not underflow to log(0)
        let max = logit_row.iter().copied().fold(T::neg_infinity(), T::max);
        let lse = max + logit_row.iter().map(|&v| (v - max).exp()).sum::<T>().ln();
        loss += lse - logit_row[label];
        row[label] -= T::one();
        for v in row.iter_mut() {
            *v *= scale;
        }
    }
    Ok((loss * scale, grad))
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;

    fn rand_tensor(rng: &mut ChaCha8Rng, dims: [usize; 4]) -> Tensor4<f64> {
        Tensor4::from_fn(dims, |_| rng.random_range(-1.0..1.0))
    }

    /// Direct sliding-window cross-correlation.
    fn naive_conv(x: &Tensor4<f64>, w: &Tensor4<f64>, b: &[f64]) -> Tensor4<f64> {
        let [n, cin, h, wd] = x.dims();
        let [cout, _, k, _] = w.dims();
        let p = (k / 2) as isize;
        let mut out = Tensor4::zeros([n, cout, h, wd]);
        for bi in 0..n {
            for co in 0..cout {
                for y in 0..h {
                    for xx in 0..wd {
                        let mut acc = b[co];
                        for ci in 0..cin {
                            for ky in 0..k {
                                for kx in 0..k {
                                    let sy = y as isize + ky as isize - p;
                                    let sx = xx as isize + kx as isize - p;
                                    if sy < 0 || sx < 0 || sy >= h as isize || sx >= wd as isize {
                                        continue;
                                    }
                                    acc += w.data()[((co * cin + ci) * k + ky) * k + kx]
                                        * x.data()[((bi * cin + ci) * h + sy as usize) * wd + sx as usize];
                                }
                            }
                        }
                        out.data_mut()[((bi * cout + co) * h + y) * wd + xx] = acc;
                    }
                }
            }
        }
        out
    }

    #[test]
    fn conv_unit_kernel_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = rand_tensor(&mut rng, [2, 1, 4, 5]);
        let w = Tensor4::new([1, 1, 1, 1], vec![1.0]).unwrap();
        assert_eq!(conv2d_forward(&x, &w, &[0.0]).unwrap(), x);
    }

    #[test]
    fn conv_zero_weights_gives_bias() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = rand_tensor(&mut rng, [1, 2, 4, 4]);
        let w = Tensor4::zeros([3, 2, 3, 3]);
        let y = conv2d_forward(&x, &w, &[0.5, -1.0, 2.0]).unwrap();
        for c in 0..3 {
            assert!(y.item(0)[c * 16..(c + 1) * 16].iter().all(|&v| v == [0.5, -1.0, 2.0][c]));
        }
    }

    #[test]
    fn conv_matches_sliding_window() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = rand_tensor(&mut rng, [2, 3, 5, 5]);
        let w = rand_tensor(&mut rng, [4, 3, 3, 3]);
        let b = [0.1, -0.2, 0.3, 0.0];
        let fast = conv2d_forward(&x, &w, &b).unwrap();
        let slow = naive_conv(&x, &w, &b);
        for (a, e) in fast.data().iter().zip(slow.data()) {
            assert!((a - e).abs() < 1e-6);
        }
    }

    #[test]
    fn conv_backward_zero_upstream() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x = rand_tensor(&mut rng, [1, 2, 4, 4]);
        let w = rand_tensor(&mut rng, [3, 2, 3, 3]);
        let g = conv2d_backward(&x, &w, &Tensor4::zeros([1, 3, 4, 4]), true).unwrap();
        assert!(g.params.iter().flatten().all(|&v| v == 0.0));
        assert!(g.input.unwrap().data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn conv_single_pixel_upstream_gives_input_patch() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = rand_tensor(&mut rng, [1, 1, 5, 5]);
        let w = rand_tensor(&mut rng, [1, 1, 3, 3]);
        let mut up = Tensor4::zeros([1, 1, 5, 5]);
        up.data_mut()[2 * 5 + 2] = 1.0;
        let g = conv2d_backward(&x, &w, &up, false).unwrap();
        for ky in 0..3 {
            for kx in 0..3 {
                assert_eq!(g.params[0][ky * 3 + kx], x.data()[(1 + ky) * 5 + 1 + kx]);
            }
        }
        assert_eq!(g.params[1], vec![1.0]);
    }

    #[test]
    fn dropout_identity_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let x = rand_tensor(&mut rng, [2, 3, 2, 2]);
        assert_eq!(dropout_forward(&x, 0.0, true, &mut rng).unwrap().0, x);
        assert_eq!(dropout_forward(&x, 0.5, false, &mut rng).unwrap().0, x);
        assert!(dropout_forward(&x, 1.0, true, &mut rng).is_err());
    }

    #[test]
    fn relu_identity_on_nonnegative() {
        let x = Tensor4::<f64>::from_fn([1, 2, 3, 3], |i| i as f64);
        assert_eq!(relu_forward(&x), x);
    }

    #[test]
    fn grl_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let g = rand_tensor(&mut rng, [3, 4, 1, 1]);
        assert_eq!(grl_forward(&g), g);
        assert!(grl_backward(&g, 0.0).data().iter().all(|&v| v == 0.0));
        assert_eq!(grl_backward(&g, 1.0), g.map(|v| -v));
    }

    #[test]
    fn pointwise_identity_and_zero_filters() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let x = ComplexTensor4::from_fn([2, 1, 3, 4], |_| Complex::new(rng.random::<f64>(), rng.random::<f64>()));
        let ones = ComplexTensor4::from_fn([1, 1, 3, 4], |_| Complex::new(1.0, 0.0));
        assert_eq!(complex_pointwise_forward(&x, &ones).unwrap(), x);
        let zeros = ComplexTensor4::zeros([2, 1, 3, 4]);
        let y = complex_pointwise_forward(&x, &zeros).unwrap();
        assert!(y.data().iter().all(|z| z.norm() == 0.0));
        assert!(complex_pointwise_forward(&x, &ComplexTensor4::zeros([1, 1, 3, 3])).is_err());
    }

    #[test]
    fn pointwise_scalar_product_rule() {
        // 1x1 spatial: out = f x, so dF = g conj(x), dX = g conj(f)
        let x = ComplexTensor4::new([1, 1, 1, 1], vec![Complex::new(0.3, -1.2)]).unwrap();
        let f = ComplexTensor4::new([1, 1, 1, 1], vec![Complex::new(-0.7, 0.4)]).unwrap();
        let g = ComplexTensor4::new([1, 1, 1, 1], vec![Complex::new(1.5, 0.25)]).unwrap();
        let (df, dx) = complex_pointwise_backward(&x, &f, &g).unwrap();
        // by hand: (1.5 + 0.25i)(0.3 + 1.2i) = 0.45 - 0.3 + (1.8 + 0.075)i
        assert!((df.data()[0] - Complex::new(0.15, 1.875)).norm() < 1e-15);
        // (1.5 + 0.25i)(-0.7 - 0.4i) = -1.05 + 0.1 + (-0.6 - 0.175)i
        assert!((dx.data()[0] - Complex::new(-0.95, -0.775)).norm() < 1e-15);
    }

    #[test]
    fn spectral_pool_identity_and_dc() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let x = ComplexTensor4::from_fn([1, 2, 6, 5], |_| Complex::new(rng.random::<f64>(), rng.random::<f64>()));
        assert_eq!(spectral_pool(&x, 6, 5).unwrap(), x);
        let mut dc = ComplexTensor4::<f64>::zeros([1, 1, 8, 8]);
        dc.data_mut()[0] = Complex::new(3.0, 0.0);
        let y = spectral_pool(&dc, 3, 4).unwrap();
        assert_eq!(y.data()[0], Complex::new(3.0, 0.0));
        assert!(y.data()[1..].iter().all(|z| z.norm() == 0.0));
        assert!(spectral_pool(&x, 7, 5).is_err());
    }

    #[test]
    fn cross_entropy_closed_forms() {
        let uniform = Tensor4::<f64>::zeros([3, 5, 1, 1]);
        let (loss, _) = softmax_cross_entropy(&uniform, &[0, 2, 4]).unwrap();
        assert!((loss - 5f64.ln()).abs() < 1e-12);
        let mut sharp = Tensor4::<f64>::zeros([1, 5, 1, 1]);
        sharp.data_mut()[1] = 1e4;
        let (loss, _) = softmax_cross_entropy(&sharp, &[1]).unwrap();
        assert!(loss < 1e-12);
        assert!(softmax_cross_entropy(&uniform, &[0, 1, 5]).is_err());
    }

    #[test]
    fn maxpool_picks_max() {
        let x = Tensor4::<f64>::new([1, 1, 2, 4], vec![1.0, 5.0, 2.0, 0.0, 3.0, 4.0, -1.0, 7.0]).unwrap();
        let (y, arg) = maxpool2_forward(&x).unwrap();
        assert_eq!(y.data(), &[5.0, 7.0]);
        assert_eq!(arg, vec![1, 7]);
        let up = Tensor4::new([1, 1, 1, 2], vec![1.0, 2.0]).unwrap();
        let dx = maxpool2_backward(x.dims(), &arg, &up).unwrap();
        assert_eq!(dx.data(), &[0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 2.0]);
    }
}
