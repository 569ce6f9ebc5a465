//! Central finite-difference checks for single layers in double precision.

use kspace_qa::nn::{softmax_cross_entropy, Activation, ComplexTensor4, ForwardCtx, Layer, LayerSpec, Tensor4};
use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const STEP: f64 = 1e-6;

/// `||a - b|| / max(||a||, ||b||)`, 0 when both vanish.
pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    let scale = na.max(nb);
    if scale == 0.0 {
        0.0
    } else {
        diff / scale
    }
}

fn flat(a: &Activation<f64>) -> Vec<f64> {
    match a {
        Activation::Real(t) => t.data().to_vec(),
        Activation::Complex(t) => t.data().iter().flat_map(|z| [z.re, z.im]).collect(),
    }
}

fn unflat(like: &Activation<f64>, v: &[f64]) -> Activation<f64> {
    match like {
        Activation::Real(t) => Activation::Real(Tensor4::new(t.dims(), v.to_vec()).unwrap()),
        Activation::Complex(t) => Activation::Complex(
            ComplexTensor4::new(t.dims(), v.chunks_exact(2).map(|p| Complex::new(p[0], p[1])).collect()).unwrap(),
        ),
    }
}

pub fn random_input(rng: &mut ChaCha8Rng, dims: [usize; 4], complex: bool) -> Activation<f64> {
    if complex {
        Activation::Complex(ComplexTensor4::from_fn(dims, |_| {
            Complex::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        }))
    } else {
        Activation::Real(Tensor4::from_fn(dims, |_| rng.random_range(-1.0..1.0)))
    }
}

/// Worst relative error over the input gradient and every parameter gradient
/// of `layer`, for the scalar loss `sum(r * layer(x))` with random `r`.
/// Gradient reversal is compared against `-lambda` times the numeric
/// derivative of its (identity) forward pass.
pub fn check_layer(mut layer: Layer<f64>, x: Activation<f64>, seed: u64, grl_lambda: f64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let fwd_seed = rng.random::<u64>();
    let run = |layer: &mut Layer<f64>, x: Activation<f64>| {
        let mut r = ChaCha8Rng::seed_from_u64(fwd_seed);
        let mut ctx = ForwardCtx { training: true, rng: &mut r };
        layer.forward(x, &mut ctx).unwrap()
    };
    let y = run(&mut layer, x.clone());
    let weights: Vec<f64> = (0..flat(&y).len()).map(|_| rng.random_range(-1.0..1.0)).collect();
    let loss = |layer: &mut Layer<f64>, x: Activation<f64>| -> f64 {
        let y = run(layer, x);
        flat(&y).iter().zip(&weights).map(|(a, b)| a * b).sum()
    };
    let is_grl = *layer.spec() == LayerSpec::Grl;
    let sign = if is_grl { -grl_lambda } else { 1.0 };

    for p in layer.params_mut() {
        p.zero_grad();
    }
    layer.input_grad = true;
    let dx = layer.backward(unflat(&y, &weights), grl_lambda).unwrap().expect("input gradient");
    let analytic_x = flat(&dx);
    let analytic_p: Vec<Vec<f64>> = layer.params().iter().map(|p| p.grad.clone()).collect();

    let x0 = flat(&x);
    let mut numeric_x = vec![0.0; x0.len()];
    for i in 0..x0.len() {
        let mut xp = x0.clone();
        xp[i] += STEP;
        let lp = loss(&mut layer, unflat(&x, &xp));
        xp[i] -= 2.0 * STEP;
        let lm = loss(&mut layer, unflat(&x, &xp));
        numeric_x[i] = sign * (lp - lm) / (2.0 * STEP);
    }
    let mut worst = rel_err(&analytic_x, &numeric_x);

    for (k, analytic) in analytic_p.iter().enumerate() {
        let mut numeric = vec![0.0; analytic.len()];
        for i in 0..analytic.len() {
            let orig = layer.params()[k].value[i];
            layer.params_mut()[k].value[i] = orig + STEP;
            let lp = loss(&mut layer, x.clone());
            layer.params_mut()[k].value[i] = orig - STEP;
            let lm = loss(&mut layer, x.clone());
            layer.params_mut()[k].value[i] = orig;
            numeric[i] = (lp - lm) / (2.0 * STEP);
        }
        worst = worst.max(rel_err(analytic, &numeric));
    }
    worst
}

/// Softmax cross-entropy gradient against finite differences of the loss.
pub fn check_softmax_ce(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(1..=5);
    let k = rng.random_range(2..=6);
    let logits = Tensor4::from_fn([n, k, 1, 1], |_| rng.random_range(-3.0..3.0));
    let labels: Vec<usize> = (0..n).map(|_| rng.random_range(0..k)).collect();
    let (_, grad) = softmax_cross_entropy(&logits, &labels).unwrap();
    let mut numeric = vec![0.0; logits.data().len()];
    for i in 0..numeric.len() {
        let mut p = logits.clone();
        p.data_mut()[i] += STEP;
        let lp = softmax_cross_entropy(&p, &labels).unwrap().0;
        p.data_mut()[i] -= 2.0 * STEP;
        let lm = softmax_cross_entropy(&p, &labels).unwrap().0;
        numeric[i] = (lp - lm) / (2.0 * STEP);
    }
    rel_err(grad.data(), &numeric)
}

/// Random layer and matching input for configuration `seed` of `kind`.
pub fn random_case(kind: &str, seed: u64) -> (Layer<f64>, Activation<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(1..=2);
    let (spec, dims, complex) = match kind {
        "conv2d" => {
            let cin = rng.random_range(1..=3);
            let k = [1, 3, 5][rng.random_range(0..3)];
            let spec = LayerSpec::Conv2d { in_channels: cin, out_channels: rng.random_range(1..=3), kernel: k };
            (spec, [n, cin, rng.random_range(3..=6), rng.random_range(3..=6)], false)
        }
        "dense" => {
            let dims = [n, rng.random_range(1..=3), rng.random_range(1..=3), rng.random_range(1..=3)];
            let spec = LayerSpec::Dense { inputs: dims[1] * dims[2] * dims[3], outputs: rng.random_range(1..=5) };
            (spec, dims, false)
        }
        "maxpool2" => (LayerSpec::MaxPool2, [n, rng.random_range(1..=3), rng.random_range(2..=7), rng.random_range(2..=7)], false),
        "relu" => (LayerSpec::Relu, [n, 2, rng.random_range(1..=4), rng.random_range(1..=4)], false),
        "dropout" => {
            let p = [0.0, 0.25, 0.5][rng.random_range(0..3)];
            (LayerSpec::Dropout { p }, [n, 2, rng.random_range(1..=4), rng.random_range(1..=4)], false)
        }
        "flatten" => (LayerSpec::Flatten, [n, 2, 3, rng.random_range(1..=4)], false),
        "grl" => (LayerSpec::Grl, [n, rng.random_range(1..=6), 1, 1], false),
        "complex_pointwise" => {
            let (cin, h, w) = (rng.random_range(1..=3), rng.random_range(1..=5), rng.random_range(1..=5));
            let spec = LayerSpec::ComplexPointwise { in_channels: cin, out_channels: rng.random_range(1..=3), height: h, width: w };
            (spec, [n, cin, h, w], true)
        }
        "modrelu" => {
            let c = rng.random_range(1..=3);
            (LayerSpec::ModRelu { channels: c }, [n, c, rng.random_range(1..=4), rng.random_range(1..=4)], true)
        }
        "spectral_pool" => {
            let (h, w) = (rng.random_range(2..=7), rng.random_range(2..=7));
            let spec = LayerSpec::SpectralPool { height: rng.random_range(1..=h), width: rng.random_range(1..=w) };
            (spec, [n, rng.random_range(1..=2), h, w], true)
        }
        "complex_flatten" => (LayerSpec::ComplexFlatten, [n, 2, rng.random_range(1..=3), 2], true),
        other => panic!("unknown layer kind {other}"),
    };
    let mut layer = Layer::new(spec.clone(), &mut rng).unwrap();
    // non-zero biases so every branch (e.g. the modReLU threshold) is exercised
    for p in layer.params_mut() {
        if p.shape.len() == 1 {
            for v in &mut p.value {
                *v = rng.random_range(-0.5..0.5);
            }
        }
    }
    let x = random_input(&mut rng, dims, complex);
    (layer, x)
}

pub const LAYER_KINDS: &[&str] = &[
    "conv2d",
    "dense",
    "maxpool2",
    "relu",
    "dropout",
    "flatten",
    "complex_pointwise",
    "modrelu",
    "spectral_pool",
    "complex_flatten",
];
