use num_complex::Complex;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::ops::*;
use super::tensor::{ComplexTensor4, Real, Tensor4};
use crate::error::{Error, Result};

/// Construction recipe of one layer; also the checkpoint manifest entry.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum LayerSpec {
    Conv2d { in_channels: usize, out_channels: usize, kernel: usize },
    Dense { inputs: usize, outputs: usize },
    MaxPool2,
    Relu,
    Dropout { p: f64 },
    Flatten,
    Grl,
    ComplexPointwise { in_channels: usize, out_channels: usize, height: usize, width: usize },
    ModRelu { channels: usize },
    SpectralPool { height: usize, width: usize },
    ComplexFlatten,
}

impl LayerSpec {
    /// Shapes of the trainable parameters, in storage order. Complex
    /// parameters carry a trailing dimension of 2 (re, im interleaved).
    pub fn param_shapes(&self) -> Vec<Vec<usize>> {
        match *self {
            LayerSpec::Conv2d { in_channels, out_channels, kernel } => {
                vec![vec![out_channels, in_channels, kernel, kernel], vec![out_channels]]
            }
            LayerSpec::Dense { inputs, outputs } => vec![vec![outputs, inputs], vec![outputs]],
            LayerSpec::ComplexPointwise { in_channels, out_channels, height, width } => {
                vec![vec![out_channels, in_channels, height, width, 2]]
            }
            LayerSpec::ModRelu { channels } => vec![vec![channels]],
            _ => Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |v: usize, what: &str| {
            if v == 0 {
                Err(Error::param(format!("{what} must be positive")))
            } else {
                Ok(())
            }
        };
        match *self {
            LayerSpec::Conv2d { in_channels, out_channels, kernel } => {
                positive(in_channels, "conv input channels")?;
                positive(out_channels, "conv output channels")?;
                if kernel % 2 == 0 {
                    return Err(Error::param(format!("conv kernel must be odd, got {kernel}")));
                }
            }
            LayerSpec::Dense { inputs, outputs } => {
                positive(inputs, "dense inputs")?;
                positive(outputs, "dense outputs")?;
            }
            LayerSpec::Dropout { p } if !(0.0..1.0).contains(&p) => {
                return Err(Error::param(format!("dropout probability must be in [0, 1), got {p}")));
            }
            LayerSpec::ComplexPointwise { in_channels, out_channels, height, width } => {
                positive(in_channels * out_channels * height * width, "pointwise filter size")?;
            }
            LayerSpec::ModRelu { channels } => positive(channels, "modReLU channels")?,
            LayerSpec::SpectralPool { height, width } => positive(height * width, "spectral pool size")?,
            _ => {}
        }
        Ok(())
    }
}

/// How the gradient reversal coefficient evolves over training.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "schedule", rename_all = "snake_case", deny_unknown_fields)]
pub enum GrlConfig {
    Constant { lambda: f64 },
    /// `lambda(p) = scale * (2 / (1 + exp(-gamma p)) - 1)` for progress `p` in `[0, 1]`.
    Annealed { gamma: f64, scale: f64 },
}

impl Default for GrlConfig {
    fn default() -> Self {
        GrlConfig::Annealed { gamma: 10.0, scale: 1.0 }
    }
}

impl GrlConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            GrlConfig::Constant { lambda } => lambda.is_finite() && lambda >= 0.0,
            GrlConfig::Annealed { gamma, scale } => gamma.is_finite() && scale.is_finite() && scale >= 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::param(format!("invalid gradient reversal config {self:?}")))
        }
    }

    pub fn lambda(&self, progress: f64) -> f64 {
        match *self {
            GrlConfig::Constant { lambda } => lambda,
            GrlConfig::Annealed { gamma, scale } => {
                let p = progress.clamp(0.0, 1.0);
                scale * (2.0 / (1.0 + (-gamma * p).exp()) - 1.0)
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Param<T> {
    pub shape: Vec<usize>,
    pub value: Vec<T>,
    pub grad: Vec<T>,
}

impl<T: Real> Param<T> {
    pub fn new(shape: Vec<usize>, value: Vec<T>) -> Result<Self> {
        let n: usize = shape.iter().product();
        if n != value.len() {
            return Err(Error::shape(format!("parameter {shape:?} needs {n} values, got {}", value.len())));
        }
        Ok(Self { shape, grad: vec![T::zero(); n], value })
    }

    pub fn len(&self) -> usize {
        self.value.len()
    }

    pub fn is_empty(&self) -> bool {
        self.value.is_empty()
    }

    pub fn zero_grad(&mut self) {
        self.grad.fill(T::zero());
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Activation<T> {
    Real(Tensor4<T>),
    Complex(ComplexTensor4<T>),
}

impl<T: Real> Activation<T> {
    pub fn real(self) -> Result<Tensor4<T>> {
        match self {
            Activation::Real(t) => Ok(t),
            Activation::Complex(_) => Err(Error::shape("expected a real activation, got complex")),
        }
    }

    pub fn complex(self) -> Result<ComplexTensor4<T>> {
        match self {
            Activation::Complex(t) => Ok(t),
            Activation::Real(_) => Err(Error::shape("expected a complex activation, got real")),
        }
    }

    pub fn dims(&self) -> [usize; 4] {
        match self {
            Activation::Real(t) => t.dims(),
            Activation::Complex(t) => t.dims(),
        }
    }
}

/// Per-pass settings. Caches for backward are only kept in training mode.
pub struct ForwardCtx<'a, R: Rng> {
    pub training: bool,
    pub rng: &'a mut R,
}

#[derive(Clone, Debug, Default)]
enum Cache<T> {
    #[default]
    Empty,
    Real(Tensor4<T>),
    Complex(ComplexTensor4<T>),
    Pool([usize; 4], Vec<u32>),
    Mask(Option<Vec<T>>),
    Dims([usize; 4]),
}

#[derive(Clone, Debug)]
pub struct Layer<T> {
    spec: LayerSpec,
    params: Vec<Param<T>>,
    /// Whether backward must produce an input gradient (false for the first layer).
    pub input_grad: bool,
    cache: Cache<T>,
}

fn interleaved_to_complex<T: Real>(v: &[T], dims: [usize; 4]) -> Result<ComplexTensor4<T>> {
    ComplexTensor4::new(dims, v.chunks_exact(2).map(|p| Complex::new(p[0], p[1])).collect())
}

fn complex_to_interleaved<T: Real>(t: &ComplexTensor4<T>) -> Vec<T> {
    t.data().iter().flat_map(|z| [z.re, z.im]).collect()
}

impl<T: Real> Layer<T> {
    /// Builds a layer with freshly initialised parameters: He-normal weights
    /// and zero biases for conv/dense, i.i.d. normal real and imaginary parts
    /// with sigma `1/sqrt(H W)` for complex filters, zero modReLU biases.
    pub fn new<R: Rng + ?Sized>(spec: LayerSpec, rng: &mut R) -> Result<Self> {
        spec.validate()?;
        let normal = |sigma: f64, n: usize, rng: &mut R| -> Vec<T> {
            let d = Normal::new(0.0, sigma).expect("positive sigma");
            (0..n).map(|_| T::lit(d.sample(rng))).collect()
        };
        let shapes = spec.param_shapes();
        let values: Vec<Vec<T>> = match spec {
            LayerSpec::Conv2d { in_channels, out_channels, kernel } => {
                let fan_in = in_channels * kernel * kernel;
                vec![
                    normal((2.0 / fan_in as f64).sqrt(), out_channels * fan_in, rng),
                    vec![T::zero(); out_channels],
                ]
            }
            LayerSpec::Dense { inputs, outputs } => {
                vec![normal((2.0 / inputs as f64).sqrt(), outputs * inputs, rng), vec![T::zero(); outputs]]
            }
            LayerSpec::ComplexPointwise { height, width, .. } => {
                let n = shapes[0].iter().product();
                vec![normal(1.0 / ((height * width) as f64).sqrt(), n, rng)]
            }
            LayerSpec::ModRelu { channels } => vec![vec![T::zero(); channels]],
            _ => Vec::new(),
        };
        Self::with_values(spec, values)
    }

    /// Builds a layer from explicit parameter values (checkpoint loading, tests).
    pub fn with_values(spec: LayerSpec, values: Vec<Vec<T>>) -> Result<Self> {
        spec.validate()?;
        let shapes = spec.param_shapes();
        if shapes.len() != values.len() {
            return Err(Error::shape(format!("{spec:?} has {} parameters, got {}", shapes.len(), values.len())));
        }
        let params = shapes.into_iter().zip(values).map(|(s, v)| Param::new(s, v)).collect::<Result<_>>()?;
        Ok(Self { spec, params, input_grad: true, cache: Cache::Empty })
    }

    pub fn spec(&self) -> &LayerSpec {
        &self.spec
    }

    pub fn params(&self) -> &[Param<T>] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Param<T>] {
        &mut self.params
    }

    pub fn clear_cache(&mut self) {
        self.cache = Cache::Empty;
    }

    pub fn forward<R: Rng>(&mut self, x: Activation<T>, ctx: &mut ForwardCtx<'_, R>) -> Result<Activation<T>> {
        let keep = ctx.training;
        let (out, cache) = match self.spec {
            LayerSpec::Conv2d { in_channels, out_channels, kernel } => {
                let x = x.real()?;
                let w = Tensor4::new([out_channels, in_channels, kernel, kernel], self.params[0].value.clone())?;
                let y = conv2d_forward(&x, &w, &self.params[1].value)?;
                (Activation::Real(y), Cache::Real(x))
            }
            LayerSpec::Dense { .. } => {
                let x = x.real()?;
                let y = dense_forward(&x, &self.params[0].value, &self.params[1].value)?;
                (Activation::Real(y), Cache::Real(x))
            }
            LayerSpec::MaxPool2 => {
                let x = x.real()?;
                let (y, arg) = maxpool2_forward(&x)?;
                (Activation::Real(y), Cache::Pool(x.dims(), arg))
            }
            LayerSpec::Relu => {
                let x = x.real()?;
                let y = relu_forward(&x);
                (Activation::Real(y), Cache::Real(x))
            }
            LayerSpec::Dropout { p } => {
                let x = x.real()?;
                let (y, mask) = dropout_forward(&x, p, ctx.training, ctx.rng)?;
                (Activation::Real(y), Cache::Mask(mask))
            }
            LayerSpec::Flatten => {
                let x = x.real()?;
                let dims = x.dims();
                let n = x.batch();
                let m = x.item_len();
                (Activation::Real(x.reshape([n, m, 1, 1])?), Cache::Dims(dims))
            }
            LayerSpec::Grl => (Activation::Real(grl_forward(&x.real()?)), Cache::Empty),
            LayerSpec::ComplexPointwise { in_channels, out_channels, height, width } => {
                let x = x.complex()?;
                let f = interleaved_to_complex(&self.params[0].value, [out_channels, in_channels, height, width])?;
                let y = complex_pointwise_forward(&x, &f)?;
                (Activation::Complex(y), Cache::Complex(x))
            }
            LayerSpec::ModRelu { .. } => {
                let x = x.complex()?;
                let y = modrelu_forward(&x, &self.params[0].value)?;
                (Activation::Complex(y), Cache::Complex(x))
            }
            LayerSpec::SpectralPool { height, width } => {
                let x = x.complex()?;
                (Activation::Complex(spectral_pool(&x, height, width)?), Cache::Dims(x.dims()))
            }
            LayerSpec::ComplexFlatten => {
                let x = x.complex()?;
                (Activation::Real(complex_flatten(&x)), Cache::Dims(x.dims()))
            }
        };
        self.cache = if keep { cache } else { Cache::Empty };
        Ok(out)
    }

    /// Accumulates parameter gradients and returns the input gradient
    /// (`None` when `input_grad` is off). `grl_lambda` is only read by
    /// gradient reversal layers.
    pub fn backward(&mut self, upstream: Activation<T>, grl_lambda: f64) -> Result<Option<Activation<T>>> {
        let cache = std::mem::take(&mut self.cache);
        let missing = || Error::shape("backward called without a training-mode forward pass");
        let input = match (&self.spec, cache) {
            (&LayerSpec::Conv2d { in_channels, out_channels, kernel }, Cache::Real(x)) => {
                let w = Tensor4::new([out_channels, in_channels, kernel, kernel], self.params[0].value.clone())?;
                let g = conv2d_backward(&x, &w, &upstream.real()?, self.input_grad)?;
                self.accumulate(&g.params);
                g.input.map(Activation::Real)
            }
            (LayerSpec::Dense { .. }, Cache::Real(x)) => {
                let g = dense_backward(&x, &self.params[0].value, &upstream.real()?)?;
                self.accumulate(&g.params);
                g.input.map(Activation::Real)
            }
            (LayerSpec::MaxPool2, Cache::Pool(dims, arg)) => {
                Some(Activation::Real(maxpool2_backward(dims, &arg, &upstream.real()?)?))
            }
            (LayerSpec::Relu, Cache::Real(x)) => Some(Activation::Real(relu_backward(&x, &upstream.real()?)?)),
            (LayerSpec::Dropout { .. }, Cache::Mask(mask)) => {
                Some(Activation::Real(dropout_backward(mask.as_deref(), &upstream.real()?)?))
            }
            (LayerSpec::Flatten, Cache::Dims(dims)) => Some(Activation::Real(upstream.real()?.reshape(dims)?)),
            (LayerSpec::Grl, _) => Some(Activation::Real(grl_backward(&upstream.real()?, grl_lambda))),
            (&LayerSpec::ComplexPointwise { in_channels, out_channels, height, width }, Cache::Complex(x)) => {
                let f = interleaved_to_complex(&self.params[0].value, [out_channels, in_channels, height, width])?;
                let (df, dx) = complex_pointwise_backward(&x, &f, &upstream.complex()?)?;
                self.accumulate(&[complex_to_interleaved(&df)]);
                Some(Activation::Complex(dx))
            }
            (LayerSpec::ModRelu { .. }, Cache::Complex(x)) => {
                let (db, dx) = modrelu_backward(&x, &self.params[0].value, &upstream.complex()?)?;
                self.accumulate(&[db]);
                Some(Activation::Complex(dx))
            }
            (LayerSpec::SpectralPool { .. }, Cache::Dims(dims)) => {
                Some(Activation::Complex(spectral_pool_backward(dims, &upstream.complex()?)?))
            }
            (LayerSpec::ComplexFlatten, Cache::Dims(dims)) => {
                Some(Activation::Complex(complex_flatten_backward(dims, &upstream.real()?)?))
            }
            _ => return Err(missing()),
        };
        Ok(if self.input_grad { input } else { None })
    }

    fn accumulate(&mut self, grads: &[Vec<T>]) {
        for (p, g) in self.params.iter_mut().zip(grads) {
            for (a, &b) in p.grad.iter_mut().zip(g) {
                *a += b;
            }
        }
    }
}

/// A chain of layers applied in order.
#[derive(Clone, Debug, Default)]
pub struct Sequential<T> {
    pub layers: Vec<Layer<T>>,
}

impl<T: Real> Sequential<T> {
    pub fn new(layers: Vec<Layer<T>>) -> Self {
        Self { layers }
    }

    pub fn from_specs<R: Rng + ?Sized>(specs: &[LayerSpec], rng: &mut R) -> Result<Self> {
        Ok(Self::new(specs.iter().map(|s| Layer::new(s.clone(), rng)).collect::<Result<_>>()?))
    }

    pub fn specs(&self) -> Vec<LayerSpec> {
        self.layers.iter().map(|l| l.spec.clone()).collect()
    }

    pub fn forward<R: Rng>(&mut self, mut x: Activation<T>, ctx: &mut ForwardCtx<'_, R>) -> Result<Activation<T>> {
        for layer in &mut self.layers {
            x = layer.forward(x, ctx)?;
        }
        Ok(x)
    }

    pub fn backward(&mut self, mut g: Activation<T>, grl_lambda: f64) -> Result<Option<Activation<T>>> {
        for layer in self.layers.iter_mut().rev() {
            match layer.backward(g, grl_lambda)? {
                Some(next) => g = next,
                None => return Ok(None),
            }
        }
        Ok(Some(g))
    }

    pub fn params(&self) -> impl Iterator<Item = &Param<T>> {
        self.layers.iter().flat_map(|l| l.params.iter())
    }

    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut Param<T>> {
        self.layers.iter_mut().flat_map(|l| l.params.iter_mut())
    }

    pub fn param_count(&self) -> usize {
        self.params().map(|p| p.len()).sum()
    }

    pub fn zero_grad(&mut self) {
        self.params_mut().for_each(Param::zero_grad);
    }

    pub fn clear_cache(&mut self) {
        self.layers.iter_mut().for_each(Layer::clear_cache);
    }
}
