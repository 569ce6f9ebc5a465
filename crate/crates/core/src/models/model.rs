use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use num_complex::Complex;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::config::{ModelConfig, ModelDomain};
use crate::artifacts::NUM_CLASSES;
use crate::data_io::{normalize_minmax, resize_bilinear};
use crate::error::{Error, Result};
use crate::nn::{
    read_checkpoint, softmax, write_checkpoint, Activation, ComplexTensor4, ForwardCtx, Sequential, Tensor4,
};
use crate::numerics::{dft2, ComplexGrid2D, RealGrid2D};

/// Model inputs for a set of samples, already in the model's input domain.
#[derive(Clone, Debug, PartialEq)]
pub enum Inputs {
    /// Images, `height * width` values each.
    Images { dims: (usize, usize), data: Vec<f32> },
    /// Unnormalised k-space, `height * width` values each, DC at index 0.
    Kspace { dims: (usize, usize), data: Vec<Complex<f32>> },
}

impl Inputs {
    pub fn len(&self) -> usize {
        match self {
            Inputs::Images { dims, data } => data.len() / (dims.0 * dims.1),
            Inputs::Kspace { dims, data } => data.len() / (dims.0 * dims.1),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dims(&self) -> (usize, usize) {
        match self {
            Inputs::Images { dims, .. } | Inputs::Kspace { dims, .. } => *dims,
        }
    }

    /// Gathers samples `idx` into one batch activation.
    pub fn batch(&self, idx: &[usize]) -> Result<Activation<f32>> {
        let (h, w) = self.dims();
        let m = h * w;
        let n = self.len();
        if let Some(&bad) = idx.iter().find(|&&i| i >= n) {
            return Err(Error::shape(format!("sample index {bad} out of range for {n} inputs")));
        }
        Ok(match self {
            Inputs::Images { data, .. } => {
                let mut out = Vec::with_capacity(idx.len() * m);
                for &i in idx {
                    out.extend_from_slice(&data[i * m..(i + 1) * m]);
                }
                Activation::Real(Tensor4::new([idx.len(), 1, h, w], out)?)
            }
            Inputs::Kspace { data, .. } => {
                let mut out = Vec::with_capacity(idx.len() * m);
                for &i in idx {
                    out.extend_from_slice(&data[i * m..(i + 1) * m]);
                }
                Activation::Complex(ComplexTensor4::new([idx.len(), 1, h, w], out)?)
            }
        })
    }

    pub fn from_kspace(ks: &[ComplexGrid2D]) -> Result<Self> {
        let dims = ks.first().map(|k| k.dims()).ok_or_else(|| Error::Dataset("no inputs".into()))?;
        let mut data = Vec::with_capacity(ks.len() * dims.0 * dims.1);
        for k in ks {
            if k.dims() != dims {
                return Err(Error::shape(format!("k-space {:?} differs from {:?}", k.dims(), dims)));
            }
            data.extend(k.data().iter().map(|z| Complex::new(z.re as f32, z.im as f32)));
        }
        Ok(Inputs::Kspace { dims, data })
    }

    /// Concatenates two input sets of the same kind and size.
    pub fn concat(&self, other: &Inputs) -> Result<Inputs> {
        match (self, other) {
            (Inputs::Images { dims: a, data: x }, Inputs::Images { dims: b, data: y }) if a == b => {
                Ok(Inputs::Images { dims: *a, data: [x.as_slice(), y.as_slice()].concat() })
            }
            (Inputs::Kspace { dims: a, data: x }, Inputs::Kspace { dims: b, data: y }) if a == b => {
                Ok(Inputs::Kspace { dims: *a, data: [x.as_slice(), y.as_slice()].concat() })
            }
            _ => Err(Error::shape("cannot concatenate inputs of different kinds or sizes")),
        }
    }

    pub fn select(&self, idx: &[usize]) -> Result<Inputs> {
        Ok(match self.batch(idx)? {
            Activation::Real(t) => Inputs::Images { dims: self.dims(), data: t.into_vec() },
            Activation::Complex(t) => Inputs::Kspace { dims: self.dims(), data: t.into_vec() },
        })
    }
}

/// Resizes to the model input and min-max normalises.
pub fn preprocess(img: &RealGrid2D, size: (usize, usize)) -> Result<RealGrid2D> {
    let resized = if img.dims() == size { img.clone() } else { resize_bilinear(img, size.0, size.1)? };
    Ok(normalize_minmax(&resized))
}

#[derive(Clone, Debug)]
pub struct Model {
    pub config: ModelConfig,
    pub features: Sequential<f32>,
    pub label_head: Sequential<f32>,
    pub domain_head: Option<Sequential<f32>>,
}

/// Spatial model: four convolutions with pooling and dropout after each
/// pair, a 512-wide feature layer, the label head and optionally the
/// domain head behind gradient reversal.
pub fn build_spatial_model(cfg: &super::SpatialModelConfig, with_domain_head: bool, seed: u64) -> Result<Model> {
    Model::new(ModelConfig::Spatial(cfg.clone()), with_domain_head, seed)
}

/// Frequency model: two complex pointwise stages with modReLU between them,
/// spectral pooling, dropout, a 512-wide feature layer and the same heads.
pub fn build_frequency_model(cfg: &super::FrequencyModelConfig, with_domain_head: bool, seed: u64) -> Result<Model> {
    Model::new(ModelConfig::Frequency(cfg.clone()), with_domain_head, seed)
}

impl Model {
    pub fn new(config: ModelConfig, with_domain_head: bool, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let specs = match &config {
            ModelConfig::Spatial(c) => c.feature_specs(),
            ModelConfig::Frequency(c) => c.feature_specs(),
        };
        let mut features = Sequential::from_specs(&specs, &mut rng)?;
        features.layers[0].input_grad = false;
        let label_head = Sequential::from_specs(&config.head().label_specs(), &mut rng)?;
        let domain_head = if with_domain_head {
            Some(Sequential::from_specs(&config.head().domain_specs(), &mut rng)?)
        } else {
            None
        };
        Ok(Self { config, features, label_head, domain_head })
    }

    pub fn domain(&self) -> ModelDomain {
        self.config.domain()
    }

    pub fn param_count(&self) -> usize {
        self.features.param_count()
            + self.label_head.param_count()
            + self.domain_head.as_ref().map_or(0, |d| d.param_count())
    }

    /// Converts preprocessed images into this model's input domain
    /// (k-space via `dft2` for the frequency model).
    pub fn ingest_images(&self, images: &[RealGrid2D]) -> Result<Inputs> {
        let dims = self.config.input();
        if let Some(bad) = images.iter().find(|i| i.dims() != dims) {
            return Err(Error::shape(format!("model expects {dims:?} images, got {:?}", bad.dims())));
        }
        match self.domain() {
            ModelDomain::Spatial => {
                let data = images.iter().flat_map(|i| i.data().iter().map(|&v| v as f32)).collect();
                Ok(Inputs::Images { dims, data })
            }
            ModelDomain::Frequency => {
                let ks: Vec<ComplexGrid2D> = images.par_iter().map(dft2).collect::<Result<_>>()?;
                Inputs::from_kspace(&ks)
            }
        }
    }

    /// Raw k-space entry point of the frequency model.
    pub fn ingest_kspace(&self, ks: &[ComplexGrid2D]) -> Result<Inputs> {
        if self.domain() != ModelDomain::Frequency {
            return Err(Error::Config("only the frequency model accepts k-space input".into()));
        }
        let dims = self.config.input();
        if let Some(bad) = ks.iter().find(|k| k.dims() != dims) {
            return Err(Error::shape(format!("model expects {dims:?} k-space, got {:?}", bad.dims())));
        }
        Inputs::from_kspace(ks)
    }

    fn check_inputs(&self, inputs: &Inputs) -> Result<()> {
        let kind_ok = matches!(
            (self.domain(), inputs),
            (ModelDomain::Spatial, Inputs::Images { .. }) | (ModelDomain::Frequency, Inputs::Kspace { .. })
        );
        if !kind_ok || inputs.dims() != self.config.input() {
            return Err(Error::shape(format!("inputs do not match the {} model", self.domain())));
        }
        Ok(())
    }

    /// Inference-mode 512-wide features and label logits for `idx`.
    pub fn infer(&mut self, inputs: &Inputs, idx: &[usize]) -> Result<(Tensor4<f32>, Tensor4<f32>)> {
        self.check_inputs(inputs)?;
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut ctx = ForwardCtx { training: false, rng: &mut rng };
        let feats = self.features.forward(inputs.batch(idx)?, &mut ctx)?.real()?;
        let logits = self.label_head.forward(Activation::Real(feats.clone()), &mut ctx)?.real()?;
        Ok((feats, logits))
    }

    /// Class probabilities for every sample, evaluated in chunks.
    pub fn predict_proba(&mut self, inputs: &Inputs) -> Result<Vec<[f64; NUM_CLASSES]>> {
        let mut out = Vec::with_capacity(inputs.len());
        let all: Vec<usize> = (0..inputs.len()).collect();
        for chunk in all.chunks(64) {
            let (_, logits) = self.infer(inputs, chunk)?;
            let p = softmax(&logits.cast::<f64>());
            for row in p.data().chunks(NUM_CLASSES) {
                let mut r = [0.0; NUM_CLASSES];
                r.copy_from_slice(row);
                out.push(r);
            }
        }
        Ok(out)
    }

    /// Domain classifier probability of "target" for every sample.
    pub fn predict_domain(&mut self, inputs: &Inputs) -> Result<Vec<f64>> {
        self.check_inputs(inputs)?;
        let mut head = self.domain_head.take().ok_or_else(|| Error::Config("model has no domain head".into()))?;
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut out = Vec::with_capacity(inputs.len());
        let all: Vec<usize> = (0..inputs.len()).collect();
        let result = (|| {
            for chunk in all.chunks(64) {
                let mut ctx = ForwardCtx { training: false, rng: &mut rng };
                let feats = self.features.forward(inputs.batch(chunk)?, &mut ctx)?;
                let p = softmax(&head.forward(feats, &mut ctx)?.real()?.cast::<f64>());
                out.extend(p.data().chunks(2).map(|r| r[1]));
            }
            Ok(())
        })();
        self.domain_head = Some(head);
        result.map(|_| out)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let cfg = serde_json::to_value(&self.config).map_err(|e| Error::Checkpoint(e.to_string()))?;
        let mut sections: Vec<(&str, &Sequential<f32>)> =
            vec![("features", &self.features), ("label_head", &self.label_head)];
        if let Some(d) = &self.domain_head {
            sections.push(("domain_head", d));
        }
        let tmp = path.with_extension("tmp~");
        write_checkpoint(BufWriter::new(File::create(&tmp)?), &cfg, &sections)?;
        std::fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let (header, mut sections) = read_checkpoint::<f32, _>(BufReader::new(File::open(path)?))?;
        let config: ModelConfig =
            serde_json::from_value(header.config).map_err(|e| Error::Checkpoint(format!("model config: {e}")))?;
        let names: Vec<&str> = header.sections.iter().map(|s| s.name.as_str()).collect();
        let with_domain = match names.as_slice() {
            ["features", "label_head"] => false,
            ["features", "label_head", "domain_head"] => true,
            other => return Err(Error::Checkpoint(format!("unexpected sections {other:?}"))),
        };
        // the layer manifest must be exactly what the config builds
        let fresh = Model::new(config.clone(), with_domain, 0)?;
        let domain_head = if with_domain { sections.pop() } else { None };
        let label_head = sections.pop().expect("two sections");
        let mut features = sections.pop().expect("two sections");
        let same = fresh.features.specs() == features.specs()
            && fresh.label_head.specs() == label_head.specs()
            && fresh.domain_head.as_ref().map(|d| d.specs()) == domain_head.as_ref().map(|d| d.specs());
        if !same {
            return Err(Error::Checkpoint("layer manifest does not match the stored model config".into()));
        }
        features.layers[0].input_grad = false;
        Ok(Self { config, features, label_head, domain_head })
    }
}

pub fn argmax(p: &[f64]) -> usize {
    p.iter().enumerate().fold(0, |best, (i, &v)| if v > p[best] { i } else { best })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{FrequencyModelConfig, HeadConfig, SpatialModelConfig};

    fn small_spatial() -> SpatialModelConfig {
        SpatialModelConfig { input: (16, 16), conv_channels: [2, 2, 3, 3], ..Default::default() }
    }

    fn small_frequency() -> FrequencyModelConfig {
        FrequencyModelConfig { input: (12, 12), pool: (8, 8), ..Default::default() }
    }

    #[test]
    fn default_spatial_shapes() {
        let mut m = build_spatial_model(&SpatialModelConfig::default(), true, 1).unwrap();
        let img = RealGrid2D::from_fn(90, 90, |y, x| ((y * x) % 13) as f64 / 13.0);
        let inputs = m.ingest_images(&[img]).unwrap();
        let (f, logits) = m.infer(&inputs, &[0]).unwrap();
        assert_eq!(f.item_len(), 512);
        assert_eq!(logits.item_len(), 5);
        assert!(logits.is_finite());
    }

    #[test]
    fn default_frequency_shapes() {
        let mut m = build_frequency_model(&FrequencyModelConfig::default(), false, 1).unwrap();
        let img = RealGrid2D::from_fn(90, 90, |y, x| ((y + x) % 7) as f64 / 7.0);
        let inputs = m.ingest_images(&[img]).unwrap();
        let (f, logits) = m.infer(&inputs, &[0]).unwrap();
        assert_eq!(f.item_len(), 512);
        assert_eq!(logits.item_len(), 5);
    }

    #[test]
    fn image_and_kspace_paths_agree() {
        let mut m = build_frequency_model(&small_frequency(), false, 2).unwrap();
        let img = RealGrid2D::from_fn(12, 12, |y, x| ((3 * y + x) % 5) as f64 / 5.0);
        let a = m.ingest_images(std::slice::from_ref(&img)).unwrap();
        let b = m.ingest_kspace(&[dft2(&img).unwrap()]).unwrap();
        let la = m.infer(&a, &[0]).unwrap().1;
        let lb = m.infer(&b, &[0]).unwrap().1;
        for (x, y) in la.data().iter().zip(lb.data()) {
            assert!((x - y).abs() < 1e-6);
        }
    }

    #[test]
    fn zero_input_gives_bias_only_logits() {
        let mut m = build_frequency_model(&small_frequency(), false, 3).unwrap();
        let zeros = m.ingest_images(&[RealGrid2D::zeros(12, 12)]).unwrap();
        let (_, logits) = m.infer(&zeros, &[0]).unwrap();
        // with zero input the features are relu(dense bias); evaluate the heads on that directly
        let feat_bias = m.features.layers[6].params()[1].value.iter().map(|&b| b.max(0.0)).collect::<Vec<f32>>();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut ctx = ForwardCtx { training: false, rng: &mut rng };
        let expect = m
            .label_head
            .forward(Activation::Real(Tensor4::matrix(1, 512, feat_bias).unwrap()), &mut ctx)
            .unwrap()
            .real()
            .unwrap();
        assert_eq!(logits, expect);
    }

    #[test]
    fn probabilities_sum_to_one_and_repeat() {
        let mut m = build_spatial_model(&small_spatial(), false, 4).unwrap();
        let imgs: Vec<_> = (0..3).map(|s| RealGrid2D::from_fn(16, 16, |y, x| ((y * s + x) % 9) as f64 / 9.0)).collect();
        let inputs = m.ingest_images(&imgs).unwrap();
        let p = m.predict_proba(&inputs).unwrap();
        for row in &p {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-6);
        }
        assert_eq!(p, m.predict_proba(&inputs).unwrap());
    }

    #[test]
    fn checkpoint_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.ckpt");
        let cfg = SpatialModelConfig { head: HeadConfig { hidden: 16, ..Default::default() }, ..small_spatial() };
        let m = build_spatial_model(&cfg, true, 5).unwrap();
        m.save(&path).unwrap();
        let back = Model::load(&path).unwrap();
        assert_eq!(back.config, m.config);
        for (a, b) in m.features.params().zip(back.features.params()) {
            assert_eq!(a.value, b.value);
        }
        let bytes = std::fs::read(&path).unwrap();
        back.save(&path).unwrap();
        assert_eq!(bytes, std::fs::read(&path).unwrap());
    }

    #[test]
    fn wrong_input_kind_rejected() {
        let m = build_spatial_model(&small_spatial(), false, 6).unwrap();
        assert!(m.ingest_kspace(&[ComplexGrid2D::zeros(16, 16)]).is_err());
        assert!(m.ingest_images(&[RealGrid2D::zeros(15, 16)]).is_err());
    }
}
