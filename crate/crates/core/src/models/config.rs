use serde::{Deserialize, Serialize};

use crate::artifacts::NUM_CLASSES;
use crate::error::{Error, Result};
use crate::nn::{AdamConfig, GrlConfig, LayerSpec};

pub const FEATURE_WIDTH: usize = 512;
pub const INPUT_SIZE: usize = 90;

/// Dense classifier heads shared by both models.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HeadConfig {
    pub dropout: f64,
    pub hidden: usize,
    pub domain_hidden: Vec<usize>,
}

impl Default for HeadConfig {
    fn default() -> Self {
        Self { dropout: 0.5, hidden: 128, domain_hidden: vec![256, 64] }
    }
}

impl HeadConfig {
    pub fn label_specs(&self) -> Vec<LayerSpec> {
        vec![
            LayerSpec::Dropout { p: self.dropout },
            LayerSpec::Dense { inputs: FEATURE_WIDTH, outputs: self.hidden },
            LayerSpec::Relu,
            LayerSpec::Dense { inputs: self.hidden, outputs: NUM_CLASSES },
        ]
    }

    pub fn domain_specs(&self) -> Vec<LayerSpec> {
        let mut specs = vec![LayerSpec::Grl];
        let mut width = FEATURE_WIDTH;
        for &h in &self.domain_hidden {
            specs.push(LayerSpec::Dense { inputs: width, outputs: h });
            specs.push(LayerSpec::Relu);
            width = h;
        }
        specs.push(LayerSpec::Dense { inputs: width, outputs: 2 });
        specs
    }

    fn validate(&self) -> Result<()> {
        if self.hidden == 0 || self.domain_hidden.contains(&0) {
            return Err(Error::Config("head widths must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!("head dropout {} outside [0, 1)", self.dropout)));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpatialModelConfig {
    pub input: (usize, usize),
    /// Output channels of the four convolutions; pooling follows the 2nd and 4th.
    pub conv_channels: [usize; 4],
    pub kernel: usize,
    pub conv_dropout: f64,
    pub feature_width: usize,
    pub head: HeadConfig,
}

impl Default for SpatialModelConfig {
    fn default() -> Self {
        Self {
            input: (INPUT_SIZE, INPUT_SIZE),
            conv_channels: [32, 32, 64, 64],
            kernel: 3,
            conv_dropout: 0.25,
            feature_width: FEATURE_WIDTH,
            head: HeadConfig::default(),
        }
    }
}

impl SpatialModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.feature_width != FEATURE_WIDTH {
            return Err(Error::Config(format!("feature width must be {FEATURE_WIDTH}, got {}", self.feature_width)));
        }
        if self.input.0 < 4 || self.input.1 < 4 {
            return Err(Error::Config(format!("input {:?} too small for two 2x2 poolings", self.input)));
        }
        if self.conv_channels.contains(&0) || self.kernel.is_multiple_of(2) {
            return Err(Error::Config("conv channels must be positive and the kernel odd".into()));
        }
        if !(0.0..1.0).contains(&self.conv_dropout) {
            return Err(Error::Config(format!("conv dropout {} outside [0, 1)", self.conv_dropout)));
        }
        self.head.validate()
    }

    pub fn feature_specs(&self) -> Vec<LayerSpec> {
        let c = self.conv_channels;
        let k = self.kernel;
        let conv = |i, o| LayerSpec::Conv2d { in_channels: i, out_channels: o, kernel: k };
        let (h, w) = (self.input.0 / 2 / 2, self.input.1 / 2 / 2);
        vec![
            conv(1, c[0]),
            LayerSpec::Relu,
            conv(c[0], c[1]),
            LayerSpec::Relu,
            LayerSpec::MaxPool2,
            LayerSpec::Dropout { p: self.conv_dropout },
            conv(c[1], c[2]),
            LayerSpec::Relu,
            conv(c[2], c[3]),
            LayerSpec::Relu,
            LayerSpec::MaxPool2,
            LayerSpec::Dropout { p: self.conv_dropout },
            LayerSpec::Flatten,
            LayerSpec::Dense { inputs: c[3] * h * w, outputs: self.feature_width },
            LayerSpec::Relu,
        ]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FrequencyModelConfig {
    pub input: (usize, usize),
    /// Output channels of the pointwise stages; the first takes one channel.
    pub stage_channels: Vec<usize>,
    /// Spectral crop size after the last stage.
    pub pool: (usize, usize),
    pub dropout: f64,
    pub feature_width: usize,
    pub head: HeadConfig,
}

impl Default for FrequencyModelConfig {
    fn default() -> Self {
        Self {
            input: (INPUT_SIZE, INPUT_SIZE),
            stage_channels: vec![3, 3],
            pool: (64, 64),
            dropout: 0.25,
            feature_width: FEATURE_WIDTH,
            head: HeadConfig::default(),
        }
    }
}

impl FrequencyModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.feature_width != FEATURE_WIDTH {
            return Err(Error::Config(format!("feature width must be {FEATURE_WIDTH}, got {}", self.feature_width)));
        }
        if self.stage_channels.len() != 2 || self.stage_channels.contains(&0) {
            return Err(Error::Config("the frequency model has exactly two pointwise stages".into()));
        }
        if self.pool.0 == 0 || self.pool.1 == 0 || self.pool.0 > self.input.0 || self.pool.1 > self.input.1 {
            return Err(Error::Config(format!("spectral pool {:?} must fit inside input {:?}", self.pool, self.input)));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!("dropout {} outside [0, 1)", self.dropout)));
        }
        self.head.validate()
    }

    pub fn feature_specs(&self) -> Vec<LayerSpec> {
        let (h, w) = self.input;
        let (c1, c2) = (self.stage_channels[0], self.stage_channels[1]);
        vec![
            LayerSpec::ComplexPointwise { in_channels: 1, out_channels: c1, height: h, width: w },
            LayerSpec::ModRelu { channels: c1 },
            LayerSpec::ComplexPointwise { in_channels: c1, out_channels: c2, height: h, width: w },
            LayerSpec::SpectralPool { height: self.pool.0, width: self.pool.1 },
            LayerSpec::ComplexFlatten,
            LayerSpec::Dropout { p: self.dropout },
            LayerSpec::Dense { inputs: 2 * c2 * self.pool.0 * self.pool.1, outputs: self.feature_width },
            LayerSpec::Relu,
        ]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelDomain {
    Spatial,
    Frequency,
}

impl std::str::FromStr for ModelDomain {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "spatial" => Ok(ModelDomain::Spatial),
            "frequency" | "fcnn" => Ok(ModelDomain::Frequency),
            _ => Err(Error::Config(format!("unknown model domain {s:?}"))),
        }
    }
}

impl std::fmt::Display for ModelDomain {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ModelDomain::Spatial => "spatial",
            ModelDomain::Frequency => "frequency",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "domain", rename_all = "lowercase", deny_unknown_fields)]
pub enum ModelConfig {
    Spatial(SpatialModelConfig),
    Frequency(FrequencyModelConfig),
}

impl ModelConfig {
    pub fn domain(&self) -> ModelDomain {
        match self {
            ModelConfig::Spatial(_) => ModelDomain::Spatial,
            ModelConfig::Frequency(_) => ModelDomain::Frequency,
        }
    }

    pub fn default_for(domain: ModelDomain) -> Self {
        match domain {
            ModelDomain::Spatial => ModelConfig::Spatial(SpatialModelConfig::default()),
            ModelDomain::Frequency => ModelConfig::Frequency(FrequencyModelConfig::default()),
        }
    }

    pub fn input(&self) -> (usize, usize) {
        match self {
            ModelConfig::Spatial(c) => c.input,
            ModelConfig::Frequency(c) => c.input,
        }
    }

    pub fn head(&self) -> &HeadConfig {
        match self {
            ModelConfig::Spatial(c) => &c.head,
            ModelConfig::Frequency(c) => &c.head,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ModelConfig::Spatial(c) => c.validate(),
            ModelConfig::Frequency(c) => c.validate(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrainMode {
    Supervised,
    Dann,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub adam: AdamConfig,
    /// Fraction of source images used for training.
    pub train_fraction: f64,
    pub seed: u64,
    pub mode: TrainMode,
    pub grl: GrlConfig,
    /// Per-epoch validation uses at most this many held-out samples.
    pub validation_cap: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 25,
            batch_size: 128,
            adam: AdamConfig::default(),
            train_fraction: 0.75,
            seed: 0,
            mode: TrainMode::Supervised,
            grl: GrlConfig::default(),
            validation_cap: 512,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::Config("epochs and batch size must be positive".into()));
        }
        if self.mode == TrainMode::Dann && self.batch_size < 2 {
            return Err(Error::Config("domain-adversarial batches need at least 2 samples".into()));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::Config(format!("train fraction must be in (0, 1), got {}", self.train_fraction)));
        }
        self.adam.validate()?;
        self.grl.validate()
    }
}
