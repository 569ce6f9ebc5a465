use std::io::Write;
use std::path::Path;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::{TrainConfig, TrainMode};
use super::model::{argmax, Inputs, Model};
use crate::artifacts::NUM_CLASSES;
use crate::error::{Error, Result};
use crate::metrics::{classification_metrics, confusion, roc_auc, MetricsReport};
use crate::nn::{adam_step, softmax_cross_entropy, Activation, AdamState, ComplexTensor4, ForwardCtx, Param, Tensor4};

/// Inputs with class labels and the source image each sample came from.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledSet {
    pub inputs: Inputs,
    pub labels: Vec<usize>,
    pub groups: Vec<usize>,
}

impl LabeledSet {
    pub fn new(inputs: Inputs, labels: Vec<usize>, groups: Vec<usize>) -> Result<Self> {
        if labels.len() != inputs.len() || groups.len() != inputs.len() {
            return Err(Error::Dataset(format!(
                "{} inputs, {} labels, {} groups",
                inputs.len(),
                labels.len(),
                groups.len()
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= NUM_CLASSES) {
            return Err(Error::Dataset(format!("label {bad} out of range")));
        }
        Ok(Self { inputs, labels, groups })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn subset(&self, idx: &[usize]) -> Result<Self> {
        Ok(Self {
            inputs: self.inputs.select(idx)?,
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
            groups: idx.iter().map(|&i| self.groups[i]).collect(),
        })
    }

    fn distinct_classes(&self) -> usize {
        let mut seen = [false; NUM_CLASSES];
        for &l in &self.labels {
            seen[l] = true;
        }
        seen.iter().filter(|&&s| s).count()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EpochRecord {
    pub epoch: usize,
    pub label_loss: f64,
    pub domain_loss: Option<f64>,
    /// Wall-clock seconds of the optimisation loop, excluding validation.
    pub seconds: f64,
    pub val_accuracy: Option<f64>,
    /// Held-out source-vs-target accuracy of the domain classifier.
    pub domain_accuracy: Option<f64>,
    pub grl_lambda: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub epochs: Vec<EpochRecord>,
}

impl TrainHistory {
    pub fn train_seconds(&self) -> f64 {
        self.epochs.iter().map(|e| e.seconds).sum()
    }

    pub fn write_jsonl<W: Write>(&self, mut out: W) -> Result<()> {
        for e in &self.epochs {
            serde_json::to_writer(&mut out, e).map_err(|e| Error::Dataset(e.to_string()))?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut buf = Vec::new();
        self.write_jsonl(&mut buf)?;
        std::fs::write(path, buf)?;
        Ok(())
    }
}

/// Held-out data watched once per epoch.
#[derive(Clone, Copy, Default)]
pub struct Monitor<'a> {
    pub labeled: Option<&'a LabeledSet>,
    /// Source and target inputs for the domain classifier accuracy.
    pub domains: Option<(&'a Inputs, &'a Inputs)>,
}

fn capped(n: usize, cap: usize, seed: u64) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    if n > cap {
        idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        idx.truncate(cap);
        idx.sort_unstable();
    }
    idx
}

fn all_params(model: &mut Model) -> Vec<&mut Param<f32>> {
    let Model { features, label_head, domain_head, .. } = model;
    let mut v: Vec<&mut Param<f32>> = features.params_mut().chain(label_head.params_mut()).collect();
    if let Some(d) = domain_head {
        v.extend(d.params_mut());
    }
    v
}

fn zero_grads(model: &mut Model) {
    for p in all_params(model) {
        p.zero_grad();
    }
}

/// Accuracy of the label head on the given samples.
pub fn accuracy(model: &mut Model, set: &LabeledSet, idx: &[usize]) -> Result<f64> {
    if idx.is_empty() {
        return Err(Error::Dataset("accuracy of an empty set".into()));
    }
    let mut correct = 0usize;
    for chunk in idx.chunks(64) {
        let (_, logits) = model.infer(&set.inputs, chunk)?;
        for (row, &i) in logits.data().chunks(NUM_CLASSES).zip(chunk) {
            let row: Vec<f64> = row.iter().map(|&v| v as f64).collect();
            correct += usize::from(argmax(&row) == set.labels[i]);
        }
    }
    Ok(correct as f64 / idx.len() as f64)
}

/// Source-vs-target accuracy of the domain head on balanced held-out sets.
pub fn domain_accuracy(model: &mut Model, source: &Inputs, target: &Inputs) -> Result<f64> {
    let ps = model.predict_domain(source)?;
    let pt = model.predict_domain(target)?;
    let correct = ps.iter().filter(|&&p| p < 0.5).count() + pt.iter().filter(|&&p| p >= 0.5).count();
    Ok(correct as f64 / (ps.len() + pt.len()) as f64)
}

/// Full metrics report, AUC included, on a labeled set.
pub fn evaluate(model: &mut Model, set: &LabeledSet) -> Result<MetricsReport> {
    let probs = model.predict_proba(&set.inputs)?;
    let preds: Vec<usize> = probs.iter().map(|p| argmax(p)).collect();
    let mut report = classification_metrics(&confusion(&preds, &set.labels, NUM_CLASSES)?)?;
    let scores: Vec<Vec<f64>> = probs.iter().map(|p| p.to_vec()).collect();
    report.auc = Some(roc_auc(&scores, &set.labels, NUM_CLASSES)?);
    Ok(report)
}

fn monitor_epoch(model: &mut Model, monitor: &Monitor<'_>, val_idx: &[usize], rec: &mut EpochRecord) -> Result<()> {
    if let Some(set) = monitor.labeled {
        if !val_idx.is_empty() {
            rec.val_accuracy = Some(accuracy(model, set, val_idx)?);
        }
    }
    if let (Some((s, t)), true) = (monitor.domains, model.domain_head.is_some()) {
        rec.domain_accuracy = Some(domain_accuracy(model, s, t)?);
    }
    Ok(())
}

/// Mini-batch training of features and label head with cross-entropy and Adam.
pub fn train_supervised(
    model: &mut Model,
    train: &LabeledSet,
    monitor: Monitor<'_>,
    cfg: &TrainConfig,
) -> Result<TrainHistory> {
    cfg.validate()?;
    if train.distinct_classes() < 2 {
        return Err(Error::Dataset("training needs at least two classes".into()));
    }
    let mut adam = AdamState::new(cfg.adam, all_params(model).into_iter().map(|p| &*p))?;
    let mut order_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut drop_rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(1));
    let val_idx = monitor.labeled.map(|s| capped(s.len(), cfg.validation_cap, cfg.seed)).unwrap_or_default();
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut history = TrainHistory::default();
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut order_rng);
        let start = Instant::now();
        let mut loss_sum = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            zero_grads(model);
            let mut ctx = ForwardCtx { training: true, rng: &mut drop_rng };
            let feats = model.features.forward(train.inputs.batch(batch)?, &mut ctx)?;
            let logits = model.label_head.forward(feats, &mut ctx)?.real()?;
            let labels: Vec<usize> = batch.iter().map(|&i| train.labels[i]).collect();
            let (loss, grad) = softmax_cross_entropy(&logits, &labels)?;
            loss_sum += loss as f64 * batch.len() as f64;
            let g = model.label_head.backward(Activation::Real(grad), 0.0)?.expect("feature gradient");
            model.features.backward(g, 0.0)?;
            adam_step(all_params(model), &mut adam)?;
        }
        let seconds = start.elapsed().as_secs_f64();
        model.features.clear_cache();
        model.label_head.clear_cache();
        let mut rec = EpochRecord {
            epoch: epoch + 1,
            label_loss: loss_sum / train.len() as f64,
            domain_loss: None,
            seconds,
            val_accuracy: None,
            domain_accuracy: None,
            grl_lambda: None,
        };
        if !rec.label_loss.is_finite() {
            return Err(Error::Dataset(format!("training diverged at epoch {}", epoch + 1)));
        }
        monitor_epoch(model, &monitor, &val_idx, &mut rec)?;
        history.epochs.push(rec);
    }
    Ok(history)
}

fn stack_batches(a: Activation<f32>, b: Activation<f32>) -> Result<Activation<f32>> {
    match (a, b) {
        (Activation::Real(x), Activation::Real(y)) => {
            let [n, c, h, w] = x.dims();
            let mut data = x.into_vec();
            data.extend_from_slice(y.data());
            Ok(Activation::Real(Tensor4::new([n + y.batch(), c, h, w], data)?))
        }
        (Activation::Complex(x), Activation::Complex(y)) => {
            let [n, c, h, w] = x.dims();
            let mut data = x.into_vec();
            data.extend_from_slice(y.data());
            Ok(Activation::Complex(ComplexTensor4::new([n + y.batch(), c, h, w], data)?))
        }
        _ => Err(Error::shape("source and target inputs differ in kind")),
    }
}

/// Domain-adversarial training. Each step takes half a batch of labeled
/// source samples and half of unlabeled target samples; the label loss is
/// averaged over the source half, the domain loss over the whole batch, and
/// the domain gradient reaches the features through gradient reversal.
pub fn train_dann(
    model: &mut Model,
    source: &LabeledSet,
    target: &Inputs,
    monitor: Monitor<'_>,
    cfg: &TrainConfig,
) -> Result<TrainHistory> {
    cfg.validate()?;
    if target.is_empty() {
        return Err(Error::Dataset("domain-adversarial training needs target samples".into()));
    }
    if model.domain_head.is_none() {
        return Err(Error::Config("domain-adversarial training needs a model with a domain head".into()));
    }
    if source.distinct_classes() < 2 {
        return Err(Error::Dataset("training needs at least two classes".into()));
    }
    let half = (cfg.batch_size / 2).max(1);
    let steps_per_epoch = source.len().div_ceil(half);
    let total_steps = (steps_per_epoch * cfg.epochs) as f64;
    let mut adam = AdamState::new(cfg.adam, all_params(model).into_iter().map(|p| &*p))?;
    let mut order_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut drop_rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(1));
    let val_idx = monitor.labeled.map(|s| capped(s.len(), cfg.validation_cap, cfg.seed)).unwrap_or_default();
    let mut src_order: Vec<usize> = (0..source.len()).collect();
    let mut tgt_order: Vec<usize> = (0..target.len()).collect();
    tgt_order.shuffle(&mut order_rng);
    let mut tgt_pos = 0usize;
    let mut step = 0usize;
    let mut history = TrainHistory::default();
    for epoch in 0..cfg.epochs {
        src_order.shuffle(&mut order_rng);
        let start = Instant::now();
        let (mut label_sum, mut domain_sum, mut lambda) = (0.0, 0.0, 0.0);
        for src in src_order.chunks(half) {
            let mut tgt = Vec::with_capacity(src.len());
            while tgt.len() < src.len() {
                if tgt_pos == tgt_order.len() {
                    tgt_order.shuffle(&mut order_rng);
                    tgt_pos = 0;
                }
                tgt.push(tgt_order[tgt_pos]);
                tgt_pos += 1;
            }
            lambda = cfg.grl.lambda(step as f64 / total_steps);
            step += 1;
            zero_grads(model);
            let n_src = src.len();
            let x = stack_batches(source.inputs.batch(src)?, target.batch(&tgt)?)?;
            let mut ctx = ForwardCtx { training: true, rng: &mut drop_rng };
            let feats = model.features.forward(x, &mut ctx)?.real()?;
            let src_feats = Tensor4::new([n_src, feats.item_len(), 1, 1], feats.data()[..n_src * feats.item_len()].to_vec())?;
            let logits = model.label_head.forward(Activation::Real(src_feats), &mut ctx)?.real()?;
            let labels: Vec<usize> = src.iter().map(|&i| source.labels[i]).collect();
            let (label_loss, label_grad) = softmax_cross_entropy(&logits, &labels)?;
            let domain_head = model.domain_head.as_mut().expect("checked above");
            let dlogits = domain_head.forward(Activation::Real(feats), &mut ctx)?.real()?;
            let domains: Vec<usize> = (0..2 * n_src).map(|i| usize::from(i >= n_src)).collect();
            let (domain_loss, domain_grad) = softmax_cross_entropy(&dlogits, &domains)?;
            let mut g = domain_head.backward(Activation::Real(domain_grad), lambda)?.expect("feature gradient").real()?;
            let gl = model.label_head.backward(Activation::Real(label_grad), 0.0)?.expect("feature gradient").real()?;
            for (a, &b) in g.data_mut().iter_mut().zip(gl.data()) {
                *a += b;
            }
            model.features.backward(Activation::Real(g), 0.0)?;
            adam_step(all_params(model), &mut adam)?;
            label_sum += label_loss as f64 * n_src as f64;
            domain_sum += domain_loss as f64 * n_src as f64;
        }
        let seconds = start.elapsed().as_secs_f64();
        model.features.clear_cache();
        model.label_head.clear_cache();
        if let Some(d) = model.domain_head.as_mut() {
            d.clear_cache();
        }
        let mut rec = EpochRecord {
            epoch: epoch + 1,
            label_loss: label_sum / source.len() as f64,
            domain_loss: Some(domain_sum / source.len() as f64),
            seconds,
            val_accuracy: None,
            domain_accuracy: None,
            grl_lambda: Some(lambda),
        };
        if !(rec.label_loss.is_finite() && rec.domain_loss.unwrap().is_finite()) {
            return Err(Error::Dataset(format!("training diverged at epoch {}", epoch + 1)));
        }
        monitor_epoch(model, &monitor, &val_idx, &mut rec)?;
        history.epochs.push(rec);
    }
    Ok(history)
}

/// Dispatches on `cfg.mode`; `target` is required for domain-adversarial runs.
pub fn train(
    model: &mut Model,
    train: &LabeledSet,
    target: Option<&Inputs>,
    monitor: Monitor<'_>,
    cfg: &TrainConfig,
) -> Result<TrainHistory> {
    match cfg.mode {
        TrainMode::Supervised => train_supervised(model, train, monitor, cfg),
        TrainMode::Dann => {
            let t = target.ok_or_else(|| Error::Config("domain-adversarial training needs target data".into()))?;
            train_dann(model, train, t, monitor, cfg)
        }
    }
}
