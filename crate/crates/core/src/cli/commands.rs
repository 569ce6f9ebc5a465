use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{RunConfig, RunMode};
use crate::artifacts::{
    apply_severity, build_dataset, sample_severity, DatasetConfig, ArtifactClass, ArtifactParams, CineSequence, LabeledSample, SeverityRanges,
    SeverityRecord, SourceRef, NUM_CLASSES,
};
use crate::data_io::{
    is_kspace_file, load_image, load_kspace, read_manifest, save_image, write_manifest, ManifestRecord, Split,
};
use crate::error::{Error, Result};
use crate::metrics::{format_table, mean_std, MetricsReport, SummaryRow};
use crate::models::{
    argmax, evaluate, preprocess, split_by_group, train, LabeledSet, Model, ModelDomain, Monitor, TrainHistory,
};
use crate::pipeline::{clean_sequences, labeled_set};

pub const CONFIG_FILE: &str = "config.toml";
pub const MANIFEST_FILE: &str = "manifest.jsonl";
pub const CHECKPOINT_FILE: &str = "model.ckpt";
pub const HISTORY_FILE: &str = "history.jsonl";
pub const REPORT_FILE: &str = "report.json";
pub const TABLE_FILE: &str = "report.txt";
pub const IMAGE_DIR: &str = "images";

fn json<T: Serialize>(v: &T) -> Result<String> {
    serde_json::to_string_pretty(v).map_err(|e| Error::Dataset(e.to_string()))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    crate::data_io::write_atomic(path, text.as_bytes())
}

fn persist_config(out: &Path, cfg: &RunConfig) -> Result<()> {
    std::fs::create_dir_all(out)?;
    write_text(&out.join(CONFIG_FILE), &cfg.to_toml()?)
}

// ---------------------------------------------------------------- corrupt

pub struct CorruptArgs<'a> {
    /// One path per frame; frame `frame` is corrupted.
    pub inputs: &'a [PathBuf],
    pub frame: usize,
    pub class: ArtifactClass,
    pub params: Option<ArtifactParams>,
    pub seed: u64,
    pub out: &'a Path,
}

/// Corrupts one frame; returns the severity record that was applied.
pub fn cmd_corrupt(args: &CorruptArgs<'_>) -> Result<SeverityRecord> {
    if args.inputs.is_empty() {
        return Err(Error::Config("corrupt needs at least one input".into()));
    }
    if args.frame >= args.inputs.len() {
        return Err(Error::param(format!("frame {} out of range for {} input(s)", args.frame, args.inputs.len())));
    }
    if args.class == ArtifactClass::Clean {
        if args.params.is_some() {
            return Err(Error::param("class clean takes no parameters"));
        }
        load_image(&args.inputs[args.frame])?;
        std::fs::copy(&args.inputs[args.frame], args.out)?;
        return Ok(SeverityRecord::clean(args.seed));
    }
    let frames = args.inputs.iter().map(|p| load_image(p)).collect::<Result<Vec<_>>>()?;
    let seq = CineSequence::new(frames)?;
    let record = match args.params {
        Some(p) => SeverityRecord { class_id: args.class, params: Some(p), rng_seed: args.seed },
        None => {
            let (h, w) = seq.dims();
            sample_severity(args.class, args.seed, &SeverityRanges::for_dims(h, w))
        }
    };
    record.validate()?;
    let img = apply_severity(&seq, args.frame, &record)?;
    save_image(args.out, &img)?;
    Ok(record)
}

// ---------------------------------------------------------------- synth

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthSummary {
    pub samples: usize,
    pub class_counts: [usize; NUM_CLASSES],
    pub manifest: PathBuf,
}

/// Clean sequences from a directory: each sub-directory is one cine
/// sequence (frames in file-name order), each loose file a single frame.
pub fn load_corpus_dir(dir: &Path) -> Result<(Vec<CineSequence>, Vec<String>)> {
    let mut entries: Vec<PathBuf> = std::fs::read_dir(dir)?.map(|e| e.map(|e| e.path())).collect::<std::io::Result<_>>()?;
    entries.sort();
    let mut seqs = Vec::new();
    let mut names = Vec::new();
    for p in entries {
        let name = p.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        if name.starts_with('.') {
            continue;
        }
        if p.is_dir() {
            let mut frames: Vec<PathBuf> =
                std::fs::read_dir(&p)?.map(|e| e.map(|e| e.path())).collect::<std::io::Result<_>>()?;
            frames.retain(|f| f.is_file() && !f.file_name().is_some_and(|n| n.to_string_lossy().starts_with('.')));
            frames.sort();
            if frames.is_empty() {
                continue;
            }
            let imgs = frames.iter().map(|f| load_image(f)).collect::<Result<Vec<_>>>()?;
            seqs.push(CineSequence::new(imgs)?);
        } else {
            seqs.push(CineSequence::single(load_image(&p)?));
        }
        names.push(name);
    }
    if seqs.is_empty() {
        return Err(Error::Dataset(format!("no images found in {}", dir.display())));
    }
    Ok((seqs, names))
}

/// Writes the labeled corpus (images plus manifest) under `out`.
pub fn cmd_synth(cfg: &RunConfig, corpus_dir: Option<&Path>, out: &Path) -> Result<SynthSummary> {
    persist_config(out, cfg)?;
    let (seqs, names) = match corpus_dir {
        Some(d) => load_corpus_dir(d)?,
        None => {
            let seqs = clean_sequences(&cfg.corpus, cfg.seed)?;
            let names = (0..seqs.len()).map(|i| format!("phantom:{i}")).collect();
            (seqs, names)
        }
    };
    let ds = DatasetConfig { ranges: None, domain: Some(u8::from(cfg.corpus.shifted)) };
    let samples = build_dataset(&seqs, &ds, cfg.seed.wrapping_add(1 << 32))?;
    let img_dir = out.join(IMAGE_DIR);
    std::fs::create_dir_all(&img_dir)?;
    let records: Vec<ManifestRecord> = samples
        .par_iter()
        .enumerate()
        .map(|(i, s)| {
            let rel = format!("{IMAGE_DIR}/{i:06}.kqf");
            save_image(&out.join(&rel), &s.image)?;
            Ok(ManifestRecord {
                id: i as u64,
                image: rel,
                source: names[s.source.sequence].clone(),
                sequence: s.source.sequence,
                frame: s.source.frame,
                class_id: s.class(),
                params: s.severity.params,
                rng_seed: s.severity.rng_seed,
                domain: s.domain,
                split: Split::Unassigned,
            })
        })
        .collect::<Result<_>>()?;
    let manifest = out.join(MANIFEST_FILE);
    write_manifest(&manifest, &records)?;
    // recount from what was written
    let mut class_counts = [0; NUM_CLASSES];
    for r in read_manifest(&manifest)? {
        class_counts[r.class_id.id() as usize] += 1;
    }
    Ok(SynthSummary { samples: records.len(), class_counts, manifest })
}

pub fn format_histogram(counts: &[usize; NUM_CLASSES]) -> String {
    let mut s = String::new();
    for c in ArtifactClass::ALL {
        let _ = writeln!(s, "{:<12} {}", c.name(), counts[c.id() as usize]);
    }
    s
}

// ---------------------------------------------------------------- manifests

/// Manifest records with their images; relative image paths resolve
/// against the manifest's directory.
pub fn load_manifest_samples(path: &Path) -> Result<(Vec<ManifestRecord>, Vec<LabeledSample>)> {
    let records = read_manifest(path)?;
    if records.is_empty() {
        return Err(Error::Dataset(format!("{} has no records", path.display())));
    }
    let base = path.parent().unwrap_or(Path::new("."));
    let samples = records
        .par_iter()
        .map(|r| {
            Ok(LabeledSample {
                image: load_image(&base.join(&r.image))?,
                severity: r.severity(),
                source: SourceRef { sequence: r.sequence, frame: r.frame },
                domain: r.domain,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((records, samples))
}

fn absolute_images(records: &mut [ManifestRecord], manifest: &Path) -> Result<()> {
    let base = std::fs::canonicalize(manifest.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new(".")))?;
    for r in records {
        if Path::new(&r.image).is_relative() {
            r.image = base.join(&r.image).to_string_lossy().into_owned();
        }
    }
    Ok(())
}

// ---------------------------------------------------------------- train

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub domain: ModelDomain,
    pub mode: RunMode,
    pub train_samples: usize,
    pub test_samples: usize,
    pub train_sources: usize,
    pub test_sources: usize,
    pub param_count: usize,
    pub ingest_seconds: f64,
    pub train_seconds: f64,
    pub test: MetricsReport,
    /// Metrics on the target corpus when its labels are available.
    pub target: Option<MetricsReport>,
}

pub struct TrainOutcome {
    pub model: Model,
    pub history: TrainHistory,
    pub report: TrainReport,
}

fn distinct(groups: &[usize], idx: &[usize]) -> usize {
    let mut g: Vec<usize> = idx.iter().map(|&i| groups[i]).collect();
    g.sort_unstable();
    g.dedup();
    g.len()
}

/// Splits by source sequence, trains and evaluates on the held-out part.
/// Writes config, split manifest snapshot, checkpoint, history and reports.
pub fn cmd_train(cfg: &RunConfig, manifest: &Path, target: Option<&Path>, out: &Path) -> Result<TrainOutcome> {
    if cfg.mode == RunMode::Dann && target.is_none() {
        return Err(Error::Config("mode dann needs --target <manifest> with the unlabeled target corpus".into()));
    }
    if cfg.mode != RunMode::Dann && target.is_some() {
        return Err(Error::Config("--target is only used with --mode dann".into()));
    }
    persist_config(out, cfg)?;
    let (mut records, samples) = load_manifest_samples(manifest)?;
    let mut model = Model::new(cfg.model_config(cfg.domain), cfg.mode == RunMode::Dann, cfg.seed)?;
    let t = Instant::now();
    let set = labeled_set(&model, &samples)?;
    let target_set = match target {
        Some(p) => {
            let (_, ts) = load_manifest_samples(p)?;
            Some(labeled_set(&model, &ts)?)
        }
        None => None,
    };
    let ingest_seconds = t.elapsed().as_secs_f64();
    let (tr_idx, te_idx) = split_by_group(&set.groups, cfg.train.train_fraction, cfg.seed)?;
    for &i in &tr_idx {
        records[i].split = Split::Train;
    }
    for &i in &te_idx {
        records[i].split = Split::Test;
    }
    absolute_images(&mut records, manifest)?;
    write_manifest(&out.join(MANIFEST_FILE), &records)?;
    let (train_set, test_set) = (set.subset(&tr_idx)?, set.subset(&te_idx)?);
    let monitor = Monitor {
        labeled: Some(&test_set),
        domains: target_set.as_ref().map(|t| (&test_set.inputs, &t.inputs)),
    };
    let history = train(&mut model, &train_set, target_set.as_ref().map(|t| &t.inputs), monitor, &cfg.train)?;
    model.save(&out.join(CHECKPOINT_FILE))?;
    history.save(&out.join(HISTORY_FILE))?;
    let test = evaluate(&mut model, &test_set)?;
    let target_report = match &target_set {
        Some(t) => Some(evaluate(&mut model, t)?),
        None => None,
    };
    let report = TrainReport {
        domain: cfg.domain,
        mode: cfg.mode,
        train_samples: tr_idx.len(),
        test_samples: te_idx.len(),
        train_sources: distinct(&set.groups, &tr_idx),
        test_sources: distinct(&set.groups, &te_idx),
        param_count: model.param_count(),
        ingest_seconds,
        train_seconds: history.train_seconds(),
        test,
        target: target_report,
    };
    write_text(&out.join(REPORT_FILE), &json(&report)?)?;
    let mut rows = vec![SummaryRow::from_reports("test", &cfg.domain.to_string(), std::slice::from_ref(&report.test))];
    if let Some(t) = &report.target {
        rows.push(SummaryRow::from_reports("target", &cfg.domain.to_string(), std::slice::from_ref(t)));
    }
    write_text(&out.join(TABLE_FILE), &format_table(&rows))?;
    Ok(TrainOutcome { model, history, report })
}

// ---------------------------------------------------------------- eval

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum SplitFilter {
    All,
    Train,
    Test,
}

/// Metrics of a checkpoint on the selected manifest records.
pub fn cmd_eval(checkpoint: &Path, manifest: &Path, split: SplitFilter) -> Result<(MetricsReport, ModelDomain)> {
    let mut model = Model::load(checkpoint)?;
    let (records, samples) = load_manifest_samples(manifest)?;
    let keep: Vec<usize> = records
        .iter()
        .enumerate()
        .filter(|(_, r)| match split {
            SplitFilter::All => true,
            SplitFilter::Train => r.split == Split::Train,
            SplitFilter::Test => r.split == Split::Test,
        })
        .map(|(i, _)| i)
        .collect();
    if keep.is_empty() {
        return Err(Error::Dataset(format!("no records in split {split:?}")));
    }
    let chosen: Vec<LabeledSample> = keep.iter().map(|&i| samples[i].clone()).collect();
    let set = labeled_set(&model, &chosen)?;
    Ok((evaluate(&mut model, &set)?, model.domain()))
}

pub fn eval_table(report: &MetricsReport, dataset: &str, domain: ModelDomain) -> String {
    format_table(&[SummaryRow::from_reports(dataset, &domain.to_string(), std::slice::from_ref(report))])
}

// ---------------------------------------------------------------- predict

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub verdict: ArtifactClass,
    pub probabilities: BTreeMap<String, f64>,
    pub input_kind: String,
}

/// Classifies one image, or raw k-space with the frequency model.
pub fn cmd_predict(checkpoint: &Path, input: &Path) -> Result<Prediction> {
    let mut model = Model::load(checkpoint)?;
    let (inputs, kind) = if is_kspace_file(input)? {
        (model.ingest_kspace(&[load_kspace(input)?])?, "kspace")
    } else {
        let img = preprocess(&load_image(input)?, model.config.input())?;
        (model.ingest_images(&[img])?, "image")
    };
    let p = model.predict_proba(&inputs)?[0];
    Ok(Prediction {
        verdict: ArtifactClass::from_id(argmax(&p) as u8)?,
        probabilities: ArtifactClass::ALL.iter().map(|c| (c.name().to_string(), p[c.id() as usize])).collect(),
        input_kind: kind.into(),
    })
}

// ---------------------------------------------------------------- bench

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DomainTiming {
    pub label: String,
    pub domain: ModelDomain,
    pub param_count: usize,
    pub train_samples: usize,
    pub test_samples: usize,
    /// Seconds of every timed epoch across all repeats.
    pub epoch_seconds: Vec<f64>,
    pub epoch_median: f64,
    pub epoch_mean: f64,
    pub epoch_std: f64,
    pub test_seconds: Vec<f64>,
    pub test_median: f64,
    pub ingest_seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub label: String,
    pub samples: usize,
    pub epoch_seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub timings: Vec<DomainTiming>,
    /// Median spatial epoch time over median frequency epoch time.
    pub speedup: f64,
    pub test_speedup: f64,
    pub sweep: Vec<SweepPoint>,
}

pub fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

struct BenchArm {
    label: String,
    domain: ModelDomain,
    train_set: LabeledSet,
    test_set: LabeledSet,
    ingest_seconds: f64,
    param_count: usize,
    epoch_seconds: Vec<f64>,
    test_seconds: Vec<f64>,
}

impl BenchArm {
    fn new(cfg: &RunConfig, label: &str, domain: ModelDomain, samples: &[LabeledSample]) -> Result<Self> {
        let probe = Model::new(cfg.model_config(domain), false, cfg.seed)?;
        let t = Instant::now();
        let set = labeled_set(&probe, samples)?;
        let ingest_seconds = t.elapsed().as_secs_f64();
        let (tr, te) = split_by_group(&set.groups, cfg.train.train_fraction, cfg.seed)?;
        Ok(Self {
            label: label.into(),
            domain,
            train_set: set.subset(&tr)?,
            test_set: set.subset(&te)?,
            ingest_seconds,
            param_count: probe.param_count(),
            epoch_seconds: Vec::new(),
            test_seconds: Vec::new(),
        })
    }

    /// Trains a fresh model on `set` and returns the per-epoch seconds.
    fn fit(&self, cfg: &RunConfig, set: &LabeledSet, epochs: usize, repeat: usize) -> Result<(Model, Vec<f64>)> {
        let mut train_cfg = cfg.train.clone();
        train_cfg.epochs = epochs;
        train_cfg.mode = crate::models::TrainMode::Supervised;
        let mut m = Model::new(cfg.model_config(self.domain), false, cfg.seed.wrapping_add(repeat as u64))?;
        let h = crate::models::train_supervised(&mut m, set, Monitor::default(), &train_cfg)?;
        Ok((m, h.epochs.iter().map(|e| e.seconds).collect()))
    }

    fn timing(self) -> DomainTiming {
        let (mean, std) = mean_std(&self.epoch_seconds);
        DomainTiming {
            label: self.label,
            domain: self.domain,
            param_count: self.param_count,
            train_samples: self.train_set.len(),
            test_samples: self.test_set.len(),
            epoch_median: median(&self.epoch_seconds),
            epoch_mean: mean,
            epoch_std: std,
            epoch_seconds: self.epoch_seconds,
            test_median: median(&self.test_seconds),
            test_seconds: self.test_seconds,
            ingest_seconds: self.ingest_seconds,
        }
    }
}

/// Times spatial against frequency training on identical data and batch
/// settings. With `control` the spatial model is timed against itself.
/// Repeats alternate between the two models so that drift in machine load
/// lands on both.
pub fn cmd_bench(cfg: &RunConfig, manifest: &Path, control: bool) -> Result<BenchReport> {
    let (_, samples) = load_manifest_samples(manifest)?;
    let runs: [(&str, ModelDomain); 2] = if control {
        [("spatial", ModelDomain::Spatial), ("spatial-control", ModelDomain::Spatial)]
    } else {
        [("spatial", ModelDomain::Spatial), ("frequency", ModelDomain::Frequency)]
    };
    let mut arms = Vec::new();
    for (label, domain) in runs {
        arms.push(BenchArm::new(cfg, label, domain, &samples)?);
    }
    let subsets = arms
        .iter()
        .map(|arm| {
            cfg.bench
                .sweep
                .iter()
                .map(|&n| {
                    if n > arm.train_set.len() {
                        return Err(Error::Config(format!("sweep size {n} exceeds {} training samples", arm.train_set.len())));
                    }
                    arm.train_set.subset(&(0..n).collect::<Vec<_>>())
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;

    for r in 0..cfg.bench.repeats {
        for arm in &mut arms {
            let (mut m, secs) = arm.fit(cfg, &arm.train_set, cfg.bench.epochs, r)?;
            arm.epoch_seconds.extend(secs);
            let t = Instant::now();
            m.predict_proba(&arm.test_set.inputs)?;
            arm.test_seconds.push(t.elapsed().as_secs_f64());
        }
    }

    let mut sweep_seconds = vec![vec![Vec::new(); cfg.bench.sweep.len()]; arms.len()];
    for r in 0..cfg.bench.repeats {
        for (a, arm) in arms.iter().enumerate() {
            for (i, sub) in subsets[a].iter().enumerate() {
                let (_, secs) = arm.fit(cfg, sub, 1, r)?;
                sweep_seconds[a][i].push(secs[0]);
            }
        }
    }
    let mut sweep = Vec::new();
    for (arm, secs) in arms.iter().zip(&sweep_seconds) {
        for (&n, s) in cfg.bench.sweep.iter().zip(secs) {
            sweep.push(SweepPoint { label: arm.label.clone(), samples: n, epoch_seconds: median(s) });
        }
    }

    let timings: Vec<DomainTiming> = arms.into_iter().map(BenchArm::timing).collect();
    let speedup = timings[0].epoch_median / timings[1].epoch_median;
    let test_speedup = timings[0].test_median / timings[1].test_median;
    Ok(BenchReport { timings, speedup, test_speedup, sweep })
}

pub fn bench_table(r: &BenchReport) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:<16} {:>10} {:>8} {:>14} {:>20} {:>12}",
        "Model", "Params", "Train", "Epoch median s", "Epoch mean ± std s", "Test s"
    );
    for t in &r.timings {
        let _ = writeln!(
            s,
            "{:<16} {:>10} {:>8} {:>14.3} {:>20} {:>12.4}",
            t.label,
            t.param_count,
            t.train_samples,
            t.epoch_median,
            format!("{:.3} ± {:.3}", t.epoch_mean, t.epoch_std),
            t.test_median
        );
    }
    let _ = writeln!(s, "speed-up (train) {:.3}x, speed-up (test) {:.3}x", r.speedup, r.test_speedup);
    s
}

pub fn sweep_csv(points: &[SweepPoint]) -> String {
    let mut s = String::from("model,samples,epoch_seconds\n");
    for p in points {
        let _ = writeln!(s, "{},{},{}", p.label, p.samples, p.epoch_seconds);
    }
    s
}

pub fn write_bench(out: &Path, cfg: &RunConfig, r: &BenchReport) -> Result<()> {
    persist_config(out, cfg)?;
    write_text(&out.join("bench.json"), &json(r)?)?;
    write_text(&out.join("bench.txt"), &bench_table(r))?;
    if !r.sweep.is_empty() {
        write_text(&out.join("sweep.csv"), &sweep_csv(&r.sweep))?;
    }
    Ok(())
}

pub fn write_json(path: &Path, v: &impl Serialize) -> Result<()> {
    write_text(path, &json(v)?)
}
