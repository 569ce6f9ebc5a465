//! Command-line front end: corrupt, synth, train, eval, predict, bench.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

pub use commands::*;
pub use config::{BenchConfig, Overrides, RunConfig, RunMode, WEAK_FRACTION};

use crate::artifacts::{ArtifactClass, ArtifactParams};
use crate::error::{Error, Result};
use crate::models::ModelDomain;

#[derive(Parser, Debug)]
#[command(name = "kspace-qa", version, about = "k-space artifact synthesis and MR image quality classifiers")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(clap::Args, Debug, Clone, Default)]
pub struct Common {
    /// TOML run configuration; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads for data preparation.
    #[arg(long)]
    pub workers: Option<usize>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Apply one artifact to an image (or to one frame of a sequence).
    Corrupt {
        /// Input image; repeat for the frames of a cine sequence.
        #[arg(long = "input", required = true)]
        inputs: Vec<PathBuf>,
        /// Frame to corrupt when several inputs are given.
        #[arg(long, default_value_t = 0)]
        frame: usize,
        /// clean, respiratory, cardiac, gibbs, aliasing (or 0-4).
        #[arg(long)]
        class: String,
        /// Explicit parameters as JSON, e.g. {"kind":"aliasing","factor":2,"axis":"rows"}.
        #[arg(long)]
        params: Option<String>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Build a labeled dataset from phantoms or a directory of clean images.
    Synth {
        #[command(flatten)]
        common: Common,
        #[arg(long, conflicts_with = "corpus")]
        phantoms: Option<usize>,
        /// Directory of clean images; sub-directories are cine sequences.
        #[arg(long)]
        corpus: Option<PathBuf>,
        /// Target-domain phantoms (inverted contrast, doubled noise).
        #[arg(long)]
        shifted: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a model on a manifest with a split by source image.
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        domain: Option<ModelDomain>,
        #[arg(long, value_enum)]
        mode: Option<RunMode>,
        /// Unlabeled target manifest for --mode dann.
        #[arg(long)]
        target: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Metrics of a checkpoint on a manifest.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long, value_enum, default_value_t = SplitFilter::All)]
        split: SplitFilter,
        /// Directory for report.json and report.txt.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Classify an image, or raw k-space with a frequency model.
    Predict {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        input: PathBuf,
    },
    /// Time spatial against frequency training on the same data.
    Bench {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        manifest: PathBuf,
        /// Time the spatial model against itself.
        #[arg(long)]
        control: bool,
        #[arg(long)]
        out: PathBuf,
    },
}

fn resolve(common: &Common, domain: Option<ModelDomain>, mode: Option<RunMode>) -> Result<RunConfig> {
    let o = Overrides { seed: common.seed, workers: common.workers, domain, mode };
    let cfg = RunConfig::resolve(common.config.as_deref(), &o)?;
    // the global pool can only be set once per process
    let _ = rayon::ThreadPoolBuilder::new().num_threads(cfg.workers).build_global();
    Ok(cfg)
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Corrupt { inputs, frame, class, params, seed, out } => {
            let class: ArtifactClass = class.parse()?;
            let params: Option<ArtifactParams> = params
                .map(|p| serde_json::from_str(&p).map_err(|e| Error::param(format!("--params: {e}"))))
                .transpose()?;
            let record = cmd_corrupt(&CorruptArgs { inputs: &inputs, frame, class, params, seed, out: &out })?;
            println!("{}", serde_json::to_string(&record).map_err(|e| Error::Dataset(e.to_string()))?);
        }
        Command::Synth { common, phantoms, corpus, shifted, out } => {
            let mut cfg = resolve(&common, None, None)?;
            if let Some(n) = phantoms {
                cfg.corpus.phantoms = n;
            }
            cfg.corpus.shifted |= shifted;
            cfg.validate()?;
            let s = cmd_synth(&cfg, corpus.as_deref(), &out)?;
            println!("{} samples written to {}", s.samples, s.manifest.display());
            print!("{}", format_histogram(&s.class_counts));
        }
        Command::Train { common, manifest, domain, mode, target, out } => {
            let cfg = resolve(&common, domain, mode)?;
            let o = cmd_train(&cfg, &manifest, target.as_deref(), &out)?;
            for e in &o.history.epochs {
                eprintln!(
                    "epoch {:>3} loss {:.4} val {} {:.2}s",
                    e.epoch,
                    e.label_loss,
                    e.val_accuracy.map_or("-".into(), |a| format!("{a:.4}")),
                    e.seconds
                );
            }
            print!("{}", std::fs::read_to_string(out.join(TABLE_FILE))?);
        }
        Command::Eval { checkpoint, manifest, split, out } => {
            let (report, domain) = cmd_eval(&checkpoint, &manifest, split)?;
            let table = eval_table(&report, &format!("{split:?}").to_lowercase(), domain);
            if let Some(dir) = out {
                std::fs::create_dir_all(&dir)?;
                write_json(&dir.join(REPORT_FILE), &report)?;
                crate::data_io::write_atomic(&dir.join(TABLE_FILE), table.as_bytes())?;
            }
            print!("{table}");
        }
        Command::Predict { checkpoint, input } => {
            let p = cmd_predict(&checkpoint, &input)?;
            println!("{}", serde_json::to_string(&p).map_err(|e| Error::Dataset(e.to_string()))?);
        }
        Command::Bench { common, manifest, control, out } => {
            let cfg = resolve(&common, None, None)?;
            let r = cmd_bench(&cfg, &manifest, control)?;
            write_bench(&out, &cfg, &r)?;
            print!("{}", bench_table(&r));
        }
    }
    Ok(())
}

/// Parses the process arguments and runs; errors print to stderr with exit code 1.
pub fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
