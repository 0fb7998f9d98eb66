use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use hgmt_core::{TaskKind, TaskSet};

use crate::config::{DatasetKind, ExperimentConfig, Preset};
use crate::error::{CliError, Result};

#[derive(Debug, Parser)]
#[command(name = "hgmt", version, about = "Multi-task stacked hourglass experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train one task set, evaluate it on the test split and write its report.
    Train(ExperimentArgs),
    /// Re-evaluate a saved checkpoint on the test split.
    Evaluate {
        #[command(flatten)]
        exp: ExperimentArgs,
        /// Checkpoint to load; defaults to `<out>/<tasks>/checkpoints/last.ckpt`.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Train every listed task set under identical settings and emit comparison tables.
    Sweep {
        #[command(flatten)]
        exp: ExperimentArgs,
        /// Use the column set of the published table for this task (2d, seg, depth or 3d).
        #[arg(long, value_name = "TASK")]
        paper_combos: Option<String>,
    },
    /// Success-rate curves of a baseline run against a candidate run.
    Curves {
        /// Run directory (with `frames.csv`) of the baseline.
        #[arg(long)]
        baseline: PathBuf,
        /// Run directory of the candidate.
        #[arg(long)]
        candidate: PathBuf,
        #[command(flatten)]
        exp: ExperimentArgs,
    },
    /// Per-part and per-joint improvement of one report over another.
    Improve {
        /// Baseline report CSV, or a run directory containing `report.csv`.
        #[arg(long)]
        baseline: PathBuf,
        /// Candidate report CSV, or a run directory.
        #[arg(long)]
        candidate: PathBuf,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Check mask, depth and joint consistency of every frame of a dataset.
    ValidateData(ExperimentArgs),
    /// Write synthetic frames in the per-frame file layout, with a manifest.
    GenSynthetic {
        #[command(flatten)]
        exp: ExperimentArgs,
        /// Number of frames.
        #[arg(long, default_value_t = 100)]
        count: usize,
    },
}

/// Flags shared by every experiment command; they override the config file.
#[derive(Debug, Clone, Default, Args)]
pub struct ExperimentArgs {
    /// Task sets such as `2d` or `2d+seg+depth`; separate several with commas.
    #[arg(long)]
    pub tasks: Option<String>,
    /// TOML config file with sections mirroring the experiment settings.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub preset: Option<Preset>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// `synthetic`, or the root directory of a per-frame dataset.
    #[arg(long)]
    pub dataset: Option<String>,
    /// Sweep jobs trained at the same time.
    #[arg(long)]
    pub jobs: Option<usize>,
}

impl ExperimentArgs {
    /// The preset (default `desk`), overlaid with the config file, then with the flags.
    pub fn resolve(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::load(path, Preset::Desk, self.preset)?,
            None => ExperimentConfig::preset(self.preset.unwrap_or(Preset::Desk)),
        };
        if let Some(t) = &self.tasks {
            cfg.tasks = parse_task_list(t)?;
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(o) = &self.out {
            cfg.out = o.clone();
        }
        if let Some(j) = self.jobs {
            cfg.jobs = j;
        }
        if let Some(d) = &self.dataset {
            if d == "synthetic" {
                cfg.dataset.kind = DatasetKind::Synthetic;
                cfg.dataset.synthetic.image_size = cfg.model.input_size;
                if cfg.dataset.train_samples == 0 || cfg.dataset.test_samples == 0 {
                    cfg.dataset.train_samples = 500;
                    cfg.dataset.test_samples = 100;
                }
            } else {
                cfg.dataset.kind = DatasetKind::SurrealFormat;
                cfg.dataset.root = Some(PathBuf::from(d));
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

pub fn parse_task_list(text: &str) -> Result<Vec<TaskSet>> {
    text.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| s.trim().parse::<TaskSet>().map_err(|e| CliError::Config(format!("--tasks {s:?}: {e}"))))
        .collect()
}

pub fn parse_task(text: &str) -> Result<TaskKind> {
    TaskKind::from_token(text.trim()).map_err(|e| CliError::Config(e.to_string()))
}
