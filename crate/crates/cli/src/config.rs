use std::path::{Path, PathBuf};

use hgmt_core::metrics::{threshold_grid, Pose3dJoints};
use hgmt_core::{TaskKind, TaskSet};
use hgmt_data::{SyntheticFigureParams, ValidationOptions};
use hgmt_nn::HourglassConfig;
use hgmt_train::TrainConfig;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    /// 128 px input, 32 × 32 heatmaps, 64 features, synthetic data.
    Desk,
    /// 256 px input, 64 × 64 heatmaps, 256 features, 30 epochs.
    Paper,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DatasetKind {
    Synthetic,
    SurrealFormat,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    pub kind: DatasetKind,
    /// Root of a per-frame dataset with a `manifest.txt`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub root: Option<PathBuf>,
    /// Number of training and test frames; 0 takes every frame of the split.
    pub train_samples: usize,
    pub test_samples: usize,
    /// Fraction of subjects held out when a manifest has no split yet.
    pub test_fraction: f64,
    pub split_seed: u64,
    pub synthetic: SyntheticFigureParams,
}

/// Success-rate threshold grid `steps` points from `lo` to `hi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    pub lo: f64,
    pub hi: f64,
    pub steps: usize,
}

impl Grid {
    pub fn thresholds(&self) -> Vec<f64> {
        threshold_grid(self.lo, self.hi, self.steps)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportConfig {
    /// Keep the background row in segmentation tables.
    pub include_background: bool,
    pub pose3d_joints: Pose3dJoints,
    /// Tasks that get a comparison table; empty means every task whose
    /// single-task baseline is part of the sweep.
    pub targets: Vec<TaskKind>,
    /// Part or joint whose own curve is emitted next to the summary curves.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub curve_item: Option<String>,
    pub pose2d_grid: Grid,
    pub seg_grid: Grid,
    pub depth_grid: Grid,
    pub pose3d_grid: Grid,
}

impl ReportConfig {
    pub fn grid(&self, task: TaskKind) -> Grid {
        match task {
            TaskKind::Pose2D => self.pose2d_grid,
            TaskKind::PartSeg => self.seg_grid,
            TaskKind::Depth => self.depth_grid,
            TaskKind::Pose3D => self.pose3d_grid,
        }
    }
}

impl Default for ReportConfig {
    fn default() -> Self {
        Self {
            include_background: false,
            pose3d_joints: Pose3dJoints::default(),
            targets: Vec::new(),
            curve_item: None,
            pose2d_grid: Grid { lo: 0.0, hi: 1.0, steps: 21 },
            seg_grid: Grid { lo: 0.0, hi: 100.0, steps: 21 },
            depth_grid: Grid { lo: 0.0, hi: 5.0, steps: 21 },
            pose3d_grid: Grid { lo: 0.0, hi: 300.0, steps: 31 },
        }
    }
}

/// Everything one invocation needs. Unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub preset: Preset,
    pub tasks: Vec<TaskSet>,
    /// Seeds model initialization and the data order of every job.
    pub seed: u64,
    pub out: PathBuf,
    /// Sweep jobs trained at the same time.
    pub jobs: usize,
    pub dataset: DatasetConfig,
    pub model: HourglassConfig,
    pub train: TrainConfig,
    pub report: ReportConfig,
    pub validation: ValidationOptions,
}

impl ExperimentConfig {
    pub fn preset(preset: Preset) -> Self {
        let (model, train, dataset) = match preset {
            Preset::Desk => {
                let model = HourglassConfig::desk();
                let train = TrainConfig { epochs: 2, ..TrainConfig::default() };
                let dataset = DatasetConfig {
                    kind: DatasetKind::Synthetic,
                    root: None,
                    train_samples: 500,
                    test_samples: 100,
                    test_fraction: 0.2,
                    split_seed: 0,
                    synthetic: SyntheticFigureParams { image_size: model.input_size, ..Default::default() },
                };
                (model, train, dataset)
            }
            Preset::Paper => {
                let model = HourglassConfig::paper();
                let dataset = DatasetConfig {
                    kind: DatasetKind::SurrealFormat,
                    root: None,
                    train_samples: 0,
                    test_samples: 0,
                    test_fraction: 0.2,
                    split_seed: 0,
                    synthetic: SyntheticFigureParams { image_size: model.input_size, ..Default::default() },
                };
                (model, TrainConfig::default(), dataset)
            }
        };
        Self {
            preset,
            tasks: vec![TaskSet::single(TaskKind::Pose2D)],
            seed: 0,
            out: PathBuf::from("runs"),
            jobs: 1,
            dataset,
            model,
            train,
            report: ReportConfig::default(),
            validation: ValidationOptions::default(),
        }
    }

    /// The preset named in `file` (or `fallback`), overlaid with every key of `file`.
    pub fn from_toml(text: &str, fallback: Preset, forced: Option<Preset>) -> Result<Self> {
        let overlay: toml::Table = text.parse().map_err(|e: toml::de::Error| CliError::Config(e.to_string()))?;
        let named = match overlay.get("preset") {
            Some(v) => Some(
                Preset::deserialize(v.clone()).map_err(|e| CliError::Config(format!("preset: {e}")))?,
            ),
            None => None,
        };
        let preset = forced.or(named).unwrap_or(fallback);
        let explicit_size = overlay
            .get("dataset")
            .and_then(|d| d.get("synthetic"))
            .is_some_and(|s| s.get("image_size").is_some());
        let base = Self::preset(preset);
        let mut merged = toml::Table::try_from(&base).map_err(|e| CliError::Config(e.to_string()))?;
        merge(&mut merged, overlay);
        merged.insert("preset".into(), toml::Value::try_from(preset).expect("enum serializes"));
        if !explicit_size {
            sync_image_size(&mut merged);
        }
        toml::Value::Table(merged).try_into().map_err(|e: toml::de::Error| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path, fallback: Preset, forced: Option<Preset>) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text, fallback, forced).map_err(|e| match e {
            CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Every problem with the config, reported together.
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if self.tasks.is_empty() {
            problems.push("tasks: at least one task set is required".to_string());
        }
        let mut seen = Vec::new();
        for t in &self.tasks {
            if seen.contains(t) {
                problems.push(format!("tasks: {t} is listed twice"));
            }
            seen.push(*t);
        }
        if self.jobs == 0 {
            problems.push("jobs must be positive".into());
        }
        if let Err(e) = self.model.validate() {
            problems.push(format!("model: {e}"));
        }
        if let Err(e) = self.train.validate() {
            problems.push(format!("train: {e}"));
        }
        let d = &self.dataset;
        match d.kind {
            DatasetKind::Synthetic => {
                if let Err(e) = d.synthetic.validate() {
                    problems.push(format!("dataset.synthetic: {e}"));
                }
                if d.synthetic.image_size != self.model.input_size {
                    problems.push(format!(
                        "dataset.synthetic.image_size {} differs from model.input_size {}",
                        d.synthetic.image_size, self.model.input_size
                    ));
                }
                if d.train_samples == 0 || d.test_samples == 0 {
                    problems.push("dataset: synthetic data needs positive train_samples and test_samples".into());
                }
            }
            DatasetKind::SurrealFormat => {
                if d.root.is_none() {
                    problems.push("dataset.root is required for surreal-format data".into());
                }
            }
        }
        if !(0.0..1.0).contains(&d.test_fraction) || d.test_fraction == 0.0 {
            problems.push(format!("dataset.test_fraction must lie in (0, 1), got {}", d.test_fraction));
        }
        for task in TaskKind::ALL {
            let g = self.report.grid(task);
            if g.steps == 0 || !(g.hi >= g.lo) {
                problems.push(format!("report: bad threshold grid for {task}"));
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(CliError::Config(problems.join("\n")))
        }
    }

    /// Settings of one sweep job; output location and parallelism are not part of it.
    pub fn job(&self, tasks: TaskSet) -> JobConfig {
        JobConfig {
            tasks,
            seed: self.seed,
            dataset: self.dataset.clone(),
            model: self.model,
            train: TrainConfig { seed: self.seed, checkpoint_dir: None, ..self.train.clone() },
            report: self.report.clone(),
        }
    }
}

/// The settings that determine a job's results.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JobConfig {
    pub tasks: TaskSet,
    pub seed: u64,
    pub dataset: DatasetConfig,
    pub model: HourglassConfig,
    pub train: TrainConfig,
    pub report: ReportConfig,
}

impl JobConfig {
    /// SHA-256 of the canonical JSON form, hex encoded.
    pub fn hash(&self) -> String {
        let value = serde_json::to_value(self).expect("config serializes");
        let digest = Sha256::digest(value.to_string().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

fn merge(base: &mut toml::Table, overlay: toml::Table) {
    for (k, v) in overlay {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

/// Sets the synthetic frame size to the model's input size.
fn sync_image_size(merged: &mut toml::Table) {
    let input = merged.get("model").and_then(|m| m.get("input_size")).cloned();
    if let (Some(input), Some(toml::Value::Table(d))) = (input, merged.get_mut("dataset")) {
        if let Some(toml::Value::Table(s)) = d.get_mut("synthetic") {
            s.insert("image_size".into(), input);
        }
    }
}
