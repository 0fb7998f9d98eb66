use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use hgmt_core::metrics::{FrameErrors, MetricsReport};
use hgmt_core::{Sample, TaskKind, TaskSet};
use hgmt_nn::MultiTaskModel;
use hgmt_train::{evaluate, train, EvalOptions, Evaluation, TrainConfig, TrainData, TrainState};
use serde::Serialize;

use crate::config::JobConfig;
use crate::error::{io_err, CliError, Result};

pub const REPORT_CSV: &str = "report.csv";
pub const REPORT_JSON: &str = "report.json";
pub const FRAMES_CSV: &str = "frames.csv";
pub const FRAMES_HEADER: &str = "key,task,item,error";
pub const LOG_FILE: &str = "train_log.csv";
pub const CHECKPOINT_DIR: &str = "checkpoints";
pub const LAST_CHECKPOINT: &str = "last.ckpt";

/// What one trained and evaluated task set left behind.
#[derive(Debug, Clone, Serialize)]
pub struct JobOutcome {
    pub tasks: TaskSet,
    pub label: String,
    pub dir: PathBuf,
    pub checkpoint: PathBuf,
    pub config_hash: String,
    #[serde(skip)]
    pub report: MetricsReport,
}

/// Sub-directory of a task set under an output root, e.g. `2d+seg`.
pub fn job_dir(out: &Path, tasks: TaskSet) -> PathBuf {
    out.join(tasks.to_string())
}

pub fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    std::fs::write(path, contents).map_err(io_err(path))
}

pub fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(io_err(path))
}

pub fn eval_options(job: &JobConfig) -> EvalOptions {
    EvalOptions {
        quantizer: job.train.quantizer,
        pose3d_joints: job.report.pose3d_joints,
        heatmap: job.train.heatmap,
        batch_size: job.train.batch_size,
    }
}

/// Trains `job` from scratch on `train_set`, evaluates on `test_set` and
/// writes everything under `dir`.
pub fn run_job(job: &JobConfig, train_set: &[Sample], test_set: &[Sample], dir: &Path) -> Result<JobOutcome> {
    let hash = job.hash();
    write(&dir.join("config.toml"), toml::to_string(job).expect("config serializes"))?;
    write(&dir.join("config_hash.txt"), format!("{hash}\n"))?;

    let ckpt_dir = dir.join(CHECKPOINT_DIR);
    let config = TrainConfig { checkpoint_dir: Some(ckpt_dir.clone()), ..job.train.clone() };
    let model = MultiTaskModel::<f32>::new(job.tasks, job.model, job.seed)?;
    let mut state = TrainState::new(model, &config);
    let log = train(&mut state, TrainData::new(train_set), &config)?;
    write(&dir.join(LOG_FILE), log.to_text())?;
    let checkpoint = ckpt_dir.join(LAST_CHECKPOINT);
    state.save(&checkpoint, &config)?;

    let ev = evaluate(&state.model, test_set, &eval_options(job))?;
    write_evaluation(dir, &ev)?;
    Ok(JobOutcome {
        tasks: job.tasks,
        label: job.tasks.paper_label(),
        dir: dir.to_path_buf(),
        checkpoint,
        config_hash: hash,
        report: ev.report,
    })
}

/// Evaluates a saved checkpoint and writes the report next to it.
pub fn evaluate_checkpoint(job: &JobConfig, checkpoint: &Path, test_set: &[Sample], dir: &Path) -> Result<Evaluation> {
    let (state, _) = TrainState::<f32>::load(checkpoint, Some(job.tasks)).map_err(|e| match e {
        hgmt_train::Error::Io(io) => CliError::Runtime(format!("{}: {io}", checkpoint.display())),
        other => other.into(),
    })?;
    if *state.model.config() != job.model {
        return Err(CliError::Config(format!("{} was trained with a different model config", checkpoint.display())));
    }
    let ev = evaluate(&state.model, test_set, &eval_options(job))?;
    write_evaluation(dir, &ev)?;
    Ok(ev)
}

fn write_evaluation(dir: &Path, ev: &Evaluation) -> Result<()> {
    write(&dir.join(REPORT_CSV), ev.report.to_csv())?;
    write(&dir.join(REPORT_JSON), pretty(&ev.report.to_json()))?;
    write(&dir.join(FRAMES_CSV), frames_to_csv(&ev.frames.frame_errors()))?;
    Ok(())
}

pub fn pretty(value: &serde_json::Value) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("json serializes");
    s.push('\n');
    s
}

pub fn frames_to_csv(frames: &[FrameErrors]) -> String {
    let mut out = String::from(FRAMES_HEADER);
    out.push('\n');
    for f in frames {
        let _ = writeln!(out, "{},{},{},{}", f.key, f.task, f.item, f.error);
    }
    out
}

pub fn frames_from_csv(text: &str) -> Result<Vec<FrameErrors>> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    if lines.next().map(str::trim) != Some(FRAMES_HEADER) {
        return Err(CliError::Runtime(format!("per-frame error file must start with {FRAMES_HEADER:?}")));
    }
    lines
        .enumerate()
        .map(|(i, line)| {
            let bad = |what: &str| CliError::Runtime(format!("per-frame error line {}: {what}", i + 2));
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 4 {
                return Err(bad("expected 4 fields"));
            }
            Ok(FrameErrors {
                key: f[0].parse().map_err(|_| bad("bad key"))?,
                task: TaskKind::from_token(f[1]).map_err(|_| bad("bad task"))?,
                item: f[2].to_string(),
                error: f[3].parse().map_err(|_| bad("bad error value"))?,
            })
        })
        .collect()
}
