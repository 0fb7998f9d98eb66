use std::path::{Path, PathBuf};

use hgmt_core::metrics::{improvement_map, MetricKind, MetricsReport};
use hgmt_core::TaskSet;
use hgmt_data::{generate_figure, make_splits, validate_all, write_frame, DatasetManifest, SourceKind};
use rayon::prelude::*;
use serde_json::json;

use crate::analysis::{best_multitask, comparison_table, published_combos, table_targets, task_curves};
use crate::cli::{parse_task, Cli, Command, ExperimentArgs};
use crate::config::{DatasetKind, ExperimentConfig};
use crate::dataset::{self, MANIFEST_FILE};
use crate::error::{CliError, Result};
use crate::run::{
    evaluate_checkpoint, frames_from_csv, job_dir, pretty, read, run_job, write, JobOutcome, CHECKPOINT_DIR, FRAMES_CSV,
    LAST_CHECKPOINT, REPORT_CSV,
};

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train(exp) => train(&exp),
        Command::Evaluate { exp, checkpoint } => evaluate(&exp, checkpoint),
        Command::Sweep { exp, paper_combos } => sweep(&exp, paper_combos.as_deref()).map(|_| ()),
        Command::Curves { baseline, candidate, exp } => curves(&baseline, &candidate, &exp),
        Command::Improve { baseline, candidate, out } => improve(&baseline, &candidate, &out),
        Command::ValidateData(exp) => validate_data(&exp),
        Command::GenSynthetic { exp, count } => gen_synthetic(&exp, count),
    }
}

fn single_task_set(cfg: &ExperimentConfig) -> Result<TaskSet> {
    match cfg.tasks.as_slice() {
        [one] => Ok(*one),
        many => Err(CliError::Config(format!("expected one task set, got {}; use `sweep` for several", many.len()))),
    }
}

fn train(exp: &ExperimentArgs) -> Result<()> {
    let cfg = exp.resolve()?;
    let tasks = single_task_set(&cfg)?;
    let data = dataset::load(&cfg.dataset, cfg.model.input_size)?;
    write(&cfg.out.join(MANIFEST_FILE), data.manifest.to_text())?;
    let outcome = run_job(&cfg.job(tasks), &data.train, &data.test, &job_dir(&cfg.out, tasks))?;
    print_summary(&outcome);
    Ok(())
}

fn print_summary(o: &JobOutcome) {
    let mut parts = Vec::new();
    for task in o.tasks.tasks() {
        if let Some((name, v, _)) = hgmt_train::headline(&o.report, task) {
            parts.push(format!("{name} {v:.4}"));
        }
    }
    println!("{}: {} [{}] -> {}", o.tasks, parts.join(", "), &o.config_hash[..12], o.dir.display());
}

fn evaluate(exp: &ExperimentArgs, checkpoint: Option<PathBuf>) -> Result<()> {
    let cfg = exp.resolve()?;
    let tasks = single_task_set(&cfg)?;
    let dir = job_dir(&cfg.out, tasks);
    let checkpoint = checkpoint.unwrap_or_else(|| dir.join(CHECKPOINT_DIR).join(LAST_CHECKPOINT));
    let data = dataset::load(&cfg.dataset, cfg.model.input_size)?;
    let ev = evaluate_checkpoint(&cfg.job(tasks), &checkpoint, &data.test, &dir.join("evaluation"))?;
    for task in tasks.tasks() {
        if let Some((name, v, _)) = hgmt_train::headline(&ev.report, task) {
            println!("{tasks}: {name} {v:.4}");
        }
    }
    Ok(())
}

/// Result of a sweep: one outcome per task set, in sweep order.
#[derive(Debug, Clone)]
pub struct SweepResult {
    pub outcomes: Vec<JobOutcome>,
}

pub fn sweep(exp: &ExperimentArgs, paper_combos: Option<&str>) -> Result<SweepResult> {
    let mut exp = exp.clone();
    if let Some(task) = paper_combos {
        let task = parse_task(task)?;
        if exp.tasks.is_some() {
            return Err(CliError::Config("--tasks and --paper-combos are mutually exclusive".into()));
        }
        exp.tasks = Some(published_combos(task).iter().map(|t| t.to_string()).collect::<Vec<_>>().join(","));
    }
    let cfg = exp.resolve()?;
    let targets = table_targets(&cfg.tasks, &cfg.report.targets)?;
    let data = dataset::load(&cfg.dataset, cfg.model.input_size)?;
    write(&cfg.out.join(MANIFEST_FILE), data.manifest.to_text())?;

    let job = |ts: &TaskSet| run_job(&cfg.job(*ts), &data.train, &data.test, &job_dir(&cfg.out, *ts));
    let outcomes: Vec<JobOutcome> = if cfg.jobs > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.jobs)
            .build()
            .map_err(|e| CliError::Runtime(format!("cannot start {} workers: {e}", cfg.jobs)))?;
        pool.install(|| cfg.tasks.par_iter().map(job).collect::<Result<Vec<_>>>())?
    } else {
        cfg.tasks.iter().map(job).collect::<Result<Vec<_>>>()?
    };
    for o in &outcomes {
        print_summary(o);
    }

    let runs: Vec<(TaskSet, &MetricsReport)> = outcomes.iter().map(|o| (o.tasks, &o.report)).collect();
    let mut tables = serde_json::Map::new();
    let mut best = serde_json::Map::new();
    for task in &targets {
        let table = comparison_table(*task, &runs, cfg.report.include_background)?;
        let key = table.metric.key();
        write(&cfg.out.join("tables").join(format!("{key}.csv")), table.to_csv())?;
        write(&cfg.out.join("tables").join(format!("{key}.json")), pretty(&table.to_json()))?;
        tables.insert(key.to_string(), table.to_json());

        let baseline = TaskSet::single(*task);
        if let Some(winner) = best_multitask(*task, &runs) {
            best.insert(key.to_string(), json!(winner.to_string()));
            let frames = |ts: TaskSet| frames_from_csv(&read(&job_dir(&cfg.out, ts).join(FRAMES_CSV))?);
            let (b, c) = (frames(baseline)?, frames(winner)?);
            for series in task_curves(*task, &b, &c, cfg.report.grid(*task), cfg.report.curve_item.as_deref()) {
                write(&cfg.out.join("curves").join(format!("{}.csv", series.name)), series.to_csv())?;
            }
        }
    }
    let summary = json!({
        "preset": cfg.preset,
        "seed": cfg.seed,
        "runs": outcomes.iter().map(|o| json!({
            "task_combo": o.tasks.to_string(),
            "label": o.label,
            "report": o.dir.join(REPORT_CSV),
            "checkpoint": o.checkpoint,
            "config_hash": o.config_hash,
        })).collect::<Vec<_>>(),
        "tables": tables,
        "best_multitask": best,
    });
    write(&cfg.out.join("sweep.json"), pretty(&summary))?;
    Ok(SweepResult { outcomes })
}

fn curves(baseline: &Path, candidate: &Path, exp: &ExperimentArgs) -> Result<()> {
    let cfg = exp.resolve()?;
    let (b, c) = (frames_from_csv(&read(&baseline.join(FRAMES_CSV))?)?, frames_from_csv(&read(&candidate.join(FRAMES_CSV))?)?);
    let mut written = 0;
    for task in hgmt_core::TaskKind::ALL {
        for series in task_curves(task, &b, &c, cfg.report.grid(task), cfg.report.curve_item.as_deref()) {
            write(&cfg.out.join(format!("{}.csv", series.name)), series.to_csv())?;
            written += 1;
        }
    }
    if written == 0 {
        return Err(CliError::Runtime("the two runs share no task".into()));
    }
    println!("{written} curve files -> {}", cfg.out.display());
    Ok(())
}

fn load_report(path: &Path) -> Result<MetricsReport> {
    let file = if path.is_dir() { path.join(REPORT_CSV) } else { path.to_path_buf() };
    Ok(MetricsReport::from_csv(&read(&file)?)?)
}

fn improve(baseline: &Path, candidate: &Path, out: &Path) -> Result<()> {
    let map = improvement_map(&load_report(baseline)?, &load_report(candidate)?);
    if map.entries.is_empty() {
        return Err(CliError::Runtime("the two reports share no metric".into()));
    }
    write(&out.join("improvement.csv"), map.to_csv())?;
    write(&out.join("improvement.json"), pretty(&map.to_json()))?;
    for metric in [MetricKind::Iou, MetricKind::Pckh, MetricKind::DepthRmse, MetricKind::Mjd] {
        let mean = ["Mean", "Mean Full Body"].iter().find_map(|row| map.get(metric, row));
        if let Some(d) = mean {
            println!("{}: {d:+.4}", metric.key());
        }
    }
    Ok(())
}

fn validate_data(exp: &ExperimentArgs) -> Result<()> {
    let cfg = exp.resolve()?;
    let manifest = dataset::manifest(&cfg.dataset)?;
    let source = dataset::source(&cfg.dataset, &manifest, cfg.model.input_size)?;
    let samples = source.load_all(&manifest.records)?;
    let report = validate_all(&samples, &cfg.validation);
    let [mask_depth, projection, joint_depth, empty] = report.counts();
    println!(
        "{} frames: {mask_depth} mask/depth, {projection} projection, {joint_depth} joint depth, {empty} empty-foreground violations",
        report.samples
    );
    for (frame, v) in report.violations.iter().take(20) {
        println!("  frame {frame}: {v}");
    }
    if report.is_clean() {
        Ok(())
    } else {
        Err(CliError::Runtime(format!("{} violations", report.violations.len())))
    }
}

fn gen_synthetic(exp: &ExperimentArgs, count: usize) -> Result<()> {
    let cfg = exp.resolve()?;
    if cfg.dataset.kind != DatasetKind::Synthetic {
        return Err(CliError::Config("gen-synthetic needs synthetic dataset settings".into()));
    }
    if count == 0 {
        return Err(CliError::Config("--count must be positive".into()));
    }
    let params = &cfg.dataset.synthetic;
    let planned = make_splits(&DatasetManifest::synthetic(count, params.num_subjects), cfg.dataset.split_seed, cfg.dataset.test_fraction)?;
    let mut records = Vec::with_capacity(count);
    for (i, rec) in planned.records.iter().enumerate() {
        let figure = generate_figure(params, i as u64)?;
        let stem = write_frame(&cfg.out, &rec.clip_id, i as u64, &figure.sample, None)?;
        records.push(hgmt_data::ManifestRecord { frame_path: stem, ..rec.clone() });
    }
    let manifest = DatasetManifest { source: SourceKind::SurrealFormat, crop_margin: params.crop_margin, records };
    manifest.save(&cfg.out.join(MANIFEST_FILE))?;
    let (train, test) = manifest.counts();
    println!("{count} frames ({train} train, {test} test) -> {}", cfg.out.display());
    Ok(())
}
