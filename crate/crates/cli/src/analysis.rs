use std::fmt::Write as _;

use hgmt_core::metrics::{success_rate_curve, ComparisonTable, FrameErrors, MetricKind, MetricsReport};
use hgmt_core::{TaskKind, TaskSet};
use hgmt_train::headline;

use crate::config::Grid;
use crate::error::{CliError, Result};

/// Column sets of the published comparison tables, baseline first.
pub fn published_combos(task: TaskKind) -> Vec<TaskSet> {
    let sets: &[&str] = match task {
        TaskKind::PartSeg => &["seg", "seg+depth", "seg+3d", "2d+seg", "2d+seg+depth", "2d+seg+3d", "seg+depth+3d", "2d+seg+depth+3d"],
        TaskKind::Pose3D => &["3d", "2d+3d", "seg+3d", "depth+3d", "2d+seg+3d", "2d+depth+3d", "seg+depth+3d", "2d+seg+depth+3d"],
        TaskKind::Pose2D => &["2d", "2d+depth", "2d+3d", "2d+seg", "2d+seg+depth", "2d+seg+3d", "2d+depth+3d", "2d+seg+depth+3d"],
        TaskKind::Depth => &["depth", "2d+depth", "seg+depth", "depth+3d", "2d+seg+depth", "2d+depth+3d", "seg+depth+3d", "2d+seg+depth+3d"],
    };
    sets.iter().map(|s| s.parse().expect("valid task set")).collect()
}

/// Tasks that get a table: the requested ones, or every task whose
/// single-task baseline was run.
pub fn table_targets(sets: &[TaskSet], requested: &[TaskKind]) -> Result<Vec<TaskKind>> {
    if requested.is_empty() {
        let found: Vec<TaskKind> = TaskKind::ALL.into_iter().filter(|t| sets.contains(&TaskSet::single(*t))).collect();
        if found.is_empty() {
            return Err(CliError::Config(
                "no single-task baseline in the sweep; add one such as `2d` or list report.targets".into(),
            ));
        }
        return Ok(found);
    }
    for t in requested {
        if !sets.contains(&TaskSet::single(*t)) {
            return Err(CliError::Config(format!("baseline task set {t} for the {t} table is not part of the sweep")));
        }
    }
    Ok(requested.to_vec())
}

/// Wide table for `task`: the baseline column first, then every other run
/// containing `task` in sweep order.
pub fn comparison_table(task: TaskKind, runs: &[(TaskSet, &MetricsReport)], include_background: bool) -> Result<ComparisonTable> {
    let baseline = TaskSet::single(task);
    let mut cols: Vec<(TaskSet, &MetricsReport)> = runs.iter().filter(|(t, _)| *t == baseline).copied().collect();
    cols.extend(runs.iter().filter(|(t, _)| *t != baseline && t.contains(task)).copied());
    Ok(ComparisonTable::from_reports(MetricKind::for_task(task), &cols, include_background)?)
}

/// The multi-task run with the best headline value for `task`; ties go to
/// the earlier run.
pub fn best_multitask(task: TaskKind, runs: &[(TaskSet, &MetricsReport)]) -> Option<TaskSet> {
    let mut best: Option<(TaskSet, f64)> = None;
    for (ts, report) in runs {
        if ts.len() < 2 || !ts.contains(task) {
            continue;
        }
        let Some((_, v, higher)) = headline(report, task) else { continue };
        let better = best.is_none_or(|(_, b)| if higher { v > b } else { v < b });
        if better {
            best = Some((*ts, v));
        }
    }
    best.map(|(t, _)| t)
}

/// One `threshold, percent` series.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveSeries {
    pub name: String,
    pub thresholds: Vec<f64>,
    pub percent: Vec<f64>,
}

impl CurveSeries {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("threshold,percent\n");
        for (t, p) in self.thresholds.iter().zip(&self.percent) {
            let _ = writeln!(out, "{t},{p}");
        }
        out
    }
}

/// Errors of `task` for `item` (`"all"` for the per-frame summary).
pub fn errors_of(frames: &[FrameErrors], task: TaskKind, item: &str) -> Vec<f64> {
    frames.iter().filter(|f| f.task == task && f.item == item).map(|f| f.error).collect()
}

/// Success-rate curves of one task for both runs, plus the curves of
/// `item` when both runs have errors for it.
pub fn task_curves(
    task: TaskKind,
    baseline: &[FrameErrors],
    candidate: &[FrameErrors],
    grid: Grid,
    item: Option<&str>,
) -> Vec<CurveSeries> {
    let thresholds = grid.thresholds();
    let mut out = Vec::new();
    let mut items = vec![("all".to_string(), "all")];
    if let Some(i) = item {
        items.push((slug(i), i));
    }
    for (slug, item) in items {
        let (b, c) = (errors_of(baseline, task, item), errors_of(candidate, task, item));
        if b.is_empty() || c.is_empty() {
            continue;
        }
        let key = MetricKind::for_task(task).key();
        let stem = if item == "all" { key.to_string() } else { format!("{key}_{slug}") };
        for (role, errors) in [("baseline", b), ("candidate", c)] {
            out.push(CurveSeries {
                name: format!("{stem}_{role}"),
                thresholds: thresholds.clone(),
                percent: success_rate_curve(&errors, &thresholds),
            });
        }
    }
    out
}

/// File-name form of a part or joint name, e.g. `Upper R.Arm` → `upper_r_arm`.
pub fn slug(name: &str) -> String {
    let mut out = String::new();
    for c in name.chars() {
        if c.is_ascii_alphanumeric() {
            out.push(c.to_ascii_lowercase());
        } else if !out.ends_with('_') {
            out.push('_');
        }
    }
    out.trim_matches('_').to_string()
}
