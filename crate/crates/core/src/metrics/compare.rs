use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::report::MetricsReport;
use crate::error::{Error, Result};
use crate::types::{Joint, Part, TaskKind, TaskSet};

/// Whether larger or smaller values are better.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    HigherIsBetter,
    LowerIsBetter,
}

/// The headline metric of each task.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MetricKind {
    Iou,
    Pckh,
    DepthRmse,
    Mjd,
}

impl MetricKind {
    pub fn for_task(task: TaskKind) -> Self {
        match task {
            TaskKind::PartSeg => MetricKind::Iou,
            TaskKind::Pose2D => MetricKind::Pckh,
            TaskKind::Depth => MetricKind::DepthRmse,
            TaskKind::Pose3D => MetricKind::Mjd,
        }
    }

    pub fn task(self) -> TaskKind {
        match self {
            MetricKind::Iou => TaskKind::PartSeg,
            MetricKind::Pckh => TaskKind::Pose2D,
            MetricKind::DepthRmse => TaskKind::Depth,
            MetricKind::Mjd => TaskKind::Pose3D,
        }
    }

    pub fn direction(self) -> Direction {
        match self {
            MetricKind::Iou | MetricKind::Pckh => Direction::HigherIsBetter,
            MetricKind::DepthRmse | MetricKind::Mjd => Direction::LowerIsBetter,
        }
    }

    /// Key used in report CSV rows.
    pub fn key(self) -> &'static str {
        match self {
            MetricKind::Iou => "iou",
            MetricKind::Pckh => "pckh",
            MetricKind::DepthRmse => "depth_rmse",
            MetricKind::Mjd => "mjd",
        }
    }

    /// Corner label of the wide comparison table.
    pub fn header(self) -> &'static str {
        match self {
            MetricKind::Iou => "IOU",
            MetricKind::Pckh => "PCKh",
            MetricKind::DepthRmse => "RMSE",
            MetricKind::Mjd => "MJD (mm)",
        }
    }

    /// Signed improvement of `candidate` over `baseline`; positive is better.
    pub fn improvement(self, baseline: f64, candidate: f64) -> f64 {
        match self.direction() {
            Direction::HigherIsBetter => candidate - baseline,
            Direction::LowerIsBetter => baseline - candidate,
        }
    }

    /// Table rows `(name, value)` of this metric in `report`.
    fn rows(self, report: &MetricsReport, include_background: bool) -> Option<Vec<(String, Option<f64>)>> {
        match self {
            MetricKind::Iou => report.segmentation.as_ref().map(|s| {
                let mut rows: Vec<(String, Option<f64>)> = Part::ALL
                    .iter()
                    .zip(&s.per_part)
                    .filter(|(p, _)| include_background || !p.is_background())
                    .map(|(p, v)| (p.name().to_string(), *v))
                    .collect();
                let mean = if include_background { s.mean_with_background } else { s.mean_without_background };
                rows.push(("Mean".to_string(), mean));
                rows
            }),
            MetricKind::Pckh => report.pose2d.as_ref().map(|p| {
                let mut rows: Vec<(String, Option<f64>)> =
                    Joint::ALL.iter().zip(&p.per_joint).map(|(j, v)| (j.name().to_string(), *v)).collect();
                rows.push(("Mean".to_string(), p.mean));
                rows
            }),
            MetricKind::DepthRmse => report.depth.as_ref().map(|d| {
                let mut rows: Vec<(String, Option<f64>)> =
                    Part::ALL.iter().zip(&d.per_part).map(|(p, v)| (p.name().to_string(), *v)).collect();
                rows.push(("Mean Body Parts".to_string(), d.mean_body_parts));
                rows.push(("Mean Full Body".to_string(), d.mean_full_body));
                rows
            }),
            MetricKind::Mjd => report.pose3d.as_ref().map(|p| {
                let mut rows: Vec<(String, Option<f64>)> =
                    p.joints.iter().zip(&p.per_joint).map(|(j, v)| (j.name().to_string(), *v)).collect();
                rows.push(("Mean".to_string(), p.mean));
                rows
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableColumn {
    /// Canonical task-set string, when the column comes from a task set.
    pub task_set: Option<String>,
    pub label: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TableCell {
    pub value: Option<f64>,
    pub best: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub name: String,
    pub cells: Vec<TableCell>,
}

/// Wide table: one column per task combination, one row per part or joint
/// followed by the mean row(s). Per-row best cells are marked (all of them on ties).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTable {
    pub metric: MetricKind,
    pub columns: Vec<TableColumn>,
    pub rows: Vec<TableRow>,
}

impl ComparisonTable {
    /// Builds a table from literal values (`rows[i].1[j]` is row `i`, column `j`).
    pub fn from_values(metric: MetricKind, columns: Vec<TableColumn>, rows: Vec<(String, Vec<Option<f64>>)>) -> Result<Self> {
        let mut out = Vec::with_capacity(rows.len());
        for (name, values) in rows {
            if values.len() != columns.len() {
                return Err(Error::ShapeMismatch {
                    expected: format!("{} columns", columns.len()),
                    actual: format!("{} values in row {name}", values.len()),
                });
            }
            let best = values
                .iter()
                .flatten()
                .copied()
                .reduce(|a, b| match metric.direction() {
                    Direction::HigherIsBetter => a.max(b),
                    Direction::LowerIsBetter => a.min(b),
                });
            let cells = values
                .into_iter()
                .map(|value| TableCell { value, best: value.is_some() && value == best })
                .collect();
            out.push(TableRow { name, cells });
        }
        Ok(Self { metric, columns, rows: out })
    }

    /// Builds the table of `metric` from one report per task set.
    pub fn from_reports(metric: MetricKind, reports: &[(TaskSet, &MetricsReport)], include_background: bool) -> Result<Self> {
        let mut columns = Vec::new();
        let mut per_column = Vec::new();
        for (ts, report) in reports {
            let rows = metric.rows(report, include_background).ok_or_else(|| {
                Error::InvalidParameter(format!("report for {ts} has no {} section", metric.key()))
            })?;
            columns.push(TableColumn { task_set: Some(ts.to_string()), label: ts.paper_label() });
            per_column.push(rows);
        }
        let names: Vec<String> = per_column.first().map(|r| r.iter().map(|(n, _)| n.clone()).collect()).unwrap_or_default();
        let rows = names
            .iter()
            .enumerate()
            .map(|(i, name)| {
                let values = per_column
                    .iter()
                    .map(|col| col.get(i).filter(|(n, _)| n == name).and_then(|(_, v)| *v))
                    .collect();
                (name.clone(), values)
            })
            .collect();
        Self::from_values(metric, columns, rows)
    }

    pub fn row(&self, name: &str) -> Option<&TableRow> {
        self.rows.iter().find(|r| r.name == name)
    }

    /// Labels of the best columns of row `name`.
    pub fn best_columns(&self, name: &str) -> Vec<&str> {
        self.row(name)
            .map(|r| {
                r.cells
                    .iter()
                    .zip(&self.columns)
                    .filter(|(c, _)| c.best)
                    .map(|(_, col)| col.label.as_str())
                    .collect()
            })
            .unwrap_or_default()
    }

    /// Wide CSV: header `<metric>,<column labels...>`, then one line per row.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(self.metric.header());
        for c in &self.columns {
            out.push(',');
            out.push_str(&c.label);
        }
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.name);
            for cell in &row.cells {
                out.push(',');
                match cell.value {
                    Some(v) => out.push_str(&format!("{v:.4}")),
                    None => out.push_str("NA"),
                }
            }
            out.push('\n');
        }
        out
    }

    /// Parses a wide CSV as written by [`ComparisonTable::to_csv`].
    ///
    /// A trailing `*` on a cell (a hand-marked best value) is accepted and
    /// ignored; best flags are always recomputed from the numbers.
    pub fn from_csv(metric: MetricKind, text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| Error::Parse("empty table".into()))?;
        let columns: Vec<TableColumn> = header
            .split(',')
            .skip(1)
            .map(|label| {
                let label = label.trim().to_string();
                let task_set = TaskSet::enumerate().into_iter().find(|t| t.paper_label() == label).map(|t| t.to_string());
                TableColumn { task_set, label }
            })
            .collect();
        let mut rows = Vec::new();
        for line in lines {
            let mut fields = line.split(',');
            let name = fields.next().unwrap_or_default().trim().to_string();
            let values = fields
                .map(|f| {
                    let f = f.trim().trim_end_matches('*');
                    if f == "NA" {
                        Ok(None)
                    } else {
                        f.parse::<f64>().map(Some).map_err(|e| Error::Parse(format!("bad cell {f:?} in row {name}: {e}")))
                    }
                })
                .collect::<Result<Vec<_>>>()?;
            rows.push((name, values));
        }
        Self::from_values(metric, columns, rows)
    }

    /// Values of column `label`, in row order.
    pub fn column(&self, label: &str) -> Option<Vec<Option<f64>>> {
        let idx = self.columns.iter().position(|c| c.label == label)?;
        Some(self.rows.iter().map(|r| r.cells[idx].value).collect())
    }

    pub fn to_json(&self) -> Value {
        json!({
            "metric": self.metric.key(),
            "header": self.metric.header(),
            "higher_is_better": self.metric.direction() == Direction::HigherIsBetter,
            "columns": self.columns,
            "rows": self.rows.iter().map(|r| json!({
                "name": r.name,
                "cells": r.cells.iter().map(|c| json!({ "value": c.value, "best": c.best })).collect::<Vec<_>>(),
            })).collect::<Vec<_>>(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImprovementEntry {
    pub metric: MetricKind,
    pub name: String,
    pub baseline: f64,
    pub candidate: f64,
    /// Positive when the candidate is better.
    pub delta: f64,
}

/// Per-part and per-joint signed improvements of one report over another.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct ImprovementMap {
    pub entries: Vec<ImprovementEntry>,
}

impl ImprovementMap {
    pub fn get(&self, metric: MetricKind, name: &str) -> Option<f64> {
        self.entries.iter().find(|e| e.metric == metric && e.name == name).map(|e| e.delta)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("metric,part_or_joint,baseline,candidate,delta\n");
        for e in &self.entries {
            out.push_str(&format!("{},{},{},{},{}\n", e.metric.key(), e.name, e.baseline, e.candidate, e.delta));
        }
        out
    }

    /// `{ metric: { part_or_joint: delta } }` for external plotting.
    pub fn to_json(&self) -> Value {
        let mut map = serde_json::Map::new();
        for e in &self.entries {
            let inner = map.entry(e.metric.key().to_string()).or_insert_with(|| json!({}));
            inner[e.name.as_str()] = json!(e.delta);
        }
        Value::Object(map)
    }
}

/// Improvement of `candidate` over `baseline` on every metric both reports
/// share. Background is kept in the IOU rows.
pub fn improvement_map(baseline: &MetricsReport, candidate: &MetricsReport) -> ImprovementMap {
    let mut entries = Vec::new();
    for metric in [MetricKind::Iou, MetricKind::Pckh, MetricKind::DepthRmse, MetricKind::Mjd] {
        let (Some(base), Some(cand)) = (metric.rows(baseline, true), metric.rows(candidate, true)) else {
            continue;
        };
        for (name, b) in &base {
            let Some(c) = cand.iter().find(|(n, _)| n == name).and_then(|(_, v)| *v) else {
                continue;
            };
            if let Some(b) = b {
                entries.push(ImprovementEntry {
                    metric,
                    name: name.clone(),
                    baseline: *b,
                    candidate: c,
                    delta: metric.improvement(*b, c),
                });
            }
        }
    }
    ImprovementMap { entries }
}
