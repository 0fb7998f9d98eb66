use ndarray::Array2;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{class_counts, depth_rmse, iou_from_counts, mean_iou, mean_present};
use crate::codecs::{decode_depth, decode_parts, decode_pose2d, decode_pose3d, depth_bins, downsample_labels};
use crate::error::{Error, Result};
use crate::targets::{fit_quantizers, TargetConfig, TaskTensors};
use crate::types::{Joint, Part, Sample, TaskKind, TaskSet, NUM_JOINTS, NUM_PARTS};

/// PCKh threshold as a fraction of the head length.
pub const PCKH_ALPHA: f64 = 0.5;

/// Joint list used for 3D pose metrics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Pose3dJoints {
    /// All joints except the pelvis, as in the published 3D tables.
    #[default]
    WithoutPelvis,
    All16,
}

impl Pose3dJoints {
    pub fn joints(self) -> Vec<Joint> {
        match self {
            Pose3dJoints::WithoutPelvis => Joint::without_pelvis(),
            Pose3dJoints::All16 => Joint::ALL.to_vec(),
        }
    }
}

/// Depth errors of one frame, in bins.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthFrame {
    /// Per ground-truth part region; `None` when the part is absent.
    pub per_part: Vec<Option<f64>>,
    pub full: f64,
}

/// Everything the accumulator keeps about one evaluated frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameRecord {
    /// Unique frame key; aggregation order is by key.
    pub key: u64,
    /// Per-class `(intersection, union)` pixel counts.
    pub seg: Option<Vec<(u64, u64)>>,
    /// Per joint `(correct, error / head length)`; `None` when not scored.
    pub pose2d: Option<Vec<Option<(bool, f64)>>>,
    pub depth: Option<DepthFrame>,
    /// Per joint (all sixteen) error in mm; `None` for invisible joints.
    pub pose3d: Option<Vec<Option<f64>>>,
}

/// Per-frame scalar errors used for success-rate curves.
///
/// Pose2D: mean error over head length. PartSeg: 100 − mean IOU without
/// background. Depth: full-image RMSE in bins. Pose3D: MJD in mm.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameErrors {
    pub key: u64,
    pub task: TaskKind,
    /// `"all"` for the frame summary, otherwise a part or joint name.
    pub item: String,
    pub error: f64,
}

impl FrameRecord {
    pub fn errors(&self, pose3d_joints: Pose3dJoints) -> Vec<FrameErrors> {
        let mut out = Vec::new();
        let mut push = |task, item: &str, error| {
            out.push(FrameErrors { key: self.key, task, item: item.to_string(), error })
        };
        if let Some(counts) = &self.seg {
            let per: Vec<Option<f64>> = counts.iter().map(|(i, u)| iou_from_counts(*i, *u)).collect();
            if let Some(m) = mean_iou(&per, false) {
                push(TaskKind::PartSeg, "all", 100.0 - m);
            }
            for (part, v) in Part::ALL.iter().zip(&per) {
                if let Some(v) = v {
                    push(TaskKind::PartSeg, part.name(), 100.0 - v);
                }
            }
        }
        if let Some(joints) = &self.pose2d {
            let errs: Vec<Option<f64>> = joints.iter().map(|j| j.map(|(_, e)| e)).collect();
            if let Some(m) = mean_present(&errs) {
                push(TaskKind::Pose2D, "all", m);
            }
            for (joint, e) in Joint::ALL.iter().zip(&errs) {
                if let Some(e) = e {
                    push(TaskKind::Pose2D, joint.name(), *e);
                }
            }
        }
        if let Some(d) = &self.depth {
            push(TaskKind::Depth, "all", d.full);
            for (part, v) in Part::ALL.iter().zip(&d.per_part) {
                if let Some(v) = v {
                    push(TaskKind::Depth, part.name(), *v);
                }
            }
        }
        if let Some(p) = &self.pose3d {
            let subset = pose3d_joints.joints();
            let errs: Vec<Option<f64>> = subset.iter().map(|j| p[j.index()]).collect();
            if let Some(m) = mean_present(&errs) {
                push(TaskKind::Pose3D, "all", m);
            }
            for (joint, e) in subset.iter().zip(&errs) {
                if let Some(e) = e {
                    push(TaskKind::Pose3D, joint.name(), *e);
                }
            }
        }
        out
    }
}

/// Scores one frame's predictions against its ground truth.
///
/// Predictions are raw network outputs (`[C, R, R]` per task); quantizers
/// come from `cfg.quantizer` applied to the ground-truth sample.
pub fn evaluate_frame(
    key: u64,
    sample: &Sample,
    prediction: &TaskTensors,
    tasks: TaskSet,
    cfg: &TargetConfig,
) -> Result<FrameRecord> {
    let need = |task: TaskKind| prediction.get(task).ok_or_else(|| Error::MissingTarget(task.to_string()));
    let input = sample.width();
    let r = cfg.resolution;
    let (depth_q, pose_q) = fit_quantizers(sample, cfg.bins, cfg.quantizer)?;
    let gt_labels = downsample_labels(sample.part_mask.view(), r)?;

    let seg = if tasks.contains(TaskKind::PartSeg) {
        let pred = decode_parts(need(TaskKind::PartSeg)?.view());
        Some(class_counts(pred.view(), gt_labels.view(), NUM_PARTS)?)
    } else {
        None
    };

    let pose2d = if tasks.contains(TaskKind::Pose2D) {
        let kp = decode_pose2d(need(TaskKind::Pose2D)?.view(), input)?;
        let head_visible = sample.visible[Joint::HeadTop.index()] && sample.visible[Joint::UpperNeck.index()];
        let head = super::head_length(&sample.joints2d);
        Some(
            (0..NUM_JOINTS)
                .map(|j| {
                    if !(sample.visible[j] && head_visible && head > 0.0) {
                        return None;
                    }
                    let (p, g) = (kp[j].xy, sample.joints2d[j]);
                    let err = ((p[0] - g[0]).powi(2) + (p[1] - g[1]).powi(2)).sqrt();
                    Some((err <= PCKH_ALPHA * head, err / head))
                })
                .collect(),
        )
    } else {
        None
    };

    let depth = if tasks.contains(TaskKind::Depth) {
        let pred = decode_depth(need(TaskKind::Depth)?.view(), &depth_q)?.bins;
        let gt = depth_bins(sample.depth.view(), sample.part_mask.view(), &depth_q, r)?;
        let per_part = (0..NUM_PARTS)
            .map(|p| {
                let region: Array2<bool> = gt_labels.mapv(|l| l as usize == p);
                depth_rmse(pred.view(), gt.view(), Some(region.view())).ok()
            })
            .collect();
        let full = depth_rmse(pred.view(), gt.view(), None)?;
        Some(DepthFrame { per_part, full })
    } else {
        None
    };

    let pose3d = if tasks.contains(TaskKind::Pose3D) {
        let dec = decode_pose3d(need(TaskKind::Pose3D)?.view(), &sample.intrinsics, input, &pose_q)?;
        Some(
            (0..NUM_JOINTS)
                .map(|j| {
                    sample.visible[j].then(|| {
                        let (p, g) = (dec[j], sample.joints3d[j]);
                        ((p[0] - g[0]).powi(2) + (p[1] - g[1]).powi(2) + (p[2] - g[2]).powi(2)).sqrt()
                    })
                })
                .collect(),
        )
    } else {
        None
    };

    Ok(FrameRecord { key, seg, pose2d, depth, pose3d })
}

/// Single-writer collection of frame records with an order-independent merge.
///
/// IOU and PCKh are micro-averaged (global pixel / joint counts); depth RMSE
/// and MJD average per-frame values. Sums run in frame-key order, so the
/// final report does not depend on how records were sharded or merged.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsAccumulator {
    tasks: TaskSet,
    pose3d_joints: Pose3dJoints,
    records: Vec<FrameRecord>,
}

impl MetricsAccumulator {
    pub fn new(tasks: TaskSet, pose3d_joints: Pose3dJoints) -> Self {
        Self { tasks, pose3d_joints, records: Vec::new() }
    }

    pub fn add(&mut self, record: FrameRecord) {
        self.records.push(record);
    }

    pub fn merge(mut self, other: MetricsAccumulator) -> MetricsAccumulator {
        self.records.extend(other.records);
        self
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    fn sorted(&self) -> Vec<&FrameRecord> {
        let mut recs: Vec<&FrameRecord> = self.records.iter().collect();
        recs.sort_by_key(|r| r.key);
        recs
    }

    /// Per-frame errors in key order.
    pub fn frame_errors(&self) -> Vec<FrameErrors> {
        self.sorted().into_iter().flat_map(|r| r.errors(self.pose3d_joints)).collect()
    }

    pub fn finalize(&self) -> MetricsReport {
        let recs = self.sorted();
        let mut report = MetricsReport::empty(self.tasks, recs.len());

        if self.tasks.contains(TaskKind::PartSeg) {
            let mut totals = vec![(0u64, 0u64); NUM_PARTS];
            for counts in recs.iter().filter_map(|r| r.seg.as_ref()) {
                for (t, c) in totals.iter_mut().zip(counts) {
                    t.0 += c.0;
                    t.1 += c.1;
                }
            }
            let per_part = totals.iter().map(|(i, u)| iou_from_counts(*i, *u)).collect();
            report.segmentation = Some(SegmentationMetrics::from_per_part(per_part));
        }

        if self.tasks.contains(TaskKind::Pose2D) {
            let mut counts = vec![(0u64, 0u64); NUM_JOINTS];
            for joints in recs.iter().filter_map(|r| r.pose2d.as_ref()) {
                for (c, j) in counts.iter_mut().zip(joints) {
                    if let Some((ok, _)) = j {
                        c.0 += *ok as u64;
                        c.1 += 1;
                    }
                }
            }
            let per_joint = counts
                .iter()
                .map(|(ok, n)| (*n > 0).then(|| 100.0 * *ok as f64 / *n as f64))
                .collect();
            report.pose2d = Some(Pose2dMetrics::from_per_joint(per_joint));
        }

        if self.tasks.contains(TaskKind::Depth) {
            let frames: Vec<&DepthFrame> = recs.iter().filter_map(|r| r.depth.as_ref()).collect();
            let per_part = (0..NUM_PARTS)
                .map(|p| {
                    let vals: Vec<Option<f64>> = frames.iter().map(|f| f.per_part[p]).collect();
                    mean_present(&vals)
                })
                .collect();
            let full: Vec<Option<f64>> = frames.iter().map(|f| Some(f.full)).collect();
            report.depth = Some(DepthMetrics::from_rows(per_part, mean_present(&full)));
        }

        if self.tasks.contains(TaskKind::Pose3D) {
            let joints = self.pose3d_joints.joints();
            let per_joint = joints
                .iter()
                .map(|j| {
                    let vals: Vec<Option<f64>> =
                        recs.iter().filter_map(|r| r.pose3d.as_ref()).map(|p| p[j.index()]).collect();
                    mean_present(&vals)
                })
                .collect();
            report.pose3d = Some(Pose3dMetrics::from_per_joint(joints, per_joint));
        }
        report
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentationMetrics {
    /// IOU per part in [`Part`] order; `None` if the part never appeared.
    pub per_part: Vec<Option<f64>>,
    pub mean_with_background: Option<f64>,
    pub mean_without_background: Option<f64>,
}

impl SegmentationMetrics {
    pub fn from_per_part(per_part: Vec<Option<f64>>) -> Self {
        let mean_with_background = mean_iou(&per_part, true);
        let mean_without_background = mean_iou(&per_part, false);
        Self { per_part, mean_with_background, mean_without_background }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pose2dMetrics {
    /// PCKh per joint in [`Joint`] order.
    pub per_joint: Vec<Option<f64>>,
    pub mean: Option<f64>,
}

impl Pose2dMetrics {
    pub fn from_per_joint(per_joint: Vec<Option<f64>>) -> Self {
        let mean = mean_present(&per_joint);
        Self { per_joint, mean }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DepthMetrics {
    /// RMSE in bins per ground-truth part region, background included.
    pub per_part: Vec<Option<f64>>,
    /// Mean over all part rows, background row included.
    pub mean_body_parts: Option<f64>,
    /// Mean per-frame RMSE over the whole image.
    pub mean_full_body: Option<f64>,
}

impl DepthMetrics {
    pub fn from_rows(per_part: Vec<Option<f64>>, mean_full_body: Option<f64>) -> Self {
        let mean_body_parts = mean_present(&per_part);
        Self { per_part, mean_body_parts, mean_full_body }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pose3dMetrics {
    pub joints: Vec<Joint>,
    /// MJD in mm, aligned with `joints`.
    pub per_joint: Vec<Option<f64>>,
    pub mean: Option<f64>,
}

impl Pose3dMetrics {
    pub fn from_per_joint(joints: Vec<Joint>, per_joint: Vec<Option<f64>>) -> Self {
        let mean = mean_present(&per_joint);
        Self { joints, per_joint, mean }
    }
}

/// Metrics of one trained model. Sections of inactive tasks are `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub task_combo: TaskSet,
    pub samples: usize,
    pub segmentation: Option<SegmentationMetrics>,
    pub pose2d: Option<Pose2dMetrics>,
    pub depth: Option<DepthMetrics>,
    pub pose3d: Option<Pose3dMetrics>,
}

const CSV_HEADER: &str = "task_combo,metric,part_or_joint,value,unit";
const CONVENTIONS: [&str; 4] = [
    "iou and pckh are micro-averaged over frames (global pixel and joint counts), in percent",
    "depth_rmse is in depth-bin units, averaged per frame over ground-truth part regions; Mean Body Parts averages every part row including Background",
    "mjd is in mm in the camera frame without alignment, averaged per frame",
    "classes or joints absent from both prediction and ground truth are reported as NA and excluded from means",
];

fn fmt_value(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |v| format!("{v}"))
}

fn parse_value(s: &str) -> Result<Option<f64>> {
    if s == "NA" {
        return Ok(None);
    }
    s.parse::<f64>().map(Some).map_err(|e| Error::Parse(format!("bad value {s:?}: {e}")))
}

impl MetricsReport {
    pub fn empty(task_combo: TaskSet, samples: usize) -> Self {
        Self { task_combo, samples, segmentation: None, pose2d: None, depth: None, pose3d: None }
    }

    /// `(metric, part_or_joint, value, unit)` rows in table order.
    pub fn rows(&self) -> Vec<(&'static str, String, Option<f64>, &'static str)> {
        let mut rows = Vec::new();
        if let Some(s) = &self.segmentation {
            for (p, v) in Part::ALL.iter().zip(&s.per_part) {
                rows.push(("iou", p.name().to_string(), *v, "percent"));
            }
            rows.push(("iou", "Mean".to_string(), s.mean_with_background, "percent"));
            rows.push(("iou", "Mean (excl. Background)".to_string(), s.mean_without_background, "percent"));
        }
        if let Some(p) = &self.pose2d {
            for (j, v) in Joint::ALL.iter().zip(&p.per_joint) {
                rows.push(("pckh", j.name().to_string(), *v, "percent"));
            }
            rows.push(("pckh", "Mean".to_string(), p.mean, "percent"));
        }
        if let Some(d) = &self.depth {
            for (p, v) in Part::ALL.iter().zip(&d.per_part) {
                rows.push(("depth_rmse", p.name().to_string(), *v, "bins"));
            }
            rows.push(("depth_rmse", "Mean Body Parts".to_string(), d.mean_body_parts, "bins"));
            rows.push(("depth_rmse", "Mean Full Body".to_string(), d.mean_full_body, "bins"));
        }
        if let Some(p) = &self.pose3d {
            for (j, v) in p.joints.iter().zip(&p.per_joint) {
                rows.push(("mjd", j.name().to_string(), *v, "mm"));
            }
            rows.push(("mjd", "Mean".to_string(), p.mean, "mm"));
        }
        rows
    }

    /// CSV with `#`-prefixed convention notes ahead of the header.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for note in CONVENTIONS {
            out.push_str("# ");
            out.push_str(note);
            out.push('\n');
        }
        out.push_str(CSV_HEADER);
        out.push('\n');
        let combo = self.task_combo.to_string();
        out.push_str(&format!("{combo},samples,all,{},count\n", self.samples));
        for (metric, item, value, unit) in self.rows() {
            out.push_str(&format!("{combo},{metric},{item},{},{unit}\n", fmt_value(value)));
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.starts_with('#') && !l.trim().is_empty());
        match lines.next() {
            Some(h) if h.trim() == CSV_HEADER => {}
            other => return Err(Error::Parse(format!("unexpected header {other:?}"))),
        }
        let mut combo: Option<TaskSet> = None;
        let mut samples = 0usize;
        let mut seg_rows: Vec<Option<f64>> = Vec::new();
        let mut seg_means = (None, None);
        let mut pck_rows: Vec<Option<f64>> = Vec::new();
        let mut pck_mean = None;
        let mut depth_rows: Vec<Option<f64>> = Vec::new();
        let mut depth_means = (None, None);
        let mut mjd_joints: Vec<Joint> = Vec::new();
        let mut mjd_rows: Vec<Option<f64>> = Vec::new();
        let mut mjd_mean = None;
        let (mut has_seg, mut has_pck, mut has_depth, mut has_mjd) = (false, false, false, false);

        for line in lines {
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 5 {
                return Err(Error::Parse(format!("expected 5 fields in {line:?}")));
            }
            let ts: TaskSet = fields[0].parse()?;
            if *combo.get_or_insert(ts) != ts {
                return Err(Error::Parse("mixed task combos in one report".into()));
            }
            let (metric, item) = (fields[1], fields[2]);
            match metric {
                "samples" => {
                    samples = fields[3].parse().map_err(|e| Error::Parse(format!("samples: {e}")))?;
                }
                "iou" => {
                    has_seg = true;
                    let v = parse_value(fields[3])?;
                    match item {
                        "Mean" => seg_means.0 = v,
                        "Mean (excl. Background)" => seg_means.1 = v,
                        name => {
                            let p: Part = name.parse()?;
                            if p.index() != seg_rows.len() {
                                return Err(Error::Parse(format!("part {name} out of order")));
                            }
                            seg_rows.push(v);
                        }
                    }
                }
                "pckh" => {
                    has_pck = true;
                    let v = parse_value(fields[3])?;
                    if item == "Mean" {
                        pck_mean = v;
                    } else {
                        let j: Joint = item.parse()?;
                        if j.index() != pck_rows.len() {
                            return Err(Error::Parse(format!("joint {item} out of order")));
                        }
                        pck_rows.push(v);
                    }
                }
                "depth_rmse" => {
                    has_depth = true;
                    let v = parse_value(fields[3])?;
                    match item {
                        "Mean Body Parts" => depth_means.0 = v,
                        "Mean Full Body" => depth_means.1 = v,
                        name => {
                            let p: Part = name.parse()?;
                            if p.index() != depth_rows.len() {
                                return Err(Error::Parse(format!("part {name} out of order")));
                            }
                            depth_rows.push(v);
                        }
                    }
                }
                "mjd" => {
                    has_mjd = true;
                    let v = parse_value(fields[3])?;
                    if item == "Mean" {
                        mjd_mean = v;
                    } else {
                        mjd_joints.push(item.parse()?);
                        mjd_rows.push(v);
                    }
                }
                other => return Err(Error::Parse(format!("unknown metric {other:?}"))),
            }
        }
        let combo = combo.ok_or_else(|| Error::Parse("empty report".into()))?;
        let mut report = MetricsReport::empty(combo, samples);
        if has_seg {
            report.segmentation = Some(SegmentationMetrics {
                per_part: seg_rows,
                mean_with_background: seg_means.0,
                mean_without_background: seg_means.1,
            });
        }
        if has_pck {
            report.pose2d = Some(Pose2dMetrics { per_joint: pck_rows, mean: pck_mean });
        }
        if has_depth {
            report.depth = Some(DepthMetrics {
                per_part: depth_rows,
                mean_body_parts: depth_means.0,
                mean_full_body: depth_means.1,
            });
        }
        if has_mjd {
            report.pose3d = Some(Pose3dMetrics { joints: mjd_joints, per_joint: mjd_rows, mean: mjd_mean });
        }
        Ok(report)
    }

    /// JSON document with one table per metric, rows in table order.
    pub fn to_json(&self) -> Value {
        let mut tables = serde_json::Map::new();
        for (metric, item, value, unit) in self.rows() {
            let entry = tables
                .entry(metric.to_string())
                .or_insert_with(|| json!({ "unit": unit, "rows": [] }));
            entry["rows"].as_array_mut().expect("rows array").push(json!({ "name": item, "value": value }));
        }
        json!({
            "task_combo": self.task_combo.to_string(),
            "label": self.task_combo.paper_label(),
            "samples": self.samples,
            "conventions": CONVENTIONS,
            "tables": tables,
        })
    }

    /// Value of a `(metric, part_or_joint)` row.
    pub fn value(&self, metric: &str, item: &str) -> Option<f64> {
        self.rows().into_iter().find(|(m, i, _, _)| *m == metric && i == item).and_then(|(_, _, v, _)| v)
    }
}
