//! Evaluation metrics: per-class IOU, PCKh, MJD, depth-bin RMSE and
//! success-rate curves, plus report aggregation and table comparison.
//!
//! IOU and PCKh are reported as percentages in `[0, 100]`.

mod compare;
mod report;

pub use compare::{
    improvement_map, ComparisonTable, Direction, ImprovementEntry, ImprovementMap, MetricKind, TableCell,
    TableColumn, TableRow,
};
pub use report::{
    evaluate_frame, DepthFrame, DepthMetrics, FrameErrors, FrameRecord, MetricsAccumulator, MetricsReport, Pose2dMetrics,
    Pose3dJoints, Pose3dMetrics, SegmentationMetrics,
};

use ndarray::ArrayView2;

use crate::error::{Error, Result};
use crate::types::Joint;

fn check_dims<A, B>(a: &ArrayView2<A>, b: &ArrayView2<B>) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::ShapeMismatch { expected: format!("{:?}", b.dim()), actual: format!("{:?}", a.dim()) });
    }
    Ok(())
}

/// Intersection and union pixel counts per class.
pub fn class_counts(pred: ArrayView2<u8>, gt: ArrayView2<u8>, n_classes: usize) -> Result<Vec<(u64, u64)>> {
    check_dims(&pred, &gt)?;
    let mut counts = vec![(0u64, 0u64); n_classes];
    for (&p, &g) in pred.iter().zip(gt.iter()) {
        let (p, g) = (p as usize, g as usize);
        for label in [p, g] {
            if label >= n_classes {
                return Err(Error::LabelOutOfRange { label, classes: n_classes });
            }
        }
        if p == g {
            counts[p].0 += 1;
            counts[p].1 += 1;
        } else {
            counts[p].1 += 1;
            counts[g].1 += 1;
        }
    }
    Ok(counts)
}

fn iou_from_counts(inter: u64, union: u64) -> Option<f64> {
    (union > 0).then(|| 100.0 * inter as f64 / union as f64)
}

/// Per-class IOU in percent; `None` for classes absent from both maps.
pub fn iou_per_class(pred: ArrayView2<u8>, gt: ArrayView2<u8>, n_classes: usize) -> Result<Vec<Option<f64>>> {
    Ok(class_counts(pred, gt, n_classes)?
        .into_iter()
        .map(|(i, u)| iou_from_counts(i, u))
        .collect())
}

/// Arithmetic mean of the present values, `None` if there are none.
pub fn mean_present(values: &[Option<f64>]) -> Option<f64> {
    let present: Vec<f64> = values.iter().flatten().copied().collect();
    (!present.is_empty()).then(|| present.iter().sum::<f64>() / present.len() as f64)
}

/// Mean IOU over present classes, optionally dropping background (index 0).
pub fn mean_iou(per_class: &[Option<f64>], include_background: bool) -> Option<f64> {
    let start = if include_background { 0 } else { 1 };
    mean_present(per_class.get(start..).unwrap_or(&[]))
}

/// Distance between head top and upper neck.
pub fn head_length(gt: &[[f64; 2]]) -> f64 {
    let a = gt[Joint::HeadTop.index()];
    let b = gt[Joint::UpperNeck.index()];
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

/// Per-joint correctness: error ≤ `alpha · head_len` (inclusive).
pub fn pckh(pred: &[[f64; 2]], gt: &[[f64; 2]], head_len: f64, alpha: f64) -> Result<Vec<bool>> {
    if !(head_len > 0.0) || !head_len.is_finite() {
        return Err(Error::DegenerateHeadLength(head_len));
    }
    if pred.len() != gt.len() {
        return Err(Error::ShapeMismatch { expected: gt.len().to_string(), actual: pred.len().to_string() });
    }
    let threshold = alpha * head_len;
    Ok(pred
        .iter()
        .zip(gt)
        .map(|(p, g)| ((p[0] - g[0]).powi(2) + (p[1] - g[1]).powi(2)).sqrt() <= threshold)
        .collect())
}

/// Euclidean 3D error per joint of `subset`, in the camera frame, no alignment.
pub fn mjd(pred: &[[f64; 3]], gt: &[[f64; 3]], subset: &[Joint]) -> Vec<f64> {
    subset
        .iter()
        .map(|j| {
            let (p, g) = (pred[j.index()], gt[j.index()]);
            ((p[0] - g[0]).powi(2) + (p[1] - g[1]).powi(2) + (p[2] - g[2]).powi(2)).sqrt()
        })
        .collect()
}

/// RMSE between bin maps over `region` (or the whole map).
pub fn depth_rmse(pred_bins: ArrayView2<u8>, gt_bins: ArrayView2<u8>, region: Option<ArrayView2<bool>>) -> Result<f64> {
    check_dims(&pred_bins, &gt_bins)?;
    if let Some(r) = &region {
        check_dims(r, &gt_bins)?;
    }
    let mut sum = 0.0;
    let mut n = 0usize;
    for ((idx, &p), &g) in pred_bins.indexed_iter().zip(gt_bins.iter()) {
        if region.as_ref().map_or(true, |r| r[idx]) {
            let d = p as f64 - g as f64;
            sum += d * d;
            n += 1;
        }
    }
    if n == 0 {
        return Err(Error::EmptyRegion);
    }
    Ok((sum / n as f64).sqrt())
}

/// Percentage of frames whose error is strictly below each threshold.
pub fn success_rate_curve(errors: &[f64], thresholds: &[f64]) -> Vec<f64> {
    if errors.is_empty() {
        return vec![0.0; thresholds.len()];
    }
    let mut sorted: Vec<f64> = errors.to_vec();
    sorted.sort_by(f64::total_cmp);
    thresholds
        .iter()
        .map(|&t| {
            let below = sorted.partition_point(|e| *e < t);
            100.0 * below as f64 / sorted.len() as f64
        })
        .collect()
}

/// `steps` evenly spaced thresholds from `lo` to `hi` inclusive.
pub fn threshold_grid(lo: f64, hi: f64, steps: usize) -> Vec<f64> {
    match steps {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..steps).map(|i| lo + (hi - lo) * i as f64 / (steps - 1) as f64).collect(),
    }
}
