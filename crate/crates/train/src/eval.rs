use hgmt_core::codecs::HeatmapParams;
use hgmt_core::metrics::{evaluate_frame, MetricsAccumulator, MetricsReport, Pose3dJoints};
use hgmt_core::targets::{QuantizerPolicy, TargetConfig, TaskTensors};
use hgmt_core::{Sample, TaskKind, TaskSet};
use hgmt_nn::{MultiTaskModel, Scalar};
use ndarray::{Array3, Axis};
use serde::{Deserialize, Serialize};

use crate::batch::{check_inputs, image_batch};
use crate::config::TrainConfig;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalOptions {
    pub quantizer: QuantizerPolicy,
    pub pose3d_joints: Pose3dJoints,
    pub heatmap: HeatmapParams,
    pub batch_size: usize,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            quantizer: QuantizerPolicy::PerSample,
            pose3d_joints: Pose3dJoints::default(),
            heatmap: HeatmapParams::default(),
            batch_size: 5,
        }
    }
}

impl EvalOptions {
    pub fn from_train(config: &TrainConfig) -> Self {
        Self { quantizer: config.quantizer, heatmap: config.heatmap, batch_size: config.batch_size, ..Default::default() }
    }
}

/// A report plus the per-frame records it was aggregated from.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub report: MetricsReport,
    pub frames: MetricsAccumulator,
}

/// Last-stack outputs of `model` for each sample, in sample order.
pub fn predict<S: Scalar>(model: &MultiTaskModel<S>, samples: &[Sample], batch_size: usize) -> Result<Vec<TaskTensors>> {
    check_inputs(samples, model.config().input_size)?;
    let mut out = Vec::with_capacity(samples.len());
    for chunk in samples.chunks(batch_size.max(1)) {
        let refs: Vec<&Sample> = chunk.iter().collect();
        let fwd = model.forward(image_batch::<S>(&refs).view())?;
        let mut preds = vec![TaskTensors::default(); chunk.len()];
        for task in model.tasks().tasks() {
            let y = fwd.output(task).expect("active task");
            for (p, item) in preds.iter_mut().zip(y.axis_iter(Axis(0))) {
                let t: Array3<f32> = item.mapv(|v| v.to_f32().unwrap_or(f32::NAN));
                p.set(task, t);
            }
        }
        out.extend(preds);
    }
    Ok(out)
}

/// Scores given predictions; frame keys are sample positions.
pub fn evaluate_predictions(
    samples: &[Sample],
    predictions: &[TaskTensors],
    tasks: TaskSet,
    target: &TargetConfig,
    pose3d_joints: Pose3dJoints,
) -> Result<Evaluation> {
    if samples.is_empty() {
        return Err(Error::EmptyData("test stream"));
    }
    let mut frames = MetricsAccumulator::new(tasks, pose3d_joints);
    for (i, (s, p)) in samples.iter().zip(predictions).enumerate() {
        frames.add(evaluate_frame(i as u64, s, p, tasks, target)?);
    }
    Ok(Evaluation { report: frames.finalize(), frames })
}

/// Decodes every prediction and accumulates the metrics of the model's tasks.
pub fn evaluate<S: Scalar>(model: &MultiTaskModel<S>, samples: &[Sample], opts: &EvalOptions) -> Result<Evaluation> {
    if samples.is_empty() {
        return Err(Error::EmptyData("test stream"));
    }
    let cfg = model.config();
    let target = TargetConfig {
        resolution: cfg.resolution,
        bins: cfg.depth_bins,
        heatmap: opts.heatmap,
        quantizer: opts.quantizer,
    };
    let mut frames = MetricsAccumulator::new(model.tasks(), opts.pose3d_joints);
    let mut offset = 0u64;
    for chunk in samples.chunks(opts.batch_size.max(1) * 4) {
        let preds = predict(model, chunk, opts.batch_size)?;
        for (i, (s, p)) in chunk.iter().zip(&preds).enumerate() {
            frames.add(evaluate_frame(offset + i as u64, s, p, model.tasks(), &target)?);
        }
        offset += chunk.len() as u64;
    }
    Ok(Evaluation { report: frames.finalize(), frames })
}

/// Headline value of a report for `task` and whether larger is better.
pub fn headline(report: &MetricsReport, task: TaskKind) -> Option<(&'static str, f64, bool)> {
    match task {
        TaskKind::Pose2D => report.pose2d.as_ref()?.mean.map(|v| ("pckh", v, true)),
        TaskKind::PartSeg => report.segmentation.as_ref()?.mean_without_background.map(|v| ("iou", v, true)),
        TaskKind::Depth => report.depth.as_ref()?.mean_full_body.map(|v| ("depth_rmse", v, false)),
        TaskKind::Pose3D => report.pose3d.as_ref()?.mean.map(|v| ("mjd", v, false)),
    }
}
