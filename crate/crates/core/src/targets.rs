//! Supervision tensors for one sample.

use ndarray::Array3;
use serde::{Deserialize, Serialize};

use crate::codecs::{encode_depth, encode_parts, encode_pose2d, encode_pose3d, DepthQuantizer, HeatmapParams};
use crate::error::Result;
use crate::types::{output_shape, Sample, TaskKind, TaskSet, TensorShape, NUM_JOINTS, NUM_PARTS};

/// Encoding hyperparameters shared by all four targets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TargetConfig {
    pub resolution: usize,
    pub bins: usize,
    pub heatmap: HeatmapParams,
    #[serde(default)]
    pub quantizer: QuantizerPolicy,
}

impl Default for TargetConfig {
    fn default() -> Self {
        Self {
            resolution: 64,
            bins: DepthQuantizer::DEFAULT_BINS,
            heatmap: HeatmapParams::default(),
            quantizer: QuantizerPolicy::PerSample,
        }
    }
}

impl TargetConfig {
    pub fn shape(&self, task: TaskKind) -> TensorShape {
        output_shape(task, self.resolution.max(1), self.bins.max(1), NUM_JOINTS, NUM_PARTS)
            .expect("positive shape parameters")
    }
}

/// One `[C, R, R]` tensor per task; used for both targets and predictions.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TaskTensors {
    pub pose2d: Option<Array3<f32>>,
    pub parts: Option<Array3<f32>>,
    pub depth: Option<Array3<f32>>,
    pub pose3d: Option<Array3<f32>>,
}

impl TaskTensors {
    pub fn get(&self, task: TaskKind) -> Option<&Array3<f32>> {
        match task {
            TaskKind::Pose2D => self.pose2d.as_ref(),
            TaskKind::PartSeg => self.parts.as_ref(),
            TaskKind::Depth => self.depth.as_ref(),
            TaskKind::Pose3D => self.pose3d.as_ref(),
        }
    }

    pub fn set(&mut self, task: TaskKind, tensor: Array3<f32>) {
        let slot = match task {
            TaskKind::Pose2D => &mut self.pose2d,
            TaskKind::PartSeg => &mut self.parts,
            TaskKind::Depth => &mut self.depth,
            TaskKind::Pose3D => &mut self.pose3d,
        };
        *slot = Some(tensor);
    }
}

/// How depth ranges are chosen when encoding and decoding depth bins.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum QuantizerPolicy {
    /// Fit the range to each sample's foreground (the default).
    #[default]
    PerSample,
    /// One fixed range for every sample.
    Fixed { d_min: f64, d_max: f64 },
}

/// The encoded supervision for the tasks of a [`TaskSet`], plus the
/// quantizers needed to decode predictions for the same sample.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetBundle {
    pub tensors: TaskTensors,
    /// Range of the full-body depth task.
    pub depth_quantizer: DepthQuantizer,
    /// Range of the volumetric pose task.
    pub pose3d_quantizer: DepthQuantizer,
}

impl TargetBundle {
    pub fn get(&self, task: TaskKind) -> Option<&Array3<f32>> {
        self.tensors.get(task)
    }
}

/// Quantizers for the depth task and the volumetric pose task.
///
/// Per-sample fitting uses foreground depth for the former and the union of
/// foreground depth and visible joint depths for the latter.
pub fn fit_quantizers(
    sample: &Sample,
    bins: usize,
    policy: QuantizerPolicy,
) -> Result<(DepthQuantizer, DepthQuantizer)> {
    if let QuantizerPolicy::Fixed { d_min, d_max } = policy {
        let q = DepthQuantizer::new(d_min, d_max, bins)?;
        return Ok((q, q));
    }
    let depth_q = DepthQuantizer::fit(sample.depth.view(), sample.part_mask.view(), bins)?;
    let joint_z = sample
        .joints3d
        .iter()
        .zip(sample.visible.iter())
        .filter(|(_, v)| **v)
        .map(|(p, _)| p[2]);
    let pose_q = DepthQuantizer::fit_with_points(sample.depth.view(), sample.part_mask.view(), joint_z, bins)?;
    Ok((depth_q, pose_q))
}

/// Encodes the targets of every task in `tasks`.
pub fn encode_sample(sample: &Sample, tasks: TaskSet, cfg: &TargetConfig) -> Result<TargetBundle> {
    let (depth_q, pose_q) = fit_quantizers(sample, cfg.bins, cfg.quantizer)?;
    let input = sample.width();
    let r = cfg.resolution;
    let pose2d = tasks
        .contains(TaskKind::Pose2D)
        .then(|| encode_pose2d(&sample.joints2d, &sample.visible, input, r, &cfg.heatmap))
        .transpose()?;
    let parts = tasks
        .contains(TaskKind::PartSeg)
        .then(|| encode_parts(sample.part_mask.view(), r))
        .transpose()?;
    let depth = tasks
        .contains(TaskKind::Depth)
        .then(|| encode_depth(sample.depth.view(), sample.part_mask.view(), &depth_q, r))
        .transpose()?;
    let pose3d = tasks
        .contains(TaskKind::Pose3D)
        .then(|| {
            encode_pose3d(&sample.joints3d, &sample.visible, &sample.intrinsics, input, r, &pose_q, &cfg.heatmap)
        })
        .transpose()?;
    Ok(TargetBundle {
        tensors: TaskTensors { pose2d, parts, depth, pose3d },
        depth_quantizer: depth_q,
        pose3d_quantizer: pose_q,
    })
}
