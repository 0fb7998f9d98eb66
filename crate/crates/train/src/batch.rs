use hgmt_core::targets::{encode_sample, TargetBundle, TargetConfig};
use hgmt_core::{Sample, TaskSet};
use hgmt_nn::{BatchTargets, HourglassConfig, Scalar};
use ndarray::{Array4, Axis};

use crate::config::TrainConfig;
use crate::error::{Error, Result};

/// Encoding settings for a model's heads under a training config.
pub fn target_config(model: &HourglassConfig, train: &TrainConfig) -> TargetConfig {
    TargetConfig {
        resolution: model.resolution,
        bins: model.depth_bins,
        heatmap: train.heatmap,
        quantizer: train.quantizer,
    }
}

pub(crate) fn check_inputs(samples: &[Sample], input_size: usize) -> Result<()> {
    for (index, s) in samples.iter().enumerate() {
        if s.width() != input_size || s.height() != input_size {
            return Err(Error::InputSize { index, expected: input_size, actual: s.width() });
        }
    }
    Ok(())
}

/// `[N, 3, H, W]` image batch.
pub fn image_batch<S: Scalar>(samples: &[&Sample]) -> Array4<S> {
    let (h, w) = (samples[0].height(), samples[0].width());
    Array4::from_shape_fn((samples.len(), 3, h, w), |(n, c, r, col)| {
        S::from_f64_lossy(samples[n].image[[r, col, c]] as f64)
    })
}

/// Stacks per-sample targets of every task in `tasks` into `[N, C, R, R]`.
pub fn target_batch<S: Scalar>(bundles: &[&TargetBundle], tasks: TaskSet) -> BatchTargets<S> {
    let mut out = BatchTargets::new();
    for task in tasks.tasks() {
        let first = bundles[0].get(task).expect("encoded for the model's tasks");
        let (c, r, q) = first.dim();
        let mut t = Array4::<S>::zeros((bundles.len(), c, r, q));
        for (mut slot, b) in t.axis_iter_mut(Axis(0)).zip(bundles) {
            let src = b.get(task).expect("encoded for the model's tasks");
            slot.zip_mut_with(src, |d, s| *d = S::from_f64_lossy(*s as f64));
        }
        out.insert(task, t);
    }
    out
}

pub(crate) fn encode_all(samples: &[Sample], tasks: TaskSet, cfg: &TargetConfig) -> Result<Vec<TargetBundle>> {
    samples.iter().map(|s| encode_sample(s, tasks, cfg).map_err(Error::from)).collect()
}
