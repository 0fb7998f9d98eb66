use serde::{Deserialize, Serialize};

use hgmt_core::{output_shape, TaskKind, TensorShape, NUM_JOINTS, NUM_PARTS};

use crate::error::{Error, Result};

/// Architecture hyperparameters of the stacked hourglass.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HourglassConfig {
    pub num_stacks: usize,
    pub features: usize,
    /// Number of halvings inside each hourglass.
    pub depth: usize,
    /// Heatmap resolution `R`.
    pub resolution: usize,
    /// Input image side; always `4 R`.
    pub input_size: usize,
    /// Depth bins of the depth and volumetric pose heads.
    pub depth_bins: usize,
}

impl Default for HourglassConfig {
    fn default() -> Self {
        Self::paper()
    }
}

impl HourglassConfig {
    /// Full-size network: 256 × 256 input, 64 × 64 heatmaps, 256 features.
    pub fn paper() -> Self {
        Self { num_stacks: 2, features: 256, depth: 4, resolution: 64, input_size: 256, depth_bins: 19 }
    }

    /// Laptop-scale network: 128 × 128 input, 32 × 32 heatmaps, 64 features.
    pub fn desk() -> Self {
        Self { num_stacks: 2, features: 64, depth: 3, resolution: 32, input_size: 128, depth_bins: 19 }
    }

    /// Smallest useful network, for tests: 64 × 64 input, 16 × 16 heatmaps, 8 features.
    pub fn tiny() -> Self {
        Self { num_stacks: 2, features: 8, depth: 2, resolution: 16, input_size: 64, depth_bins: 19 }
    }

    pub fn with_resolution(mut self, resolution: usize) -> Self {
        self.resolution = resolution;
        self.input_size = 4 * resolution;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.num_stacks == 0 {
            return fail("num_stacks must be at least 1".into());
        }
        if self.features < 4 || self.features % 4 != 0 {
            return fail(format!("features must be a positive multiple of 4, got {}", self.features));
        }
        if self.depth_bins == 0 {
            return fail("depth_bins must be positive".into());
        }
        let scale = 1usize.checked_shl(self.depth as u32).unwrap_or(0);
        if self.resolution == 0 || scale == 0 || self.resolution % scale != 0 {
            return fail(format!(
                "resolution {} must be divisible by 2^depth = 2^{}",
                self.resolution, self.depth
            ));
        }
        if self.input_size != 4 * self.resolution {
            return fail(format!(
                "input_size must be 4 × resolution = {}, got {}",
                4 * self.resolution,
                self.input_size
            ));
        }
        Ok(())
    }

    /// Side length of the innermost hourglass features.
    pub fn latent_size(&self) -> usize {
        self.resolution >> self.depth
    }

    /// Output shape of `task`.
    pub fn output_shape(&self, task: TaskKind) -> TensorShape {
        output_shape(task, self.resolution, self.depth_bins, NUM_JOINTS, NUM_PARTS).expect("validated config")
    }

    pub fn output_channels(&self, task: TaskKind) -> usize {
        self.output_shape(task).channels
    }

    /// Initial background bias of the dense classification heads.
    ///
    /// The background channel starts at the logit that gives it probability
    /// [`BACKGROUND_PRIOR`] against uniform foreground classes, so an
    /// untrained model predicts the majority class.
    pub fn head_prior(&self, task: TaskKind) -> Option<HeadPrior> {
        let channels = self.output_channels(task);
        let channel = match task {
            TaskKind::PartSeg => 0,
            TaskKind::Depth => channels - 1,
            TaskKind::Pose2D | TaskKind::Pose3D => return None,
        };
        let odds = BACKGROUND_PRIOR / (1.0 - BACKGROUND_PRIOR);
        Some(HeadPrior { channel, logit: (odds * (channels - 1) as f64).ln() })
    }
}

/// Initial probability of the background class.
pub const BACKGROUND_PRIOR: f64 = 0.8;

/// Bias value given to one head channel at initialization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeadPrior {
    pub channel: usize,
    pub logit: f64,
}
