use std::path::PathBuf;

use hgmt_core::codecs::HeatmapParams;
use hgmt_core::targets::QuantizerPolicy;
use hgmt_data::AugmentParams;
use hgmt_nn::LossOptions;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Optimization settings. Defaults: 30 epochs, batch 5, RMSprop with
/// learning rate 1e-3, smoothing 0.99 and epsilon 1e-8, no schedule, no
/// weight decay, no clipping, no augmentation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Smoothing constant of the squared-gradient average.
    pub rho: f64,
    pub epsilon: f64,
    /// Seed of the data order and of the augmentation draws.
    pub seed: u64,
    /// Only `"cpu"` is supported.
    pub device: String,
    /// Evaluate on the held-out set every this many epochs.
    pub eval_every: Option<usize>,
    /// Write `epoch_NNN.ckpt` and `last.ckpt` here after every epoch.
    pub checkpoint_dir: Option<PathBuf>,
    /// Log zero wallclock times so that logs are byte-reproducible.
    pub deterministic: bool,
    /// Stop after this many optimizer steps in total.
    pub max_steps: Option<u64>,
    pub augment: Option<AugmentParams>,
    pub quantizer: QuantizerPolicy,
    pub heatmap: HeatmapParams,
    pub loss: LossOptions,
    pub weight_decay: f64,
    /// Rescale the global gradient norm to at most this value.
    pub grad_clip_norm: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 30,
            batch_size: 5,
            learning_rate: 1e-3,
            rho: 0.99,
            epsilon: 1e-8,
            seed: 0,
            device: "cpu".into(),
            eval_every: None,
            checkpoint_dir: None,
            deterministic: true,
            max_steps: None,
            augment: None,
            quantizer: QuantizerPolicy::PerSample,
            heatmap: HeatmapParams::default(),
            loss: LossOptions::default(),
            weight_decay: 0.0,
            grad_clip_norm: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if self.batch_size == 0 {
            problems.push("batch_size must be positive".to_string());
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            problems.push(format!("learning_rate must be positive, got {}", self.learning_rate));
        }
        if !(0.0..1.0).contains(&self.rho) {
            problems.push(format!("rho must lie in [0, 1), got {}", self.rho));
        }
        if !(self.epsilon > 0.0) {
            problems.push(format!("epsilon must be positive, got {}", self.epsilon));
        }
        if self.device != "cpu" {
            problems.push(format!("device {:?} is not available, only \"cpu\"", self.device));
        }
        if self.eval_every == Some(0) {
            problems.push("eval_every must be positive when set".to_string());
        }
        if !(self.weight_decay >= 0.0) {
            problems.push(format!("weight_decay must be non-negative, got {}", self.weight_decay));
        }
        if let Some(c) = self.grad_clip_norm {
            if !(c > 0.0) {
                problems.push(format!("grad_clip_norm must be positive, got {c}"));
            }
        }
        if let Some(a) = &self.augment {
            if let Err(e) = a.validate() {
                problems.push(e.to_string());
            }
        }
        if let Err(e) = self.heatmap.validate() {
            problems.push(e.to_string());
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(problems.join("; ")))
        }
    }

    pub fn steps_per_epoch(&self, samples: usize) -> u64 {
        samples.div_ceil(self.batch_size.max(1)) as u64
    }

    /// Step count at which training stops.
    pub fn total_steps(&self, samples: usize) -> u64 {
        let full = self.epochs as u64 * self.steps_per_epoch(samples);
        self.max_steps.map_or(full, |m| m.min(full))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_serialization() {
        let c = TrainConfig::default();
        assert_eq!((c.epochs, c.batch_size, c.learning_rate, c.rho, c.epsilon), (30, 5, 1e-3, 0.99, 1e-8));
        c.validate().unwrap();
        let json = serde_json::to_string(&c).unwrap();
        assert_eq!(serde_json::from_str::<TrainConfig>(&json).unwrap(), c);
        assert!(serde_json::from_str::<TrainConfig>(r#"{"epocs": 3}"#).is_err());
        assert_eq!(c.steps_per_epoch(16), 4);
        assert_eq!(TrainConfig { max_steps: Some(7), ..c.clone() }.total_steps(16), 7);
    }

    #[test]
    fn problems_are_listed_together() {
        let c = TrainConfig { batch_size: 0, rho: 1.0, device: "gpu".into(), ..Default::default() };
        let msg = c.validate().unwrap_err().to_string();
        assert!(msg.contains("batch_size") && msg.contains("rho") && msg.contains("gpu"), "{msg}");
    }
}
