#![allow(dead_code)]

use hgmt_core::{TaskKind, TaskSet};
use hgmt_nn::{BatchTargets, HourglassConfig, Scalar};
use ndarray::Array4;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn images<S: Scalar>(n: usize, side: usize, seed: u64) -> Array4<S> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Array4::from_shape_simple_fn((n, 3, side, side), || S::from_f64_lossy(rng.gen_range(0.0..1.0)))
}

/// Random targets of the right shape: one-hot maps for the classification
/// tasks, values in `[0, 1]` for the heatmap tasks.
pub fn targets<S: Scalar>(tasks: TaskSet, cfg: &HourglassConfig, n: usize, seed: u64) -> BatchTargets<S> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = BatchTargets::new();
    let r = cfg.resolution;
    for task in tasks.tasks() {
        let c = cfg.output_channels(task);
        let t = match task {
            TaskKind::PartSeg | TaskKind::Depth => {
                let mut t = Array4::zeros((n, c, r, r));
                for b in 0..n {
                    for i in 0..r {
                        for j in 0..r {
                            t[[b, rng.gen_range(0..c), i, j]] = S::one();
                        }
                    }
                }
                t
            }
            _ => Array4::from_shape_simple_fn((n, c, r, r), || S::from_f64_lossy(rng.gen_range(0.0..1.0))),
        };
        out.insert(task, t);
    }
    out
}

/// 32 × 32 input, 8 × 8 heatmaps, one halving, 4 features.
pub fn micro() -> HourglassConfig {
    HourglassConfig { num_stacks: 2, features: 4, depth: 1, resolution: 8, input_size: 32, depth_bins: 3 }
}
