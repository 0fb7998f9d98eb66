#![allow(dead_code)]

use hgmt_core::Sample;
use hgmt_data::{generate_synthetic, SyntheticFigureParams};
use hgmt_nn::HourglassConfig;
use hgmt_train::TrainConfig;

pub fn samples(n: usize, size: usize, seed: u64) -> Vec<Sample> {
    let params = SyntheticFigureParams { seed, image_size: size, ..Default::default() };
    generate_synthetic(&params, n).expect("synthetic samples")
}

pub fn tiny() -> HourglassConfig {
    HourglassConfig::tiny()
}

pub fn short_run(max_steps: u64, batch_size: usize) -> TrainConfig {
    TrainConfig { batch_size, max_steps: Some(max_steps), ..Default::default() }
}
