//! Training and evaluation of multi-task hourglass models.
//!
//! [`train`] runs RMSprop over shuffled mini-batches, logging every
//! `(stack, task)` loss of every step; [`TrainState`] round-trips through a
//! single checkpoint file including the optimizer accumulators, so a resumed
//! run continues bit-for-bit. [`evaluate`] decodes predictions and
//! aggregates the metrics of the model's tasks.

mod batch;
mod config;
mod error;
mod eval;
mod log;
mod optimizer;
mod state;
mod trainer;

pub use batch::{image_batch, target_batch, target_config};
pub use config::TrainConfig;
pub use error::{Error, Result};
pub use eval::{evaluate, evaluate_predictions, headline, predict, EvalOptions, Evaluation};
pub use log::{median, LogRecord, TrainLog, LOG_HEADER};
pub use optimizer::{rmsprop_scalar, RmsProp};
pub use state::{Bookmark, TrainState};
pub use trainer::{train, train_with, TrainData};
