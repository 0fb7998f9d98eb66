use std::path::Path;

use hgmt_core::TaskSet;
use hgmt_nn::{Archive, MultiTaskModel, Scalar};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::config::TrainConfig;
use crate::error::{Error, Result};
use crate::optimizer::RmsProp;

/// Best evaluation value seen so far.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bookmark {
    pub metric: String,
    pub value: f64,
    pub step: u64,
}

/// Everything needed to continue training exactly where it stopped.
///
/// Data order and augmentation are pure functions of `(config.seed, epoch,
/// sample)`, so the step counter is the whole random state.
#[derive(Debug, Clone)]
pub struct TrainState<S> {
    pub model: MultiTaskModel<S>,
    pub optimizer: RmsProp<S>,
    pub step: u64,
    pub best: Option<Bookmark>,
}

const OPT_PREFIX: &str = "rmsprop/";

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StateMeta {
    step: u64,
    best: Option<Bookmark>,
    learning_rate: f64,
    rho: f64,
    epsilon: f64,
    config: TrainConfig,
}

impl<S: Scalar> TrainState<S> {
    pub fn new(model: MultiTaskModel<S>, config: &TrainConfig) -> Self {
        let optimizer = RmsProp::new(model.params(), config.learning_rate, config.rho, config.epsilon);
        Self { model, optimizer, step: 0, best: None }
    }

    /// Parameters, optimizer accumulators (as `rmsprop/<name>`) and metadata.
    pub fn to_archive(&self, config: &TrainConfig) -> Archive<S> {
        let mut archive = self.model.to_archive();
        let meta = StateMeta {
            step: self.step,
            best: self.best.clone(),
            learning_rate: self.optimizer.learning_rate,
            rho: self.optimizer.rho,
            epsilon: self.optimizer.epsilon,
            config: config.clone(),
        };
        if let Value::Object(m) = &mut archive.meta {
            m.insert("train".into(), serde_json::to_value(meta).expect("serializable"));
        }
        for (id, name, _) in self.model.params().iter() {
            archive.push(format!("{OPT_PREFIX}{name}"), self.optimizer.accumulators[id.index()].clone());
        }
        archive
    }

    /// Restores a state and the config it was trained with.
    pub fn from_archive(archive: &Archive<S>, expected: Option<TaskSet>) -> Result<(Self, TrainConfig)> {
        let model = MultiTaskModel::from_archive(archive, expected)?;
        let meta: StateMeta = serde_json::from_value(archive.meta.get("train").cloned().unwrap_or(Value::Null))
            .map_err(|e| Error::Checkpoint(format!("missing or bad train record: {e}")))?;
        let mut accumulators = Vec::with_capacity(model.params().len());
        for (_, name, _) in model.params().iter() {
            let a = archive
                .get(&format!("{OPT_PREFIX}{name}"))
                .ok_or_else(|| Error::Checkpoint(format!("missing optimizer state for {name}")))?;
            accumulators.push(a.clone());
        }
        let optimizer = RmsProp { learning_rate: meta.learning_rate, rho: meta.rho, epsilon: meta.epsilon, accumulators };
        optimizer.check_shapes(model.params())?;
        Ok((Self { model, optimizer, step: meta.step, best: meta.best }, meta.config))
    }

    pub fn save(&self, path: &Path, config: &TrainConfig) -> Result<()> {
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir)?;
        }
        Ok(self.to_archive(config).save(path)?)
    }

    pub fn load(path: &Path, expected: Option<TaskSet>) -> Result<(Self, TrainConfig)> {
        Self::from_archive(&Archive::load(path)?, expected)
    }
}
