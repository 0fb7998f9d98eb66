use std::path::Path;
use std::time::Instant;

use hgmt_core::losses::LossReport;
use hgmt_core::targets::{encode_sample, TargetBundle};
use hgmt_core::{Sample, TaskSet};
use hgmt_data::{augment, augment_seed, epoch_order};
use hgmt_nn::{total_loss, Gradients, Scalar};

use crate::batch::{check_inputs, encode_all, image_batch, target_batch, target_config};
use crate::config::TrainConfig;
use crate::error::{Error, Result};
use crate::eval::{evaluate, headline, EvalOptions};
use crate::log::{LogRecord, TrainLog};
use crate::state::{Bookmark, TrainState};

/// Training samples, the tasks they are annotated for, and an optional
/// held-out set for periodic evaluation.
#[derive(Debug, Clone, Copy)]
pub struct TrainData<'a> {
    pub samples: &'a [Sample],
    pub available: TaskSet,
    pub eval: Option<&'a [Sample]>,
}

impl<'a> TrainData<'a> {
    pub fn new(samples: &'a [Sample]) -> Self {
        Self { samples, available: TaskSet::all(), eval: None }
    }

    pub fn with_eval(self, eval: &'a [Sample]) -> Self {
        Self { eval: Some(eval), ..self }
    }
}

/// Runs optimizer steps from `state.step` up to the config's step budget.
pub fn train<S: Scalar>(state: &mut TrainState<S>, data: TrainData<'_>, config: &TrainConfig) -> Result<TrainLog> {
    train_with(state, data, config, &mut |_, _| {})
}

/// [`train`] with a callback after every step.
pub fn train_with<S: Scalar>(
    state: &mut TrainState<S>,
    data: TrainData<'_>,
    config: &TrainConfig,
    on_step: &mut dyn FnMut(u64, &LossReport),
) -> Result<TrainLog> {
    config.validate()?;
    let tasks = state.model.tasks();
    if !tasks.is_subset_of(data.available) {
        return Err(Error::TaskMismatch { model: tasks.to_string(), data: data.available.to_string() });
    }
    let n = data.samples.len();
    let total = config.total_steps(n);
    let mut log = TrainLog::default();
    if state.step >= total {
        return Ok(log);
    }
    if n == 0 {
        return Err(Error::EmptyData("training set"));
    }
    check_inputs(data.samples, state.model.config().input_size)?;
    let target_cfg = target_config(state.model.config(), config);
    let cached: Option<Vec<TargetBundle>> =
        if config.augment.is_none() { Some(encode_all(data.samples, tasks, &target_cfg)?) } else { None };

    let spe = config.steps_per_epoch(n);
    let started = Instant::now();
    let mut order: Option<(u64, Vec<usize>)> = None;
    while state.step < total {
        let epoch = state.step / spe;
        let in_epoch = (state.step % spe) as usize;
        if order.as_ref().map(|(e, _)| *e) != Some(epoch) {
            order = Some((epoch, epoch_order(n, config.seed, epoch)));
        }
        let idx = &order.as_ref().expect("set above").1;
        let lo = in_epoch * config.batch_size;
        let batch: Vec<usize> = idx[lo..(lo + config.batch_size).min(n)].to_vec();

        let (samples, bundles): (Vec<Sample>, Vec<TargetBundle>) = match (&cached, &config.augment) {
            (Some(c), _) => (batch.iter().map(|&i| data.samples[i].clone()).collect(), batch.iter().map(|&i| c[i].clone()).collect()),
            (None, Some(aug)) => {
                let mut ss = Vec::with_capacity(batch.len());
                let mut bs = Vec::with_capacity(batch.len());
                for &i in &batch {
                    let s = augment(&data.samples[i], &aug.with_seed(augment_seed(config.seed, epoch, i)));
                    bs.push(encode_sample(&s, tasks, &target_cfg)?);
                    ss.push(s);
                }
                (ss, bs)
            }
            (None, None) => unreachable!("targets are cached when augmentation is off"),
        };
        let sample_refs: Vec<&Sample> = samples.iter().collect();
        let bundle_refs: Vec<&TargetBundle> = bundles.iter().collect();
        let images = image_batch::<S>(&sample_refs);
        let targets = target_batch::<S>(&bundle_refs, tasks);

        let step_no = state.step + 1;
        let fwd = state.model.forward(images.view())?;
        let (report, seeds) = total_loss(&fwd, &targets, &config.loss, true).map_err(|e| match e {
            hgmt_nn::Error::NonFinite(what) => Error::NonFinite { step: step_no, what },
            other => other.into(),
        })?;
        let mut grads = fwd.backward(seeds)?;
        drop(fwd);
        if !grads.all_finite() {
            return Err(Error::NonFinite { step: step_no, what: "gradient".into() });
        }
        regularize(&mut grads, state, config);
        state
            .optimizer
            .step(state.model.params_mut(), &grads)
            .map_err(|name| Error::NonFinite { step: step_no, what: format!("update of parameter {name}") })?;
        state.step = step_no;

        let wallclock_ms = if config.deterministic { 0 } else { started.elapsed().as_millis() as u64 };
        for term in &report.terms {
            log.records.push(LogRecord { step: step_no, epoch, stack: term.stack, task: term.task, loss: term.value, wallclock_ms });
        }
        log.totals.push((step_no, report.total));
        on_step(step_no, &report);

        if step_no % spe == 0 {
            end_of_epoch(state, data, config, epoch)?;
        }
    }
    Ok(log)
}

fn regularize<S: Scalar>(grads: &mut Gradients<S>, state: &TrainState<S>, config: &TrainConfig) {
    if config.weight_decay > 0.0 {
        let wd = S::from_f64_lossy(config.weight_decay);
        for (id, _, theta) in state.model.params().iter() {
            grads.params[id.index()].zip_mut_with(theta, |g, t| *g = *g + wd * *t);
        }
    }
    if let Some(max) = config.grad_clip_norm {
        let norm = grads
            .params
            .iter()
            .flat_map(|p| p.iter())
            .map(|v| v.to_f64().unwrap_or(f64::NAN).powi(2))
            .sum::<f64>()
            .sqrt();
        if norm > max {
            let scale = S::from_f64_lossy(max / norm);
            for p in &mut grads.params {
                p.mapv_inplace(|v| v * scale);
            }
        }
    }
}

fn end_of_epoch<S: Scalar>(state: &mut TrainState<S>, data: TrainData<'_>, config: &TrainConfig, epoch: u64) -> Result<()> {
    let done = epoch + 1;
    if let (Some(every), Some(eval)) = (config.eval_every, data.eval) {
        if done % every as u64 == 0 {
            let ev = evaluate(&state.model, eval, &EvalOptions::from_train(config))?;
            let first = state.model.tasks().tasks()[0];
            if let Some((metric, value, higher)) = headline(&ev.report, first) {
                let better = state.best.as_ref().is_none_or(|b| if higher { value > b.value } else { value < b.value });
                if better {
                    state.best = Some(Bookmark { metric: metric.to_string(), value, step: state.step });
                }
            }
        }
    }
    if let Some(dir) = &config.checkpoint_dir {
        state.save(&dir.join(format!("epoch_{done:03}.ckpt")), config)?;
        state.save(&Path::new(dir).join("last.ckpt"), config)?;
    }
    Ok(())
}
