use ndarray::Array4;
use serde::{Deserialize, Serialize};

use hgmt_core::losses::{heatmap_rmse_with_grad, spatial_cross_entropy_with_grad, uses_cross_entropy, LossReport, LossTerm};
use hgmt_core::TaskKind;

use crate::error::{Error, Result};
use crate::graph::NodeId;
use crate::model::ForwardOutput;
use crate::scalar::Scalar;

/// Batched `[N, C, R, R]` targets, one tensor per task.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct BatchTargets<S> {
    tensors: Vec<(TaskKind, Array4<S>)>,
}

impl<S: Scalar> BatchTargets<S> {
    pub fn new() -> Self {
        Self { tensors: Vec::new() }
    }

    pub fn insert(&mut self, task: TaskKind, tensor: Array4<S>) {
        self.tensors.retain(|(t, _)| *t != task);
        self.tensors.push((task, tensor));
    }

    pub fn get(&self, task: TaskKind) -> Option<&Array4<S>> {
        self.tensors.iter().find(|(t, _)| *t == task).map(|(_, a)| a)
    }
}

/// Optional loss reweighting; the defaults give the plain unweighted sum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LossOptions {
    /// Multipliers in task order 2d, seg, depth, 3d.
    pub task_weights: [f64; 4],
    pub seg_class_weights: Option<Vec<f64>>,
    pub depth_class_weights: Option<Vec<f64>>,
}

impl Default for LossOptions {
    fn default() -> Self {
        Self { task_weights: [1.0; 4], seg_class_weights: None, depth_class_weights: None }
    }
}

impl LossOptions {
    pub fn task_weight(&self, task: TaskKind) -> f64 {
        self.task_weights[TaskKind::ALL.iter().position(|t| *t == task).expect("known task")]
    }

    fn class_weights(&self, task: TaskKind) -> Option<&[f64]> {
        match task {
            TaskKind::PartSeg => self.seg_class_weights.as_deref(),
            TaskKind::Depth => self.depth_class_weights.as_deref(),
            _ => None,
        }
    }
}

/// Loss of one prediction against its target, with the gradient if asked.
pub fn task_loss<S: Scalar>(
    task: TaskKind,
    pred: &Array4<S>,
    target: &Array4<S>,
    class_weights: Option<&[f64]>,
    want_grad: bool,
) -> Result<(f64, Option<Array4<S>>)> {
    let (value, grad) = if uses_cross_entropy(task) {
        let w: Option<Vec<S>> = class_weights.map(|w| w.iter().map(|v| S::from_f64_lossy(*v)).collect());
        spatial_cross_entropy_with_grad(pred.view(), target.view(), w.as_deref(), want_grad)?
    } else {
        heatmap_rmse_with_grad(pred.view(), target.view(), want_grad)?
    };
    Ok((value.to_f64().unwrap_or(f64::NAN), grad))
}

/// Sum of every (stack, task) loss, plus the backward seeds of the sum.
///
/// A non-finite term is reported as an error naming its stack and task.
pub fn total_loss<S: Scalar>(
    out: &ForwardOutput<'_, S>,
    targets: &BatchTargets<S>,
    options: &LossOptions,
    want_grad: bool,
) -> Result<(LossReport, Vec<(NodeId, Array4<S>)>)> {
    let mut terms = Vec::new();
    let mut seeds = Vec::new();
    for task in out.tasks().tasks() {
        let target = targets.get(task).ok_or_else(|| Error::MissingTarget(task.to_string()))?;
        let weight = options.task_weight(task);
        for stack in 1..=out.num_stacks() {
            let node = out.node(stack, task).expect("prediction for active task");
            let pred = out.graph().value(node);
            let non_finite = || Error::NonFinite(format!("loss at stack {stack}, task {task}"));
            if !pred.iter().all(|v| v.is_finite()) {
                return Err(non_finite());
            }
            let (value, grad) = task_loss(task, pred, target, options.class_weights(task), want_grad)?;
            if !value.is_finite() {
                return Err(non_finite());
            }
            terms.push(LossTerm { stack, task, value });
            if let Some(mut g) = grad {
                if weight != 1.0 {
                    let w = S::from_f64_lossy(weight);
                    g.mapv_inplace(|v| v * w);
                }
                seeds.push((node, g));
            }
        }
    }
    terms.sort_by_key(|t| (t.stack, t.task));
    let mut report = LossReport::from_terms(terms);
    report.total = report.terms.iter().map(|t| options.task_weight(t.task) * t.value).sum();
    Ok((report, seeds))
}
