//! Per-task losses with analytic gradients.
//!
//! Tensors are batched channel-first `[N, C, H, W]`. The network crate wraps
//! these as graph operations; keeping them here lets the evaluation path and
//! the finite-difference tests share one implementation.

use ndarray::{Array4, ArrayView4, Axis};
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::TaskKind;

fn check_shapes<F>(a: &ArrayView4<F>, b: &ArrayView4<F>) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::ShapeMismatch { expected: format!("{:?}", a.dim()), actual: format!("{:?}", b.dim()) });
    }
    Ok(())
}

fn all_finite<F: Float>(a: &ArrayView4<F>) -> bool {
    a.iter().all(|v| v.is_finite())
}

/// Square root of the mean squared difference over the whole tensor.
pub fn heatmap_rmse<F: Float>(pred: ArrayView4<F>, target: ArrayView4<F>) -> Result<F> {
    heatmap_rmse_with_grad(pred, target, false).map(|(v, _)| v)
}

/// RMSE and, optionally, its gradient with respect to `pred`.
///
/// At the exact-zero point the subgradient 0 is returned.
pub fn heatmap_rmse_with_grad<F: Float>(
    pred: ArrayView4<F>,
    target: ArrayView4<F>,
    want_grad: bool,
) -> Result<(F, Option<Array4<F>>)> {
    check_shapes(&pred, &target)?;
    if !all_finite(&pred) || !all_finite(&target) {
        return Err(Error::NonFinite("heatmap rmse input"));
    }
    let n = F::from(pred.len()).unwrap();
    let sq = pred.iter().zip(target.iter()).fold(F::zero(), |acc, (&p, &t)| acc + (p - t) * (p - t));
    let rmse = (sq / n).sqrt();
    let grad = want_grad.then(|| {
        if rmse == F::zero() {
            Array4::zeros(pred.dim())
        } else {
            let scale = F::one() / (n * rmse);
            let mut g = &pred - &target;
            g.mapv_inplace(|d| d * scale);
            g
        }
    });
    Ok((rmse, grad))
}

/// Softmax cross-entropy over channels, averaged over every pixel of the batch.
pub fn spatial_cross_entropy<F: Float>(
    logits: ArrayView4<F>,
    target: ArrayView4<F>,
    class_weights: Option<&[F]>,
) -> Result<F> {
    spatial_cross_entropy_with_grad(logits, target, class_weights, false).map(|(v, _)| v)
}

/// Cross-entropy and, optionally, its gradient with respect to `logits`.
///
/// With `class_weights`, each pixel's negative log-likelihood is scaled by
/// the weight of its target class before averaging.
pub fn spatial_cross_entropy_with_grad<F: Float>(
    logits: ArrayView4<F>,
    target: ArrayView4<F>,
    class_weights: Option<&[F]>,
    want_grad: bool,
) -> Result<(F, Option<Array4<F>>)> {
    check_shapes(&logits, &target)?;
    if !all_finite(&logits) {
        return Err(Error::NonFinite("cross-entropy logits"));
    }
    let (n, c, h, w) = logits.dim();
    if let Some(wts) = class_weights {
        if wts.len() != c {
            return Err(Error::ShapeMismatch { expected: format!("{c} class weights"), actual: wts.len().to_string() });
        }
    }
    let pixels = F::from(n * h * w).unwrap();
    let mut grad = want_grad.then(|| Array4::<F>::zeros(logits.dim()));
    let mut total = F::zero();
    let mut probs = vec![F::zero(); c];
    for b in 0..n {
        for r in 0..h {
            for col in 0..w {
                let mut label = None;
                for k in 0..c {
                    let t = target[[b, k, r, col]];
                    if t == F::one() && label.is_none() {
                        label = Some(k);
                    } else if t != F::zero() {
                        return Err(Error::NotOneHot { row: r, col });
                    }
                }
                let label = label.ok_or(Error::NotOneHot { row: r, col })?;
                let max = (0..c).map(|k| logits[[b, k, r, col]]).fold(F::neg_infinity(), F::max);
                let mut sum = F::zero();
                for (k, p) in probs.iter_mut().enumerate() {
                    *p = (logits[[b, k, r, col]] - max).exp();
                    sum = sum + *p;
                }
                let log_z = max + sum.ln();
                let weight = class_weights.map_or(F::one(), |wts| wts[label]);
                total = total + weight * (log_z - logits[[b, label, r, col]]);
                if let Some(g) = grad.as_mut() {
                    for (k, p) in probs.iter().enumerate() {
                        let soft = *p / sum;
                        let onehot = if k == label { F::one() } else { F::zero() };
                        g[[b, k, r, col]] = weight * (soft - onehot) / pixels;
                    }
                }
            }
        }
    }
    Ok((total / pixels, grad))
}

/// Loss of one task at one stack.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossTerm {
    /// 1-based stack index.
    pub stack: usize,
    pub task: TaskKind,
    pub value: f64,
}

/// Every `(stack, task)` term and their unweighted sum.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct LossReport {
    pub terms: Vec<LossTerm>,
    pub total: f64,
}

impl LossReport {
    pub fn from_terms(terms: Vec<LossTerm>) -> Self {
        let total = terms.iter().map(|t| t.value).sum();
        Self { terms, total }
    }

    pub fn term(&self, stack: usize, task: TaskKind) -> Option<f64> {
        self.terms.iter().find(|t| t.stack == stack && t.task == task).map(|t| t.value)
    }

    /// Training-log lines `step, stack, task, loss`.
    pub fn log_lines(&self, step: u64) -> Vec<String> {
        self.terms.iter().map(|t| format!("{step}, {}, {}, {}", t.stack, t.task, t.value)).collect()
    }
}

/// Which loss supervises `task`.
pub fn uses_cross_entropy(task: TaskKind) -> bool {
    matches!(task, TaskKind::PartSeg | TaskKind::Depth)
}

/// Inserts a batch axis in front of a `[C, H, W]` view.
pub fn batch_of_one<F>(a: ndarray::ArrayView3<'_, F>) -> ArrayView4<'_, F> {
    a.insert_axis(Axis(0))
}
