use hgmt_nn::{Gradients, ParamStore, Scalar};
use ndarray::{ArrayD, Zip};

use crate::error::{Error, Result};

/// Plain (uncentered, momentum-free) RMSprop:
/// `a ← ρ a + (1 − ρ) g²`, `θ ← θ − lr · g / (√a + ε)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RmsProp<S> {
    pub learning_rate: f64,
    pub rho: f64,
    pub epsilon: f64,
    /// Squared-gradient averages, indexed like the parameter store.
    pub accumulators: Vec<ArrayD<S>>,
}

/// One scalar RMSprop step in `f64`; returns the new `(θ, a)`.
pub fn rmsprop_scalar(theta: f64, a: f64, g: f64, lr: f64, rho: f64, eps: f64) -> (f64, f64) {
    let a = rho * a + (1.0 - rho) * g * g;
    (theta - lr * g / (a.sqrt() + eps), a)
}

impl<S: Scalar> RmsProp<S> {
    pub fn new(params: &ParamStore<S>, learning_rate: f64, rho: f64, epsilon: f64) -> Self {
        Self { learning_rate, rho, epsilon, accumulators: params.zeros_like() }
    }

    /// Applies one step to every parameter.
    ///
    /// All new values are computed first; if any is non-finite nothing is
    /// written and the name of the offending parameter is returned.
    pub fn step(&mut self, params: &mut ParamStore<S>, grads: &Gradients<S>) -> std::result::Result<(), String> {
        let lr = S::from_f64_lossy(self.learning_rate);
        let rho = S::from_f64_lossy(self.rho);
        let one_minus_rho = S::from_f64_lossy(1.0 - self.rho);
        let eps = S::from_f64_lossy(self.epsilon);
        let mut staged = Vec::with_capacity(self.accumulators.len());
        for (id, name, theta) in params.iter() {
            let g = grads.get(id);
            let mut a = self.accumulators[id.index()].clone();
            let mut t = theta.clone();
            Zip::from(&mut t).and(&mut a).and(g).for_each(|t, a, &g| {
                *a = rho * *a + one_minus_rho * g * g;
                *t = *t - lr * g / (a.sqrt() + eps);
            });
            if !t.iter().all(|v| v.is_finite()) || !a.iter().all(|v| v.is_finite()) {
                return Err(name.to_string());
            }
            staged.push((id, t, a));
        }
        for (id, t, a) in staged {
            *params.get_mut(id) = t;
            self.accumulators[id.index()] = a;
        }
        Ok(())
    }

    pub(crate) fn check_shapes(&self, params: &ParamStore<S>) -> Result<()> {
        if self.accumulators.len() != params.len() {
            return Err(Error::Checkpoint(format!(
                "{} optimizer accumulators for {} parameters",
                self.accumulators.len(),
                params.len()
            )));
        }
        for (id, name, p) in params.iter() {
            if self.accumulators[id.index()].shape() != p.shape() {
                return Err(Error::Checkpoint(format!("accumulator shape mismatch for {name}")));
            }
        }
        Ok(())
    }
}
