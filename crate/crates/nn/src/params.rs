use std::collections::HashMap;

use ndarray::{ArrayD, IxDyn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Index of a parameter tensor in a [`ParamStore`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(pub(crate) usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// How a fresh parameter is filled.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Init {
    Zeros,
    Ones,
    /// Uniform in `±gain / sqrt(fan_in)`.
    FanInUniform { fan_in: usize, gain: f64 },
}

/// 64-bit seed for the stream named `name` under the run seed `seed`.
///
/// Each parameter gets its own stream, so initial values depend only on
/// `(seed, name)` and not on construction order or on which other layers exist.
pub fn derive_seed(seed: u64, name: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(name.as_bytes());
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"))
}

/// Named parameter tensors in creation order.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamStore<S> {
    seed: u64,
    names: Vec<String>,
    values: Vec<ArrayD<S>>,
    lookup: HashMap<String, ParamId>,
}

impl<S: Scalar> ParamStore<S> {
    pub fn new(seed: u64) -> Self {
        Self { seed, names: Vec::new(), values: Vec::new(), lookup: HashMap::new() }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn add(&mut self, name: impl Into<String>, shape: &[usize], init: Init) -> Result<ParamId> {
        let name = name.into();
        if self.lookup.contains_key(&name) {
            return Err(Error::DuplicateParameter(name));
        }
        let value = match init {
            Init::Zeros => ArrayD::zeros(IxDyn(shape)),
            Init::Ones => ArrayD::ones(IxDyn(shape)),
            Init::FanInUniform { fan_in, gain } => {
                let bound = gain / (fan_in.max(1) as f64).sqrt();
                let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(self.seed, &name));
                ArrayD::from_shape_simple_fn(IxDyn(shape), || S::from_f64_lossy(rng.gen_range(-bound..=bound)))
            }
        };
        let id = ParamId(self.values.len());
        self.lookup.insert(name.clone(), id);
        self.names.push(name);
        self.values.push(value);
        Ok(id)
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.lookup.get(name).copied()
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    pub fn get(&self, id: ParamId) -> &ArrayD<S> {
        &self.values[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut ArrayD<S> {
        &mut self.values[id.0]
    }

    pub fn by_name(&self, name: &str) -> Result<&ArrayD<S>> {
        self.id(name).map(|id| self.get(id)).ok_or_else(|| Error::UnknownParameter(name.to_string()))
    }

    pub fn by_name_mut(&mut self, name: &str) -> Result<&mut ArrayD<S>> {
        let id = self.id(name).ok_or_else(|| Error::UnknownParameter(name.to_string()))?;
        Ok(self.get_mut(id))
    }

    /// Number of tensors.
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Total number of learnable scalars.
    pub fn num_scalars(&self) -> usize {
        self.values.iter().map(|v| v.len()).sum()
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.values.len()).map(ParamId)
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &str, &ArrayD<S>)> {
        self.names.iter().zip(&self.values).enumerate().map(|(i, (n, v))| (ParamId(i), n.as_str(), v))
    }

    /// Replaces the value of `name`, keeping its shape.
    pub fn assign(&mut self, name: &str, value: ArrayD<S>) -> Result<()> {
        let slot = self.by_name_mut(name)?;
        if slot.shape() != value.shape() {
            return Err(Error::Shape {
                op: "assign",
                expected: format!("{:?}", slot.shape()),
                actual: format!("{:?}", value.shape()),
            });
        }
        *slot = value;
        Ok(())
    }

    /// Zero-filled tensors shaped like every parameter (gradient or optimizer buffers).
    pub fn zeros_like(&self) -> Vec<ArrayD<S>> {
        self.values.iter().map(|v| ArrayD::zeros(v.raw_dim())).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn init_depends_on_seed_and_name_only() {
        let mut a = ParamStore::<f32>::new(7);
        let mut b = ParamStore::<f32>::new(7);
        a.add("x/weight", &[4, 3], Init::FanInUniform { fan_in: 3, gain: 1.0 }).unwrap();
        a.add("y/weight", &[4, 3], Init::FanInUniform { fan_in: 3, gain: 1.0 }).unwrap();
        b.add("y/weight", &[4, 3], Init::FanInUniform { fan_in: 3, gain: 1.0 }).unwrap();
        assert_eq!(a.by_name("y/weight").unwrap(), b.by_name("y/weight").unwrap());
        assert_ne!(a.by_name("x/weight").unwrap(), a.by_name("y/weight").unwrap());
        let bound = 1.0 / 3f32.sqrt();
        assert!(a.by_name("x/weight").unwrap().iter().all(|v| v.abs() <= bound));
        assert_ne!(derive_seed(7, "x"), derive_seed(8, "x"));
    }

    #[test]
    fn duplicate_names_are_rejected() {
        let mut s = ParamStore::<f64>::new(0);
        s.add("a", &[1], Init::Zeros).unwrap();
        assert!(matches!(s.add("a", &[1], Init::Ones), Err(Error::DuplicateParameter(_))));
        assert_eq!(s.num_scalars(), 1);
    }
}
