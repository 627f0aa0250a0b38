use ndarray::Array2;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Uniform};
use serde::{Deserialize, Serialize};

use super::graph::Gradients;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ParamId(pub usize);

/// Named trainable tensors plus their accumulated gradients.
#[derive(Debug, Clone)]
pub struct ParamStore<T> {
    names: Vec<String>,
    values: Vec<Array2<T>>,
    grads: Vec<Array2<T>>,
    frozen: Vec<bool>,
}

/// Serialized form used inside checkpoints.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ParamRecord {
    pub name: String,
    pub shape: [usize; 2],
    pub data: Vec<f64>,
}

/// Deterministic RNG stream derived from a run seed and a component name, so
/// each sub-module initializes identically regardless of what else exists.
pub fn stream_rng(seed: u64, name: &str) -> ChaCha8Rng {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in name.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    ChaCha8Rng::seed_from_u64(seed ^ h)
}

pub enum Init {
    Zeros,
    Ones,
    /// Xavier/Glorot uniform over (fan_in, fan_out) = shape.
    Xavier,
    Normal(f64),
}

impl<T: Scalar> Default for ParamStore<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Scalar> ParamStore<T> {
    pub fn new() -> Self {
        Self {
            names: Vec::new(),
            values: Vec::new(),
            grads: Vec::new(),
            frozen: Vec::new(),
        }
    }

    pub fn add(&mut self, name: impl Into<String>, value: Array2<T>) -> ParamId {
        self.grads.push(Array2::zeros(value.dim()));
        self.frozen.push(false);
        self.values.push(value);
        self.names.push(name.into());
        ParamId(self.values.len() - 1)
    }

    pub fn init<R: Rng>(&mut self, name: impl Into<String>, shape: (usize, usize), init: Init, rng: &mut R) -> ParamId {
        let value = match init {
            Init::Zeros => Array2::zeros(shape),
            Init::Ones => Array2::ones(shape),
            Init::Xavier => {
                let bound = (6.0 / (shape.0 + shape.1) as f64).sqrt();
                let dist = Uniform::new_inclusive(-bound, bound);
                Array2::from_shape_simple_fn(shape, || T::of(dist.sample(rng)))
            }
            Init::Normal(std) => {
                let dist = Normal::new(0.0, std).expect("finite std");
                Array2::from_shape_simple_fn(shape, || T::of(dist.sample(rng)))
            }
        };
        self.add(name, value)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.values.len()).map(ParamId)
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.names.iter().position(|n| n == name).map(ParamId)
    }

    pub fn value(&self, id: ParamId) -> &Array2<T> {
        &self.values[id.0]
    }

    pub fn value_mut(&mut self, id: ParamId) -> &mut Array2<T> {
        &mut self.values[id.0]
    }

    pub fn grad(&self, id: ParamId) -> &Array2<T> {
        &self.grads[id.0]
    }

    pub fn num_scalars(&self) -> usize {
        self.values.iter().map(|v| v.len()).sum()
    }

    pub fn zero_grad(&mut self) {
        for g in &mut self.grads {
            g.fill(T::zero());
        }
    }

    /// Frozen parameters are skipped by the optimizers, weight decay included.
    pub fn set_frozen(&mut self, id: ParamId, frozen: bool) {
        self.frozen[id.0] = frozen;
    }

    pub fn is_frozen(&self, id: ParamId) -> bool {
        self.frozen[id.0]
    }

    /// Parameters the optimizers update.
    pub fn trainable(&self) -> impl Iterator<Item = ParamId> + '_ {
        self.ids().filter(|id| !self.frozen[id.0])
    }

    pub fn accumulate(&mut self, grads: &Gradients<T>) {
        for (id, g) in grads.iter() {
            self.grads[id.0] += g;
        }
    }

    pub fn grad_norm(&self) -> T {
        self.grads
            .iter()
            .flat_map(|g| g.iter())
            .map(|&x| x * x)
            .sum::<T>()
            .sqrt()
    }

    pub fn to_records(&self) -> Vec<ParamRecord> {
        self.ids()
            .map(|id| {
                let v = self.value(id);
                ParamRecord {
                    name: self.name(id).to_string(),
                    shape: [v.nrows(), v.ncols()],
                    data: v.iter().map(|x| x.as_f64()).collect(),
                }
            })
            .collect()
    }

    /// Overwrites values from checkpoint records; names and shapes must match
    /// this store exactly.
    pub fn load_records(&mut self, records: &[ParamRecord]) -> Result<()> {
        if records.len() != self.values.len() {
            return Err(Error::Config(format!(
                "checkpoint has {} parameters, model expects {}",
                records.len(),
                self.values.len()
            )));
        }
        for (id, rec) in self.ids().zip(records) {
            let dim = self.values[id.0].dim();
            if rec.name != self.names[id.0] || [dim.0, dim.1] != rec.shape || rec.data.len() != dim.0 * dim.1 {
                return Err(Error::Config(format!(
                    "checkpoint parameter `{}` {:?} does not match `{}` {:?}",
                    rec.name, rec.shape, self.names[id.0], dim
                )));
            }
            self.values[id.0] =
                Array2::from_shape_vec(dim, rec.data.iter().map(|&x| T::of(x)).collect()).expect("shape checked");
        }
        Ok(())
    }
}
