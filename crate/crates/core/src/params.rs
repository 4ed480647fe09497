//! Named parameter storage and initialization.

use serde::{Deserialize, Serialize};

use crate::rng::Rng;
use crate::tensor::{Real, Tensor};

/// Handle to a parameter inside a [`ParamStore`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ParamId(pub usize);

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Param {
    pub name: String,
    pub value: Tensor,
    /// Frozen parameters are never touched by the optimizer.
    pub trainable: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ParamStore {
    params: Vec<Param>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, value: Tensor, trainable: bool) -> ParamId {
        self.params.push(Param {
            name: name.into(),
            value,
            trainable,
        });
        ParamId(self.params.len() - 1)
    }

    pub fn get(&self, id: ParamId) -> &Param {
        &self.params[id.0]
    }

    pub fn value(&self, id: ParamId) -> &Tensor {
        &self.params[id.0].value
    }

    pub fn value_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.params[id.0].value
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> + '_ {
        (0..self.params.len()).map(ParamId)
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &Param)> {
        self.params.iter().enumerate().map(|(i, p)| (ParamId(i), p))
    }

    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.params.iter().position(|p| p.name == name).map(ParamId)
    }

    /// Number of trainable scalars.
    pub fn trainable_count(&self) -> usize {
        self.params.iter().filter(|p| p.trainable).map(|p| p.value.len()).sum()
    }
}

/// Glorot/Xavier uniform: `U(-a, a)` with `a = sqrt(6 / (fan_in + fan_out))`.
pub fn glorot_uniform(shape: &[usize], fan_in: usize, fan_out: usize, rng: &mut Rng) -> Tensor {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let mut t = Tensor::zeros(shape);
    for v in t.data_mut() {
        *v = rng.uniform_range(-limit, limit) as Real;
    }
    t
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn glorot_within_limit_and_seeded() {
        let mut a = Rng::seed_from(1);
        let mut b = Rng::seed_from(1);
        let ta = glorot_uniform(&[8, 4], 4, 8, &mut a);
        let tb = glorot_uniform(&[8, 4], 4, 8, &mut b);
        assert_eq!(ta, tb);
        let limit = (6.0f64 / 12.0).sqrt() as Real;
        assert!(ta.data().iter().all(|v| v.abs() <= limit));
    }

    #[test]
    fn trainable_count_skips_frozen() {
        let mut s = ParamStore::new();
        s.add("a", Tensor::zeros(&[3, 3]), true);
        s.add("b", Tensor::zeros(&[4]), false);
        assert_eq!(s.trainable_count(), 9);
        assert_eq!(s.find("b"), Some(ParamId(1)));
    }
}
