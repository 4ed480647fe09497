//! Adam with bias correction.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::autograd::Gradients;
use crate::params::{ParamId, ParamStore};
use crate::tensor::{Real, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdamConfig {
    #[serde(default = "AdamConfig::default_lr")]
    pub lr: Real,
    #[serde(default = "AdamConfig::default_beta1")]
    pub beta1: Real,
    #[serde(default = "AdamConfig::default_beta2")]
    pub beta2: Real,
    #[serde(default = "AdamConfig::default_eps")]
    pub eps: Real,
}

impl AdamConfig {
    fn default_lr() -> Real {
        1e-3
    }
    fn default_beta1() -> Real {
        0.9
    }
    fn default_beta2() -> Real {
        0.999
    }
    fn default_eps() -> Real {
        1e-8
    }

    pub fn with_lr(lr: Real) -> Self {
        Self { lr, ..Self::default() }
    }
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: Self::default_lr(),
            beta1: Self::default_beta1(),
            beta2: Self::default_beta2(),
            eps: Self::default_eps(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
struct Moments {
    first: Tensor,
    second: Tensor,
}

/// Per-parameter first/second moments and the shared step counter.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct AdamState {
    step: u64,
    moments: BTreeMap<ParamId, Moments>,
}

impl AdamState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    /// One update of every trainable parameter in `store`. Parameters the
    /// backward pass did not reach are treated as having zero gradient.
    pub fn update(&mut self, store: &mut ParamStore, grads: &Gradients, cfg: &AdamConfig) {
        self.step += 1;
        let ids: Vec<ParamId> = store.iter().filter(|(_, p)| p.trainable).map(|(id, _)| id).collect();
        for id in ids {
            let g = grads.param_opt(id).cloned();
            let param = store.value_mut(id);
            let g = g.unwrap_or_else(|| Tensor::zeros(param.shape()));
            self.update_tensor(id, param, &g, cfg);
        }
    }

    fn update_tensor(&mut self, id: ParamId, param: &mut Tensor, grad: &Tensor, cfg: &AdamConfig) {
        let m = self.moments.entry(id).or_insert_with(|| Moments {
            first: Tensor::zeros(param.shape()),
            second: Tensor::zeros(param.shape()),
        });
        let t = self.step as i32;
        let c1 = 1.0 - cfg.beta1.powi(t);
        let c2 = 1.0 - cfg.beta2.powi(t);
        let (first, second) = (m.first.data_mut(), m.second.data_mut());
        for (i, (p, &g)) in param.data_mut().iter_mut().zip(grad.data()).enumerate() {
            first[i] = cfg.beta1 * first[i] + (1.0 - cfg.beta1) * g;
            second[i] = cfg.beta2 * second[i] + (1.0 - cfg.beta2) * g * g;
            let mhat = first[i] / c1;
            let vhat = second[i] / c2;
            *p -= cfg.lr * mhat / (vhat.sqrt() + cfg.eps);
        }
    }
}

/// Standalone Adam step over a store, mirroring the trainer's update.
pub fn adam_update(state: &mut AdamState, store: &mut ParamStore, grads: &Gradients, cfg: &AdamConfig) {
    state.update(store, grads, cfg);
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autograd::Graph;

    fn quadratic_grads(store: &ParamStore, id: ParamId, center: &Tensor) -> (Real, Gradients) {
        let mut g = Graph::new();
        let p = g.param(store, id);
        let c = g.constant(center.scale(-1.0));
        let d = g.add(p, c).unwrap();
        let sq = g.mul(d, d).unwrap();
        let loss = g.sum(sq);
        let value = g.value(loss).data()[0];
        (value, g.backward(loss, Tensor::scalar(1.0)).unwrap())
    }

    #[test]
    fn first_step_moves_by_lr() {
        let mut store = ParamStore::new();
        let id = store.add("p", Tensor::from_vec(vec![1.0, -2.0, 0.5]), true);
        let center = Tensor::from_vec(vec![3.0, 3.0, -3.0]);
        let before = store.value(id).clone();
        let (_, grads) = quadratic_grads(&store, id, &center);
        let cfg = AdamConfig::default();
        AdamState::new().update(&mut store, &grads, &cfg);
        for (a, b) in store.value(id).data().iter().zip(before.data()) {
            let delta = (a - b).abs();
            assert!(delta <= cfg.lr && delta >= cfg.lr * (1.0 - 1e-4), "{delta}");
        }
        // Moves toward the center, i.e. against the gradient sign.
        assert!(store.value(id).data()[0] > 1.0 && store.value(id).data()[2] < 0.5);
    }

    #[test]
    fn zero_gradient_is_a_fixed_point() {
        let mut store = ParamStore::new();
        let id = store.add("p", Tensor::from_vec(vec![0.7, 0.1]), true);
        let before = store.value(id).clone();
        let grads = Graph::new().backward_empty();
        let mut state = AdamState::new();
        for _ in 0..50 {
            state.update(&mut store, &grads, &AdamConfig::default());
        }
        assert_eq!(store.value(id), &before);
    }

    #[test]
    fn frozen_params_untouched() {
        let mut store = ParamStore::new();
        let id = store.add("p", Tensor::from_vec(vec![1.0]), false);
        let (_, grads) = quadratic_grads(&store, id, &Tensor::from_vec(vec![5.0]));
        AdamState::new().update(&mut store, &grads, &AdamConfig::default());
        assert_eq!(store.value(id).data(), &[1.0]);
    }

    #[test]
    fn quadratic_bowl_converges() {
        let mut store = ParamStore::new();
        let id = store.add("p", Tensor::from_vec(vec![0.5, -0.3, 0.2]), true);
        let center = Tensor::from_vec(vec![0.1, 0.2, -0.1]);
        let cfg = AdamConfig::with_lr(1e-2);
        let mut state = AdamState::new();
        let mut losses = Vec::new();
        for _ in 0..500 {
            let (loss, grads) = quadratic_grads(&store, id, &center);
            losses.push(loss);
            state.update(&mut store, &grads, &cfg);
        }
        let (final_loss, _) = quadratic_grads(&store, id, &center);
        assert!(final_loss < 1e-4, "final loss {final_loss}");
        // Monotone over the early descent phase, before oscillation around
        // the minimum sets in.
        let warm = 10;
        let descent_end = losses.iter().position(|&l| l < 1e-3).unwrap();
        assert!(losses[warm..descent_end].windows(2).all(|w| w[1] <= w[0]));
    }
}
