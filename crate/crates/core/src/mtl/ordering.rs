//! Layer orderings and the per-task scaling tensor of soft ordering.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ops;
use crate::rng::Rng;
use crate::tensor::{Real, Tensor};

/// How the scaling logits are turned into scales.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Gate {
    /// Softmax over the candidate-layer axis; every (task, depth) column sums to 1.
    Softmax,
    /// Independent sigmoid per scale. Columns do not sum to 1; used only for
    /// layer-behavior sweeps, where one scale must move while the rest stay put.
    Sigmoid,
}

/// Which shared layer is applied at which depth, per task.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "mode")]
pub enum OrderingSpec {
    /// Every task applies layer `k` at depth `k`.
    Parallel,
    /// Task `i` applies layer `perms[i][k]` at depth `k` (0-based).
    Permuted { perms: Vec<Vec<usize>> },
    /// Task `i` mixes all layers at every depth with learned scales.
    Soft {
        gate: Gate,
        #[serde(default)]
        include_identity: bool,
    },
}

impl OrderingSpec {
    pub fn name(&self) -> &'static str {
        match self {
            OrderingSpec::Parallel => "parallel",
            OrderingSpec::Permuted { .. } => "permuted",
            OrderingSpec::Soft { .. } => "soft",
        }
    }

    /// One uniformly random permutation per task.
    pub fn random_permuted(tasks: usize, depth: usize, rng: &mut Rng) -> Self {
        OrderingSpec::Permuted {
            perms: (0..tasks).map(|_| rng.permutation(depth)).collect(),
        }
    }

    /// Random permutations, pairwise distinct whenever `tasks <= depth!`.
    pub fn random_distinct_permuted(tasks: usize, depth: usize, rng: &mut Rng) -> Self {
        let available = (1..=depth)
            .try_fold(1usize, |acc, k| acc.checked_mul(k))
            .unwrap_or(usize::MAX);
        let mut perms: Vec<Vec<usize>> = Vec::with_capacity(tasks);
        while perms.len() < tasks {
            let p = rng.permutation(depth);
            if perms.len() >= available || !perms.contains(&p) {
                perms.push(p);
            }
        }
        OrderingSpec::Permuted { perms }
    }
}

pub fn is_permutation(p: &[usize], n: usize) -> bool {
    if p.len() != n {
        return false;
    }
    let mut seen = vec![false; n];
    for &v in p {
        if v >= n || seen[v] {
            return false;
        }
        seen[v] = true;
    }
    true
}

/// Scales `s[i, j, k]`: weight of candidate layer `j` at depth `k` for task
/// `i`. Shape `[tasks, candidates, depth]`, where `candidates` is the depth,
/// plus one when a fixed identity member is included (last slot).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingTensor {
    values: Tensor,
}

impl ScalingTensor {
    pub fn from_tensor(values: Tensor) -> Result<Self> {
        if values.rank() != 3 {
            return Err(Error::dim(
                "ScalingTensor",
                format!("expected [tasks, candidates, depth], got {:?}", values.shape()),
            ));
        }
        Ok(Self { values })
    }

    pub fn tensor(&self) -> &Tensor {
        &self.values
    }

    pub fn into_tensor(self) -> Tensor {
        self.values
    }

    pub fn tasks(&self) -> usize {
        self.values.shape()[0]
    }

    pub fn candidates(&self) -> usize {
        self.values.shape()[1]
    }

    pub fn depth(&self) -> usize {
        self.values.shape()[2]
    }

    pub fn get(&self, task: usize, layer: usize, depth: usize) -> Real {
        self.values.at(&[task, layer, depth])
    }

    pub fn set(&mut self, task: usize, layer: usize, depth: usize, value: Real) {
        self.values.set(&[task, layer, depth], value);
    }

    /// Flat index of `s[task, layer, depth]`.
    pub fn index(&self, task: usize, layer: usize, depth: usize) -> usize {
        self.values.offset(&[task, layer, depth])
    }

    /// The scales of every candidate at one (task, depth).
    pub fn column(&self, task: usize, depth: usize) -> Vec<Real> {
        (0..self.candidates()).map(|j| self.get(task, j, depth)).collect()
    }

    /// Appends a zero-weight identity slot to every column.
    pub fn with_identity_slot(&self) -> Self {
        let (t, c, d) = (self.tasks(), self.candidates(), self.depth());
        let mut out = Tensor::zeros(&[t, c + 1, d]);
        for i in 0..t {
            for j in 0..c {
                for k in 0..d {
                    out.set(&[i, j, k], self.get(i, j, k));
                }
            }
        }
        Self { values: out }
    }
}

/// Softmax over the candidate axis of `[tasks, candidates, depth]` logits.
pub fn scaling_from_logits(logits: &Tensor) -> Result<ScalingTensor> {
    ScalingTensor::from_tensor(logits.clone())?;
    ScalingTensor::from_tensor(ops::softmax_axis(logits, 1)?)
}

/// Elementwise sigmoid of the logits (sweep mode).
pub fn sigmoid_scaling(logits: &Tensor) -> Result<ScalingTensor> {
    ScalingTensor::from_tensor(logits.map(ops::sigmoid))
}

/// The hard scaling that reproduces fixed orderings: `s[i, perms[i][k], k] = 1`.
pub fn one_hot_scaling(perms: &[Vec<usize>]) -> Result<ScalingTensor> {
    let d = perms.first().map_or(0, Vec::len);
    if perms.is_empty() || d == 0 {
        return Err(Error::contract(
            "one_hot_scaling needs at least one non-empty permutation",
        ));
    }
    let mut s = Tensor::zeros(&[perms.len(), d, d]);
    for (i, p) in perms.iter().enumerate() {
        if !is_permutation(p, d) {
            return Err(Error::contract(format!(
                "task {i}: {p:?} is not a permutation of 0..{d}"
            )));
        }
        for (k, &j) in p.iter().enumerate() {
            s.set(&[i, j, k], 1.0);
        }
    }
    ScalingTensor::from_tensor(s)
}
