//! Shared core layers and task-specific encoders/decoders.

use serde::{Deserialize, Serialize};

use crate::autograd::{Graph, NodeId};
use crate::error::{Error, Result};
use crate::ops::Activation;
use crate::params::{glorot_uniform, ParamId, ParamStore};
use crate::rng::Rng;
use crate::tensor::Tensor;

/// Architecture of one shared core layer. All core layers of a model share
/// the same kind, so any of them can be applied at any depth.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum CoreKind {
    /// `m -> m` affine map followed by the activation.
    Dense { units: usize, activation: Activation },
    /// `c -> c` same-padded 3x3 convolution, activation, then 2x2 max pooling.
    Conv { filters: usize, activation: Activation },
}

impl CoreKind {
    /// Output sample shape for a given input sample shape.
    pub fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        match *self {
            CoreKind::Dense { units, .. } => {
                if input != [units] {
                    return Err(Error::dim(
                        "core dense",
                        format!("layer of {units} units cannot take input {input:?}"),
                    ));
                }
                Ok(vec![units])
            }
            CoreKind::Conv { filters, .. } => {
                if input.len() != 3 || input[0] != filters {
                    return Err(Error::dim(
                        "core conv",
                        format!("layer with {filters} filters cannot take input {input:?}"),
                    ));
                }
                if input[1] < 2 || input[2] < 2 {
                    return Err(Error::dim(
                        "core conv",
                        format!("spatial size {}x{} too small to pool", input[1], input[2]),
                    ));
                }
                Ok(vec![filters, input[1] / 2, input[2] / 2])
            }
        }
    }
}

#[derive(Clone, Debug)]
pub struct CoreLayer {
    pub kind: CoreKind,
    pub weight: ParamId,
    pub bias: ParamId,
}

impl CoreLayer {
    pub(crate) fn init(kind: CoreKind, index: usize, store: &mut ParamStore, rng: &mut Rng) -> Self {
        let (w, b) = match kind {
            CoreKind::Dense { units, .. } => (
                glorot_uniform(&[units, units], units, units, rng),
                Tensor::zeros(&[units]),
            ),
            CoreKind::Conv { filters, .. } => (
                glorot_uniform(&[filters, filters, 3, 3], filters * 9, filters * 9, rng),
                Tensor::zeros(&[filters]),
            ),
        };
        Self {
            kind,
            weight: store.add(format!("core.{index}.weight"), w, true),
            bias: store.add(format!("core.{index}.bias"), b, true),
        }
    }

    /// `phi(W(x))`, plus pooling for convolutional layers.
    pub fn apply(&self, g: &mut Graph, store: &ParamStore, x: NodeId) -> Result<NodeId> {
        let w = g.param(store, self.weight);
        let b = g.param(store, self.bias);
        match self.kind {
            CoreKind::Dense { activation, .. } => {
                let z = g.affine(x, w, b)?;
                Ok(g.activate(z, activation))
            }
            CoreKind::Conv { activation, .. } => {
                let z = g.conv2d(x, w, b)?;
                let a = g.activate(z, activation);
                g.maxpool2x2(a)
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum EncoderKind {
    /// Passes the input through unchanged.
    Identity,
    /// Dense ReLU layer drawn from `seed` and never trained.
    FrozenRandomDense { input: usize, units: usize, seed: u64 },
    /// Trainable dense ReLU layer.
    LearnedDense { input: usize, units: usize },
    /// Trainable affine layer without nonlinearity.
    LearnedLinear { input: usize, units: usize },
}

#[derive(Clone, Debug)]
pub struct Encoder {
    pub kind: EncoderKind,
    params: Option<(ParamId, ParamId)>,
}

impl Encoder {
    pub(crate) fn init(kind: EncoderKind, index: usize, store: &mut ParamStore, rng: &mut Rng) -> Self {
        let params = match kind {
            EncoderKind::Identity => None,
            EncoderKind::FrozenRandomDense { input, units, seed } => {
                let mut own = Rng::seed_from(seed);
                let w = glorot_uniform(&[units, input], input, units, &mut own);
                Some((
                    store.add(format!("encoder.{index}.weight"), w, false),
                    store.add(format!("encoder.{index}.bias"), Tensor::zeros(&[units]), false),
                ))
            }
            EncoderKind::LearnedDense { input, units } | EncoderKind::LearnedLinear { input, units } => {
                let w = glorot_uniform(&[units, input], input, units, rng);
                Some((
                    store.add(format!("encoder.{index}.weight"), w, true),
                    store.add(format!("encoder.{index}.bias"), Tensor::zeros(&[units]), true),
                ))
            }
        };
        Self { kind, params }
    }

    /// Output sample shape given the shape the encoder receives.
    pub fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        match self.kind {
            EncoderKind::Identity => Ok(input.to_vec()),
            EncoderKind::FrozenRandomDense { input: n, units, .. }
            | EncoderKind::LearnedDense { input: n, units }
            | EncoderKind::LearnedLinear { input: n, units } => {
                if input.iter().product::<usize>() != n {
                    return Err(Error::dim("encoder", format!("expects {n} inputs, got {input:?}")));
                }
                Ok(vec![units])
            }
        }
    }

    pub fn apply(&self, g: &mut Graph, store: &ParamStore, x: NodeId) -> Result<NodeId> {
        let Some((wid, bid)) = self.params else {
            return Ok(x);
        };
        let w = g.param(store, wid);
        let b = g.param(store, bid);
        let z = g.affine(x, w, b)?;
        Ok(match self.kind {
            EncoderKind::LearnedLinear { .. } => z,
            _ => g.activate(z, Activation::Relu),
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum DecoderKind {
    /// Passes the core output through unchanged.
    Identity,
    /// Dense layer with sigmoid outputs (binary classification).
    DenseSigmoid { outputs: usize },
    /// Dense layer with softmax over classes.
    DenseSoftmax { classes: usize },
    /// Mean of all core output units; one output per sample.
    GlobalAveragePool,
}

#[derive(Clone, Debug)]
pub struct Decoder {
    pub kind: DecoderKind,
    params: Option<(ParamId, ParamId)>,
}

impl Decoder {
    pub(crate) fn init(kind: DecoderKind, index: usize, input: usize, store: &mut ParamStore, rng: &mut Rng) -> Self {
        let params = match kind {
            DecoderKind::GlobalAveragePool | DecoderKind::Identity => None,
            DecoderKind::DenseSigmoid { outputs: n } | DecoderKind::DenseSoftmax { classes: n } => {
                let w = glorot_uniform(&[n, input], input, n, rng);
                Some((
                    store.add(format!("decoder.{index}.weight"), w, true),
                    store.add(format!("decoder.{index}.bias"), Tensor::zeros(&[n]), true),
                ))
            }
        };
        Self { kind, params }
    }

    pub fn apply(&self, g: &mut Graph, store: &ParamStore, x: NodeId) -> Result<NodeId> {
        match (self.kind, self.params) {
            (DecoderKind::Identity, _) => Ok(x),
            (DecoderKind::GlobalAveragePool, _) => Ok(g.mean_features(x)),
            (DecoderKind::DenseSigmoid { .. }, Some((wid, bid))) => {
                let (w, b) = (g.param(store, wid), g.param(store, bid));
                let z = g.affine(x, w, b)?;
                Ok(g.activate(z, Activation::Sigmoid))
            }
            (DecoderKind::DenseSoftmax { .. }, Some((wid, bid))) => {
                let (w, b) = (g.param(store, wid), g.param(store, bid));
                let z = g.affine(x, w, b)?;
                g.softmax(z, 1)
            }
            _ => unreachable!("dense decoders always own parameters"),
        }
    }
}
