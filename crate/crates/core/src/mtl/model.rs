//! Multitask model assembly and the three ordering forward passes.

use serde::{Deserialize, Serialize};

use crate::autograd::{Graph, NodeId};
use crate::error::{Error, Result};
use crate::ops::Activation;
use crate::params::{ParamId, ParamStore};
use crate::rng::Rng;
use crate::tensor::{Real, Tensor};

use super::dropout::{dropout_node, Mode};
use super::layers::{CoreKind, CoreLayer, Decoder, DecoderKind, Encoder, EncoderKind};
use super::ordering::{is_permutation, scaling_from_logits, sigmoid_scaling, Gate, OrderingSpec, ScalingTensor};

/// Serializable architecture description; together with parameter values it
/// fully determines a [`MultitaskModel`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    /// Number of shared core layers (and of shared depths).
    pub depth: usize,
    pub core: CoreKind,
    /// Sample shape entering the first core layer (encoder output shape).
    pub core_input: Vec<usize>,
    /// Distinct encoders; tasks refer to them through `task_encoder`.
    pub encoders: Vec<EncoderKind>,
    pub task_encoder: Vec<usize>,
    pub decoders: Vec<DecoderKind>,
    pub task_decoder: Vec<usize>,
    pub ordering: OrderingSpec,
    #[serde(default)]
    pub dropout: Real,
}

impl ModelSpec {
    /// A spec where every task has its own encoder and decoder.
    pub fn unshared(
        depth: usize,
        core: CoreKind,
        core_input: Vec<usize>,
        encoders: Vec<EncoderKind>,
        decoders: Vec<DecoderKind>,
        ordering: OrderingSpec,
    ) -> Self {
        let tasks = encoders.len();
        Self {
            depth,
            core,
            core_input,
            encoders,
            task_encoder: (0..tasks).collect(),
            task_decoder: (0..decoders.len()).collect(),
            decoders,
            ordering,
            dropout: 0.0,
        }
    }

    pub fn tasks(&self) -> usize {
        self.task_encoder.len()
    }

    /// Number of candidate layers per depth under soft ordering.
    pub fn candidates(&self) -> usize {
        match self.ordering {
            OrderingSpec::Soft {
                include_identity: true, ..
            } => self.depth + 1,
            _ => self.depth,
        }
    }

    pub fn with_ordering(&self, ordering: OrderingSpec) -> Self {
        Self {
            ordering,
            ..self.clone()
        }
    }

    /// Sample shape after all core layers.
    pub fn core_output(&self) -> Result<Vec<usize>> {
        let mut shape = self.core_input.clone();
        for _ in 0..self.depth {
            shape = self.core.output_shape(&shape)?;
        }
        Ok(shape)
    }

    pub fn validate(&self) -> Result<()> {
        let tasks = self.tasks();
        if tasks == 0 || self.depth == 0 {
            return Err(Error::contract("model needs at least one task and one core layer"));
        }
        if self.task_decoder.len() != tasks {
            return Err(Error::contract(format!(
                "{} encoder assignments but {} decoder assignments",
                tasks,
                self.task_decoder.len()
            )));
        }
        if let Some(&e) = self.task_encoder.iter().find(|&&e| e >= self.encoders.len()) {
            return Err(Error::contract(format!("encoder index {e} out of range")));
        }
        if let Some(&d) = self.task_decoder.iter().find(|&&d| d >= self.decoders.len()) {
            return Err(Error::contract(format!("decoder index {d} out of range")));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::contract(format!("dropout rate {} outside [0, 1)", self.dropout)));
        }
        self.core_output()?;
        for (i, enc) in self.encoders.iter().enumerate() {
            let out = match enc {
                EncoderKind::Identity => continue,
                EncoderKind::FrozenRandomDense { units, .. }
                | EncoderKind::LearnedDense { units, .. }
                | EncoderKind::LearnedLinear { units, .. } => vec![*units],
            };
            if out != self.core_input {
                return Err(Error::dim(
                    "encoder",
                    format!("encoder {i} outputs {out:?}, core expects {:?}", self.core_input),
                ));
            }
        }
        match &self.ordering {
            OrderingSpec::Parallel => {}
            OrderingSpec::Permuted { perms } => {
                if perms.len() != tasks {
                    return Err(Error::contract(format!(
                        "{} permutations for {tasks} tasks",
                        perms.len()
                    )));
                }
                for (i, p) in perms.iter().enumerate() {
                    if !is_permutation(p, self.depth) {
                        return Err(Error::contract(format!(
                            "task {i}: {p:?} is not a permutation of 0..{}",
                            self.depth
                        )));
                    }
                }
            }
            OrderingSpec::Soft { include_identity, .. } => {
                if *include_identity && matches!(self.core, CoreKind::Conv { .. }) {
                    return Err(Error::dim(
                        "identity member",
                        "pooling core layers change the spatial size, so an identity map cannot join their sum",
                    ));
                }
            }
        }
        Ok(())
    }
}

/// Shared core layers, per-task encoders/decoders, and an ordering.
#[derive(Clone, Debug)]
pub struct MultitaskModel {
    spec: ModelSpec,
    params: ParamStore,
    core: Vec<CoreLayer>,
    encoders: Vec<Encoder>,
    decoders: Vec<Decoder>,
    logits: Option<ParamId>,
}

pub const LOGITS_PARAM: &str = "scaling.logits";

impl MultitaskModel {
    /// Validates `spec` and initializes parameters from `rng`.
    ///
    /// Core layers are drawn first, then encoders, then decoders, so models
    /// that differ only in ordering get identical weights from one seed.
    /// Scaling logits start at zero (uniform scales).
    pub fn new(spec: ModelSpec, rng: &mut Rng) -> Result<Self> {
        spec.validate()?;
        let mut params = ParamStore::new();
        let core = (0..spec.depth)
            .map(|j| CoreLayer::init(spec.core, j, &mut params, rng))
            .collect();
        let encoders = spec
            .encoders
            .iter()
            .enumerate()
            .map(|(i, k)| Encoder::init(k.clone(), i, &mut params, rng))
            .collect();
        let dec_in: usize = spec.core_output()?.iter().product();
        let decoders = spec
            .decoders
            .iter()
            .enumerate()
            .map(|(i, &k)| Decoder::init(k, i, dec_in, &mut params, rng))
            .collect();
        let logits = matches!(spec.ordering, OrderingSpec::Soft { .. }).then(|| {
            params.add(
                LOGITS_PARAM,
                Tensor::zeros(&[spec.tasks(), spec.candidates(), spec.depth]),
                true,
            )
        });
        Ok(Self {
            spec,
            params,
            core,
            encoders,
            decoders,
            logits,
        })
    }

    /// Same weights, different ordering. Scaling logits are dropped or
    /// freshly zero-initialized as needed.
    pub fn with_ordering(&self, ordering: OrderingSpec) -> Result<Self> {
        let mut other = MultitaskModel::new(self.spec.with_ordering(ordering), &mut Rng::seed_from(0))?;
        for id in other.params.ids().collect::<Vec<_>>() {
            let name = other.params.get(id).name.clone();
            if name == LOGITS_PARAM {
                continue;
            }
            let src = self
                .params
                .find(&name)
                .ok_or_else(|| Error::contract(format!("parameter {name} missing")))?;
            *other.params.value_mut(id) = self.params.value(src).clone();
        }
        Ok(other)
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }

    pub fn tasks(&self) -> usize {
        self.spec.tasks()
    }

    pub fn depth(&self) -> usize {
        self.spec.depth
    }

    pub fn ordering(&self) -> &OrderingSpec {
        &self.spec.ordering
    }

    pub fn dropout(&self) -> Real {
        self.spec.dropout
    }

    pub fn set_dropout(&mut self, rate: Real) -> Result<()> {
        if !(0.0..1.0).contains(&rate) {
            return Err(Error::contract(format!("dropout rate {rate} outside [0, 1)")));
        }
        self.spec.dropout = rate;
        Ok(())
    }

    pub fn logits(&self) -> Option<ParamId> {
        self.logits
    }

    pub fn core_layer(&self, j: usize) -> &CoreLayer {
        &self.core[j]
    }

    pub fn decoder_kind(&self, task: usize) -> DecoderKind {
        self.decoders[self.spec.task_decoder[task]].kind
    }

    pub fn encoder_kind(&self, task: usize) -> &EncoderKind {
        &self.encoders[self.spec.task_encoder[task]].kind
    }

    /// True when every task shares one encoder.
    pub fn encoders_shared(&self) -> bool {
        self.spec.task_encoder.windows(2).all(|w| w[0] == w[1])
    }

    pub fn trainable_param_count(&self) -> usize {
        self.params.trainable_count()
    }

    /// Current scales, or `None` for fixed orderings.
    pub fn scaling(&self) -> Option<ScalingTensor> {
        let id = self.logits?;
        let logits = self.params.value(id);
        match self.spec.ordering {
            OrderingSpec::Soft {
                gate: Gate::Sigmoid, ..
            } => sigmoid_scaling(logits).ok(),
            _ => scaling_from_logits(logits).ok(),
        }
    }

    fn check_task(&self, task: usize) -> Result<()> {
        if task >= self.tasks() {
            return Err(Error::contract(format!(
                "task index {task} out of range for {} tasks",
                self.tasks()
            )));
        }
        Ok(())
    }

    fn encode(&self, g: &mut Graph, task: usize, x: NodeId) -> Result<NodeId> {
        self.encoders[self.spec.task_encoder[task]].apply(g, &self.params, x)
    }

    fn decode(&self, g: &mut Graph, task: usize, h: NodeId) -> Result<NodeId> {
        self.decoders[self.spec.task_decoder[task]].apply(g, &self.params, h)
    }

    /// Forward pass with the model's configured ordering.
    pub fn forward(&self, g: &mut Graph, task: usize, x: NodeId, mode: Mode, rng: &mut Rng) -> Result<NodeId> {
        match self.spec.ordering {
            OrderingSpec::Parallel => self.forward_parallel(g, task, x, mode, rng),
            OrderingSpec::Permuted { .. } => self.forward_permuted(g, task, x, mode, rng),
            OrderingSpec::Soft { .. } => self.forward_soft(g, task, x, mode, rng),
        }
    }

    /// `D_i(phi W_D ... phi W_1 E_i(x))`.
    pub fn forward_parallel(&self, g: &mut Graph, task: usize, x: NodeId, mode: Mode, rng: &mut Rng) -> Result<NodeId> {
        if self.spec.ordering != OrderingSpec::Parallel {
            return Err(Error::contract(format!(
                "forward_parallel on a {} model",
                self.spec.ordering.name()
            )));
        }
        self.forward_fixed(g, task, x, |k| k, mode, rng)
    }

    /// `D_i(phi W_rho(D) ... phi W_rho(1) E_i(x))` with the task's permutation.
    pub fn forward_permuted(&self, g: &mut Graph, task: usize, x: NodeId, mode: Mode, rng: &mut Rng) -> Result<NodeId> {
        let OrderingSpec::Permuted { perms } = &self.spec.ordering else {
            return Err(Error::contract(format!(
                "forward_permuted on a {} model",
                self.spec.ordering.name()
            )));
        };
        self.check_task(task)?;
        let perm = perms[task].clone();
        self.forward_fixed(g, task, x, |k| perm[k], mode, rng)
    }

    fn forward_fixed(
        &self,
        g: &mut Graph,
        task: usize,
        x: NodeId,
        layer_at: impl Fn(usize) -> usize,
        mode: Mode,
        rng: &mut Rng,
    ) -> Result<NodeId> {
        self.check_task(task)?;
        let mut h = self.encode(g, task, x)?;
        for k in 0..self.spec.depth {
            h = self.core[layer_at(k)].apply(g, &self.params, h)?;
            h = dropout_node(g, h, self.spec.dropout, mode, rng)?;
        }
        self.decode(g, task, h)
    }

    /// Soft ordering with the learned scales:
    /// `y^k = sum_j s[i, j, k] * dropout(phi(W_j(y^{k-1})))`.
    pub fn forward_soft(&self, g: &mut Graph, task: usize, x: NodeId, mode: Mode, rng: &mut Rng) -> Result<NodeId> {
        let (OrderingSpec::Soft { gate, .. }, Some(lid)) = (&self.spec.ordering, self.logits) else {
            return Err(Error::contract(format!(
                "forward_soft on a {} model",
                self.spec.ordering.name()
            )));
        };
        self.check_task(task)?;
        let logits = g.param(&self.params, lid);
        let scales = match gate {
            Gate::Softmax => g.softmax(logits, 1)?,
            Gate::Sigmoid => g.activate(logits, Activation::Sigmoid),
        };
        self.soft_chain(g, task, x, scales, mode, rng)
    }

    /// Soft-ordering recursion with externally supplied, fixed scales.
    ///
    /// Works for any configured ordering, since only the shared core layers
    /// are involved. A scaling with `depth + 1` candidates uses its last
    /// slot as the weight of an identity map.
    pub fn forward_soft_with(
        &self,
        g: &mut Graph,
        task: usize,
        x: NodeId,
        scaling: &ScalingTensor,
        mode: Mode,
        rng: &mut Rng,
    ) -> Result<NodeId> {
        self.check_task(task)?;
        let d = self.spec.depth;
        if scaling.tasks() != self.tasks() || scaling.depth() != d || !(d..=d + 1).contains(&scaling.candidates()) {
            return Err(Error::dim(
                "forward_soft_with",
                format!(
                    "scaling {:?} does not fit {} tasks at depth {d}",
                    scaling.tensor().shape(),
                    self.tasks()
                ),
            ));
        }
        let scales = g.constant(scaling.tensor().clone());
        self.soft_chain(g, task, x, scales, mode, rng)
    }

    fn soft_chain(
        &self,
        g: &mut Graph,
        task: usize,
        x: NodeId,
        scales: NodeId,
        mode: Mode,
        rng: &mut Rng,
    ) -> Result<NodeId> {
        let d = self.spec.depth;
        let shape = g.value(scales).shape().to_vec();
        let candidates = shape[1];
        let index = |j: usize, k: usize| (task * candidates + j) * d + k;
        let mut h = self.encode(g, task, x)?;
        for k in 0..d {
            let mut acc: Option<NodeId> = None;
            for j in 0..candidates {
                let branch = if j < d {
                    let b = self.core[j].apply(g, &self.params, h)?;
                    dropout_node(g, b, self.spec.dropout, mode, rng)?
                } else {
                    h
                };
                let term = g.scale_by(branch, scales, index(j, k))?;
                acc = Some(match acc {
                    None => term,
                    Some(a) => g.add(a, term).map_err(|_| {
                        Error::dim(
                            "forward_soft",
                            format!("branch outputs at depth {} disagree in shape", k + 1),
                        )
                    })?,
                });
            }
            h = acc.expect("at least one candidate");
        }
        self.decode(g, task, h)
    }

    /// Eval-mode prediction for a batch.
    pub fn predict(&self, task: usize, x: &Tensor) -> Result<Tensor> {
        let mut g = Graph::new();
        let xin = g.constant(x.clone());
        let out = self.forward(&mut g, task, xin, Mode::Eval, &mut Rng::seed_from(0))?;
        Ok(g.value(out).clone())
    }

    /// Eval-mode prediction with fixed scales (see [`Self::forward_soft_with`]).
    pub fn predict_with_scaling(&self, task: usize, x: &Tensor, scaling: &ScalingTensor) -> Result<Tensor> {
        let mut g = Graph::new();
        let xin = g.constant(x.clone());
        let out = self.forward_soft_with(&mut g, task, xin, scaling, Mode::Eval, &mut Rng::seed_from(0))?;
        Ok(g.value(out).clone())
    }
}
