//! Tape-based reverse-mode automatic differentiation.
//!
//! A [`Graph`] records every primitive applied during a forward pass. Nodes
//! may only reference earlier nodes, so the insertion order is a topological
//! order and [`Graph::backward`] is a single reverse sweep. Parameters are
//! bound from a [`ParamStore`] once per graph; gradients are reported per
//! [`ParamId`].

use std::collections::{BTreeMap, HashMap};

use crate::error::{Error, Result};
use crate::loss::{self, LossKind};
use crate::ops::{self, Activation};
use crate::params::{ParamId, ParamStore};
use crate::tensor::{Real, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// The primitive that produced a node.
#[derive(Clone, Debug)]
pub enum Op {
    Input,
    Constant,
    Param(ParamId),
    Affine {
        x: NodeId,
        w: NodeId,
        b: NodeId,
    },
    Conv2d {
        x: NodeId,
        k: NodeId,
        b: NodeId,
    },
    MaxPool {
        x: NodeId,
        argmax: Vec<usize>,
    },
    Activate {
        x: NodeId,
        kind: Activation,
    },
    Softmax {
        x: NodeId,
        axis: usize,
    },
    Add {
        a: NodeId,
        b: NodeId,
    },
    Mul {
        a: NodeId,
        b: NodeId,
    },
    /// `x * s[index]` for a scalar taken out of another node.
    ScaleBy {
        x: NodeId,
        s: NodeId,
        index: usize,
    },
    /// Elementwise product with a fixed tensor (dropout masks).
    Mask {
        x: NodeId,
        mask: Tensor,
    },
    /// Mean over all non-leading axes: `[batch, ...] -> [batch, 1]`.
    MeanFeatures {
        x: NodeId,
    },
    Reshape {
        x: NodeId,
    },
    Sum {
        x: NodeId,
    },
    Loss {
        pred: NodeId,
        target: Tensor,
        kind: LossKind,
    },
}

impl Op {
    fn inputs(&self) -> Vec<NodeId> {
        match self {
            Op::Input | Op::Constant | Op::Param(_) => vec![],
            Op::Affine { x, w, b } | Op::Conv2d { x, k: w, b } => vec![*x, *w, *b],
            Op::Add { a, b } | Op::Mul { a, b } => vec![*a, *b],
            Op::ScaleBy { x, s, .. } => vec![*x, *s],
            Op::MaxPool { x, .. }
            | Op::Activate { x, .. }
            | Op::Softmax { x, .. }
            | Op::Mask { x, .. }
            | Op::MeanFeatures { x }
            | Op::Reshape { x }
            | Op::Sum { x } => vec![*x],
            Op::Loss { pred, .. } => vec![*pred],
        }
    }
}

#[derive(Clone, Debug)]
pub struct Node {
    pub op: Op,
    pub value: Tensor,
}

#[derive(Default)]
pub struct Graph {
    nodes: Vec<Node>,
    bound: HashMap<ParamId, NodeId>,
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, id: NodeId) -> &Tensor {
        &self.nodes[id.0].value
    }

    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id.0]
    }

    /// Every node in insertion (topological) order.
    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    fn push(&mut self, op: Op, value: Tensor) -> NodeId {
        self.nodes.push(Node { op, value });
        NodeId(self.nodes.len() - 1)
    }

    /// A differentiable leaf whose gradient can be read back.
    pub fn input(&mut self, value: Tensor) -> NodeId {
        self.push(Op::Input, value)
    }

    pub fn constant(&mut self, value: Tensor) -> NodeId {
        self.push(Op::Constant, value)
    }

    /// Binds a parameter; repeated binds of the same id share one node.
    pub fn param(&mut self, store: &ParamStore, id: ParamId) -> NodeId {
        if let Some(&n) = self.bound.get(&id) {
            return n;
        }
        let n = self.push(Op::Param(id), store.value(id).clone());
        self.bound.insert(id, n);
        n
    }

    pub fn affine(&mut self, x: NodeId, w: NodeId, b: NodeId) -> Result<NodeId> {
        let v = ops::affine_forward(self.value(w), self.value(b), self.value(x))?;
        Ok(self.push(Op::Affine { x, w, b }, v))
    }

    pub fn conv2d(&mut self, x: NodeId, k: NodeId, b: NodeId) -> Result<NodeId> {
        let v = ops::conv2d_forward(self.value(k), self.value(b), self.value(x))?;
        Ok(self.push(Op::Conv2d { x, k, b }, v))
    }

    pub fn maxpool2x2(&mut self, x: NodeId) -> Result<NodeId> {
        let (v, argmax) = ops::maxpool2x2(self.value(x))?;
        Ok(self.push(Op::MaxPool { x, argmax }, v))
    }

    pub fn activate(&mut self, x: NodeId, kind: Activation) -> NodeId {
        if kind == Activation::Identity {
            return x;
        }
        let v = ops::activate(kind, self.value(x));
        self.push(Op::Activate { x, kind }, v)
    }

    pub fn softmax(&mut self, x: NodeId, axis: usize) -> Result<NodeId> {
        let v = ops::softmax_axis(self.value(x), axis)?;
        Ok(self.push(Op::Softmax { x, axis }, v))
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let v = self.value(a).add(self.value(b)).map_err(|_| {
            Error::dim(
                "add",
                format!("{:?} + {:?}", self.value(a).shape(), self.value(b).shape()),
            )
        })?;
        Ok(self.push(Op::Add { a, b }, v))
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let v = self.value(a).zip_map(self.value(b), |x, y| x * y)?;
        Ok(self.push(Op::Mul { a, b }, v))
    }

    pub fn scale_by(&mut self, x: NodeId, s: NodeId, index: usize) -> Result<NodeId> {
        let c = *self
            .value(s)
            .data()
            .get(index)
            .ok_or_else(|| Error::dim("scale_by", format!("index {index} out of range")))?;
        let v = self.value(x).scale(c);
        Ok(self.push(Op::ScaleBy { x, s, index }, v))
    }

    pub fn mask(&mut self, x: NodeId, mask: Tensor) -> Result<NodeId> {
        let v = self.value(x).zip_map(&mask, |a, m| a * m)?;
        Ok(self.push(Op::Mask { x, mask }, v))
    }

    pub fn mean_features(&mut self, x: NodeId) -> NodeId {
        let t = self.value(x);
        let (rows, n) = (t.rows(), t.row_len());
        let data = (0..rows)
            .map(|r| t.data()[r * n..(r + 1) * n].iter().sum::<Real>() / n as Real)
            .collect();
        let v = Tensor::new(vec![rows, 1], data).expect("shape");
        self.push(Op::MeanFeatures { x }, v)
    }

    pub fn reshape(&mut self, x: NodeId, shape: &[usize]) -> Result<NodeId> {
        let v = self.value(x).clone().reshape(shape)?;
        Ok(self.push(Op::Reshape { x }, v))
    }

    pub fn sum(&mut self, x: NodeId) -> NodeId {
        let v = Tensor::scalar(self.value(x).sum());
        self.push(Op::Sum { x }, v)
    }

    pub fn loss(&mut self, pred: NodeId, target: Tensor, kind: LossKind) -> Result<NodeId> {
        let v = match (&self.node(pred).op, kind) {
            (
                Op::Activate {
                    x,
                    kind: Activation::Sigmoid,
                },
                LossKind::Bce,
            ) => loss::bce_from_logits(self.value(*x), &target)?,
            _ => loss::loss_value(kind, self.value(pred), &target)?,
        };
        Ok(self.push(Op::Loss { pred, target, kind }, Tensor::scalar(v)))
    }

    /// Reverse sweep from `output`, seeded with `seed` (same shape as the
    /// output value).
    pub fn backward(&self, output: NodeId, seed: Tensor) -> Result<Gradients> {
        if seed.shape() != self.value(output).shape() {
            return Err(Error::dim(
                "backward",
                format!("seed {:?} vs output {:?}", seed.shape(), self.value(output).shape()),
            ));
        }
        let mut grads: Vec<Option<Tensor>> = vec![None; output.0 + 1];
        grads[output.0] = Some(seed);
        for i in (0..=output.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            for inp in node.op.inputs() {
                if inp.0 >= i {
                    return Err(Error::Graph(format!(
                        "node {i} depends on node {} which is not earlier",
                        inp.0
                    )));
                }
            }
            for (target, contrib) in self.local_grads(node, &g)? {
                accumulate(&mut grads[target.0], contrib)?;
            }
            grads[i] = Some(g);
        }
        let mut params = BTreeMap::new();
        for (&pid, &nid) in &self.bound {
            if let Some(Some(g)) = grads.get(nid.0) {
                params.insert(pid, g.clone());
            }
        }
        Ok(Gradients { nodes: grads, params })
    }

    /// Gradients object with nothing recorded (every parameter gradient is
    /// zero).
    pub fn backward_empty(&self) -> Gradients {
        Gradients {
            nodes: Vec::new(),
            params: BTreeMap::new(),
        }
    }

    fn local_grads(&self, node: &Node, g: &Tensor) -> Result<Vec<(NodeId, Tensor)>> {
        Ok(match &node.op {
            Op::Input | Op::Constant | Op::Param(_) => vec![],
            Op::Affine { x, w, b } => {
                let (gw, gb, gx) = ops::affine_backward(self.value(*w), self.value(*x), g);
                vec![(*w, gw), (*b, gb), (*x, gx)]
            }
            Op::Conv2d { x, k, b } => {
                let (gk, gb, gx) = ops::conv2d_backward(self.value(*k), self.value(*x), g);
                vec![(*k, gk), (*b, gb), (*x, gx)]
            }
            Op::MaxPool { x, argmax } => {
                vec![(*x, ops::maxpool2x2_backward(argmax, self.value(*x).shape(), g))]
            }
            Op::Activate { x, kind } => vec![(*x, ops::activate_backward(*kind, &node.value, g))],
            Op::Softmax { x, axis } => vec![(*x, ops::softmax_axis_backward(&node.value, g, *axis))],
            Op::Add { a, b } => vec![(*a, g.clone()), (*b, g.clone())],
            Op::Mul { a, b } => vec![
                (*a, g.zip_map(self.value(*b), |g, v| g * v)?),
                (*b, g.zip_map(self.value(*a), |g, v| g * v)?),
            ],
            Op::ScaleBy { x, s, index } => {
                let c = self.value(*s).data()[*index];
                let dot: Real = g.data().iter().zip(self.value(*x).data()).map(|(a, b)| a * b).sum();
                let mut gs = Tensor::zeros(self.value(*s).shape());
                gs.data_mut()[*index] = dot;
                vec![(*x, g.scale(c)), (*s, gs)]
            }
            Op::Mask { x, mask } => vec![(*x, g.zip_map(mask, |g, m| g * m)?)],
            Op::MeanFeatures { x } => {
                let xs = self.value(*x);
                let n = xs.row_len();
                let mut gx = Tensor::zeros(xs.shape());
                for (r, chunk) in gx.data_mut().chunks_mut(n).enumerate() {
                    chunk.fill(g.data()[r] / n as Real);
                }
                vec![(*x, gx)]
            }
            Op::Reshape { x } => vec![(*x, g.clone().reshape(self.value(*x).shape())?)],
            Op::Sum { x } => vec![(*x, Tensor::full(self.value(*x).shape(), g.data()[0]))],
            Op::Loss { pred, target, kind } => {
                let lg = loss::loss_grad(*kind, self.value(*pred), target)?;
                vec![(*pred, lg.scale(g.data()[0]))]
            }
        })
    }
}

fn accumulate(slot: &mut Option<Tensor>, contrib: Tensor) -> Result<()> {
    match slot {
        Some(acc) => acc.add_assign(&contrib),
        None => {
            *slot = Some(contrib);
            Ok(())
        }
    }
}

/// Result of a backward pass.
#[derive(Debug)]
pub struct Gradients {
    nodes: Vec<Option<Tensor>>,
    params: BTreeMap<ParamId, Tensor>,
}

impl Gradients {
    /// Gradient with respect to any node, if the node influenced the output.
    pub fn wrt(&self, node: NodeId) -> Option<&Tensor> {
        self.nodes.get(node.0).and_then(Option::as_ref)
    }

    /// Gradient for a parameter; zeros if it did not influence the output.
    pub fn param(&self, id: ParamId, store: &ParamStore) -> Tensor {
        self.params
            .get(&id)
            .cloned()
            .unwrap_or_else(|| Tensor::zeros(store.value(id).shape()))
    }

    pub fn param_opt(&self, id: ParamId) -> Option<&Tensor> {
        self.params.get(&id)
    }

    /// Adds another pass's parameter gradients into this one.
    pub fn merge(&mut self, other: Gradients) -> Result<()> {
        for (id, g) in other.params {
            match self.params.get_mut(&id) {
                Some(acc) => acc.add_assign(&g)?,
                None => {
                    self.params.insert(id, g);
                }
            }
        }
        Ok(())
    }
}
