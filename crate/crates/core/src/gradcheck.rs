//! Central finite differences, used as an independent gradient oracle.

use crate::autograd::{Graph, NodeId, Op};
use crate::error::{Error, Result};
use crate::loss::LossKind;
use crate::ops::Activation;
use crate::params::{ParamId, ParamStore};
use crate::rng::Rng;
use crate::tensor::{Real, Tensor};

pub const DEFAULT_STEP: Real = 1e-6;

/// Magnitude below which relative error degrades to absolute error scaled
/// by this floor.
pub const RELATIVE_FLOOR: Real = 1e-3;

/// `(f(x + h e_i) - f(x - h e_i)) / 2h` for every coordinate `i`.
///
/// `f` must return a single-element tensor.
pub fn finite_difference_grad<F>(f: F, x: &Tensor, h: Real) -> Result<Tensor>
where
    F: Fn(&Tensor) -> Result<Tensor>,
{
    if h.partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater) {
        return Err(Error::contract(format!(
            "finite-difference step must be positive, got {h}"
        )));
    }
    let eval = |t: &Tensor| -> Result<Real> {
        let out = f(t)?;
        if out.len() != 1 {
            return Err(Error::contract(format!(
                "finite_difference_grad needs a scalar function, output has shape {:?}",
                out.shape()
            )));
        }
        Ok(out.data()[0])
    };
    let mut grad = Tensor::zeros(x.shape());
    let mut probe = x.clone();
    for i in 0..x.len() {
        let orig = probe.data()[i];
        probe.data_mut()[i] = orig + h;
        let up = eval(&probe)?;
        probe.data_mut()[i] = orig - h;
        let down = eval(&probe)?;
        probe.data_mut()[i] = orig;
        grad.data_mut()[i] = (up - down) / (2.0 * h);
    }
    Ok(grad)
}

/// `max_i |a_i - b_i| / max(|a_i|, |b_i|, RELATIVE_FLOOR)`.
pub fn max_relative_error(a: &Tensor, b: &Tensor) -> Result<Real> {
    a.expect_same_shape(b, "max_relative_error")?;
    Ok(a.data()
        .iter()
        .zip(b.data())
        .map(|(&x, &y)| (x - y).abs() / x.abs().max(y.abs()).max(RELATIVE_FLOOR))
        .fold(0.0, Real::max))
}

/// One stage of a [`RandomComposition`].
#[derive(Clone, Debug)]
enum Step {
    Conv { k: ParamId, b: ParamId },
    Pool,
    Flatten(Vec<usize>),
    Affine { w: ParamId, b: ParamId },
    Act(Activation),
    Residual,
    Square,
    Mask(Tensor),
    ScaleBy { s: ParamId, index: usize },
    MeanFeatures,
    Softmax,
}

/// A randomly composed differentiable graph: an optional conv/pool stage,
/// one to four dense layers (width at most 8) mixing every primitive, and a
/// random loss.
#[derive(Clone, Debug)]
pub struct RandomComposition {
    pub params: ParamStore,
    pub input: Tensor,
    steps: Vec<Step>,
    loss: LossKind,
    target: Tensor,
}

impl RandomComposition {
    /// Distance below which a ReLU input or a max-pool runner-up counts as
    /// sitting on a kink.
    pub const KINK_MARGIN: Real = 1e-4;

    /// Draws compositions from `seed` until one keeps every ReLU input and
    /// max-pool window at least [`Self::KINK_MARGIN`] away from a kink, where
    /// central differences are not valid.
    pub fn new(seed: u64) -> Self {
        let mut rng = Rng::seed_from(seed);
        loop {
            let c = Self::draw(&mut rng);
            if c.kink_margin().is_ok_and(|m| m >= Self::KINK_MARGIN) {
                return c;
            }
        }
    }

    /// Smallest distance to a non-differentiable point at the current values.
    pub fn kink_margin(&self) -> Result<Real> {
        let (g, _, _) = self.build(&self.params, &self.input)?;
        let mut margin = Real::INFINITY;
        for node in g.nodes() {
            match &node.op {
                Op::Activate {
                    x,
                    kind: Activation::Relu,
                } => {
                    for &z in g.value(*x).data() {
                        margin = margin.min(z.abs());
                    }
                }
                Op::MaxPool { x, .. } => {
                    let v = g.value(*x);
                    let (planes, h, w) = (v.len() / (v.shape()[2] * v.shape()[3]), v.shape()[2], v.shape()[3]);
                    for p in 0..planes {
                        for r in (0..h - h % 2).step_by(2) {
                            for c in (0..w - w % 2).step_by(2) {
                                let mut win: Vec<Real> = [(0, 0), (0, 1), (1, 0), (1, 1)]
                                    .iter()
                                    .map(|(i, j)| v.data()[p * h * w + (r + i) * w + c + j])
                                    .collect();
                                win.sort_by(|a, b| b.total_cmp(a));
                                margin = margin.min(win[0] - win[1]);
                            }
                        }
                    }
                }
                _ => {}
            }
        }
        Ok(margin)
    }

    fn draw(rng: &mut Rng) -> Self {
        let mut params = ParamStore::new();
        let mut steps = Vec::new();
        let batch = 1 + rng.below(3);
        let scaled = |shape: &[usize], limit: f64, rng: &mut Rng| {
            let n = shape.iter().product();
            let data = (0..n).map(|_| rng.uniform_range(-limit, limit) as Real).collect();
            Tensor::new(shape.to_vec(), data).expect("shape")
        };
        let uniform = |shape: &[usize], rng: &mut Rng| scaled(shape, 1.0, rng);
        // Weights are scaled by fan-in so activations stay of order one.
        let weight = |shape: &[usize], rng: &mut Rng| {
            let fan_in: usize = shape[1..].iter().product();
            scaled(shape, (3.0 / fan_in as f64).sqrt(), rng)
        };
        let (input, mut width) = if rng.below(3) == 0 {
            let (ci, co) = (1 + rng.below(2), 1 + rng.below(3));
            let (h, w) = (2 * (1 + rng.below(2)), 2 * (1 + rng.below(2)));
            let k = params.add("conv.k", weight(&[co, ci, 3, 3], rng), true);
            let b = params.add("conv.b", uniform(&[co], rng), true);
            steps.push(Step::Conv { k, b });
            steps.push(Step::Act(Activation::Relu));
            steps.push(Step::Pool);
            let flat = co * (h / 2) * (w / 2);
            steps.push(Step::Flatten(vec![batch, flat]));
            (uniform(&[batch, ci, h, w], rng), flat)
        } else {
            let d0 = 1 + rng.below(8);
            (uniform(&[batch, d0], rng), d0)
        };
        let layers = 1 + rng.below(4);
        for l in 0..layers {
            let out = 1 + rng.below(8);
            let w = params.add(format!("dense.{l}.w"), weight(&[out, width], rng), true);
            let b = params.add(format!("dense.{l}.b"), uniform(&[out], rng), true);
            let same = out == width;
            steps.push(Step::Affine { w, b });
            width = out;
            let act = [Activation::Identity, Activation::Sigmoid, Activation::Relu][rng.below(3)];
            steps.push(Step::Act(act));
            match rng.below(5) {
                0 if same => steps.push(Step::Residual),
                1 => steps.push(Step::Square),
                2 => steps.push(Step::Mask(uniform(&[batch, width], rng))),
                3 => {
                    let s = params.add(format!("scale.{l}"), uniform(&[3], rng), true);
                    steps.push(Step::ScaleBy { s, index: rng.below(3) });
                }
                _ => {}
            }
        }
        let (loss, target) = match rng.below(3) {
            0 => {
                steps.push(Step::Act(Activation::Sigmoid));
                let t = (0..batch * width)
                    .map(|_| if rng.bernoulli(0.5) { 1.0 } else { 0.0 })
                    .collect();
                (LossKind::Bce, Tensor::new(vec![batch, width], t).expect("shape"))
            }
            1 => {
                steps.push(Step::Softmax);
                let t = (0..batch).map(|_| rng.below(width) as Real).collect();
                (LossKind::Ce, Tensor::new(vec![batch], t).expect("shape"))
            }
            _ => {
                if rng.bernoulli(0.5) {
                    steps.push(Step::MeanFeatures);
                    width = 1;
                }
                (LossKind::Mse, uniform(&[batch, width], rng))
            }
        };
        Self {
            params,
            input,
            steps,
            loss,
            target,
        }
    }

    /// Stage and loss names, for diagnostics.
    pub fn describe(&self) -> String {
        let steps: Vec<String> = self
            .steps
            .iter()
            .map(|s| match s {
                Step::Conv { .. } => "conv".into(),
                Step::Pool => "pool".into(),
                Step::Flatten(_) => "flatten".into(),
                Step::Affine { .. } => "affine".into(),
                Step::Act(a) => format!("{a:?}").to_lowercase(),
                Step::Residual => "residual".into(),
                Step::Square => "square".into(),
                Step::Mask(_) => "mask".into(),
                Step::ScaleBy { .. } => "scale".into(),
                Step::MeanFeatures => "mean".into(),
                Step::Softmax => "softmax".into(),
            })
            .collect();
        format!("{} -> {:?}", steps.join(" "), self.loss)
    }

    /// Builds the graph with the given parameter values and input; returns
    /// the graph, the input node, and the loss node.
    pub fn build(&self, params: &ParamStore, input: &Tensor) -> Result<(Graph, NodeId, NodeId)> {
        let mut g = Graph::new();
        let x = g.input(input.clone());
        let mut h = x;
        let mut block_in = x;
        for step in &self.steps {
            h = match step {
                Step::Conv { k, b } => {
                    let (k, b) = (g.param(params, *k), g.param(params, *b));
                    g.conv2d(h, k, b)?
                }
                Step::Pool => g.maxpool2x2(h)?,
                Step::Flatten(shape) => g.reshape(h, shape)?,
                Step::Affine { w, b } => {
                    block_in = h;
                    let (w, b) = (g.param(params, *w), g.param(params, *b));
                    g.affine(h, w, b)?
                }
                Step::Act(kind) => g.activate(h, *kind),
                Step::Residual => g.add(h, block_in)?,
                Step::Square => g.mul(h, h)?,
                Step::Mask(m) => g.mask(h, m.clone())?,
                Step::ScaleBy { s, index } => {
                    let s = g.param(params, *s);
                    g.scale_by(h, s, *index)?
                }
                Step::MeanFeatures => g.mean_features(h),
                Step::Softmax => g.softmax(h, 1)?,
            };
        }
        let l = g.loss(h, self.target.clone(), self.loss)?;
        Ok((g, x, l))
    }

    /// Largest relative error between reverse-mode and central-difference
    /// gradients, over the input and every parameter.
    pub fn max_gradient_error(&self, h: Real) -> Result<Real> {
        let (g, x, l) = self.build(&self.params, &self.input)?;
        let grads = g.backward(l, Tensor::scalar(1.0))?;
        let analytic_x = grads
            .wrt(x)
            .cloned()
            .unwrap_or_else(|| Tensor::zeros(self.input.shape()));
        let numeric_x = finite_difference_grad(
            |t| {
                let (g, _, l) = self.build(&self.params, t)?;
                Ok(g.value(l).clone())
            },
            &self.input,
            h,
        )?;
        let mut worst = max_relative_error(&analytic_x, &numeric_x)?;
        for id in self.params.ids().collect::<Vec<_>>() {
            let numeric = finite_difference_grad(
                |t| {
                    let mut p = self.params.clone();
                    *p.value_mut(id) = t.clone();
                    let (g, _, l) = self.build(&p, &self.input)?;
                    Ok(g.value(l).clone())
                },
                self.params.value(id),
                h,
            )?;
            worst = worst.max(max_relative_error(&grads.param(id, &self.params), &numeric)?);
        }
        Ok(worst)
    }
}

type OpBuild = Box<dyn Fn(&mut Graph, &[NodeId]) -> Result<NodeId>>;

fn uniform_tensor(shape: &[usize], lo: f64, hi: f64, rng: &mut Rng) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(
        shape.to_vec(),
        (0..n).map(|_| rng.uniform_range(lo, hi) as Real).collect(),
    )
    .expect("shape")
}

/// Entries in `[-1, -0.1] ∪ [0.1, 1]`, away from the ReLU kink.
fn off_zero_tensor(shape: &[usize], rng: &mut Rng) -> Tensor {
    let n = shape.iter().product();
    let data = (0..n)
        .map(|_| {
            let v = rng.uniform_range(0.1, 1.0) as Real;
            if rng.bernoulli(0.5) {
                -v
            } else {
                v
            }
        })
        .collect();
    Tensor::new(shape.to_vec(), data).expect("shape")
}

/// Distinct entries spaced `2 / n` apart, in random order.
fn distinct_tensor(shape: &[usize], rng: &mut Rng) -> Tensor {
    let n: usize = shape.iter().product();
    let order = rng.permutation(n);
    let data = order.iter().map(|&i| -1.0 + 2.0 * i as Real / n as Real).collect();
    Tensor::new(shape.to_vec(), data).expect("shape")
}

fn op_cases(rng: &mut Rng) -> Result<Vec<(&'static str, Vec<Tensor>, OpBuild)>> {
    let r = rng;
    let u = |shape: &[usize], r: &mut Rng| uniform_tensor(shape, -1.0, 1.0, r);
    let mse_target = u(&[4, 2], r);
    let bce_target = Tensor::new(vec![4, 1], vec![0.0, 1.0, 1.0, 0.0])?;
    let ce_target = Tensor::from_vec(vec![2.0, 0.0, 1.0]);
    let mask = Tensor::new(vec![2, 3], vec![1.0, 0.0, 0.5, 2.0, 1.0, 0.0])?;
    let (t1, t2, t3) = (bce_target.clone(), ce_target.clone(), ce_target);
    Ok(vec![
        (
            "affine",
            vec![u(&[3, 4], r), u(&[5, 4], r), u(&[5], r)],
            Box::new(|g, v| g.affine(v[0], v[1], v[2])),
        ),
        (
            "conv2d",
            vec![u(&[2, 2, 5, 5], r), u(&[3, 2, 3, 3], r), u(&[3], r)],
            Box::new(|g, v| g.conv2d(v[0], v[1], v[2])),
        ),
        (
            "maxpool2x2",
            vec![distinct_tensor(&[1, 2, 4, 6], r)],
            Box::new(|g, v| g.maxpool2x2(v[0])),
        ),
        (
            "identity",
            vec![u(&[2, 3], r)],
            Box::new(|g, v| Ok(g.activate(v[0], Activation::Identity))),
        ),
        (
            "relu",
            vec![off_zero_tensor(&[2, 3], r)],
            Box::new(|g, v| Ok(g.activate(v[0], Activation::Relu))),
        ),
        (
            "sigmoid",
            vec![uniform_tensor(&[2, 3], -3.0, 3.0, r)],
            Box::new(|g, v| Ok(g.activate(v[0], Activation::Sigmoid))),
        ),
        (
            "softmax axis 0",
            vec![u(&[3, 4], r)],
            Box::new(|g, v| g.softmax(v[0], 0)),
        ),
        (
            "softmax axis 1",
            vec![u(&[3, 4], r)],
            Box::new(|g, v| g.softmax(v[0], 1)),
        ),
        (
            "softmax axis 2",
            vec![u(&[2, 3, 4], r)],
            Box::new(|g, v| g.softmax(v[0], 2)),
        ),
        (
            "add",
            vec![u(&[2, 3], r), u(&[2, 3], r)],
            Box::new(|g, v| g.add(v[0], v[1])),
        ),
        (
            "mul",
            vec![u(&[2, 3], r), u(&[2, 3], r)],
            Box::new(|g, v| g.mul(v[0], v[1])),
        ),
        (
            "scale_by",
            vec![u(&[2, 3], r), u(&[4], r)],
            Box::new(|g, v| g.scale_by(v[0], v[1], 2)),
        ),
        (
            "mask",
            vec![u(&[2, 3], r)],
            Box::new(move |g, v| g.mask(v[0], mask.clone())),
        ),
        (
            "mean_features",
            vec![u(&[3, 5], r)],
            Box::new(|g, v| Ok(g.mean_features(v[0]))),
        ),
        (
            "reshape",
            vec![u(&[2, 6], r)],
            Box::new(|g, v| g.reshape(v[0], &[3, 4])),
        ),
        ("sum", vec![u(&[2, 3], r)], Box::new(|g, v| Ok(g.sum(v[0])))),
        (
            "mse loss",
            vec![u(&[4, 2], r)],
            Box::new(move |g, v| g.loss(v[0], mse_target.clone(), LossKind::Mse)),
        ),
        (
            "bce loss",
            vec![uniform_tensor(&[4, 1], 0.1, 0.9, r)],
            Box::new(move |g, v| g.loss(v[0], bce_target.clone(), LossKind::Bce)),
        ),
        (
            "bce loss on sigmoid",
            vec![uniform_tensor(&[4, 1], -3.0, 3.0, r)],
            Box::new(move |g, v| {
                let p = g.activate(v[0], Activation::Sigmoid);
                g.loss(p, t1.clone(), LossKind::Bce)
            }),
        ),
        (
            "ce loss",
            vec![uniform_tensor(&[3, 3], 0.1, 0.9, r)],
            Box::new(move |g, v| g.loss(v[0], t2.clone(), LossKind::Ce)),
        ),
        (
            "ce loss on softmax",
            vec![u(&[3, 3], r)],
            Box::new(move |g, v| {
                let p = g.softmax(v[0], 1)?;
                g.loss(p, t3.clone(), LossKind::Ce)
            }),
        ),
    ])
}

/// Every differentiable operation in isolation, checked with respect to each
/// of its arguments against central differences. Outputs are reduced to a
/// scalar through a fixed random weighting.
///
/// Returns `(operation, max relative error)` pairs.
pub fn op_gradient_errors(seed: u64, h: Real) -> Result<Vec<(String, Real)>> {
    let mut rng = Rng::seed_from(seed);
    let cases = op_cases(&mut rng)?;
    let mut out = Vec::with_capacity(cases.len());
    for (name, inputs, apply) in cases {
        let len = {
            let mut g = Graph::new();
            let v: Vec<NodeId> = inputs.iter().map(|t| g.input(t.clone())).collect();
            let y = apply(&mut g, &v)?;
            g.value(y).len()
        };
        let weights = uniform_tensor(&[len], 0.5, 1.5, &mut rng);
        let build = |xs: &[Tensor]| -> Result<(Graph, Vec<NodeId>, NodeId)> {
            let mut g = Graph::new();
            let v: Vec<NodeId> = xs.iter().map(|t| g.input(t.clone())).collect();
            let y = apply(&mut g, &v)?;
            let flat = g.reshape(y, &[len])?;
            let w = g.constant(weights.clone());
            let prod = g.mul(flat, w)?;
            let total = g.sum(prod);
            Ok((g, v, total))
        };
        let (g, v, total) = build(&inputs)?;
        let grads = g.backward(total, Tensor::scalar(1.0))?;
        let mut worst: Real = 0.0;
        for (i, x) in inputs.iter().enumerate() {
            let analytic = grads.wrt(v[i]).cloned().unwrap_or_else(|| Tensor::zeros(x.shape()));
            let numeric = finite_difference_grad(
                |t| {
                    let mut xs = inputs.clone();
                    xs[i] = t.clone();
                    let (g, _, total) = build(&xs)?;
                    Ok(g.value(total).clone())
                },
                x,
                h,
            )?;
            worst = worst.max(max_relative_error(&analytic, &numeric)?);
        }
        out.push((name.to_string(), worst));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_op_matches_finite_differences() {
        let errs = op_gradient_errors(5, DEFAULT_STEP).unwrap();
        assert_eq!(errs.len(), 21);
        for (name, e) in errs {
            assert!(e < 1e-5, "{name}: {e}");
        }
    }

    #[test]
    fn sum_has_unit_gradient() {
        let x = Tensor::from_vec(vec![0.3, -1.2, 4.0]);
        let g = finite_difference_grad(|t| Ok(Tensor::scalar(t.sum())), &x, DEFAULT_STEP).unwrap();
        assert!(g.data().iter().all(|v| (v - 1.0).abs() < 1e-8));
    }

    #[test]
    fn squared_norm() {
        let x = Tensor::from_vec(vec![1.0, 2.0]);
        let f = |t: &Tensor| Ok(Tensor::scalar(t.data().iter().map(|v| v * v).sum()));
        let g = finite_difference_grad(f, &x, DEFAULT_STEP).unwrap();
        assert!((g.data()[0] - 2.0).abs() < 1e-8 && (g.data()[1] - 4.0).abs() < 1e-8);
    }

    #[test]
    fn rejects_vector_output_and_bad_step() {
        let x = Tensor::from_vec(vec![1.0, 2.0]);
        assert!(matches!(
            finite_difference_grad(|t| Ok(t.clone()), &x, DEFAULT_STEP),
            Err(Error::Contract(_))
        ));
        assert!(finite_difference_grad(|t| Ok(Tensor::scalar(t.sum())), &x, 0.0).is_err());
    }

    #[test]
    fn random_compositions_agree() {
        for seed in 0..20 {
            let c = RandomComposition::new(seed);
            let err = c.max_gradient_error(DEFAULT_STEP).unwrap();
            assert!(err < 1e-5, "seed {seed}: {err}");
        }
    }
}
