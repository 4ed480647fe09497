//! Loss kernels shared by the autograd graph and by evaluation.
//!
//! Every loss is a mean over the batch. Probabilities are clamped to
//! `[1e-12, 1 - 1e-12]` before taking logarithms.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{Real, Tensor};

pub const PROB_CLAMP: Real = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossKind {
    /// Binary cross-entropy on sigmoid probabilities; targets in {0, 1}.
    Bce,
    /// Categorical cross-entropy on softmax probabilities; targets are class
    /// indices stored as reals, one per batch row.
    Ce,
    /// Mean squared error over every element.
    Mse,
}

fn clamp_prob(p: Real) -> Real {
    p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP)
}

/// Validates shapes and targets; returns the class index per row for `Ce`.
fn check(kind: LossKind, pred: &Tensor, target: &Tensor) -> Result<Vec<usize>> {
    match kind {
        LossKind::Bce | LossKind::Mse => {
            if pred.shape() != target.shape() {
                return Err(Error::dim(
                    "loss",
                    format!("prediction {:?} vs target {:?}", pred.shape(), target.shape()),
                ));
            }
            if kind == LossKind::Bce {
                if let Some(bad) = target.data().iter().find(|&&y| y != 0.0 && y != 1.0) {
                    return Err(Error::contract(format!("binary target {bad} is not 0 or 1")));
                }
            }
            Ok(Vec::new())
        }
        LossKind::Ce => {
            let rows = pred.rows();
            if pred.rank() != 2 || target.len() != rows {
                return Err(Error::dim(
                    "loss",
                    format!("prediction {:?} vs class targets {:?}", pred.shape(), target.shape()),
                ));
            }
            let classes = pred.shape()[1];
            target
                .data()
                .iter()
                .map(|&t| {
                    if t >= 0.0 && t.fract() == 0.0 && (t as usize) < classes {
                        Ok(t as usize)
                    } else {
                        Err(Error::contract(format!("class target {t} outside 0..{classes}")))
                    }
                })
                .collect()
        }
    }
}

pub fn loss_value(kind: LossKind, pred: &Tensor, target: &Tensor) -> Result<Real> {
    let classes = check(kind, pred, target)?;
    let (p, y) = (pred.data(), target.data());
    Ok(match kind {
        LossKind::Bce => {
            let total: Real = p
                .iter()
                .zip(y)
                .map(|(&p, &y)| {
                    let p = clamp_prob(p);
                    -(y * p.ln() + (1.0 - y) * (1.0 - p).ln())
                })
                .sum();
            total / p.len() as Real
        }
        LossKind::Ce => {
            let c = pred.shape()[1];
            let total: Real = classes
                .iter()
                .enumerate()
                .map(|(b, &t)| -clamp_prob(p[b * c + t]).ln())
                .sum();
            total / classes.len() as Real
        }
        LossKind::Mse => {
            let total: Real = p.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
            total / p.len() as Real
        }
    })
}

fn softplus(t: Real) -> Real {
    t.max(0.0) + (-t.abs()).exp().ln_1p()
}

/// [`loss_value`] for `Bce` evaluated on the logits `z` of sigmoid
/// probabilities, avoiding the cancellation in `1 - p` as `p` nears 1.
/// Logits are clamped to the range the probability clamp allows.
pub fn bce_from_logits(logits: &Tensor, target: &Tensor) -> Result<Real> {
    check(LossKind::Bce, logits, target)?;
    let bound = ((1.0 - PROB_CLAMP) / PROB_CLAMP).ln();
    let total: Real = logits
        .data()
        .iter()
        .zip(target.data())
        .map(|(&z, &y)| {
            let z = z.clamp(-bound, bound);
            y * softplus(-z) + (1.0 - y) * softplus(z)
        })
        .sum();
    Ok(total / logits.len() as Real)
}

/// Gradient of [`loss_value`] with respect to the prediction.
pub fn loss_grad(kind: LossKind, pred: &Tensor, target: &Tensor) -> Result<Tensor> {
    let classes = check(kind, pred, target)?;
    let (p, y) = (pred.data(), target.data());
    let mut g = vec![0.0; p.len()];
    match kind {
        LossKind::Bce => {
            let n = p.len() as Real;
            for i in 0..p.len() {
                if p[i] > PROB_CLAMP && p[i] < 1.0 - PROB_CLAMP {
                    g[i] = (p[i] - y[i]) / (p[i] * (1.0 - p[i])) / n;
                }
            }
        }
        LossKind::Ce => {
            let c = pred.shape()[1];
            let n = classes.len() as Real;
            for (b, &t) in classes.iter().enumerate() {
                let pc = p[b * c + t];
                if pc > PROB_CLAMP && pc < 1.0 - PROB_CLAMP {
                    g[b * c + t] = -1.0 / (pc * n);
                }
            }
        }
        LossKind::Mse => {
            let n = p.len() as Real;
            for i in 0..p.len() {
                g[i] = 2.0 * (p[i] - y[i]) / n;
            }
        }
    }
    Tensor::new(pred.shape().to_vec(), g)
}

/// Fraction of correct predictions: 0.5 threshold for `Bce`, argmax for
/// `Ce`. `None` for regression losses.
pub fn accuracy(kind: LossKind, pred: &Tensor, target: &Tensor) -> Result<Option<Real>> {
    let classes = check(kind, pred, target)?;
    Ok(match kind {
        LossKind::Bce => {
            let hits = pred
                .data()
                .iter()
                .zip(target.data())
                .filter(|(&p, &y)| (p >= 0.5) == (y == 1.0))
                .count();
            Some(hits as Real / pred.len() as Real)
        }
        LossKind::Ce => {
            let c = pred.shape()[1];
            let hits = classes
                .iter()
                .enumerate()
                .filter(|&(b, &t)| argmax(&pred.data()[b * c..(b + 1) * c]) == t)
                .count();
            Some(hits as Real / classes.len() as Real)
        }
        LossKind::Mse => None,
    })
}

/// Index of the first maximal element.
pub fn argmax(v: &[Real]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}
