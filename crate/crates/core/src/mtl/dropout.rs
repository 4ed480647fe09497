//! Inverted dropout.

use crate::autograd::{Graph, NodeId};
use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::tensor::{Real, Tensor};

/// Whether stochastic regularization is active.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

fn check_rate(rate: Real) -> Result<()> {
    if (0.0..1.0).contains(&rate) {
        Ok(())
    } else {
        Err(Error::contract(format!("dropout rate {rate} outside [0, 1)")))
    }
}

/// Keep mask with survivors scaled by `1 / (1 - rate)`, or `None` when
/// dropout is a no-op (eval mode or zero rate). No random draws happen in
/// the no-op case.
pub fn dropout_mask(shape: &[usize], rate: Real, mode: Mode, rng: &mut Rng) -> Result<Option<Tensor>> {
    check_rate(rate)?;
    if mode == Mode::Eval || rate == 0.0 {
        return Ok(None);
    }
    let keep = 1.0 / (1.0 - rate);
    let mut mask = Tensor::zeros(shape);
    for m in mask.data_mut() {
        if !rng.bernoulli(rate as f64) {
            *m = keep;
        }
    }
    Ok(Some(mask))
}

pub fn apply_dropout(x: &Tensor, rate: Real, mode: Mode, rng: &mut Rng) -> Result<Tensor> {
    match dropout_mask(x.shape(), rate, mode, rng)? {
        None => Ok(x.clone()),
        Some(mask) => x.zip_map(&mask, |a, m| a * m),
    }
}

/// Graph version of [`apply_dropout`].
pub fn dropout_node(g: &mut Graph, x: NodeId, rate: Real, mode: Mode, rng: &mut Rng) -> Result<NodeId> {
    match dropout_mask(g.value(x).shape(), rate, mode, rng)? {
        None => Ok(x),
        Some(mask) => g.mask(x, mask),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_rate_is_identity() {
        let x = Tensor::from_vec(vec![1.0, -2.0, 3.0]);
        let mut rng = Rng::seed_from(0);
        assert_eq!(apply_dropout(&x, 0.0, Mode::Train, &mut rng).unwrap(), x);
        assert_eq!(apply_dropout(&x, 0.0, Mode::Eval, &mut rng).unwrap(), x);
    }

    #[test]
    fn eval_is_identity() {
        let x = Tensor::full(&[10], 2.0);
        let mut rng = Rng::seed_from(0);
        assert_eq!(apply_dropout(&x, 0.9, Mode::Eval, &mut rng).unwrap(), x);
    }

    #[test]
    fn rate_out_of_range() {
        let x = Tensor::full(&[2], 1.0);
        let mut rng = Rng::seed_from(0);
        assert!(matches!(
            apply_dropout(&x, 1.0, Mode::Train, &mut rng),
            Err(Error::Contract(_))
        ));
        assert!(apply_dropout(&x, -0.1, Mode::Eval, &mut rng).is_err());
    }

    #[test]
    fn expectation_preserved() {
        let x = Tensor::full(&[100_000], 1.0);
        let mut rng = Rng::seed_from(17);
        let y = apply_dropout(&x, 0.5, Mode::Train, &mut rng).unwrap();
        let mean = y.sum() / y.len() as Real;
        assert!((mean - 1.0).abs() < 0.01, "mean {mean}");
        assert!(y.data().iter().all(|&v| v == 0.0 || v == 2.0));
    }
}
