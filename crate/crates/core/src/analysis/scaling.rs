//! Summaries of learned scaling tensors.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mtl::ScalingTensor;
use crate::tensor::Real;

/// Mean scale over tasks: `usage[j][k]` for candidate layer `j` at depth `k`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UsageDistribution {
    pub usage: Vec<Vec<Real>>,
}

impl UsageDistribution {
    pub fn layers(&self) -> usize {
        self.usage.len()
    }

    pub fn depth(&self) -> usize {
        self.usage.first().map_or(0, Vec::len)
    }

    pub fn column_sum(&self, k: usize) -> Real {
        self.usage.iter().map(|row| row[k]).sum()
    }

    /// Rows `layer,depth,usage` with one-based layer and depth labels.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("layer,depth,usage\n");
        for (j, row) in self.usage.iter().enumerate() {
            for (k, v) in row.iter().enumerate() {
                out.push_str(&format!("{},{},{v}\n", j + 1, k + 1));
            }
        }
        out
    }
}

/// Mean taken as the first value plus the mean deviation from it, which is
/// exact when all values are equal.
fn shifted_mean(values: impl Iterator<Item = Real>) -> Real {
    let mut it = values.peekable();
    let Some(&base) = it.peek() else { return 0.0 };
    let (mut dev, mut n) = (0.0, 0usize);
    for v in it {
        dev += v - base;
        n += 1;
    }
    base + dev / n as Real
}

pub fn layer_usage(s: &ScalingTensor) -> UsageDistribution {
    let usage = (0..s.candidates())
        .map(|j| {
            (0..s.depth())
                .map(|k| shifted_mean((0..s.tasks()).map(|i| s.get(i, j, k))))
                .collect()
        })
        .collect();
    UsageDistribution { usage }
}

/// Euclidean distance between the scale vectors of two tasks at each depth.
pub fn scaling_distance(s: &ScalingTensor, a: usize, b: usize) -> Result<Vec<Real>> {
    if a == b || a >= s.tasks() || b >= s.tasks() {
        return Err(Error::contract(format!(
            "scaling_distance needs two distinct tasks below {}, got {a} and {b}",
            s.tasks()
        )));
    }
    Ok((0..s.depth())
        .map(|k| {
            s.column(a, k)
                .iter()
                .zip(s.column(b, k))
                .map(|(x, y)| (x - y) * (x - y))
                .sum::<Real>()
                .sqrt()
        })
        .collect())
}

/// Mean over depths of [`scaling_distance`].
pub fn mean_scaling_distance(s: &ScalingTensor, a: usize, b: usize) -> Result<Real> {
    let d = scaling_distance(s, a, b)?;
    Ok(d.iter().sum::<Real>() / d.len() as Real)
}

/// Mean over tasks and depths of the largest scale: `1/D` for uniform
/// softmax scales and 1 for a hard ordering.
pub fn ordering_hardness(s: &ScalingTensor) -> Real {
    let maxima = (0..s.tasks())
        .flat_map(|i| (0..s.depth()).map(move |k| (i, k)))
        .map(|(i, k)| s.column(i, k).into_iter().fold(Real::NEG_INFINITY, Real::max));
    shifted_mean(maxima)
}

/// Per-evaluation distance between two tasks and hardness, as CSV rows
/// `iteration,depth,distance` (depth `mean` for the average) followed by
/// `iteration,hardness`.
pub fn dynamics_csv(history: &[(usize, ScalingTensor)], a: usize, b: usize) -> Result<(String, String)> {
    let mut dist = String::from("iteration,depth,distance\n");
    let mut hard = String::from("iteration,hardness\n");
    for (it, s) in history {
        let d = scaling_distance(s, a, b)?;
        for (k, v) in d.iter().enumerate() {
            dist.push_str(&format!("{it},{},{v}\n", k + 1));
        }
        dist.push_str(&format!("{it},mean,{}\n", d.iter().sum::<Real>() / d.len() as Real));
        hard.push_str(&format!("{it},{}\n", ordering_hardness(s)));
    }
    Ok((dist, hard))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mtl::{one_hot_scaling, scaling_from_logits};
    use crate::tensor::Tensor;

    #[test]
    fn uniform_init() {
        let s = scaling_from_logits(&Tensor::zeros(&[2, 4, 4])).unwrap();
        let u = layer_usage(&s);
        assert!(u.usage.iter().flatten().all(|&v| v == 0.25));
        assert_eq!(scaling_distance(&s, 0, 1).unwrap(), vec![0.0; 4]);
        assert_eq!(ordering_hardness(&s), 0.25);
    }

    #[test]
    fn one_hot_examples() {
        let same = one_hot_scaling(&[vec![1, 0, 2], vec![1, 0, 2]]).unwrap();
        let u = layer_usage(&same);
        assert_eq!(
            u.usage,
            vec![vec![0.0, 1.0, 0.0], vec![1.0, 0.0, 0.0], vec![0.0, 0.0, 1.0]]
        );
        assert_eq!(ordering_hardness(&same), 1.0);

        let mixed = one_hot_scaling(&[vec![0, 1], vec![1, 0]]).unwrap();
        assert!(layer_usage(&mixed).usage.iter().flatten().all(|&v| v == 0.5));
        let d = scaling_distance(&mixed, 0, 1).unwrap();
        assert!(d.iter().all(|&v| (v - (2.0 as Real).sqrt()).abs() < 1e-12));
    }

    #[test]
    fn hand_computed_hardness() {
        // One task, two depths: columns [0.9, 0.1] and [0.6, 0.4].
        let t = Tensor::new(vec![1, 2, 2], vec![0.9, 0.6, 0.1, 0.4]).unwrap();
        let s = ScalingTensor::from_tensor(t).unwrap();
        assert!((ordering_hardness(&s) - 0.75).abs() < 1e-12);
    }

    #[test]
    fn distance_needs_distinct_tasks() {
        let s = scaling_from_logits(&Tensor::zeros(&[2, 2, 2])).unwrap();
        assert!(scaling_distance(&s, 1, 1).is_err());
        assert!(scaling_distance(&s, 0, 2).is_err());
    }
}
