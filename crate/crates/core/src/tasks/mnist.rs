use crate::error::{Error, Result};
use crate::loss::LossKind;
use crate::rng::Rng;
use crate::tensor::Tensor;

use super::dataset::{Sample, TaskDataset};
use super::idx::IdxImages;

/// Width of the frozen random ReLU encoder placed in front of each task.
pub const MNIST_ENCODER_UNITS: usize = 64;

/// `k` binary tasks, each distinguishing two distinct digits.
#[derive(Clone, Debug, PartialEq)]
pub struct MnistPairTasks {
    pub datasets: Vec<TaskDataset>,
    pub pairs: Vec<(u8, u8)>,
    /// Seed of each task's frozen encoder.
    pub encoder_seeds: Vec<u64>,
}

/// Draws a digit pair per task (distinct within a task, repeats allowed
/// across tasks). Target 0 is the first digit of the pair, 1 the second.
pub fn make_mnist_pair_tasks(train: &IdxImages, test: &IdxImages, k: usize, seed: u64) -> Result<MnistPairTasks> {
    if k == 0 {
        return Err(Error::contract("need at least one task"));
    }
    let mut rng = Rng::seed_from(seed);
    let mut out = MnistPairTasks {
        datasets: Vec::with_capacity(k),
        pairs: Vec::with_capacity(k),
        encoder_seeds: Vec::with_capacity(k),
    };
    for _ in 0..k {
        let a = rng.below(10) as u8;
        let mut b = rng.below(9) as u8;
        if b >= a {
            b += 1;
        }
        let encoder_seed = rng.next_u64();
        let (rows, cols) = train.image_shape();
        let ds = TaskDataset {
            name: format!("digits-{a}-vs-{b}"),
            train: pair_samples(train, a, b, "train")?,
            validation: Vec::new(),
            test: pair_samples(test, a, b, "test")?,
            loss: LossKind::Bce,
            input_shape: vec![rows * cols],
            output_size: 1,
        };
        out.datasets.push(ds);
        out.pairs.push((a, b));
        out.encoder_seeds.push(encoder_seed);
    }
    Ok(out)
}

fn pair_samples(data: &IdxImages, a: u8, b: u8, split: &str) -> Result<Vec<Sample>> {
    let samples: Vec<Sample> = data
        .labels
        .iter()
        .enumerate()
        .filter(|(_, &l)| l == a || l == b)
        .map(|(i, &l)| {
            let img = data.image(i);
            let n = img.len();
            Sample {
                input: img.reshape(&[n]).expect("flatten"),
                target: Tensor::from_vec(vec![if l == b { 1.0 } else { 0.0 }]),
            }
        })
        .collect();
    for d in [a, b] {
        if !data.labels.contains(&d) {
            return Err(Error::contract(format!("digit {d} is missing from the {split} images")));
        }
    }
    Ok(samples)
}
