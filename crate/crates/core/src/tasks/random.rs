use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::loss::LossKind;
use crate::ops::Activation;
use crate::rng::Rng;
use crate::tensor::{Real, Tensor};

use super::dataset::{Sample, TaskDataset};

/// Random binary memorization tasks: uniform inputs in `[0, 1]^m` with
/// uniform `{0, 1}` labels.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomTaskSpec {
    /// Input dimension.
    pub m: usize,
    /// Samples per task.
    pub n: usize,
    /// Number of tasks.
    pub tasks: usize,
    /// Activation applied by the core layers trained on these tasks.
    pub nonlinearity: Activation,
    pub seed: u64,
}

impl RandomTaskSpec {
    pub fn validate(&self) -> Result<()> {
        if self.m == 0 || self.n == 0 {
            return Err(Error::contract(format!(
                "m = {} and n = {} must be positive",
                self.m, self.n
            )));
        }
        if self.tasks < 2 {
            return Err(Error::contract(format!("need at least 2 tasks, got {}", self.tasks)));
        }
        Ok(())
    }
}

/// Only the training split is populated: fit on the training data is the
/// metric for these tasks.
pub fn gen_random_tasks(spec: &RandomTaskSpec) -> Result<Vec<TaskDataset>> {
    spec.validate()?;
    let root = Rng::seed_from(spec.seed);
    Ok((0..spec.tasks)
        .map(|t| {
            let mut rng = root.fork(t as u64);
            let train = (0..spec.n)
                .map(|_| {
                    let input: Vec<Real> = (0..spec.m).map(|_| rng.uniform() as Real).collect();
                    let label = if rng.bernoulli(0.5) { 1.0 } else { 0.0 };
                    Sample {
                        input: Tensor::from_vec(input),
                        target: Tensor::from_vec(vec![label]),
                    }
                })
                .collect();
            TaskDataset {
                name: format!("random-{t}"),
                train,
                validation: Vec::new(),
                test: Vec::new(),
                loss: LossKind::Bce,
                input_shape: vec![spec.m],
                output_size: 1,
            }
        })
        .collect())
}
