use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::loss::LossKind;
use crate::tensor::{Real, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Validation,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Validation => "validation",
            Split::Test => "test",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub input: Tensor,
    pub target: Tensor,
}

/// One task's samples, split three ways, plus the loss and head shape.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskDataset {
    pub name: String,
    pub train: Vec<Sample>,
    pub validation: Vec<Sample>,
    pub test: Vec<Sample>,
    pub loss: LossKind,
    /// Shape of one input sample.
    pub input_shape: Vec<usize>,
    /// Number of classes for `Ce`, number of outputs otherwise.
    pub output_size: usize,
}

impl TaskDataset {
    pub fn split(&self, split: Split) -> &[Sample] {
        match split {
            Split::Train => &self.train,
            Split::Validation => &self.validation,
            Split::Test => &self.test,
        }
    }

    /// Stacks the selected samples into `(inputs [n, ..], targets [n, ..])`.
    pub fn batch(&self, split: Split, indices: &[usize]) -> Result<(Tensor, Tensor)> {
        let samples = self.split(split);
        if samples.is_empty() {
            return Err(Error::contract(format!(
                "task {}: {} split is empty",
                self.name,
                split.as_str()
            )));
        }
        let xs: Vec<&Tensor> = indices.iter().map(|&i| &samples[i].input).collect();
        let ys: Vec<&Tensor> = indices.iter().map(|&i| &samples[i].target).collect();
        Ok((Tensor::stack(&xs)?, Tensor::stack(&ys)?))
    }

    /// Checks shape agreement and target ranges across all splits.
    pub fn validate(&self) -> Result<()> {
        for split in [Split::Train, Split::Validation, Split::Test] {
            for (i, s) in self.split(split).iter().enumerate() {
                if s.input.shape() != self.input_shape.as_slice() {
                    return Err(Error::dim(
                        "TaskDataset",
                        format!(
                            "{} {} sample {i} has shape {:?}, expected {:?}",
                            self.name,
                            split.as_str(),
                            s.input.shape(),
                            self.input_shape
                        ),
                    ));
                }
                if self.loss == LossKind::Ce {
                    let t = s.target.data()[0];
                    if t < 0.0 || t.fract() != 0.0 || t as usize >= self.output_size {
                        return Err(Error::contract(format!(
                            "{}: class target {t} outside 0..{}",
                            self.name, self.output_size
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// Smallest and largest input value over every split.
    pub fn input_range(&self) -> (Real, Real) {
        let mut lo = Real::INFINITY;
        let mut hi = Real::NEG_INFINITY;
        for s in self.train.iter().chain(&self.validation).chain(&self.test) {
            for &v in s.input.data() {
                lo = lo.min(v);
                hi = hi.max(v);
            }
        }
        (lo, hi)
    }
}

pub(crate) fn class_target(class: usize) -> Tensor {
    Tensor::scalar(class as Real)
}
