//! Run records and their on-disk formats.
//!
//! The metrics CSV has the header `iteration,task_id,split,loss,accuracy`.
//! `split` is `batch` for the per-iteration training minibatch loss and
//! `train`, `validation`, or `test` for full-split evaluations. `accuracy` is
//! empty for regression tasks and for minibatch rows. Floats are written in
//! shortest round-trip form, so identical runs give identical bytes.

use serde::{Deserialize, Serialize};

use crate::mtl::ScalingTensor;
use crate::tasks::Split;
use crate::tensor::Real;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskMetrics {
    pub loss: Real,
    pub accuracy: Option<Real>,
}

/// Evaluation of every task on one split.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub split: Split,
    pub tasks: Vec<TaskMetrics>,
    /// Sum of the per-task losses.
    pub overall_loss: Real,
}

impl EvalReport {
    pub fn mean_accuracy(&self) -> Option<Real> {
        let accs: Option<Vec<Real>> = self.tasks.iter().map(|t| t.accuracy).collect();
        accs.map(|a| a.iter().sum::<Real>() / a.len() as Real)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalPoint {
    pub iteration: usize,
    pub reports: Vec<EvalReport>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub seed: u64,
    pub ordering: String,
    pub task_names: Vec<String>,
    /// `train_losses[it - 1][task]`: minibatch loss at iteration `it`.
    pub train_losses: Vec<Vec<Real>>,
    pub evals: Vec<EvalPoint>,
    /// Scales at every evaluation point (soft ordering only).
    pub scaling_history: Vec<(usize, ScalingTensor)>,
    pub final_scaling: Option<ScalingTensor>,
    pub wall_seconds: f64,
}

impl RunRecord {
    /// Equality of everything except wall-clock time.
    pub fn same_results(&self, other: &RunRecord) -> bool {
        RunRecord {
            wall_seconds: 0.0,
            ..self.clone()
        } == RunRecord {
            wall_seconds: 0.0,
            ..other.clone()
        }
    }

    pub fn final_eval(&self, split: Split) -> Option<&EvalReport> {
        self.evals
            .iter()
            .rev()
            .flat_map(|p| p.reports.iter())
            .find(|r| r.split == split)
    }

    pub fn metrics_csv(&self) -> String {
        let mut out = String::from("iteration,task_id,split,loss,accuracy\n");
        let mut evals = self.evals.iter().peekable();
        let emit_evals = |out: &mut String, p: &EvalPoint| {
            for r in &p.reports {
                for (t, m) in r.tasks.iter().enumerate() {
                    let acc = m.accuracy.map(|a| a.to_string()).unwrap_or_default();
                    out.push_str(&format!("{},{t},{},{},{acc}\n", p.iteration, r.split.as_str(), m.loss));
                }
            }
        };
        while let Some(p) = evals.next_if(|p| p.iteration == 0) {
            emit_evals(&mut out, p);
        }
        for (i, losses) in self.train_losses.iter().enumerate() {
            let it = i + 1;
            for (t, l) in losses.iter().enumerate() {
                out.push_str(&format!("{it},{t},batch,{l},\n"));
            }
            while let Some(p) = evals.next_if(|p| p.iteration == it) {
                emit_evals(&mut out, p);
            }
        }
        for p in evals {
            emit_evals(&mut out, p);
        }
        out
    }
}
