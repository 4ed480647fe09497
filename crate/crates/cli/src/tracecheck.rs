//! Numerical check of the trace identities of cyclic matrix products.

use std::path::Path;

use serde::{Deserialize, Serialize};
use softorder::analysis::{random_matrices, trace_diagnostic};
use softorder::{Real, Rng, Tensor};

use crate::error::{HarnessError, HarnessResult};
use crate::fsutil::read_text;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceReport {
    pub tasks: usize,
    pub dim: usize,
    /// Seed of the random matrices; absent for fixtures.
    pub seed: Option<u64>,
    pub traces: Vec<Real>,
    /// `max_i |tr(F_i) - tr(F_1)|`.
    pub residual: Real,
    pub scalars: Option<Vec<Real>>,
    /// `max_i |tr(F_i) / s_i - tr(F_1)|` when scalars are present.
    pub normalized_residual: Option<Real>,
}

/// Matrices given explicitly, as `{"matrices": [[[row], ...], ...]}`.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Fixture {
    matrices: Vec<Vec<Vec<Real>>>,
}

pub fn load_fixture(path: &Path) -> HarnessResult<Vec<Tensor>> {
    let text = read_text(path)?;
    let fx: Fixture =
        serde_json::from_str(&text).map_err(|e| HarnessError::Data(format!("{}: {e}", path.display())))?;
    fx.matrices
        .into_iter()
        .enumerate()
        .map(|(i, rows)| {
            let n = rows.len();
            if rows.iter().any(|r| r.len() != n) {
                return Err(HarnessError::Data(format!(
                    "{}: matrix {i} is not square",
                    path.display()
                )));
            }
            Ok(Tensor::new(vec![n, n], rows.concat())?)
        })
        .collect()
}

fn report(g: Vec<Tensor>, with_scalars: bool, seed: Option<u64>) -> HarnessResult<TraceReport> {
    let tasks = g.len();
    if tasks < 2 {
        return Err(HarnessError::Config(format!("need at least 2 matrices, got {tasks}")));
    }
    let dim = g[0].shape().first().copied().unwrap_or(0);
    let d = trace_diagnostic(g, with_scalars)?;
    let normalized_residual = d.scalars.as_ref().map(|s| {
        let t0 = d.traces[0];
        d.traces
            .iter()
            .zip(s)
            .map(|(t, si)| (t / si - t0).abs())
            .fold(0.0, Real::max)
    });
    Ok(TraceReport {
        tasks,
        dim,
        seed,
        traces: d.traces,
        residual: d.residual,
        scalars: d.scalars,
        normalized_residual,
    })
}

/// Random matrices with entries uniform in `[-1, 1)`.
pub fn check_random(tasks: usize, dim: usize, seed: u64, with_scalars: bool) -> HarnessResult<TraceReport> {
    if tasks < 2 || dim == 0 {
        return Err(HarnessError::Config(format!(
            "tracecheck needs tasks >= 2 and dim >= 1, got {tasks} and {dim}"
        )));
    }
    let g = random_matrices(tasks, dim, &mut Rng::seed_from(seed));
    report(g, with_scalars, Some(seed))
}

pub fn check_matrices(g: Vec<Tensor>, with_scalars: bool) -> HarnessResult<TraceReport> {
    report(g, with_scalars, None)
}

impl TraceReport {
    pub fn to_text(&self) -> String {
        let mut out = format!("tasks {} dim {}\n", self.tasks, self.dim);
        let traces: Vec<String> = self.traces.iter().map(|t| format!("{t:.12e}")).collect();
        out.push_str(&format!("traces {}\n", traces.join(" ")));
        out.push_str(&format!("residual {:e}\n", self.residual));
        if let (Some(s), Some(r)) = (&self.scalars, self.normalized_residual) {
            let s: Vec<String> = s.iter().map(|v| format!("{v:.12}")).collect();
            out.push_str(&format!("scalars {}\n", s.join(" ")));
            out.push_str(&format!("normalized_residual {r:e}\n"));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn forced_traces_give_expected_chain() {
        let g = vec![
            Tensor::new(vec![2, 2], vec![2.0, 0.0, 0.0, 0.0]).unwrap(),
            Tensor::identity(2),
        ];
        // Both products equal G_1, so the traces are (2, 2).
        let r = check_matrices(g, true).unwrap();
        assert_eq!(r.scalars.unwrap(), vec![1.0, 1.0]);
        assert_eq!(r.residual, 0.0);
    }

    #[test]
    fn zero_trace_fixture_is_singular() {
        let g = vec![Tensor::zeros(&[2, 2]), Tensor::identity(2)];
        let err = check_matrices(g, true).unwrap_err();
        assert_eq!(err.exit_code(), 4);
        assert!(err.to_string().contains("index 0"));
    }

    #[test]
    fn random_residual_is_small() {
        let r = check_random(3, 4, 1, false).unwrap();
        assert!(r.residual < 1e-10);
        assert!(r.scalars.is_none());
    }
}
