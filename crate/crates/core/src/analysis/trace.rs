//! Trace constraints on products of cyclically shifted matrix chains.
//!
//! For matrices `G_1..G_T`, the cyclic product `F_i` is
//! `G_i G_{i+1} ... G_T G_1 ... G_{i-1}`. All `F_i` share one trace, and
//! rescaling by the chain `s` keeps `tr(F_i / s_i)` constant for any `F`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::tensor::{Real, Tensor};

/// Traces smaller than this are treated as zero divisors.
pub const SINGULAR_TRACE: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceDiagnostic {
    pub g: Vec<Tensor>,
    pub f: Vec<Tensor>,
    pub traces: Vec<Real>,
    pub residual: Real,
    /// Present when requested and every trace is usable as a divisor.
    pub scalars: Option<Vec<Real>>,
}

fn square_size(m: &Tensor, what: &str, i: usize) -> Result<usize> {
    if m.rank() != 2 || m.shape()[0] != m.shape()[1] {
        return Err(Error::dim(
            "cyclic_products",
            format!("{what} {i} has shape {:?}, not square", m.shape()),
        ));
    }
    Ok(m.shape()[0])
}

pub fn cyclic_products(g: &[Tensor]) -> Result<Vec<Tensor>> {
    let Some(first) = g.first() else {
        return Err(Error::contract("cyclic_products of an empty list"));
    };
    let m = square_size(first, "matrix", 0)?;
    for (i, gi) in g.iter().enumerate() {
        if square_size(gi, "matrix", i)? != m {
            return Err(Error::dim(
                "cyclic_products",
                format!(
                    "matrix {i} has shape {:?}, matrix 0 has {:?}",
                    gi.shape(),
                    first.shape()
                ),
            ));
        }
    }
    let t = g.len();
    (0..t)
        .map(|i| {
            let mut acc = g[i].clone();
            for step in 1..t {
                acc = acc.matmul(&g[(i + step) % t])?;
            }
            Ok(acc)
        })
        .collect()
}

/// `max_i |tr(F_i) - tr(F_1)|`.
pub fn trace_residual(f: &[Tensor]) -> Result<Real> {
    let traces = f.iter().map(Tensor::trace).collect::<Result<Vec<_>>>()?;
    let Some(&t0) = traces.first() else { return Ok(0.0) };
    Ok(traces.iter().map(|t| (t - t0).abs()).fold(0.0, Real::max))
}

/// `s_1 = 1`, `s_{i+1} = s_i tr(F_{i+1}) / tr(F_i)`.
///
/// Fails with [`Error::Singularity`] naming the zero-based index of the
/// first trace (among the divisors) with magnitude below [`SINGULAR_TRACE`].
pub fn scaled_trace_chain(f: &[Tensor]) -> Result<Vec<Real>> {
    let traces = f.iter().map(Tensor::trace).collect::<Result<Vec<_>>>()?;
    chain_from_traces(&traces)
}

pub fn chain_from_traces(traces: &[Real]) -> Result<Vec<Real>> {
    let mut s = Vec::with_capacity(traces.len());
    if traces.is_empty() {
        return Ok(s);
    }
    s.push(1.0);
    for i in 0..traces.len() - 1 {
        if (traces[i] as f64).abs() < SINGULAR_TRACE {
            return Err(Error::Singularity {
                index: i,
                trace: traces[i] as f64,
            });
        }
        s.push(s[i] * traces[i + 1] / traces[i]);
    }
    Ok(s)
}

/// `T` matrices `m x m` with entries uniform in `[-1, 1)`.
pub fn random_matrices(tasks: usize, m: usize, rng: &mut Rng) -> Vec<Tensor> {
    (0..tasks)
        .map(|_| {
            let data = (0..m * m).map(|_| rng.uniform_range(-1.0, 1.0) as Real).collect();
            Tensor::new(vec![m, m], data).expect("square")
        })
        .collect()
}

pub fn trace_diagnostic(g: Vec<Tensor>, with_scalars: bool) -> Result<TraceDiagnostic> {
    let f = cyclic_products(&g)?;
    let traces = f.iter().map(Tensor::trace).collect::<Result<Vec<_>>>()?;
    let residual = trace_residual(&f)?;
    let scalars = if with_scalars {
        Some(chain_from_traces(&traces)?)
    } else {
        None
    };
    Ok(TraceDiagnostic {
        g,
        f,
        traces,
        residual,
        scalars,
    })
}
