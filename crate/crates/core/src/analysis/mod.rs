//! Diagnostics: cyclic trace constraints, learned-scale summaries, and
//! layer sweeps over pixel tasks.

mod export;
mod scaling;
mod sweep;
mod trace;

pub use export::{from_pgm, gray_level, to_pgm};
pub use scaling::{
    dynamics_csv, layer_usage, mean_scaling_distance, ordering_hardness, scaling_distance, UsageDistribution,
};
pub use sweep::{layer_sweep, linspace_unit, render_task};
pub use trace::{
    chain_from_traces, cyclic_products, random_matrices, scaled_trace_chain, trace_diagnostic, trace_residual,
    TraceDiagnostic, SINGULAR_TRACE,
};
