//! Joint multitask optimization.

mod adam;
mod record;
mod trainer;

pub use crate::loss::{accuracy, loss_value as compute_loss, LossKind};
pub use adam::{adam_update, AdamConfig, AdamState};
pub use record::{EvalPoint, EvalReport, RunRecord, TaskMetrics};
pub use trainer::{
    build_total_loss, draw_batches, evaluate, full_batches, inputs_synchronized, multitask_step, step_on_batches,
    train, TrainConfig,
};
