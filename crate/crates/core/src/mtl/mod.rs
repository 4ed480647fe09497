//! Multitask model assembly: shared core layers, task encoders/decoders,
//! and parallel, permuted, or soft ordering of the core.

mod checkpoint;
mod dropout;
mod layers;
mod model;
mod ordering;

pub use checkpoint::{
    checkpoint_from_str, checkpoint_to_string, load_checkpoint, save_checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION,
};
pub use dropout::{apply_dropout, dropout_mask, dropout_node, Mode};
pub use layers::{CoreKind, CoreLayer, Decoder, DecoderKind, Encoder, EncoderKind};
pub use model::{ModelSpec, MultitaskModel, LOGITS_PARAM};
pub use ordering::{
    is_permutation, one_hot_scaling, scaling_from_logits, sigmoid_scaling, Gate, OrderingSpec, ScalingTensor,
};
