//! Multitask learning with parallel, permuted, and soft ordering of shared
//! layers.
//!
//! The crate is organized bottom-up:
//!
//! - numeric core: [`Tensor`], kernels in [`ops`], reverse-mode
//!   differentiation in [`autograd`], and a finite-difference oracle in
//!   [`gradcheck`];
//! - [`mtl`]: shared core layers, task encoders/decoders, and the three
//!   ordering topologies;
//! - [`train`]: joint multitask optimization with Adam;
//! - [`tasks`]: task construction and dataset ingestion;
//! - [`analysis`]: trace constraints of cyclic matrix products and
//!   diagnostics of learned scalings;
//! - [`plot`]: dependency-free SVG and PGM output.

pub mod analysis;
pub mod autograd;
pub mod error;
pub mod gradcheck;
pub mod loss;
pub mod mtl;
pub mod ops;
pub mod params;
pub mod plot;
pub mod rng;
pub mod tasks;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};
pub use loss::LossKind;
pub use mtl::{
    one_hot_scaling, scaling_from_logits, CoreKind, DecoderKind, EncoderKind, Gate, Mode, ModelSpec, MultitaskModel,
    OrderingSpec, ScalingTensor,
};
pub use ops::Activation;
pub use params::{ParamId, ParamStore};
pub use rng::Rng;

pub use tasks::TaskDataset;
pub use tensor::{Real, Tensor};
pub use train::{RunRecord, TrainConfig};
