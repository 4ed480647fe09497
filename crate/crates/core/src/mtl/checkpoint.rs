//! Model checkpoints.
//!
//! A checkpoint is a JSON document:
//!
//! ```text
//! {
//!   "magic": "SOFTORDER-CHECKPOINT",
//!   "version": 1,
//!   "seed": <u64 used to initialize the model>,
//!   "spec": <ModelSpec: depth, core kind, encoders, decoders, ordering, dropout>,
//!   "params": [ { "name": ..., "shape": [...], "trainable": bool, "data": [...] }, ... ]
//! }
//! ```
//!
//! Scaling logits are stored as the parameter `scaling.logits` with shape
//! `[tasks, candidates, depth]`. Floats round-trip exactly.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::tensor::{Real, Tensor};

use super::model::{ModelSpec, MultitaskModel};

pub const CHECKPOINT_MAGIC: &str = "SOFTORDER-CHECKPOINT";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CheckpointFile {
    magic: String,
    version: u32,
    seed: u64,
    spec: ModelSpec,
    params: Vec<StoredParam>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StoredParam {
    name: String,
    shape: Vec<usize>,
    trainable: bool,
    data: Vec<Real>,
}

pub fn checkpoint_to_string(model: &MultitaskModel, seed: u64) -> Result<String> {
    let file = CheckpointFile {
        magic: CHECKPOINT_MAGIC.to_string(),
        version: CHECKPOINT_VERSION,
        seed,
        spec: model.spec().clone(),
        params: model
            .params()
            .iter()
            .map(|(_, p)| StoredParam {
                name: p.name.clone(),
                shape: p.value.shape().to_vec(),
                trainable: p.trainable,
                data: p.value.data().to_vec(),
            })
            .collect(),
    };
    Ok(serde_json::to_string(&file)?)
}

/// Returns the model and the seed it was initialized from.
pub fn checkpoint_from_str(text: &str) -> Result<(MultitaskModel, u64)> {
    let header: serde_json::Value = serde_json::from_str(text)?;
    match header.get("magic").and_then(|m| m.as_str()) {
        Some(CHECKPOINT_MAGIC) => {}
        other => {
            return Err(Error::format(
                "magic",
                format!("expected {CHECKPOINT_MAGIC}, found {other:?}"),
            ));
        }
    }
    match header.get("version").and_then(|v| v.as_u64()) {
        Some(v) if v == CHECKPOINT_VERSION as u64 => {}
        other => return Err(Error::format("version", format!("unsupported version {other:?}"))),
    }
    let file: CheckpointFile = serde_json::from_value(header)?;
    let mut model = MultitaskModel::new(file.spec, &mut Rng::seed_from(file.seed))?;
    if file.params.len() != model.params().len() {
        return Err(Error::format(
            "params",
            format!("{} stored, model has {}", file.params.len(), model.params().len()),
        ));
    }
    for stored in file.params {
        let id = model
            .params()
            .find(&stored.name)
            .ok_or_else(|| Error::format("params", format!("unknown parameter {}", stored.name)))?;
        let expected = model.params().value(id).shape().to_vec();
        if stored.shape != expected {
            return Err(Error::format(
                format!("params.{}", stored.name),
                format!("shape {:?}, model expects {expected:?}", stored.shape),
            ));
        }
        *model.params_mut().value_mut(id) = Tensor::new(stored.shape, stored.data)
            .map_err(|e| Error::format(format!("params.{}", stored.name), e.to_string()))?;
    }
    Ok((model, file.seed))
}

pub fn save_checkpoint(model: &MultitaskModel, seed: u64, path: &Path) -> Result<()> {
    std::fs::write(path, checkpoint_to_string(model, seed)?)?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<(MultitaskModel, u64)> {
    checkpoint_from_str(&std::fs::read_to_string(path)?)
}
