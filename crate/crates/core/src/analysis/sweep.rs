//! Rendering a pixel task while varying one learned scale.

use crate::error::{Error, Result};
use crate::mtl::{DecoderKind, Gate, MultitaskModel, OrderingSpec};
use crate::tasks::pixel_grid;
use crate::tensor::{Real, Tensor};

/// Evenly spaced values from 0 to 1 inclusive.
pub fn linspace_unit(steps: usize) -> Vec<Real> {
    match steps {
        0 => Vec::new(),
        1 => vec![0.0],
        n => (0..n).map(|i| i as Real / (n - 1) as Real).collect(),
    }
}

/// One `[height, width]` image per grid value: the gate output of `layer`
/// at `depth` for `task` is overwritten with the value while every other
/// scale and weight stays at its trained value. Indices are zero-based.
pub fn layer_sweep(
    model: &MultitaskModel,
    task: usize,
    layer: usize,
    depth: usize,
    grid: &[Real],
    height: usize,
    width: usize,
) -> Result<Vec<Tensor>> {
    if !matches!(
        model.ordering(),
        OrderingSpec::Soft {
            gate: Gate::Sigmoid,
            ..
        }
    ) {
        return Err(Error::contract(format!(
            "layer sweeps need a soft ordering with sigmoid gates, model uses {}",
            model.ordering().name()
        )));
    }
    if model.decoder_kind(task) != DecoderKind::GlobalAveragePool {
        return Err(Error::contract("layer sweeps need a global-average-pool decoder"));
    }
    let scaling = model.scaling().expect("soft model has scales");
    if layer >= scaling.candidates() || depth >= scaling.depth() || task >= scaling.tasks() {
        return Err(Error::contract(format!(
            "task {task}, layer {layer}, depth {depth} outside scaling shape {:?}",
            scaling.tensor().shape()
        )));
    }
    if let Some(v) = grid.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(Error::contract(format!("sweep value {v} outside [0, 1]")));
    }
    let inputs = pixel_grid(height, width);
    grid.iter()
        .map(|&v| {
            let mut s = scaling.clone();
            s.set(task, layer, depth, v);
            let pred = model.predict_with_scaling(task, &inputs, &s)?;
            pred.reshape(&[height, width])
        })
        .collect()
}

/// The model's own rendering of a pixel task.
pub fn render_task(model: &MultitaskModel, task: usize, height: usize, width: usize) -> Result<Tensor> {
    model
        .predict(task, &pixel_grid(height, width))?
        .reshape(&[height, width])
}
