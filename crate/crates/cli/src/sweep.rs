//! `sweep`: render pixel tasks while one learned scale moves from 0 to 1.
//!
//! Writes `task<t>_layer<l>/depth<d>_step<i>.pgm`, a contact sheet
//! `task<t>_layer<l>.svg` (rows are depths, columns grid values), and
//! `frames.csv` with the pixel sum of every frame. Indices are one-based.

use std::path::{Path, PathBuf};

use softorder::analysis::{layer_sweep, linspace_unit, to_pgm};
use softorder::mtl::{checkpoint_from_str, Gate, OrderingSpec};
use softorder::plot::contact_sheet;
use softorder::{Real, Tensor};

use crate::analyze::{cell_records, load_cell};
use crate::config::ModeName;
use crate::error::{HarnessError, HarnessResult};
use crate::fsutil::{read_text, write_atomic};

#[derive(Clone, Debug, PartialEq)]
pub struct SweepArgs {
    pub task: usize,
    pub layer: usize,
    pub depths: Vec<usize>,
    /// Grid points from 0 to 1; a single step renders the trained scale.
    pub steps: usize,
}

impl Default for SweepArgs {
    fn default() -> Self {
        Self {
            task: 1,
            layer: 1,
            depths: vec![1, 2, 3],
            steps: 8,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SweepOutput {
    pub trial_dir: PathBuf,
    pub out_dir: PathBuf,
    /// `(depth, frames)` with one-based depths.
    pub frames: Vec<(usize, Vec<Tensor>)>,
    pub grid: Vec<Vec<Real>>,
}

fn bad(msg: impl Into<String>) -> HarnessError {
    HarnessError::Config(msg.into())
}

/// The trial directory to sweep: `run_dir` itself, or the first soft-mode
/// trial below it.
fn pick_trial(run_dir: &Path) -> HarnessResult<PathBuf> {
    let records = cell_records(run_dir)?;
    for path in &records {
        let cell = load_cell(path)?;
        if cell.mode == ModeName::Soft || records.len() == 1 {
            return Ok(path.parent().expect("record parent").to_path_buf());
        }
    }
    Err(HarnessError::Data(format!(
        "no trial records under {}",
        run_dir.display()
    )))
}

pub fn cmd_sweep(run_dir: &Path, args: &SweepArgs, out: Option<&Path>) -> HarnessResult<SweepOutput> {
    let trial_dir = pick_trial(run_dir)?;
    let cell = load_cell(&trial_dir.join("record.json"))?;
    if cell.experiment != "pixel-viz" {
        return Err(bad(format!(
            "sweeps need a pixel-viz run, {} is {}",
            trial_dir.display(),
            cell.experiment
        )));
    }
    let (h, w) = cell.image_shape.ok_or_else(|| bad("run record lacks the image size"))?;
    let (model, _) = checkpoint_from_str(&read_text(&trial_dir.join("checkpoint.json"))?)?;
    if !matches!(
        model.ordering(),
        OrderingSpec::Soft {
            gate: Gate::Sigmoid,
            ..
        }
    ) {
        return Err(bad("sweeps need a soft ordering with the sigmoid gate"));
    }
    let scaling = model.scaling().expect("soft model");
    let in_range = |v: usize, n: usize| (1..=n).contains(&v);
    if !in_range(args.task, scaling.tasks()) || !in_range(args.layer, scaling.candidates()) {
        return Err(bad(format!(
            "task {} / layer {} outside 1..={} / 1..={}",
            args.task,
            args.layer,
            scaling.tasks(),
            scaling.candidates()
        )));
    }
    if args.steps == 0 || args.depths.is_empty() {
        return Err(bad("sweeps need at least one step and one depth"));
    }
    if let Some(d) = args.depths.iter().find(|&&d| !in_range(d, scaling.depth())) {
        return Err(bad(format!("depth {d} outside 1..={}", scaling.depth())));
    }
    let (task, layer) = (args.task - 1, args.layer - 1);
    let out_dir = out.map(Path::to_path_buf).unwrap_or_else(|| trial_dir.join("sweep"));
    let stem = format!("task{}_layer{}", args.task, args.layer);
    let mut result = SweepOutput {
        trial_dir: trial_dir.clone(),
        out_dir: out_dir.clone(),
        frames: Vec::new(),
        grid: Vec::new(),
    };
    let mut csv = String::from("task,layer,depth,step,value,pixel_sum\n");
    for &d in &args.depths {
        let grid = if args.steps == 1 {
            vec![scaling.get(task, layer, d - 1)]
        } else {
            linspace_unit(args.steps)
        };
        let frames = layer_sweep(&model, task, layer, d - 1, &grid, h, w)?;
        for (i, (f, v)) in frames.iter().zip(&grid).enumerate() {
            write_atomic(&out_dir.join(&stem).join(format!("depth{d}_step{i}.pgm")), to_pgm(f)?)?;
            csv.push_str(&format!("{},{},{d},{i},{v},{}\n", args.task, args.layer, f.sum()));
        }
        result.frames.push((d, frames));
        result.grid.push(grid);
    }
    let rows: Vec<(String, Vec<Tensor>)> = result
        .frames
        .iter()
        .map(|(d, f)| (format!("depth {d}"), f.clone()))
        .collect();
    let title = format!("task {} layer {}: inactive to active", args.task, args.layer);
    write_atomic(&out_dir.join(format!("{stem}.svg")), contact_sheet(&title, &rows, 3.0))?;
    write_atomic(&out_dir.join(format!("{stem}_frames.csv")), csv)?;
    Ok(result)
}
