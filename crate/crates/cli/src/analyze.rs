//! `analyze`: diagnostics of learned scalings in finished runs.
//!
//! For every trial directory with scaling snapshots, writes to
//! `<trial>/analysis/` (or the mirrored path under `--out`):
//! `usage.csv`, `usage.svg`, `hardness.csv`, `distance_t<a>_t<b>.csv` for
//! every task pair, `dynamics.svg`, `strongest_path.csv`, and
//! `strongest_path.svg`. Task, layer, and depth labels are one-based.

use std::path::{Path, PathBuf};

use softorder::analysis::{dynamics_csv, layer_usage, mean_scaling_distance, ordering_hardness};
use softorder::plot::{heatmap, line_chart, strongest_path, Series};
use softorder::{Real, ScalingTensor};

use crate::error::{HarnessError, HarnessResult};
use crate::fsutil::{find_files, read_text, write_atomic};
use crate::run::CellRecord;

pub fn load_cell(path: &Path) -> HarnessResult<CellRecord> {
    let text = read_text(path)?;
    serde_json::from_str(&text).map_err(|e| HarnessError::Data(format!("{}: {e}", path.display())))
}

/// `record.json` files at or below `run_dir`.
pub fn cell_records(run_dir: &Path) -> HarnessResult<Vec<PathBuf>> {
    let direct = run_dir.join("record.json");
    if direct.is_file() {
        return Ok(vec![direct]);
    }
    if !run_dir.is_dir() {
        return Err(HarnessError::Data(format!(
            "{} is not a run directory",
            run_dir.display()
        )));
    }
    find_files(run_dir, "record.json")
}

/// Layer with the largest scale at each depth, per task.
pub fn strongest_paths(s: &ScalingTensor) -> Vec<Vec<usize>> {
    (0..s.tasks())
        .map(|i| {
            (0..s.depth())
                .map(|k| {
                    let col = s.column(i, k);
                    (0..col.len()).fold(0, |best, j| if col[j] > col[best] { j } else { best })
                })
                .collect()
        })
        .collect()
}

/// Analyzes every trial under `run_dir`; returns the analysis directories.
pub fn cmd_analyze(run_dir: &Path, out: Option<&Path>) -> HarnessResult<Vec<PathBuf>> {
    let mut written = Vec::new();
    let mut seen = 0;
    for path in cell_records(run_dir)? {
        seen += 1;
        let cell = load_cell(&path)?;
        let rec = &cell.record;
        let mut history = rec.scaling_history.clone();
        if let Some(f) = &rec.final_scaling {
            if history.last().map(|(_, s)| s) != Some(f) {
                let last = rec.evals.last().map_or(0, |p| p.iteration);
                history.push((last, f.clone()));
            }
        }
        if history.is_empty() {
            continue;
        }
        let trial_dir = path.parent().expect("record.json has a parent");
        let dir = match out {
            Some(o) => o.join(trial_dir.strip_prefix(run_dir).unwrap_or(Path::new(""))),
            None => trial_dir.join("analysis"),
        };
        analyze_history(&history, &rec.task_names, &dir)?;
        written.push(dir);
    }
    if written.is_empty() {
        return Err(HarnessError::Data(format!(
            "no scaling snapshots under {} ({} trial records found); only soft-ordering runs learn scalings",
            run_dir.display(),
            seen
        )));
    }
    Ok(written)
}

pub fn analyze_history(history: &[(usize, ScalingTensor)], task_names: &[String], dir: &Path) -> HarnessResult<()> {
    let (_, last) = history.last().expect("non-empty history");
    let usage = layer_usage(last);
    write_atomic(&dir.join("usage.csv"), usage.to_csv())?;
    let rows: Vec<String> = (1..=usage.layers()).map(|j| format!("layer {j}")).collect();
    let cols: Vec<String> = (1..=usage.depth()).map(|k| format!("depth {k}")).collect();
    write_atomic(
        &dir.join("usage.svg"),
        heatmap("mean layer usage", &rows, &cols, &usage.usage),
    )?;

    let tasks = last.tasks();
    let mut series = Vec::new();
    let mut hardness_csv = None;
    for a in 0..tasks {
        for b in a + 1..tasks {
            let (dist, hard) = dynamics_csv(history, a, b)?;
            write_atomic(&dir.join(format!("distance_t{}_t{}.csv", a + 1, b + 1)), dist)?;
            hardness_csv.get_or_insert(hard);
            let points = history
                .iter()
                .map(|(it, s)| Ok((*it as Real, mean_scaling_distance(s, a, b)?)))
                .collect::<softorder::Result<Vec<_>>>()?;
            series.push(Series {
                label: format!("distance t{}-t{}", a + 1, b + 1),
                points,
            });
        }
    }
    let hardness = hardness_csv.unwrap_or_else(|| {
        let mut h = String::from("iteration,hardness\n");
        for (it, s) in history {
            h.push_str(&format!("{it},{}\n", ordering_hardness(s)));
        }
        h
    });
    write_atomic(&dir.join("hardness.csv"), hardness)?;
    series.push(Series {
        label: "hardness".into(),
        points: history
            .iter()
            .map(|(it, s)| (*it as Real, ordering_hardness(s)))
            .collect(),
    });
    write_atomic(
        &dir.join("dynamics.svg"),
        line_chart("scaling dynamics", "iteration", "value", &series),
    )?;

    let paths = strongest_paths(last);
    let mut csv = String::from("task,depth,layer\n");
    for (i, p) in paths.iter().enumerate() {
        for (k, j) in p.iter().enumerate() {
            csv.push_str(&format!("{},{},{}\n", i + 1, k + 1, j + 1));
        }
    }
    write_atomic(&dir.join("strongest_path.csv"), csv)?;
    let labelled: Vec<(String, Vec<usize>)> = paths
        .into_iter()
        .enumerate()
        .map(|(i, p)| {
            (
                task_names.get(i).cloned().unwrap_or_else(|| format!("task {}", i + 1)),
                p,
            )
        })
        .collect();
    write_atomic(
        &dir.join("strongest_path.svg"),
        strongest_path("strongest path", &labelled, last.candidates()),
    )?;
    Ok(())
}
