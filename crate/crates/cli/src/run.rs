//! `run`: every (mode, variant, trial) cell of an experiment.
//!
//! Layout under the output directory:
//!
//! ```text
//! summary.json
//! plots/*.svg
//! <mode>/<variant>/trial_<i>/metrics.csv
//! <mode>/<variant>/trial_<i>/record.json      (CellRecord)
//! <mode>/<variant>/trial_<i>/checkpoint.json
//! <mode>/<variant>/trial_<i>/timing.json
//! ```
//!
//! Trace-check experiments write `trace/trial_<i>/trace.json` instead.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use softorder::mtl::checkpoint_to_string;
use softorder::plot::{line_chart, Series};
use softorder::tasks::Split;
use softorder::train::train;
use softorder::{MultitaskModel, Real, Rng, RunRecord, TrainConfig};

use crate::config::{Experiment, ExperimentConfig, LoadedConfig, ModeName};
use crate::error::{HarnessError, HarnessResult};
use crate::fsutil::write_atomic;
use crate::setup::{build_variants, default_eval_splits, derive_seed, ordering_for, Variant};
use crate::tracecheck::{check_random, TraceReport};

pub const SUMMARY_SCHEMA_VERSION: u32 = 1;

/// What one trial directory records about its cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellRecord {
    pub experiment: String,
    pub mode: ModeName,
    pub variant: String,
    pub trial: usize,
    pub seed: u64,
    pub eval_splits: Vec<Split>,
    pub image_shape: Option<(usize, usize)>,
    pub record: RunRecord,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: Real,
    /// Sample standard deviation; absent for a single trial.
    pub std: Option<Real>,
    pub values: Vec<Real>,
}

impl Stat {
    pub fn of(values: Vec<Real>) -> Self {
        let n = values.len() as Real;
        let mean = values.iter().sum::<Real>() / n;
        let std = (values.len() > 1)
            .then(|| (values.iter().map(|v| (v - mean) * (v - mean)).sum::<Real>() / (n - 1.0)).sqrt());
        Self { mean, std, values }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryCell {
    pub mode: ModeName,
    pub variant: String,
    pub x: Option<f64>,
    pub seeds: Vec<u64>,
    pub metrics: BTreeMap<String, Stat>,
}

/// Difference of mean metrics between two modes on one variant.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub variant: String,
    pub metric: String,
    pub mode_a: ModeName,
    pub mode_b: ModeName,
    /// `mean(mode_a) - mean(mode_b)`.
    pub difference: Real,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub schema_version: u32,
    pub experiment: String,
    pub base_seed: u64,
    pub trials: usize,
    /// The effective config with absolute paths; it reproduces the run.
    pub config: ExperimentConfig,
    pub cells: Vec<SummaryCell>,
    pub comparisons: Vec<Comparison>,
    pub trace: Option<TraceSummary>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceSummary {
    pub residual: Stat,
    pub normalized_residual: Option<Stat>,
}

pub fn cell_dir(out: &Path, mode: ModeName, variant: &str, trial: usize) -> PathBuf {
    out.join(mode.as_str()).join(variant).join(format!("trial_{trial}"))
}

/// Final metrics of a record: `<split>_loss` (sum over tasks) and, for
/// classification, `<split>_accuracy` (mean over tasks).
pub fn final_metrics(record: &RunRecord, splits: &[Split]) -> BTreeMap<String, Real> {
    let mut out = BTreeMap::new();
    for &split in splits {
        if let Some(r) = record.final_eval(split) {
            out.insert(format!("{}_loss", split.as_str()), r.overall_loss);
            if let Some(a) = r.mean_accuracy() {
                out.insert(format!("{}_accuracy", split.as_str()), a);
            }
        }
    }
    out
}

struct CellOutcome {
    mode: ModeName,
    variant: usize,
    record: RunRecord,
    model: MultitaskModel,
}

/// Trains one cell. Models of every mode start from the same weights; only
/// the ordering differs.
fn run_cell(
    cfg: &LoadedConfig,
    variant: &Variant,
    vi: usize,
    mode: ModeName,
    trial_seed: u64,
    splits: &[Split],
) -> HarnessResult<CellOutcome> {
    let arch = cfg.config.architecture()?;
    let tb = cfg.config.train_block()?;
    let stream = vi as u64;
    let mut init = Rng::seed_from(derive_seed(trial_seed, 1000 + stream));
    let base = MultitaskModel::new(variant.spec.clone(), &mut init)?;
    let mut perm_rng = Rng::seed_from(derive_seed(trial_seed, 2000 + stream));
    let ordering = ordering_for(
        mode,
        &cfg.config.experiment,
        arch,
        variant.datasets.len(),
        &mut perm_rng,
    );
    let mut model = base.with_ordering(ordering)?;
    let train_cfg = TrainConfig {
        iterations: tb.iterations,
        batch_size: tb.batch_size.max(1),
        full_batch: tb.full_batch,
        optimizer: tb.optimizer,
        dropout_rate: arch.dropout,
        eval_every: tb.eval_every,
        eval_splits: splits.to_vec(),
        seed: derive_seed(trial_seed, 3000 + stream),
    };
    let record = train(&mut model, &variant.datasets, &train_cfg)?;
    Ok(CellOutcome {
        mode,
        variant: vi,
        record,
        model,
    })
}

/// The config with every path made absolute, so it can be re-run from
/// anywhere.
pub fn effective_config(cfg: &LoadedConfig, out: &Path) -> ExperimentConfig {
    let abs = |p: &Path| {
        let p = cfg.resolve(p);
        if p.is_absolute() {
            p
        } else {
            std::env::current_dir().map(|d| d.join(&p)).unwrap_or(p)
        }
    };
    let mut c = cfg.config.clone();
    c.output = abs(out);
    match &mut c.experiment {
        Experiment::MnistPairs { data_dir, .. } => *data_dir = cfg.mnist_dir().map(|d| abs(&d)),
        Experiment::Tabular { files, .. } => files.iter_mut().for_each(|f| *f = abs(f)),
        Experiment::PixelViz { images, .. } => images.iter_mut().for_each(|f| *f = abs(f)),
        _ => {}
    }
    c
}

fn to_json<T: Serialize>(v: &T) -> HarnessResult<String> {
    serde_json::to_string_pretty(v).map_err(|e| HarnessError::Runtime(e.to_string()))
}

/// Runs every cell, writes all artifacts under `out`, and returns the
/// summary. `out` overrides the configured output directory.
pub fn cmd_run(cfg: &LoadedConfig, out: &Path) -> HarnessResult<Summary> {
    let c = &cfg.config;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(c.workers)
        .build()
        .map_err(|e| HarnessError::Runtime(e.to_string()))?;
    let mut summary = Summary {
        schema_version: SUMMARY_SCHEMA_VERSION,
        experiment: c.experiment.kind().to_string(),
        base_seed: c.seed,
        trials: c.trials,
        config: effective_config(cfg, out),
        cells: Vec::new(),
        comparisons: Vec::new(),
        trace: None,
    };

    if let Experiment::TraceCheck {
        tasks,
        dim,
        with_scalars,
    } = c.experiment
    {
        let reports: Vec<TraceReport> = (0..c.trials)
            .map(|t| check_random(tasks, dim, c.seed + t as u64, with_scalars))
            .collect::<HarnessResult<_>>()?;
        for (t, r) in reports.iter().enumerate() {
            write_atomic(
                &out.join("trace").join(format!("trial_{t}")).join("trace.json"),
                to_json(r)?,
            )?;
        }
        summary.trace = Some(TraceSummary {
            residual: Stat::of(reports.iter().map(|r| r.residual).collect()),
            normalized_residual: with_scalars
                .then(|| Stat::of(reports.iter().filter_map(|r| r.normalized_residual).collect())),
        });
        write_atomic(&out.join("summary.json"), to_json(&summary)?)?;
        return Ok(summary);
    }

    let arch = c.architecture()?;
    let splits = c
        .train_block()?
        .eval_splits
        .clone()
        .unwrap_or_else(|| default_eval_splits(&c.experiment));
    // metrics[(mode, variant)] = per-trial final metrics, in trial order.
    let mut per_cell: BTreeMap<(ModeName, usize), Vec<(u64, BTreeMap<String, Real>)>> = BTreeMap::new();
    let mut curves: BTreeMap<(ModeName, usize), Vec<RunRecord>> = BTreeMap::new();
    let mut variant_meta: Vec<(String, Option<f64>)> = Vec::new();

    for trial in 0..c.trials {
        let trial_seed = c.seed + trial as u64;
        let variants = build_variants(cfg, trial_seed)?;
        variant_meta = variants.iter().map(|v| (v.name.clone(), v.x)).collect();
        let jobs: Vec<(usize, ModeName)> = (0..variants.len())
            .flat_map(|vi| arch.modes.iter().map(move |&m| (vi, m)))
            .collect();
        let outcomes: Vec<(CellOutcome, f64)> = pool.install(|| {
            jobs.par_iter()
                .map(|&(vi, mode)| {
                    let start = Instant::now();
                    let o = run_cell(cfg, &variants[vi], vi, mode, trial_seed, &splits)?;
                    Ok((o, start.elapsed().as_secs_f64()))
                })
                .collect::<HarnessResult<Vec<_>>>()
        })?;
        for (o, wall) in outcomes {
            let v = &variants[o.variant];
            let dir = cell_dir(out, o.mode, &v.name, trial);
            let mut record = o.record;
            record.wall_seconds = 0.0;
            write_atomic(&dir.join("metrics.csv"), record.metrics_csv())?;
            write_atomic(
                &dir.join("checkpoint.json"),
                checkpoint_to_string(&o.model, trial_seed)?,
            )?;
            write_atomic(&dir.join("timing.json"), format!("{{\"wall_seconds\": {wall}}}\n"))?;
            let metrics = final_metrics(&record, &splits);
            let cell = CellRecord {
                experiment: c.experiment.kind().to_string(),
                mode: o.mode,
                variant: v.name.clone(),
                trial,
                seed: trial_seed,
                eval_splits: splits.clone(),
                image_shape: v.image_shape,
                record,
            };
            write_atomic(&dir.join("record.json"), to_json(&cell)?)?;
            per_cell
                .entry((o.mode, o.variant))
                .or_default()
                .push((trial_seed, metrics));
            curves.entry((o.mode, o.variant)).or_default().push(cell.record);
        }
    }

    for ((mode, vi), trials) in &per_cell {
        let mut metrics: BTreeMap<String, Vec<Real>> = BTreeMap::new();
        for (_, m) in trials {
            for (k, v) in m {
                metrics.entry(k.clone()).or_default().push(*v);
            }
        }
        summary.cells.push(SummaryCell {
            mode: *mode,
            variant: variant_meta[*vi].0.clone(),
            x: variant_meta[*vi].1,
            seeds: trials.iter().map(|(s, _)| *s).collect(),
            metrics: metrics.into_iter().map(|(k, v)| (k, Stat::of(v))).collect(),
        });
    }
    summary.comparisons = comparisons(&summary.cells, &arch.modes);
    write_plots(out, &summary, &curves, &variant_meta, &splits)?;
    write_atomic(&out.join("summary.json"), to_json(&summary)?)?;
    Ok(summary)
}

fn comparisons(cells: &[SummaryCell], modes: &[ModeName]) -> Vec<Comparison> {
    let mut out = Vec::new();
    for (ai, &a) in modes.iter().enumerate() {
        for &b in &modes[ai + 1..] {
            for ca in cells.iter().filter(|c| c.mode == a) {
                let Some(cb) = cells.iter().find(|c| c.mode == b && c.variant == ca.variant) else {
                    continue;
                };
                for (metric, sa) in &ca.metrics {
                    if let Some(sb) = cb.metrics.get(metric) {
                        out.push(Comparison {
                            variant: ca.variant.clone(),
                            metric: metric.clone(),
                            mode_a: a,
                            mode_b: b,
                            difference: sa.mean - sb.mean,
                        });
                    }
                }
            }
        }
    }
    out
}

/// Mean over trials of an eval metric at each evaluation iteration.
fn mean_curve(records: &[RunRecord], split: Split, accuracy: bool) -> Vec<(Real, Real)> {
    let Some(first) = records.first() else {
        return Vec::new();
    };
    first
        .evals
        .iter()
        .enumerate()
        .filter_map(|(p, point)| {
            let vals: Option<Vec<Real>> = records
                .iter()
                .map(|r| {
                    let rep = r.evals.get(p)?.reports.iter().find(|x| x.split == split)?;
                    if accuracy {
                        rep.mean_accuracy()
                    } else {
                        Some(rep.overall_loss)
                    }
                })
                .collect();
            let vals = vals?;
            Some((point.iteration as Real, vals.iter().sum::<Real>() / vals.len() as Real))
        })
        .collect()
}

fn write_plots(
    out: &Path,
    summary: &Summary,
    curves: &BTreeMap<(ModeName, usize), Vec<RunRecord>>,
    variants: &[(String, Option<f64>)],
    splits: &[Split],
) -> HarnessResult<()> {
    let plots = out.join("plots");
    for (vi, (vname, _)) in variants.iter().enumerate() {
        for &split in splits {
            for (accuracy, label) in [(false, "loss"), (true, "accuracy")] {
                let series: Vec<Series> = curves
                    .iter()
                    .filter(|((_, v), _)| *v == vi)
                    .map(|((mode, _), recs)| Series {
                        label: mode.as_str().to_string(),
                        points: mean_curve(recs, split, accuracy),
                    })
                    .filter(|s| !s.points.is_empty())
                    .collect();
                if series.is_empty() {
                    continue;
                }
                let title = format!("{vname}: {} {label}", split.as_str());
                let svg = line_chart(&title, "iteration", label, &series);
                write_atomic(&plots.join(format!("{vname}_{}_{label}.svg", split.as_str())), svg)?;
            }
        }
    }
    if variants.len() > 1 && variants.iter().all(|(_, x)| x.is_some()) {
        let metric_names: Vec<String> = summary
            .cells
            .first()
            .map(|c| c.metrics.keys().cloned().collect())
            .unwrap_or_default();
        for metric in metric_names {
            let mut by_mode: BTreeMap<ModeName, Vec<(Real, Real)>> = BTreeMap::new();
            for cell in &summary.cells {
                if let (Some(x), Some(s)) = (cell.x, cell.metrics.get(&metric)) {
                    by_mode.entry(cell.mode).or_default().push((x, s.mean));
                }
            }
            let series: Vec<Series> = by_mode
                .into_iter()
                .map(|(m, points)| Series {
                    label: m.as_str().to_string(),
                    points,
                })
                .collect();
            let svg = line_chart(&format!("final {metric}"), "variant", &metric, &series);
            write_atomic(&plots.join(format!("summary_{metric}.svg")), svg)?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stat_uses_sample_deviation() {
        let s = Stat::of(vec![1.0, 2.0, 3.0]);
        assert_eq!(s.mean, 2.0);
        assert_eq!(s.std, Some(1.0));
        assert_eq!(Stat::of(vec![4.0]).std, None);
    }
}
