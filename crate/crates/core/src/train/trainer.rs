//! The multitask training loop.
//!
//! Each iteration draws one random minibatch per task (with replacement),
//! sums the per-task mean losses, runs one backward pass on the total, and
//! applies one Adam update to every trainable parameter.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::autograd::{Graph, NodeId};
use crate::error::{Error, Result};
use crate::loss;
use crate::mtl::{Mode, MultitaskModel};
use crate::rng::Rng;
use crate::tasks::{Split, TaskDataset};
use crate::tensor::{Real, Tensor};

use super::adam::{AdamConfig, AdamState};
use super::record::{EvalPoint, EvalReport, RunRecord, TaskMetrics};

/// Samples evaluated per forward pass during evaluation.
const EVAL_CHUNK: usize = 512;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub iterations: usize,
    /// Samples per task per iteration.
    pub batch_size: usize,
    /// Use every training sample of every task at each iteration instead of
    /// sampling `batch_size` of them.
    #[serde(default)]
    pub full_batch: bool,
    #[serde(default)]
    pub optimizer: AdamConfig,
    #[serde(default)]
    pub dropout_rate: Real,
    /// Evaluate every this many iterations (and always at the end); 0 means
    /// only at the start and the end.
    #[serde(default)]
    pub eval_every: usize,
    #[serde(default = "TrainConfig::default_eval_splits")]
    pub eval_splits: Vec<Split>,
    #[serde(default)]
    pub seed: u64,
}

impl TrainConfig {
    fn default_eval_splits() -> Vec<Split> {
        vec![Split::Validation]
    }

    pub fn new(iterations: usize, batch_size: usize) -> Self {
        Self {
            iterations,
            batch_size,
            full_batch: false,
            optimizer: AdamConfig::default(),
            dropout_rate: 0.0,
            eval_every: 0,
            eval_splits: Self::default_eval_splits(),
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::contract("iterations must be at least 1"));
        }
        if self.batch_size == 0 {
            return Err(Error::contract("batch_size must be at least 1"));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::contract(format!(
                "dropout_rate {} outside [0, 1)",
                self.dropout_rate
            )));
        }
        Ok(())
    }
}

/// True when every task's training inputs are identical, so a shared encoder
/// can see one common input batch per iteration.
pub fn inputs_synchronized(datasets: &[TaskDataset]) -> bool {
    let Some(first) = datasets.first() else { return false };
    datasets[1..].iter().all(|d| {
        d.train.len() == first.train.len() && d.train.iter().zip(&first.train).all(|(a, b)| a.input == b.input)
    })
}

/// Per-task training-set indices for one iteration, drawn with replacement
/// in ascending task order. With `synchronized`, one index set is shared by
/// all tasks.
pub fn draw_batches(
    datasets: &[TaskDataset],
    batch_size: usize,
    synchronized: bool,
    rng: &mut Rng,
) -> Result<Vec<Vec<usize>>> {
    if let Some(d) = datasets.iter().find(|d| d.train.is_empty()) {
        return Err(Error::contract(format!("task {} has an empty training split", d.name)));
    }
    if synchronized {
        let n = datasets[0].train.len();
        let shared: Vec<usize> = (0..batch_size).map(|_| rng.below(n)).collect();
        return Ok(vec![shared; datasets.len()]);
    }
    Ok(datasets
        .iter()
        .map(|d| (0..batch_size).map(|_| rng.below(d.train.len())).collect())
        .collect())
}

/// Every training index of every task, in order.
pub fn full_batches(datasets: &[TaskDataset]) -> Result<Vec<Vec<usize>>> {
    if let Some(d) = datasets.iter().find(|d| d.train.is_empty()) {
        return Err(Error::contract(format!("task {} has an empty training split", d.name)));
    }
    Ok(datasets.iter().map(|d| (0..d.train.len()).collect()).collect())
}

fn check_tasks(model: &MultitaskModel, datasets: &[TaskDataset]) -> Result<()> {
    if datasets.is_empty() {
        return Err(Error::contract("no datasets"));
    }
    if datasets.len() != model.tasks() {
        return Err(Error::contract(format!(
            "{} datasets for a {}-task model",
            datasets.len(),
            model.tasks()
        )));
    }
    Ok(())
}

/// Builds the summed training loss for explicit batches. Returns the graph,
/// the total-loss node, and each task's loss node.
pub fn build_total_loss(
    model: &MultitaskModel,
    datasets: &[TaskDataset],
    batches: &[Vec<usize>],
    mode: Mode,
    rng: &mut Rng,
) -> Result<(Graph, NodeId, Vec<NodeId>)> {
    check_tasks(model, datasets)?;
    let mut g = Graph::new();
    let mut per_task = Vec::with_capacity(datasets.len());
    let mut total: Option<NodeId> = None;
    for (t, (d, idx)) in datasets.iter().zip(batches).enumerate() {
        let (x, y) = d.batch(Split::Train, idx)?;
        let xin = g.constant(x);
        let pred = model.forward(&mut g, t, xin, mode, rng)?;
        let y = shape_target(d, y, g.value(pred))?;
        let l = g.loss(pred, y, d.loss)?;
        per_task.push(l);
        total = Some(match total {
            None => l,
            Some(acc) => g.add(acc, l)?,
        });
    }
    Ok((g, total.expect("at least one task"), per_task))
}

fn shape_target(d: &TaskDataset, y: Tensor, pred: &Tensor) -> Result<Tensor> {
    match d.loss {
        loss::LossKind::Ce => {
            let n = y.len();
            y.reshape(&[n])
        }
        _ => y.reshape(pred.shape()),
    }
}

/// One joint update: a batch per task, summed loss, one backward pass, one
/// Adam step. Returns the per-task minibatch losses.
pub fn multitask_step(
    model: &mut MultitaskModel,
    datasets: &[TaskDataset],
    state: &mut AdamState,
    config: &TrainConfig,
    synchronized: bool,
    rng: &mut Rng,
) -> Result<Vec<Real>> {
    let batches = if config.full_batch {
        full_batches(datasets)?
    } else {
        draw_batches(datasets, config.batch_size, synchronized, rng)?
    };
    step_on_batches(model, datasets, &batches, state, &config.optimizer, rng)
}

/// [`multitask_step`] with the batches already chosen.
pub fn step_on_batches(
    model: &mut MultitaskModel,
    datasets: &[TaskDataset],
    batches: &[Vec<usize>],
    state: &mut AdamState,
    optimizer: &AdamConfig,
    rng: &mut Rng,
) -> Result<Vec<Real>> {
    let (g, total, per_task) = build_total_loss(model, datasets, batches, Mode::Train, rng)?;
    let losses = per_task.iter().map(|&l| g.value(l).data()[0]).collect();
    let grads = g.backward(total, Tensor::scalar(1.0))?;
    state.update(model.params_mut(), &grads, optimizer);
    Ok(losses)
}

/// Eval-mode loss and accuracy of every task on `split`.
pub fn evaluate(model: &MultitaskModel, datasets: &[TaskDataset], split: Split) -> Result<EvalReport> {
    check_tasks(model, datasets)?;
    let mut tasks = Vec::with_capacity(datasets.len());
    for (t, d) in datasets.iter().enumerate() {
        let n = d.split(split).len();
        if n == 0 {
            return Err(Error::contract(format!(
                "task {}: {} split is empty",
                d.name,
                split.as_str()
            )));
        }
        let (mut loss_sum, mut hit_sum, mut has_acc) = (0.0, 0.0, true);
        let all: Vec<usize> = (0..n).collect();
        for chunk in all.chunks(EVAL_CHUNK) {
            let (x, y) = d.batch(split, chunk)?;
            let pred = model.predict(t, &x)?;
            let y = shape_target(d, y, &pred)?;
            let w = chunk.len() as Real;
            loss_sum += loss::loss_value(d.loss, &pred, &y)? * w;
            match loss::accuracy(d.loss, &pred, &y)? {
                Some(a) => hit_sum += a * w,
                None => has_acc = false,
            }
        }
        tasks.push(TaskMetrics {
            loss: loss_sum / n as Real,
            accuracy: has_acc.then(|| hit_sum / n as Real),
        });
    }
    let overall_loss = tasks.iter().map(|m| m.loss).sum();
    Ok(EvalReport {
        split,
        tasks,
        overall_loss,
    })
}

/// Trains `model` jointly on `datasets` and records the run.
///
/// Evaluations (and scaling snapshots) happen at iteration 0, every
/// `eval_every` iterations, and at the last iteration.
pub fn train(model: &mut MultitaskModel, datasets: &[TaskDataset], config: &TrainConfig) -> Result<RunRecord> {
    config.validate()?;
    check_tasks(model, datasets)?;
    for d in datasets {
        d.validate()?;
    }
    let start = Instant::now();
    model.set_dropout(config.dropout_rate)?;
    let synchronized = model.encoders_shared() && inputs_synchronized(datasets);
    let mut rng = Rng::seed_from(config.seed);
    let mut state = AdamState::new();
    let mut record = RunRecord {
        seed: config.seed,
        ordering: model.ordering().name().to_string(),
        task_names: datasets.iter().map(|d| d.name.clone()).collect(),
        train_losses: Vec::with_capacity(config.iterations),
        evals: Vec::new(),
        scaling_history: Vec::new(),
        final_scaling: None,
        wall_seconds: 0.0,
    };
    checkpoint_metrics(model, datasets, config, 0, &mut record)?;
    for it in 1..=config.iterations {
        let losses = multitask_step(model, datasets, &mut state, config, synchronized, &mut rng)?;
        if let Some(bad) = losses.iter().find(|l| !l.is_finite()) {
            return Err(Error::contract(format!(
                "non-finite training loss {bad} at iteration {it}"
            )));
        }
        record.train_losses.push(losses);
        let due = config.eval_every > 0 && it % config.eval_every == 0;
        if due || it == config.iterations {
            checkpoint_metrics(model, datasets, config, it, &mut record)?;
        }
    }
    record.final_scaling = model.scaling();
    record.wall_seconds = start.elapsed().as_secs_f64();
    Ok(record)
}

fn checkpoint_metrics(
    model: &MultitaskModel,
    datasets: &[TaskDataset],
    config: &TrainConfig,
    iteration: usize,
    record: &mut RunRecord,
) -> Result<()> {
    let reports = config
        .eval_splits
        .iter()
        .map(|&s| evaluate(model, datasets, s))
        .collect::<Result<Vec<_>>>()?;
    record.evals.push(EvalPoint { iteration, reports });
    if let Some(s) = model.scaling() {
        record.scaling_history.push((iteration, s));
    }
    Ok(())
}
