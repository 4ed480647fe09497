//! Acceptance suite. Every criterion prints one `PASS`, `FAIL`, or `SKIP`
//! line to stderr (visible without `--nocapture`) and then asserts.
//!
//! Criteria run one at a time so their runtime bounds are measured on an
//! otherwise idle process.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use softorder::analysis::{
    cyclic_products, layer_usage, mean_scaling_distance, ordering_hardness, random_matrices, render_task,
    scaled_trace_chain, scaling_distance, trace_residual,
};
use softorder::autograd::Graph;
use softorder::gradcheck::{op_gradient_errors, RandomComposition};
use softorder::mtl::checkpoint_from_str;
use softorder::tasks::{gen_random_tasks, RandomTaskSpec, Split};
use softorder::train::{draw_batches, evaluate, multitask_step, step_on_batches, AdamConfig, AdamState};
use softorder::{
    one_hot_scaling, scaling_from_logits, Activation, CoreKind, DecoderKind, EncoderKind, Gate, LossKind, Mode,
    ModelSpec, MultitaskModel, OrderingSpec, Real, Rng, Tensor, TrainConfig,
};
use softorder_harness::analyze::{cell_records, cmd_analyze, load_cell};
use softorder_harness::config::{ExperimentConfig, LoadedConfig, ModeName, MNIST_ENV};
use softorder_harness::fsutil::{find_files, read_text};
use softorder_harness::run::{cmd_run, Summary};
use softorder_harness::setup::{build_variants, derive_seed};
use softorder_harness::sweep::{cmd_sweep, SweepArgs};
use softorder_harness::tracecheck::{check_matrices, load_fixture};

static SERIAL: Mutex<()> = Mutex::new(());

fn serial() -> std::sync::MutexGuard<'static, ()> {
    SERIAL.lock().unwrap_or_else(|e| e.into_inner())
}

enum Status {
    Pass,
    Fail,
    Skip,
}

fn report(id: u32, name: &str, status: Status, detail: &str) {
    let s = match status {
        Status::Pass => "PASS",
        Status::Fail => "FAIL",
        Status::Skip => "SKIP",
    };
    let mut err = std::io::stderr().lock();
    let _ = writeln!(err, "criterion {id:>2} {s} {name}: {detail}");
}

/// Reports and asserts a criterion outcome.
fn conclude(id: u32, name: &str, ok: bool, detail: String) {
    report(id, name, if ok { Status::Pass } else { Status::Fail }, &detail);
    assert!(ok, "criterion {id} ({name}) failed: {detail}");
}

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn bundled(name: &str) -> LoadedConfig {
    ExperimentConfig::load(&configs_dir().join(name)).expect("bundled config loads")
}

fn secs(d: Duration) -> f64 {
    d.as_secs_f64()
}

fn random_batch(rows: usize, cols: usize, rng: &mut Rng) -> Tensor {
    Tensor::new(
        vec![rows, cols],
        (0..rows * cols).map(|_| rng.uniform_range(-1.0, 1.0) as Real).collect(),
    )
    .unwrap()
}

#[test]
fn criterion_01_gradient_oracle() {
    let _g = serial();
    let start = Instant::now();
    let ops = op_gradient_errors(1, 1e-6).unwrap();
    let (worst_op, op_err) = ops
        .iter()
        .cloned()
        .fold((String::new(), 0.0), |a, b| if b.1 > a.1 { b } else { a });
    let mut graph_err: Real = 0.0;
    for seed in 0..100 {
        graph_err = graph_err.max(RandomComposition::new(seed).max_gradient_error(1e-6).unwrap());
    }
    let elapsed = secs(start.elapsed());
    let ok = op_err < 1e-5 && graph_err < 1e-5 && elapsed < 60.0;
    conclude(
        1,
        "gradient oracle",
        ok,
        format!(
            "{} ops worst {op_err:.2e} ({worst_op}), 100 graphs worst {graph_err:.2e}, {elapsed:.1}s",
            ops.len()
        ),
    );
}

fn dense_spec(tasks: usize, depth: usize, m: usize, act: Activation, ordering: OrderingSpec) -> ModelSpec {
    ModelSpec::unshared(
        depth,
        CoreKind::Dense {
            units: m,
            activation: act,
        },
        vec![m],
        (0..tasks)
            .map(|_| EncoderKind::LearnedDense { input: 3, units: m })
            .collect(),
        vec![DecoderKind::DenseSigmoid { outputs: 2 }; tasks],
        ordering,
    )
}

#[test]
fn criterion_02_subsumption() {
    let _g = serial();
    let start = Instant::now();
    let acts = [Activation::Identity, Activation::Relu, Activation::Sigmoid];
    let mut rng = Rng::seed_from(2);
    let (mut soft_err, mut ident_err): (Real, Real) = (0.0, 0.0);
    for pair in 0..200 {
        let tasks = 1 + rng.below(3);
        let depth = 1 + rng.below(4);
        let m = 1 + rng.below(8);
        let act = acts[pair % 3];
        let ordering = OrderingSpec::random_permuted(tasks, depth, &mut rng);
        let OrderingSpec::Permuted { perms } = ordering.clone() else {
            unreachable!()
        };
        let permuted = MultitaskModel::new(dense_spec(tasks, depth, m, act, ordering), &mut rng).unwrap();
        let soft = permuted
            .with_ordering(OrderingSpec::Soft {
                gate: Gate::Softmax,
                include_identity: false,
            })
            .unwrap();
        let scales = one_hot_scaling(&perms).unwrap();
        let parallel = permuted.with_ordering(OrderingSpec::Parallel).unwrap();
        let ident = permuted
            .with_ordering(OrderingSpec::Permuted {
                perms: vec![(0..depth).collect(); tasks],
            })
            .unwrap();
        let x = random_batch(5, 3, &mut rng);
        for t in 0..tasks {
            let a = permuted.predict(t, &x).unwrap();
            let b = soft.predict_with_scaling(t, &x, &scales).unwrap();
            soft_err = soft_err.max(a.max_abs_diff(&b).unwrap());
            let p = parallel.predict(t, &x).unwrap();
            let q = ident.predict(t, &x).unwrap();
            ident_err = ident_err.max(p.max_abs_diff(&q).unwrap());
        }
    }
    let elapsed = secs(start.elapsed());
    let ok = soft_err <= 1e-9 && ident_err <= 1e-12 && elapsed < 30.0;
    conclude(
        2,
        "subsumption",
        ok,
        format!("200 pairs, one-hot soft vs permuted {soft_err:.2e}, identity perms vs parallel {ident_err:.2e}, {elapsed:.1}s"),
    );
}

#[test]
fn criterion_03_initialization_anchors() {
    let _g = serial();
    let mut worst: Real = 0.0;
    for d in 1..=6 {
        let tasks = 3;
        let s = scaling_from_logits(&Tensor::zeros(&[tasks, d, d])).unwrap();
        let expect = 1.0 / d as Real;
        for &v in s.tensor().data() {
            worst = worst.max((v - expect).abs());
        }
        worst = worst.max((ordering_hardness(&s) - expect).abs());
        for u in layer_usage(&s).usage.iter().flatten() {
            worst = worst.max((u - expect).abs());
        }
        for a in 0..tasks {
            for b in a + 1..tasks {
                for v in scaling_distance(&s, a, b).unwrap() {
                    worst = worst.max(v.abs());
                }
            }
        }
    }
    conclude(
        3,
        "initialization anchors",
        worst <= Real::EPSILON,
        format!("D in 1..=6, largest deviation from 1/D scales, 1/D hardness, zero distance: {worst:.2e}"),
    );
}

#[test]
fn criterion_04_trace_identities() {
    let _g = serial();
    let start = Instant::now();
    let (mut residual, mut normalized): (Real, Real) = (0.0, 0.0);
    let mut cases = 0;
    for t in 2..=5 {
        for m in 2..=8 {
            for seed in 0..10u64 {
                let mut rng = Rng::seed_from(seed * 100 + (t * 10 + m) as u64);
                let f = cyclic_products(&random_matrices(t, m, &mut rng)).unwrap();
                residual = residual.max(trace_residual(&f).unwrap());
                let s = scaled_trace_chain(&f).unwrap();
                let tr: Vec<Real> = f.iter().map(|x| x.trace().unwrap()).collect();
                for (ti, si) in tr.iter().zip(&s) {
                    normalized = normalized.max((ti / si - tr[0]).abs());
                }
                cases += 1;
            }
        }
    }
    let fixture = load_fixture(&configs_dir().join("zero_trace_fixture.json")).unwrap();
    let singular = check_matrices(fixture, true);
    let singular_ok = matches!(&singular, Err(e) if e.exit_code() == 4);
    let elapsed = secs(start.elapsed());
    let ok = residual < 1e-10 && normalized < 1e-9 && singular_ok && elapsed < 10.0;
    conclude(
        4,
        "trace identities",
        ok,
        format!(
            "{cases} cases, residual {residual:.2e}, normalized {normalized:.2e}, zero-trace fixture: {}, {elapsed:.1}s",
            match &singular {
                Err(e) => format!("exit {} ({e})", e.exit_code()),
                Ok(_) => "accepted".into(),
            }
        ),
    );
}

/// Mean of `metric` per (mode, x) cell.
fn cell_means(summary: &Summary, metric: &str) -> BTreeMap<(ModeName, u64), Real> {
    summary
        .cells
        .iter()
        .filter_map(|c| Some(((c.mode, c.x? as u64), c.metrics.get(metric)?.mean)))
        .collect()
}

#[test]
fn criterion_05_random_task_replication() {
    let _g = serial();
    let start = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let linear = cmd_run(&bundled("random_linear.json"), &dir.path().join("linear")).unwrap();
    let relu = cmd_run(&bundled("random_relu.json"), &dir.path().join("relu")).unwrap();
    let elapsed = secs(start.elapsed());

    let mut lines = Vec::new();
    let mut ok = elapsed < 300.0;
    let lin = cell_means(&linear, "train_accuracy");
    for n in [32u64, 64, 128, 256] {
        let p = 100.0 * lin[&(ModeName::Permuted, n)];
        let q = 100.0 * lin[&(ModeName::Parallel, n / 2)];
        let pass = (p - q).abs() <= 3.0;
        ok &= pass;
        lines.push(format!(
            "linear permuted@{n} {p:.2} vs parallel@{} {q:.2}{}",
            n / 2,
            if pass { "" } else { " (off)" }
        ));
    }
    let rel = cell_means(&relu, "train_accuracy");
    for n in [32u64, 64, 128, 256] {
        let p = 100.0 * rel[&(ModeName::Permuted, n)];
        let q = 100.0 * rel[&(ModeName::Parallel, n)];
        let pass = p >= q - 3.0;
        ok &= pass;
        lines.push(format!(
            "relu@{n} permuted {p:.2} vs parallel {q:.2}{}",
            if pass { "" } else { " (off)" }
        ));
    }
    lines.push(format!("{elapsed:.1}s"));
    conclude(5, "random-task replication", ok, lines.join("; "));
}

#[test]
fn criterion_06_pooled_equivalence() {
    let _g = serial();
    let (m, n, batch) = (6, 20, 8);
    let data = gen_random_tasks(&RandomTaskSpec {
        m,
        n,
        tasks: 2,
        nonlinearity: Activation::Relu,
        seed: 6,
    })
    .unwrap();
    let core = CoreKind::Dense {
        units: m,
        activation: Activation::Relu,
    };
    let two = ModelSpec {
        depth: 3,
        core,
        core_input: vec![m],
        encoders: vec![EncoderKind::Identity],
        task_encoder: vec![0, 0],
        decoders: vec![DecoderKind::DenseSigmoid { outputs: 1 }],
        task_decoder: vec![0, 0],
        ordering: OrderingSpec::Parallel,
        dropout: 0.0,
    };
    let one = ModelSpec {
        task_encoder: vec![0],
        task_decoder: vec![0],
        ..two.clone()
    };
    let mut joint = MultitaskModel::new(two, &mut Rng::seed_from(60)).unwrap();
    let mut single = MultitaskModel::new(one, &mut Rng::seed_from(61)).unwrap();
    let names: Vec<(String, Tensor)> = joint
        .params()
        .iter()
        .map(|(_, p)| (p.name.clone(), p.value.clone()))
        .collect();
    for (name, value) in names {
        let id = single.params().find(&name).expect("same parameter names");
        *single.params_mut().value_mut(id) = value;
    }
    let mut pooled = data[0].clone();
    pooled.train.extend(data[1].train.iter().cloned());

    let opt = AdamConfig::default();
    let (mut s_joint, mut s_single) = (AdamState::new(), AdamState::new());
    let mut rng = Rng::seed_from(62);
    let mut worst: Real = 0.0;
    for _ in 0..100 {
        let batches = draw_batches(&data, batch, true, &mut rng).unwrap();
        let joint_loss: Real = step_on_batches(&mut joint, &data, &batches, &mut s_joint, &opt, &mut rng)
            .unwrap()
            .iter()
            .sum();
        let idx: Vec<usize> = batches[0]
            .iter()
            .copied()
            .chain(batches[1].iter().map(|i| i + n))
            .collect();
        let (x, y) = pooled.batch(Split::Train, &idx).unwrap();
        let mut g = Graph::new();
        let xin = g.constant(x);
        let pred = single.forward(&mut g, 0, xin, Mode::Train, &mut rng).unwrap();
        let y = y.reshape(g.value(pred).shape()).unwrap();
        let l = g.loss(pred, y, LossKind::Bce).unwrap();
        // Two equal-size task batches: the summed task means equal twice the pooled mean.
        let single_loss = 2.0 * g.value(l).data()[0];
        let grads = g.backward(l, Tensor::scalar(2.0)).unwrap();
        s_single.update(single.params_mut(), &grads, &opt);
        worst = worst.max((joint_loss - single_loss).abs());
    }
    conclude(
        6,
        "pooled equivalence",
        worst < 1e-9,
        format!("100 iterations, largest per-iteration loss difference {worst:.2e}"),
    );
}

const MNIST_FILES: [&str; 4] = [
    "train-images-idx3-ubyte",
    "train-labels-idx1-ubyte",
    "t10k-images-idx3-ubyte",
    "t10k-labels-idx1-ubyte",
];

fn mnist_dir() -> Option<PathBuf> {
    let dir = PathBuf::from(std::env::var_os(MNIST_ENV)?);
    MNIST_FILES.iter().all(|f| dir.join(f).is_file()).then_some(dir)
}

fn mnist_config(task_counts: &[usize], modes: &[&str], dropout: Real, dir: &Path) -> LoadedConfig {
    let text = serde_json::json!({
        "experiment": {"mnist-pairs": {"data_dir": dir, "task_counts": task_counts}},
        "architecture": {"depth": 4, "modes": modes, "dropout": dropout},
        "train": {"iterations": 2000, "batch_size": 64, "eval_every": 200},
        "trials": 5,
    })
    .to_string();
    LoadedConfig::from_parts(ExperimentConfig::from_json(&text).unwrap(), PathBuf::from(".")).unwrap()
}

#[test]
fn criterion_07_soft_ordering_dynamics() {
    let _g = serial();
    let start = Instant::now();
    let (cfg, source) = match mnist_dir() {
        Some(dir) => (mnist_config(&[2], &["soft"], 0.0, &dir), "MNIST pairs"),
        None => (bundled("glyph_dynamics.json"), "synthetic glyphs"),
    };
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    cmd_run(&cfg, &out).unwrap();
    let depth = cfg.config.architecture.as_ref().unwrap().depth;
    let (mut dist, mut hard) = (Vec::new(), Vec::new());
    for path in cell_records(&out).unwrap() {
        let cell = load_cell(&path).unwrap();
        let s = cell.record.final_scaling.expect("soft runs keep their scaling");
        dist.push(mean_scaling_distance(&s, 0, 1).unwrap());
        hard.push(ordering_hardness(&s));
    }
    let mean = |v: &[Real]| v.iter().sum::<Real>() / v.len() as Real;
    let (d, h) = (mean(&dist), mean(&hard));

    // The analysis divergence series must rise from its initial value.
    let mut rising = true;
    for adir in cmd_analyze(&out, None).unwrap() {
        let text = read_text(&adir.join("distance_t1_t2.csv")).unwrap();
        let means: Vec<Real> = text
            .lines()
            .filter(|l| l.split(',').nth(1) == Some("mean"))
            .map(|l| l.rsplit(',').next().unwrap().parse().unwrap())
            .collect();
        rising &= means.last() > means.first();
    }
    let elapsed = secs(start.elapsed());
    let threshold = 1.0 / depth as Real + 0.05;
    let ok = dist.len() == 5 && d > 0.05 && h > threshold && rising && elapsed < 600.0;
    conclude(
        7,
        "soft-ordering dynamics",
        ok,
        format!(
            "{source}, {} seeds, distance {d:.3} (> 0.05), hardness {h:.3} (> {threshold:.2}), divergence rising {rising}, {elapsed:.1}s",
            dist.len()
        ),
    );
}

#[test]
fn criterion_08_mnist_comparison() {
    let _g = serial();
    let Some(dir) = mnist_dir() else {
        report(
            8,
            "MNIST comparison",
            Status::Skip,
            &format!("set {MNIST_ENV} to a directory with the IDX files"),
        );
        return;
    };
    let start = Instant::now();
    let cfg = mnist_config(&[2, 4], &["parallel", "permuted", "soft"], 0.5, &dir);
    let tmp = tempfile::tempdir().unwrap();
    let summary = cmd_run(&cfg, tmp.path()).unwrap();
    let acc = cell_means(&summary, "test_accuracy");
    let pct = |mode, k| 100.0 * acc[&(mode, k)];
    let soft4 = pct(ModeName::Soft, 4);
    let par4 = pct(ModeName::Parallel, 4);
    let rel = |mode, k| pct(mode, k) - pct(ModeName::Parallel, k);
    let perm_keeps = rel(ModeName::Permuted, 4) >= rel(ModeName::Permuted, 2);
    let soft_keeps = rel(ModeName::Soft, 4) >= rel(ModeName::Soft, 2);
    let elapsed = secs(start.elapsed());
    let ok = soft4 >= par4 - 0.5 && perm_keeps && soft_keeps && elapsed < 1200.0;
    conclude(
        8,
        "MNIST comparison",
        ok,
        format!(
            "k=4 soft {soft4:.2} vs parallel {par4:.2}; relative to parallel k=2 -> k=4: permuted {:+.2} -> {:+.2}, soft {:+.2} -> {:+.2}; {elapsed:.1}s",
            rel(ModeName::Permuted, 2),
            rel(ModeName::Permuted, 4),
            rel(ModeName::Soft, 2),
            rel(ModeName::Soft, 4)
        ),
    );
}

#[test]
fn criterion_09_conv_path() {
    let _g = serial();
    let start = Instant::now();
    let cfg = bundled("glyphs_conv.json");
    let tb = cfg.config.train.clone().unwrap();
    let trial_seed = cfg.config.seed;
    let variant = build_variants(&cfg, trial_seed).unwrap().remove(0);
    let data = variant.datasets;
    let soft = variant.spec.with_ordering(OrderingSpec::Soft {
        gate: Gate::Softmax,
        include_identity: false,
    });
    let mut model = MultitaskModel::new(soft, &mut Rng::seed_from(derive_seed(trial_seed, 1000))).unwrap();
    let train_cfg = TrainConfig {
        optimizer: tb.optimizer,
        seed: derive_seed(trial_seed, 3000),
        ..TrainConfig::new(tb.iterations, tb.batch_size)
    };
    let mut rng = Rng::seed_from(train_cfg.seed);
    let mut perm_rng = Rng::seed_from(9);
    let mut state = AdamState::new();
    let (mut norm_err, mut sub_err): (Real, Real) = (0.0, 0.0);
    let mut checkpoints = 0;
    let probe: Vec<usize> = (0..4).collect();
    for it in 1..=tb.iterations {
        multitask_step(&mut model, &data, &mut state, &train_cfg, false, &mut rng).unwrap();
        if it % 500 != 0 && it != tb.iterations {
            continue;
        }
        checkpoints += 1;
        let s = model.scaling().unwrap();
        for i in 0..s.tasks() {
            for k in 0..s.depth() {
                norm_err = norm_err.max((s.column(i, k).iter().sum::<Real>() - 1.0).abs());
            }
        }
        let OrderingSpec::Permuted { perms } =
            OrderingSpec::random_permuted(model.tasks(), model.depth(), &mut perm_rng)
        else {
            unreachable!()
        };
        let permuted = model
            .with_ordering(OrderingSpec::Permuted { perms: perms.clone() })
            .unwrap();
        let hard = one_hot_scaling(&perms).unwrap();
        for (t, d) in data.iter().enumerate() {
            let (x, _) = d.batch(Split::Train, &probe).unwrap();
            let a = permuted.predict(t, &x).unwrap();
            let b = model.predict_with_scaling(t, &x, &hard).unwrap();
            sub_err = sub_err.max(a.max_abs_diff(&b).unwrap());
        }
    }
    let accuracy = evaluate(&model, &data, Split::Train).unwrap().mean_accuracy().unwrap();
    let elapsed = secs(start.elapsed());
    let ok = accuracy > 0.9 && norm_err <= 1e-12 && sub_err <= 1e-9 && elapsed < 600.0;
    conclude(
        9,
        "conv path",
        ok,
        format!(
            "{} iterations, training error {:.2}%, {checkpoints} checkpoints: column sums off by {norm_err:.1e}, subsumption {sub_err:.1e}, {elapsed:.1}s",
            tb.iterations,
            100.0 * (1.0 - accuracy)
        ),
    );
}

#[test]
fn criterion_10_pixel_sweep() {
    let _g = serial();
    let start = Instant::now();
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("run");
    cmd_run(&bundled("pixel_viz.json"), &out).unwrap();
    let strip = |task| {
        let args = SweepArgs {
            task,
            layer: 1,
            depths: vec![1, 2, 3],
            steps: 8,
        };
        cmd_sweep(&out, &args, Some(&tmp.path().join(format!("sweep{task}")))).unwrap()
    };
    let (first, second) = (strip(1), strip(2));
    let frames: usize = first.frames.iter().map(|(_, f)| f.len()).sum();
    let written = find_files(&first.out_dir, "depth1_step0.pgm").unwrap().len();
    let endpoints_differ = first.frames.iter().all(|(_, f)| f[0].sum() != f[f.len() - 1].sum());
    let tasks_differ = first
        .frames
        .iter()
        .zip(&second.frames)
        .all(|((_, a), (_, b))| a.iter().zip(b).any(|(x, y)| x.sum() != y.sum()));

    let still = cmd_sweep(
        &out,
        &SweepArgs {
            steps: 1,
            ..SweepArgs::default()
        },
        Some(&tmp.path().join("still")),
    )
    .unwrap();
    let cell = load_cell(&still.trial_dir.join("record.json")).unwrap();
    let (h, w) = cell.image_shape.unwrap();
    let (model, _) = checkpoint_from_str(&read_text(&still.trial_dir.join("checkpoint.json")).unwrap()).unwrap();
    let expected = render_task(&model, 0, h, w).unwrap();
    let exact = still.frames.iter().all(|(_, f)| f[0] == expected);
    let elapsed = secs(start.elapsed());
    let ok = frames == 24 && written == 1 && endpoints_differ && tasks_differ && exact && elapsed < 300.0;
    conclude(
        10,
        "pixel sweep",
        ok,
        format!(
            "{frames} frames for task 1 layer 1, endpoint sums differ {endpoints_differ}, task strips differ {tasks_differ}, trained-scale frame exact {exact}, {elapsed:.1}s"
        ),
    );
}

/// Every `metrics.csv` below `root`, keyed by relative path.
fn metric_files(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    find_files(root, "metrics.csv")
        .unwrap()
        .into_iter()
        .map(|p| (p.strip_prefix(root).unwrap().to_path_buf(), std::fs::read(&p).unwrap()))
        .collect()
}

#[test]
fn criterion_11_determinism() {
    let _g = serial();
    let tmp = tempfile::tempdir().unwrap();
    let mut details = Vec::new();
    let mut ok = true;
    for name in ["random_relu.json", "glyph_dynamics.json", "pixel_viz.json"] {
        let mut cfg = bundled(name);
        cfg.config.trials = 2;
        cfg.config.train.as_mut().unwrap().iterations = 150;
        let mut runs = Vec::new();
        for (i, workers) in [1, 1, 2].into_iter().enumerate() {
            cfg.config.workers = workers;
            let out = tmp.path().join(format!("{name}-{i}"));
            cmd_run(&cfg, &out).unwrap();
            runs.push(metric_files(&out));
        }
        let same = !runs[0].is_empty() && runs.iter().all(|r| r == &runs[0]);
        ok &= same;
        details.push(format!("{name}: {} CSVs identical across 3 runs {same}", runs[0].len()));
    }
    conclude(11, "determinism", ok, details.join("; "));
}
