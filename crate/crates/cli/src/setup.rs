//! Turning a config into datasets and model specs.

use std::path::Path;

use softorder::analysis::from_pgm;
use softorder::mtl::{CoreKind, DecoderKind, EncoderKind, ModelSpec, OrderingSpec};
use softorder::tasks::{
    gen_random_tasks, gen_synthetic_glyph_tasks, load_csv_task, load_idx, make_mnist_pair_tasks, make_pixel_tasks,
    synthetic_four_styled, GlyphSpec, RandomTaskSpec, Split, TaskDataset, MNIST_ENCODER_UNITS,
};
use softorder::{Activation, LossKind, Rng, Tensor};

use crate::config::{Architecture, EncoderChoice, Experiment, LoadedConfig, ModeName};
use crate::error::{HarnessError, HarnessResult};

/// One column of an experiment matrix: a fixed set of tasks and a model
/// architecture, trained once per (mode, trial).
#[derive(Clone, Debug)]
pub struct Variant {
    pub name: String,
    /// Numeric value of the varied quantity (sample size, task count), if any.
    pub x: Option<f64>,
    pub datasets: Vec<TaskDataset>,
    /// Architecture with a parallel ordering; modes swap the ordering.
    pub spec: ModelSpec,
    /// Image size of pixel tasks.
    pub image_shape: Option<(usize, usize)>,
}

/// Seed of an independent stream derived from a trial seed.
pub fn derive_seed(trial_seed: u64, stream: u64) -> u64 {
    Rng::seed_from(trial_seed).fork(stream).next_u64()
}

/// Splits evaluated during training when the config does not say.
pub fn default_eval_splits(exp: &Experiment) -> Vec<Split> {
    match exp {
        Experiment::RandomTasks { .. } | Experiment::PixelViz { .. } | Experiment::TraceCheck { .. } => {
            vec![Split::Train]
        }
        Experiment::MnistPairs { .. } => vec![Split::Test],
        Experiment::Tabular { .. } => vec![Split::Validation],
        Experiment::Glyphs { .. } => vec![Split::Train, Split::Test],
    }
}

fn default_layer(exp: &Experiment) -> CoreKind {
    let relu = Activation::Relu;
    match *exp {
        Experiment::RandomTasks { m, nonlinearity, .. } => CoreKind::Dense {
            units: m,
            activation: nonlinearity,
        },
        Experiment::MnistPairs { .. } => CoreKind::Dense {
            units: MNIST_ENCODER_UNITS,
            activation: relu,
        },
        Experiment::Tabular { .. } => CoreKind::Dense {
            units: 32,
            activation: relu,
        },
        Experiment::Glyphs { .. } => CoreKind::Conv {
            filters: 8,
            activation: relu,
        },
        Experiment::PixelViz { .. } | Experiment::TraceCheck { .. } => CoreKind::Dense {
            units: 100,
            activation: relu,
        },
    }
}

fn decoder_for(ds: &TaskDataset) -> DecoderKind {
    match ds.loss {
        LossKind::Bce => DecoderKind::DenseSigmoid {
            outputs: ds.output_size,
        },
        LossKind::Ce => DecoderKind::DenseSoftmax {
            classes: ds.output_size,
        },
        LossKind::Mse => DecoderKind::GlobalAveragePool,
    }
}

fn core_width(core: CoreKind) -> usize {
    match core {
        CoreKind::Dense { units, .. } => units,
        CoreKind::Conv { filters, .. } => filters,
    }
}

/// Assembles encoders, decoders, and sharing for `datasets`.
///
/// `encoder_seeds` supplies per-task seeds for frozen random encoders.
fn build_spec(
    arch: &Architecture,
    core: CoreKind,
    datasets: &[TaskDataset],
    default_encoder: EncoderChoice,
    default_share_encoder: bool,
    default_share_decoder: bool,
    encoder_seeds: &[u64],
) -> HarnessResult<ModelSpec> {
    let tasks = datasets.len();
    let choice = arch.encoder.unwrap_or(default_encoder);
    let share_enc = arch.share_encoder.unwrap_or(default_share_encoder);
    let share_dec = arch.share_decoder.unwrap_or(default_share_decoder);
    let input = |t: usize| datasets[t].input_shape.iter().product::<usize>();
    let encoder = |t: usize| match choice {
        EncoderChoice::Identity => EncoderKind::Identity,
        EncoderChoice::FrozenRandom { units } => EncoderKind::FrozenRandomDense {
            input: input(t),
            units,
            seed: encoder_seeds[t],
        },
        EncoderChoice::Learned { units } => EncoderKind::LearnedDense { input: input(t), units },
        EncoderChoice::Linear { units } => EncoderKind::LearnedLinear { input: input(t), units },
    };
    let core_input = match choice {
        EncoderChoice::Identity => datasets[0].input_shape.clone(),
        EncoderChoice::FrozenRandom { units } | EncoderChoice::Learned { units } | EncoderChoice::Linear { units } => {
            vec![units]
        }
    };
    if choice != EncoderChoice::Identity && core_input != [core_width(core)] {
        return Err(HarnessError::Config(format!(
            "encoder width {} does not match core width {}",
            core_input[0],
            core_width(core)
        )));
    }
    if share_enc && datasets.iter().any(|d| d.input_shape != datasets[0].input_shape) {
        return Err(HarnessError::Config(
            "share_encoder needs tasks with equal input shapes".into(),
        ));
    }
    let decoders: Vec<DecoderKind> = datasets.iter().map(decoder_for).collect();
    if share_dec && decoders.iter().any(|d| *d != decoders[0]) {
        return Err(HarnessError::Config(
            "share_decoder needs tasks with equal output heads".into(),
        ));
    }
    let (encoders, task_encoder) = if share_enc {
        (vec![encoder(0)], vec![0; tasks])
    } else {
        ((0..tasks).map(encoder).collect(), (0..tasks).collect())
    };
    let (decoders, task_decoder) = if share_dec {
        (vec![decoders[0]], vec![0; tasks])
    } else {
        (decoders, (0..tasks).collect())
    };
    let spec = ModelSpec {
        depth: arch.depth,
        core,
        core_input,
        encoders,
        task_encoder,
        decoders,
        task_decoder,
        ordering: OrderingSpec::Parallel,
        dropout: arch.dropout,
    };
    spec.validate()
        .map_err(|e| HarnessError::Config(format!("architecture does not fit the tasks: {e}")))?;
    Ok(spec)
}

fn read_pgm(path: &Path) -> HarnessResult<Tensor> {
    let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    from_pgm(&text).map_err(|e| HarnessError::Data(format!("{}: {e}", path.display())))
}

fn flatten(ds: &mut TaskDataset) -> HarnessResult<()> {
    let n: usize = ds.input_shape.iter().product();
    for s in ds
        .train
        .iter_mut()
        .chain(ds.validation.iter_mut())
        .chain(ds.test.iter_mut())
    {
        s.input = s.input.clone().reshape(&[n])?;
    }
    ds.input_shape = vec![n];
    Ok(())
}

/// Every variant of the experiment for one trial. Data drawn at random
/// depends on `trial_seed`; data read from disk does not.
pub fn build_variants(cfg: &LoadedConfig, trial_seed: u64) -> HarnessResult<Vec<Variant>> {
    let c = &cfg.config;
    let arch = c.architecture()?;
    let core = arch.layer.unwrap_or_else(|| default_layer(&c.experiment));
    let seed_of = |stream: u64| derive_seed(trial_seed, stream);
    match &c.experiment {
        Experiment::RandomTasks {
            tasks,
            m,
            sample_sizes,
            nonlinearity,
        } => sample_sizes
            .iter()
            .enumerate()
            .map(|(vi, &n)| {
                let datasets = gen_random_tasks(&RandomTaskSpec {
                    m: *m,
                    n,
                    tasks: *tasks,
                    nonlinearity: *nonlinearity,
                    seed: seed_of(100 + vi as u64),
                })?;
                let spec = build_spec(arch, core, &datasets, EncoderChoice::Identity, false, true, &[])?;
                Ok(Variant {
                    name: format!("n-{n}"),
                    x: Some(n as f64),
                    datasets,
                    spec,
                    image_shape: None,
                })
            })
            .collect(),
        Experiment::MnistPairs {
            task_counts,
            train_limit,
            ..
        } => {
            let dir = cfg
                .mnist_dir()
                .ok_or_else(|| HarnessError::Config("no MNIST directory configured".into()))?;
            let mut train = load_idx(
                &dir.join("train-images-idx3-ubyte"),
                &dir.join("train-labels-idx1-ubyte"),
            )?;
            let test = load_idx(&dir.join("t10k-images-idx3-ubyte"), &dir.join("t10k-labels-idx1-ubyte"))?;
            if let Some(limit) = *train_limit {
                train = train.truncated(limit);
            }
            task_counts
                .iter()
                .enumerate()
                .map(|(vi, &k)| {
                    let pairs = make_mnist_pair_tasks(&train, &test, k, seed_of(100 + vi as u64))?;
                    let spec = build_spec(
                        arch,
                        core,
                        &pairs.datasets,
                        EncoderChoice::FrozenRandom {
                            units: MNIST_ENCODER_UNITS,
                        },
                        false,
                        false,
                        &pairs.encoder_seeds,
                    )?;
                    Ok(Variant {
                        name: format!("k-{k}"),
                        x: Some(k as f64),
                        datasets: pairs.datasets,
                        spec,
                        image_shape: None,
                    })
                })
                .collect()
        }
        Experiment::Tabular { files, split_seed } => {
            let datasets = files
                .iter()
                .map(|f| load_csv_task(&cfg.resolve(f), *split_seed))
                .collect::<softorder::Result<Vec<_>>>()?;
            let units = core_width(core);
            let spec = build_spec(
                arch,
                core,
                &datasets,
                EncoderChoice::Learned { units },
                false,
                false,
                &[],
            )?;
            Ok(vec![Variant {
                name: "all".into(),
                x: None,
                datasets,
                spec,
                image_shape: None,
            }])
        }
        Experiment::Glyphs {
            tasks,
            classes,
            image_size,
            train_per_class,
            test_per_class,
        } => {
            let conv = matches!(core, CoreKind::Conv { .. });
            let spec = GlyphSpec {
                channels: if conv { core_width(core) } else { 1 },
                train_per_class: *train_per_class,
                test_per_class: *test_per_class,
                ..GlyphSpec::new(*tasks, *classes, *image_size, seed_of(100))
            };
            let mut datasets = gen_synthetic_glyph_tasks(&spec)?;
            let default_encoder = if conv {
                EncoderChoice::Identity
            } else {
                for ds in &mut datasets {
                    flatten(ds)?;
                }
                EncoderChoice::FrozenRandom {
                    units: core_width(core),
                }
            };
            let enc_seeds: Vec<u64> = (0..*tasks as u64).map(|t| seed_of(200 + t)).collect();
            let spec = build_spec(arch, core, &datasets, default_encoder, false, false, &enc_seeds)?;
            Ok(vec![Variant {
                name: "all".into(),
                x: None,
                datasets,
                spec,
                image_shape: None,
            }])
        }
        Experiment::PixelViz {
            images,
            synthetic_count,
            synthetic_size,
        } => {
            let imgs: Vec<Tensor> = if images.is_empty() {
                (0..*synthetic_count)
                    .map(|k| synthetic_four_styled(*synthetic_size, k))
                    .collect()
            } else {
                images
                    .iter()
                    .map(|p| read_pgm(&cfg.resolve(p)))
                    .collect::<HarnessResult<_>>()?
            };
            let shape = (imgs[0].shape()[0], imgs[0].shape()[1]);
            if imgs.iter().any(|i| i.shape() != imgs[0].shape()) {
                return Err(HarnessError::Data("pixel-viz images must share one size".into()));
            }
            let datasets = make_pixel_tasks(&imgs)?;
            let units = core_width(core);
            let spec = build_spec(arch, core, &datasets, EncoderChoice::Linear { units }, true, true, &[])?;
            Ok(vec![Variant {
                name: "all".into(),
                x: None,
                datasets,
                spec,
                image_shape: Some(shape),
            }])
        }
        Experiment::TraceCheck { .. } => Err(HarnessError::Config("trace-check has no training variants".into())),
    }
}

/// The ordering a mode uses; permutations are drawn from `rng`. Random-task
/// runs give every task its own order.
pub fn ordering_for(
    mode: ModeName,
    exp: &Experiment,
    arch: &Architecture,
    tasks: usize,
    rng: &mut Rng,
) -> OrderingSpec {
    match mode {
        ModeName::Parallel => OrderingSpec::Parallel,
        ModeName::Permuted if matches!(exp, Experiment::RandomTasks { .. }) => {
            OrderingSpec::random_distinct_permuted(tasks, arch.depth, rng)
        }
        ModeName::Permuted => OrderingSpec::random_permuted(tasks, arch.depth, rng),
        ModeName::Soft => OrderingSpec::Soft {
            gate: arch.gate(),
            include_identity: arch.include_identity,
        },
    }
}
