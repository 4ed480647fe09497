//! Experiment configuration: one strict JSON document per experiment.
//!
//! Unknown keys are errors, and parse failures report the offending field
//! path with line and column. Relative paths resolve against the directory
//! holding the config file.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use softorder::mtl::{CoreKind, Gate};
use softorder::tasks::Split;
use softorder::train::AdamConfig;
use softorder::{Activation, Real};

use crate::error::{HarnessError, HarnessResult};

pub const CONFIG_VERSION: u32 = 1;

/// Environment variable naming a directory of MNIST IDX files.
pub const MNIST_ENV: &str = "MNIST_DIR";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "ExperimentConfig::version")]
    pub version: u32,
    pub experiment: Experiment,
    #[serde(default)]
    pub architecture: Option<Architecture>,
    #[serde(default)]
    pub train: Option<TrainBlock>,
    #[serde(default = "one")]
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "ExperimentConfig::default_output")]
    pub output: PathBuf,
    #[serde(default = "one")]
    pub workers: usize,
}

fn one() -> usize {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub enum Experiment {
    /// Memorizing random binary labels; one variant per sample size.
    RandomTasks {
        #[serde(default = "two")]
        tasks: usize,
        m: usize,
        sample_sizes: Vec<usize>,
        nonlinearity: Activation,
    },
    /// Digit-pair tasks; one variant per task count.
    MnistPairs {
        /// Directory with the four standard IDX files; defaults to `$MNIST_DIR`.
        #[serde(default)]
        data_dir: Option<PathBuf>,
        task_counts: Vec<usize>,
        /// Keep at most this many training images (before pair filtering).
        #[serde(default)]
        train_limit: Option<usize>,
    },
    /// One classification task per CSV file.
    Tabular {
        files: Vec<PathBuf>,
        #[serde(default)]
        split_seed: u64,
    },
    /// Synthetic stroke-glyph classification.
    Glyphs {
        #[serde(default = "two")]
        tasks: usize,
        classes: usize,
        image_size: usize,
        #[serde(default = "default_train_per_class")]
        train_per_class: usize,
        #[serde(default = "default_test_per_class")]
        test_per_class: usize,
    },
    /// Coordinate-to-brightness regression, one task per image.
    PixelViz {
        /// Grayscale PGM images; synthetic images are used when empty.
        #[serde(default)]
        images: Vec<PathBuf>,
        #[serde(default = "two")]
        synthetic_count: usize,
        #[serde(default = "default_synthetic_size")]
        synthetic_size: usize,
    },
    /// Cyclic-product trace identities on random matrices.
    TraceCheck {
        tasks: usize,
        dim: usize,
        #[serde(default)]
        with_scalars: bool,
    },
}

fn two() -> usize {
    2
}
fn default_train_per_class() -> usize {
    20
}
fn default_test_per_class() -> usize {
    10
}
fn default_synthetic_size() -> usize {
    28
}

impl Experiment {
    pub fn kind(&self) -> &'static str {
        match self {
            Experiment::RandomTasks { .. } => "random-tasks",
            Experiment::MnistPairs { .. } => "mnist-pairs",
            Experiment::Tabular { .. } => "tabular",
            Experiment::Glyphs { .. } => "glyphs",
            Experiment::PixelViz { .. } => "pixel-viz",
            Experiment::TraceCheck { .. } => "trace-check",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModeName {
    Parallel,
    Permuted,
    Soft,
}

impl ModeName {
    pub fn as_str(self) -> &'static str {
        match self {
            ModeName::Parallel => "parallel",
            ModeName::Permuted => "permuted",
            ModeName::Soft => "soft",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind", deny_unknown_fields)]
pub enum EncoderChoice {
    Identity,
    /// Untrained dense ReLU layer, drawn per task.
    FrozenRandom {
        units: usize,
    },
    /// Trainable dense ReLU layer.
    Learned {
        units: usize,
    },
    /// Trainable affine layer.
    Linear {
        units: usize,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Architecture {
    /// Number of shared core layers.
    pub depth: usize,
    /// Core layer kind; each experiment has a default.
    #[serde(default)]
    pub layer: Option<CoreKind>,
    #[serde(default)]
    pub encoder: Option<EncoderChoice>,
    #[serde(default)]
    pub share_encoder: Option<bool>,
    #[serde(default)]
    pub share_decoder: Option<bool>,
    pub modes: Vec<ModeName>,
    #[serde(default)]
    pub gate: Option<Gate>,
    #[serde(default)]
    pub include_identity: bool,
    #[serde(default)]
    pub dropout: Real,
}

impl Architecture {
    pub fn gate(&self) -> Gate {
        self.gate.unwrap_or(Gate::Softmax)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainBlock {
    pub iterations: usize,
    #[serde(default = "TrainBlock::default_batch")]
    pub batch_size: usize,
    #[serde(default)]
    pub full_batch: bool,
    #[serde(default)]
    pub optimizer: AdamConfig,
    #[serde(default)]
    pub eval_every: usize,
    /// Defaults depend on the experiment.
    #[serde(default)]
    pub eval_splits: Option<Vec<Split>>,
}

impl TrainBlock {
    fn default_batch() -> usize {
        64
    }
}

impl ExperimentConfig {
    fn version() -> u32 {
        CONFIG_VERSION
    }

    fn default_output() -> PathBuf {
        PathBuf::from("out")
    }

    /// Parses JSON text; errors carry the field path, line, and column.
    pub fn from_json(text: &str) -> HarnessResult<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: ExperimentConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let inner = e.inner();
            HarnessError::Config(format!(
                "at `{}` (line {}, column {}): {}",
                e.path(),
                inner.line(),
                inner.column(),
                inner
            ))
        })?;
        Ok(cfg)
    }

    /// Reads, parses, and validates a config file; relative paths resolve
    /// against the file's directory.
    pub fn load(path: &Path) -> HarnessResult<LoadedConfig> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::Config(format!("cannot read {}: {e}", path.display())))?;
        let config = Self::from_json(&text)?;
        let base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        let loaded = LoadedConfig { config, base_dir };
        loaded.validate()?;
        Ok(loaded)
    }

    pub fn architecture(&self) -> HarnessResult<&Architecture> {
        self.architecture
            .as_ref()
            .ok_or_else(|| HarnessError::Config(format!("{} needs an `architecture` block", self.experiment.kind())))
    }

    pub fn train_block(&self) -> HarnessResult<&TrainBlock> {
        self.train
            .as_ref()
            .ok_or_else(|| HarnessError::Config(format!("{} needs a `train` block", self.experiment.kind())))
    }
}

/// A parsed config together with the directory its relative paths use.
#[derive(Clone, Debug, PartialEq)]
pub struct LoadedConfig {
    pub config: ExperimentConfig,
    pub base_dir: PathBuf,
}

fn bad(msg: impl Into<String>) -> HarnessError {
    HarnessError::Config(msg.into())
}

impl LoadedConfig {
    pub fn from_parts(config: ExperimentConfig, base_dir: PathBuf) -> HarnessResult<Self> {
        let loaded = Self { config, base_dir };
        loaded.validate()?;
        Ok(loaded)
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn output_dir(&self) -> PathBuf {
        self.resolve(&self.config.output)
    }

    /// The MNIST directory: the configured one, else `$MNIST_DIR`.
    pub fn mnist_dir(&self) -> Option<PathBuf> {
        match &self.config.experiment {
            Experiment::MnistPairs { data_dir: Some(d), .. } => Some(self.resolve(d)),
            _ => std::env::var_os(MNIST_ENV).map(PathBuf::from),
        }
    }

    fn require_path(&self, p: &Path, what: &str) -> HarnessResult<()> {
        let full = self.resolve(p);
        if !full.exists() {
            return Err(bad(format!("{what} {} does not exist", full.display())));
        }
        Ok(())
    }

    pub fn validate(&self) -> HarnessResult<()> {
        let c = &self.config;
        if c.version != CONFIG_VERSION {
            return Err(bad(format!(
                "version {} is not supported (expected {CONFIG_VERSION})",
                c.version
            )));
        }
        if c.trials == 0 {
            return Err(bad("trials must be at least 1"));
        }
        if c.workers == 0 {
            return Err(bad("workers must be at least 1"));
        }
        if let Experiment::TraceCheck { tasks, dim, .. } = c.experiment {
            if tasks < 2 || dim == 0 {
                return Err(bad(format!(
                    "trace-check needs tasks >= 2 and dim >= 1, got {tasks} and {dim}"
                )));
            }
            return Ok(());
        }
        let arch = c.architecture()?;
        let train = c.train_block()?;
        if arch.depth == 0 {
            return Err(bad("architecture.depth must be at least 1"));
        }
        if arch.modes.is_empty() {
            return Err(bad("architecture.modes is empty"));
        }
        if arch.modes.iter().collect::<BTreeSet<_>>().len() != arch.modes.len() {
            return Err(bad("architecture.modes lists a mode twice"));
        }
        if !(0.0..1.0).contains(&arch.dropout) {
            return Err(bad(format!("architecture.dropout {} outside [0, 1)", arch.dropout)));
        }
        if arch.gate() == Gate::Sigmoid && !matches!(c.experiment, Experiment::PixelViz { .. }) {
            return Err(bad("the sigmoid gate is only meaningful for pixel-viz sweeps"));
        }
        if arch.include_identity && matches!(arch.layer, Some(CoreKind::Conv { .. })) {
            return Err(bad("include_identity cannot be combined with pooling conv layers"));
        }
        if train.iterations == 0 {
            return Err(bad("train.iterations must be at least 1"));
        }
        if train.batch_size == 0 && !train.full_batch {
            return Err(bad("train.batch_size must be at least 1"));
        }
        match &c.experiment {
            Experiment::RandomTasks {
                tasks, m, sample_sizes, ..
            } => {
                if *tasks < 2 || *m == 0 || sample_sizes.is_empty() || sample_sizes.contains(&0) {
                    return Err(bad("random-tasks needs tasks >= 2, m >= 1, and positive sample_sizes"));
                }
                if let Some(CoreKind::Dense { units, .. }) = arch.layer {
                    if units != *m {
                        return Err(bad(format!(
                            "random-tasks layers map R^{m} to itself, layer has {units} units"
                        )));
                    }
                }
            }
            Experiment::MnistPairs { task_counts, .. } => {
                if task_counts.is_empty() || task_counts.contains(&0) {
                    return Err(bad("mnist-pairs needs positive task_counts"));
                }
                match self.mnist_dir() {
                    Some(d) => self.require_path(&d, "MNIST directory")?,
                    None => return Err(bad(format!("mnist-pairs needs data_dir or ${MNIST_ENV}"))),
                }
            }
            Experiment::Tabular { files, .. } => {
                if files.is_empty() {
                    return Err(bad("tabular needs at least one file"));
                }
                for f in files {
                    self.require_path(f, "table")?;
                }
            }
            Experiment::Glyphs {
                tasks,
                classes,
                image_size,
                ..
            } => {
                if *tasks == 0 || *classes < 2 || *image_size < 8 {
                    return Err(bad("glyphs needs tasks >= 1, classes >= 2, image_size >= 8"));
                }
            }
            Experiment::PixelViz {
                images,
                synthetic_count,
                synthetic_size,
            } => {
                for f in images {
                    self.require_path(f, "image")?;
                }
                if images.is_empty() && (*synthetic_count == 0 || *synthetic_size < 2) {
                    return Err(bad(
                        "pixel-viz needs images or synthetic_count >= 1 and synthetic_size >= 2",
                    ));
                }
            }
            Experiment::TraceCheck { .. } => unreachable!(),
        }
        Ok(())
    }
}
