//! Command-line parsing and dispatch.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::analyze::cmd_analyze;
use crate::config::{Experiment, ExperimentConfig, LoadedConfig};
use crate::error::{HarnessError, HarnessResult};
use crate::fsutil::write_atomic;
use crate::run::cmd_run;
use crate::sweep::{cmd_sweep, SweepArgs};
use crate::tracecheck::{check_matrices, check_random, load_fixture};

#[derive(Parser, Debug)]
#[command(name = "softorder", version, about = "Multitask layer-ordering experiments")]
pub struct Cli {
    /// Experiment config (JSON).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory, overriding the config.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Base seed, overriding the config.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Concurrent cells, overriding the config.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Train every (mode, variant, trial) cell and write metrics, summary, and plots.
    Run {
        /// Config path (alternative to --config).
        config_path: Option<PathBuf>,
    },
    /// Usage, divergence, hardness, and strongest paths of learned scalings.
    Analyze {
        /// Run output directory or a single trial directory.
        run_dir: Option<PathBuf>,
    },
    /// Render a pixel task while one layer's scale moves from 0 to 1.
    Sweep {
        run_dir: Option<PathBuf>,
        /// Task (one-based).
        #[arg(long, default_value_t = 1)]
        task: usize,
        /// Layer (one-based).
        #[arg(long, default_value_t = 1)]
        layer: usize,
        /// Depths (one-based), comma separated.
        #[arg(long, value_delimiter = ',', default_value = "1,2,3")]
        depths: Vec<usize>,
        /// Grid points; 1 renders the trained scale.
        #[arg(long, default_value_t = 8)]
        steps: usize,
    },
    /// Trace residual and scalar chain of cyclic products of random matrices.
    Tracecheck {
        #[arg(long, default_value_t = 3)]
        tasks: usize,
        #[arg(long, default_value_t = 4)]
        dim: usize,
        #[arg(long)]
        with_scalars: bool,
        /// Print JSON instead of text.
        #[arg(long)]
        json: bool,
        /// JSON file `{"matrices": [...]}` used instead of random matrices.
        #[arg(long)]
        fixture: Option<PathBuf>,
    },
}

fn load_config(cli: &Cli, positional: Option<&Path>) -> HarnessResult<LoadedConfig> {
    let path = positional
        .or(cli.config.as_deref())
        .ok_or_else(|| HarnessError::Config("no config given (use --config or a positional path)".into()))?;
    let mut loaded = ExperimentConfig::load(path)?;
    if let Some(s) = cli.seed {
        loaded.config.seed = s;
    }
    if let Some(w) = cli.workers {
        loaded.config.workers = w;
    }
    loaded.validate()?;
    Ok(loaded)
}

/// A run directory from the positional argument or the config's output.
fn run_dir(cli: &Cli, positional: Option<&Path>) -> HarnessResult<PathBuf> {
    match positional {
        Some(p) => Ok(p.to_path_buf()),
        None => Ok(load_config(cli, None)?.output_dir()),
    }
}

pub fn dispatch(cli: &Cli) -> HarnessResult<()> {
    match &cli.command {
        Command::Run { config_path } => {
            let cfg = load_config(cli, config_path.as_deref())?;
            let out = cli.out.clone().unwrap_or_else(|| cfg.output_dir());
            let summary = cmd_run(&cfg, &out)?;
            println!("{} cells written to {}", summary.cells.len(), out.display());
            for c in &summary.cells {
                let metrics: Vec<String> = c
                    .metrics
                    .iter()
                    .map(|(k, s)| match s.std {
                        Some(sd) => format!("{k} {:.4} ± {:.4}", s.mean, sd),
                        None => format!("{k} {:.4}", s.mean),
                    })
                    .collect();
                println!("{:>8} {:<8} {}", c.mode.as_str(), c.variant, metrics.join(", "));
            }
            if let Some(t) = &summary.trace {
                println!(
                    "max trace residual {:e}",
                    t.residual.values.iter().fold(0.0, |a: f64, &b| a.max(b))
                );
            }
        }
        Command::Analyze { run_dir: dir } => {
            let dir = run_dir(cli, dir.as_deref())?;
            for d in cmd_analyze(&dir, cli.out.as_deref())? {
                println!("{}", d.display());
            }
        }
        Command::Sweep {
            run_dir: dir,
            task,
            layer,
            depths,
            steps,
        } => {
            let dir = run_dir(cli, dir.as_deref())?;
            let args = SweepArgs {
                task: *task,
                layer: *layer,
                depths: depths.clone(),
                steps: *steps,
            };
            let res = cmd_sweep(&dir, &args, cli.out.as_deref())?;
            let n: usize = res.frames.iter().map(|(_, f)| f.len()).sum();
            println!("{n} frames written to {}", res.out_dir.display());
        }
        Command::Tracecheck {
            tasks,
            dim,
            with_scalars,
            json,
            fixture,
        } => {
            let (mut tasks, mut dim, mut with_scalars) = (*tasks, *dim, *with_scalars);
            let mut seed = 0;
            if cli.config.is_some() {
                let cfg = load_config(cli, None)?;
                let Experiment::TraceCheck {
                    tasks: t,
                    dim: d,
                    with_scalars: w,
                } = cfg.config.experiment
                else {
                    return Err(HarnessError::Config(format!(
                        "tracecheck needs a trace-check config, got {}",
                        cfg.config.experiment.kind()
                    )));
                };
                (tasks, dim, with_scalars, seed) = (t, d, w || with_scalars, cfg.config.seed);
            }
            let seed = cli.seed.unwrap_or(seed);
            let report = match fixture {
                Some(path) => check_matrices(load_fixture(path)?, with_scalars)?,
                None => check_random(tasks, dim, seed, with_scalars)?,
            };
            let text = if *json {
                serde_json::to_string_pretty(&report).map_err(|e| HarnessError::Runtime(e.to_string()))? + "\n"
            } else {
                report.to_text()
            };
            print!("{text}");
            if let Some(out) = &cli.out {
                write_atomic(
                    &out.join("trace.json"),
                    serde_json::to_string_pretty(&report).unwrap_or_default(),
                )?;
            }
        }
    }
    Ok(())
}

/// Parses `args` (including the program name), runs the command, reports
/// errors on stderr, and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match dispatch(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
