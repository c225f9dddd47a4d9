use std::path::PathBuf;

use anyhow::{bail, Result};
use clap::{Args, Parser, Subcommand};

use crate::config::RunConfig;

#[derive(Debug, Parser)]
#[command(
    name = "gdcycles",
    version,
    about = "Gradient descent dynamics on non-separable logistic regression with eta = gamma / lambda"
)]
pub struct Cli {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(subcommand)]
    pub command: Command,
}

/// Flags shared by every subcommand. Unset flags fall back to the config
/// file, then to the built-in defaults.
#[derive(Debug, Default, Args)]
pub struct CommonArgs {
    /// TOML config file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Step size multiplier; eta = gamma / lambda_max.
    #[arg(long, global = true)]
    pub gamma: Option<f64>,
    /// GD iterations [default: 20000].
    #[arg(long, global = true)]
    pub steps: Option<usize>,
    /// Spectrum window, a power of two [default: 1024].
    #[arg(long, global = true)]
    pub window: Option<usize>,
    /// Newton gradient tolerance [default: 1e-12].
    #[arg(long, global = true)]
    pub tol_newton: Option<f64>,
    /// Cycle recurrence tolerance [default: 1e-7].
    #[arg(long, global = true)]
    pub tol_cycle: Option<f64>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Directory for CSV and JSON outputs.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Newton solve: minimizer and top Hessian eigenvalue.
    Solve {
        /// Dataset CSV or lifted spec JSON.
        input: Option<PathBuf>,
    },
    /// Run GD and characterize the long-run behaviour.
    Run {
        /// Dataset CSV or lifted spec JSON.
        input: Option<PathBuf>,
        /// Initial iterate, comma separated.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        w0: Option<Vec<f64>>,
        /// Coordinates written to the trajectory CSV.
        #[arg(long, value_delimiter = ',')]
        sample: Option<Vec<usize>>,
        /// Record the loss at every step.
        #[arg(long)]
        loss: bool,
    },
    /// One-dimensional sphere problem: lemma checks and cobweb data.
    #[command(name = "analyze-1d")]
    Analyze1d {
        /// Ratio of positive to negative examples.
        #[arg(long)]
        c: Option<f64>,
        /// Check every gamma in 1.1, 1.3, .., 1.99 instead of `--gamma`.
        #[arg(long)]
        sweep: bool,
        /// Cobweb starting point.
        #[arg(long, allow_hyphen_values = true)]
        w0: Option<f64>,
    },
    /// Embed a 2D base dataset into the unit sphere of dimension d.
    Lift {
        input: Option<PathBuf>,
        /// Ambient dimension or `auto`.
        #[arg(long)]
        dim: Option<String>,
    },
    /// Search random 2D datasets for stable GD cycles.
    Hunt {
        #[arg(long)]
        trials: Option<usize>,
    },
    /// Compare GD on a dataset and on its scaled copy.
    Scale {
        input: Option<PathBuf>,
        /// Scale factor.
        #[arg(long)]
        c: Option<f64>,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        w0: Option<Vec<f64>>,
    },
    /// Run acceptance suites.
    Verify {
        /// onedim, scaling, lift, cycles, derivatives, classical or all.
        #[arg(default_value = "all")]
        suite: String,
        /// Smaller grids.
        #[arg(long)]
        quick: bool,
    },
    /// Power spectrum and period of a column of a CSV file.
    Spectrum {
        input: Option<PathBuf>,
        #[arg(long, default_value = "norm")]
        column: String,
    },
}

fn set<T>(slot: &mut T, value: &Option<T>)
where
    T: Clone,
{
    if let Some(v) = value {
        *slot = v.clone();
    }
}

impl Cli {
    /// Defaults, overlaid by `--config`, overlaid by flags.
    pub fn effective_config(&self) -> Result<RunConfig> {
        let mut cfg = match &self.common.config {
            Some(path) => RunConfig::from_toml_file(path)?,
            None => RunConfig::default(),
        };
        let c = &self.common;
        set(&mut cfg.gamma, &c.gamma);
        set(&mut cfg.steps, &c.steps);
        set(&mut cfg.window, &c.window);
        set(&mut cfg.tol_newton, &c.tol_newton);
        set(&mut cfg.tol_cycle, &c.tol_cycle);
        set(&mut cfg.seed, &c.seed);
        if c.out.is_some() {
            cfg.out = c.out.clone();
        }
        match &self.command {
            Command::Solve { input } | Command::Spectrum { input, .. } => set_input(&mut cfg, input),
            Command::Run { input, w0, sample, loss } => {
                set_input(&mut cfg, input);
                if w0.is_some() {
                    cfg.w0 = w0.clone();
                }
                set(&mut cfg.record.sample_coords, sample);
                cfg.record.record_loss |= *loss;
            }
            Command::Analyze1d { c, w0, .. } => {
                set(&mut cfg.onedim.c, c);
                set(&mut cfg.onedim.cobweb_w0, w0);
            }
            Command::Lift { input, dim } => {
                set_input(&mut cfg, input);
                match dim.as_deref() {
                    None => {}
                    Some("auto") => cfg.lift.dim = None,
                    Some(d) => match d.parse::<usize>() {
                        Ok(d) => cfg.lift.dim = Some(d),
                        Err(_) => bail!("--dim must be a positive integer or `auto`, got {d:?}"),
                    },
                }
            }
            Command::Hunt { trials } => set(&mut cfg.hunt.trials, trials),
            Command::Scale { input, c, w0 } => {
                set_input(&mut cfg, input);
                set(&mut cfg.scale.c, c);
                if w0.is_some() {
                    cfg.w0 = w0.clone();
                }
            }
            Command::Verify { .. } => {}
        }
        Ok(cfg)
    }
}

fn set_input(cfg: &mut RunConfig, input: &Option<PathBuf>) {
    if input.is_some() {
        cfg.input = input.clone();
    }
}
