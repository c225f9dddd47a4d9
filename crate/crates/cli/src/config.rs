//! Effective configuration: defaults, overlaid by a TOML file, overlaid by flags.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use gdcycles::dynamics::RecordSpec;
use gdcycles::solver::NewtonOptions;
use gdcycles::transforms::GeneratorSpec;
use gdcycles::HuntConfig;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Dataset CSV or lifted spec JSON.
    pub input: Option<PathBuf>,
    pub gamma: f64,
    pub steps: usize,
    pub window: usize,
    pub tol_newton: f64,
    pub tol_cycle: f64,
    pub seed: u64,
    /// Output directory; reports always go to stdout as well.
    pub out: Option<PathBuf>,
    /// Initial iterate; zero when absent.
    pub w0: Option<Vec<f64>>,
    pub record: RecordConfig,
    pub onedim: OneDimConfig,
    pub lift: LiftConfig,
    pub scale: ScaleConfig,
    pub hunt: HuntSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            input: None,
            gamma: 1.9,
            steps: 20_000,
            window: 1024,
            tol_newton: 1e-12,
            tol_cycle: 1e-7,
            seed: 0,
            out: None,
            w0: None,
            record: RecordConfig::default(),
            onedim: OneDimConfig::default(),
            lift: LiftConfig::default(),
            scale: ScaleConfig::default(),
            hunt: HuntSection::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RecordConfig {
    /// Coordinates written to the trajectory CSV.
    pub sample_coords: Vec<usize>,
    pub tail_window: usize,
    pub divergence_bound: f64,
    pub record_loss: bool,
    pub max_peaks: usize,
}

impl Default for RecordConfig {
    fn default() -> Self {
        let spec = RecordSpec::default();
        Self {
            sample_coords: vec![0, 1],
            tail_window: spec.tail_window,
            divergence_bound: spec.divergence_bound,
            record_loss: false,
            max_peaks: 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OneDimConfig {
    pub c: f64,
    pub cobweb_w0: f64,
    pub cobweb_steps: usize,
    pub grid_points: usize,
    pub grid_span: f64,
    /// Samples of the map `T` written for plotting.
    pub map_points: usize,
}

impl Default for OneDimConfig {
    fn default() -> Self {
        Self { c: 3.0, cobweb_w0: 4.0, cobweb_steps: 40, grid_points: 10_000, grid_span: 20.0, map_points: 801 }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LiftConfig {
    /// Ambient dimension; the minimal curvature-preserving one when absent.
    pub dim: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScaleConfig {
    pub c: f64,
}

impl Default for ScaleConfig {
    fn default() -> Self {
        Self { c: 2.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HuntSection {
    pub trials: usize,
    pub budget: usize,
    pub inits: usize,
    pub max_period: usize,
    pub max_solution_norm: f64,
    pub generator: GeneratorSpec,
}

impl Default for HuntSection {
    fn default() -> Self {
        let h = HuntConfig::default();
        Self {
            trials: h.trials,
            budget: h.budget,
            inits: h.inits,
            max_period: h.max_period,
            max_solution_norm: h.max_solution_norm,
            generator: h.generator,
        }
    }
}

impl RunConfig {
    pub fn from_toml_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    pub fn newton(&self) -> NewtonOptions {
        NewtonOptions { tol: self.tol_newton, ..NewtonOptions::default() }
    }

    pub fn record_spec(&self) -> RecordSpec {
        RecordSpec {
            sample_coords: self.record.sample_coords.clone(),
            tail_window: self.record.tail_window,
            divergence_bound: self.record.divergence_bound,
            record_loss: self.record.record_loss,
            stop_near: None,
        }
    }

    pub fn hunt_config(&self) -> HuntConfig {
        HuntConfig {
            gamma: self.gamma,
            trials: self.hunt.trials,
            seed: self.seed,
            budget: self.hunt.budget,
            inits: self.hunt.inits,
            cycle_tol: self.tol_cycle,
            max_period: self.hunt.max_period,
            max_solution_norm: self.hunt.max_solution_norm,
            generator: self.hunt.generator.clone(),
        }
    }
}
