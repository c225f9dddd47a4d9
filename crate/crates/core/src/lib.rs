//! Gradient descent on non-separable logistic regression with step sizes
//! `eta = gamma / lambda` near the stability threshold.
//!
//! The one-dimensional theory lives in [`onedim`], the sphere-lifted
//! construction in [`lift`], trajectory analysis in [`dynamics`], and the
//! scaling and cycle-search tools in [`transforms`].

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dynamics;
pub mod error;
pub mod io;
pub mod lift;
pub mod linalg;
pub mod model;
pub mod onedim;
pub mod solver;
pub mod transforms;
pub mod verify;

pub use dynamics::{
    analyze, detect_cycle_recurrence, dominant_period, floquet_multipliers, power_spectrum, run_gd, AnalysisOptions,
    CycleReport, RecordSpec, Trajectory,
};
pub use error::{Error, Result, SeparabilityCertificate};
pub use lift::{build_lift, DimChoice, LiftReport};
pub use model::{Dataset, LiftedDataset, Objective, Problem};
pub use onedim::{LemmaGrid, LemmaReport, OneDimProblem};
pub use solver::{lambda_max, solve_newton, step_size, NewtonOptions, SolveReport};
pub use transforms::{hunt_cycles, scale_dataset, verify_scaling, HuntConfig, HuntResult};
pub use verify::{run_suite, Check, Effort};
