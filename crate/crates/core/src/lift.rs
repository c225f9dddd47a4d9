//! Sphere lifting of a two-dimensional base problem.
//!
//! Each base row `x_i` (after scaling into the unit ball) becomes the
//! `2 (d - 2)` unit vectors `(x_i, +-s_i e_j)`. At `w = (w_b, 0)` the lifted
//! gradient has the base gradient on the head and zeros on the tail, and the
//! lifted Hessian is `H_b(w_b)` on the head and `c(w_b) / (d - 2) I` on the
//! tail, where `c(w_b) = (1/n_b) sum_i sigma'(x_i . w_b) s_i^2`.

use serde::{Deserialize, Serialize};

use crate::dynamics::{self, eigen_magnitudes};
use crate::error::{check_dim, Error, Result};
use crate::linalg::{dot, norm};
use crate::model::{sigmoid_prime, Dataset, LiftedDataset, Objective, MATERIALIZE_LIMIT};
use crate::solver::{lambda_max, solve_newton, NewtonOptions};

/// Divides every row by the largest row norm. Returns the scaled data and the
/// divisor.
pub fn normalize_into_ball(data: &Dataset) -> Result<(Dataset, f64)> {
    let scale = data.max_row_norm();
    if !(scale > 0.0) {
        return Err(Error::InvalidDataset("cannot normalize an all-zero dataset".into()));
    }
    if scale == 1.0 {
        return Ok((data.clone(), 1.0));
    }
    Ok((data.scaled(1.0 / scale), scale))
}

/// Implicit lifted dataset in ambient dimension `d` over a 2D base.
pub fn lift(base: &Dataset, d: usize) -> Result<LiftedDataset> {
    if base.dim() != 2 {
        return Err(Error::InvalidDataset(format!("base dataset must be 2-dimensional, got {}", base.dim())));
    }
    if d < 3 {
        return Err(Error::InvalidParameter(format!("ambient dimension {d} must be at least 3")));
    }
    LiftedDataset::new(base.clone(), d)
}

/// `c_b = (1/n_b) sum_i sigma'(x_i . w_b*) s_i^2`.
pub fn c_b(base: &Dataset, w_b_star: &[f64]) -> Result<f64> {
    check_dim(base.dim(), w_b_star.len())?;
    let mut total = 0.0;
    for (i, x) in base.rows().enumerate() {
        let sq = dot(x, x);
        if sq.sqrt() > 1.0 + LiftedDataset::NORM_SLACK {
            return Err(Error::InvalidDataset(format!("base row {i} lies outside the unit ball")));
        }
        total += sigmoid_prime(dot(x, w_b_star)) * (1.0 - sq).max(0.0);
    }
    Ok(total / base.len() as f64)
}

/// Distance to the nearest integer below which `c_b / lambda_b` counts as
/// that integer.
pub const INTEGER_GUARD: f64 = 1e-12;

/// Smallest `d >= 3` with `lambda_b >= c_b / (d - 2)`.
pub fn min_dimension(lambda_b: f64, c_b: f64) -> Result<usize> {
    if !(lambda_b > 0.0) || !lambda_b.is_finite() {
        return Err(Error::InvalidParameter(format!("lambda_b = {lambda_b} must be positive")));
    }
    if !(c_b >= 0.0) || !c_b.is_finite() {
        return Err(Error::InvalidParameter(format!("c_b = {c_b} must be non-negative")));
    }
    let ratio = c_b / lambda_b;
    let nearest = ratio.round();
    let k = if (ratio - nearest).abs() <= INTEGER_GUARD { nearest } else { ratio.ceil() };
    Ok((2 + k as usize).max(3))
}

/// `(w_b*, 0, .., 0)` in dimension `d`.
pub fn lifted_solution(w_b_star: &[f64], d: usize) -> Result<Vec<f64>> {
    if d <= w_b_star.len() {
        return Err(Error::InvalidParameter(format!(
            "ambient dimension {d} must exceed the base dimension {}",
            w_b_star.len()
        )));
    }
    let mut w = w_b_star.to_vec();
    w.resize(d, 0.0);
    Ok(w)
}

/// Max-abs deviations of the materialized lifted Hessian from its predicted
/// block form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlockResiduals {
    pub top_left: f64,
    pub bottom_right: f64,
    pub off_diagonal: f64,
}

impl BlockResiduals {
    pub fn max(&self) -> f64 {
        self.top_left.max(self.bottom_right).max(self.off_diagonal)
    }
}

/// Compares the lifted Hessian at `w_star` with `H_b(w_b)` on the head,
/// `c(w_b) / (d - 2) I` on the tail and zero elsewhere.
pub fn verify_block_hessian(lifted: &LiftedDataset, w_star: &[f64]) -> Result<BlockResiduals> {
    let d = lifted.ambient_dim();
    check_dim(d, w_star.len())?;
    if d > MATERIALIZE_LIMIT {
        return Err(Error::DimensionTooLarge { dim: d, limit: MATERIALIZE_LIMIT });
    }
    let db = lifted.base_dim();
    let h = lifted.materialize()?.hessian(w_star)?;
    let w_b = &w_star[..db];
    let head = lifted.base().hessian(w_b)?;
    let tail = lifted.pad_curvature(w_b)? / lifted.tail_dim() as f64;
    let mut res = BlockResiduals { top_left: 0.0, bottom_right: 0.0, off_diagonal: 0.0 };
    for i in 0..d {
        for j in 0..d {
            let v = h[(i, j)];
            match (i < db, j < db) {
                (true, true) => res.top_left = res.top_left.max((v - head[(i, j)]).abs()),
                (false, false) => {
                    let want = if i == j { tail } else { 0.0 };
                    res.bottom_right = res.bottom_right.max((v - want).abs());
                }
                _ => res.off_diagonal = res.off_diagonal.max(v.abs()),
            }
        }
    }
    Ok(res)
}

/// How the ambient dimension is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DimChoice {
    /// The minimal dimension that preserves the base curvature.
    Auto,
    Fixed(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LiftReport {
    /// Largest base row norm; the base was divided by it.
    pub scale: f64,
    pub w_b_star: Vec<f64>,
    pub c_b: f64,
    pub lambda_b: f64,
    pub min_dim: usize,
    pub chosen_dim: usize,
    /// `max(lambda_b, c_b / (d - 2))`.
    pub predicted_lambda: f64,
    /// Top Hessian eigenvalue of the lifted problem at the lifted solution.
    pub lambda_lifted: f64,
    pub grad_norm_at_lifted_solution: f64,
    /// Present when the lifted Hessian is small enough to materialize.
    pub block_check: Option<BlockResiduals>,
}

impl LiftReport {
    pub fn curvature_preserved(&self) -> bool {
        self.chosen_dim >= self.min_dim
    }
}

/// Normalizes `base`, solves it, and lifts it into the chosen dimension.
pub fn build_lift(base: &Dataset, dim: DimChoice, opts: &NewtonOptions) -> Result<(LiftedDataset, LiftReport)> {
    let (normalized, scale) = normalize_into_ball(base)?;
    if normalized.dim() != 2 {
        return Err(Error::InvalidDataset(format!("base dataset must be 2-dimensional, got {}", base.dim())));
    }
    let sol = solve_newton(&normalized, opts)?;
    let cb = c_b(&normalized, &sol.w_star)?;
    let min_dim = min_dimension(sol.lambda_max, cb)?;
    let chosen = match dim {
        DimChoice::Auto => min_dim,
        DimChoice::Fixed(d) => d,
    };
    let lifted = lift(&normalized, chosen)?;
    let w = lifted_solution(&sol.w_star, chosen)?;
    let grad_norm = norm(&lifted.grad(&w)?);
    let lambda_lifted = lambda_max(&lifted, &w, opts.eig)?;
    let block_check = if chosen <= MATERIALIZE_LIMIT { Some(verify_block_hessian(&lifted, &w)?) } else { None };
    let report = LiftReport {
        scale,
        w_b_star: sol.w_star,
        c_b: cb,
        lambda_b: sol.lambda_max,
        min_dim,
        chosen_dim: chosen,
        predicted_lambda: sol.lambda_max.max(cb / (chosen - 2) as f64),
        lambda_lifted,
        grad_norm_at_lifted_solution: grad_norm,
        block_check,
    };
    Ok((lifted, report))
}

/// Floquet multipliers of a base cycle embedded with zero tail.
///
/// The Jacobian product is block diagonal: the base product on the head and
/// the scalar `prod_j (1 - eta c(w_j) / (d - 2))` repeated `d - 2` times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LiftedFloquet {
    /// Base multiplier magnitudes, descending.
    pub base: Vec<f64>,
    /// Magnitude of the tail multiplier.
    pub tail: f64,
    pub tail_multiplicity: usize,
}

impl LiftedFloquet {
    pub fn max(&self) -> f64 {
        self.base.iter().copied().fold(self.tail, f64::max)
    }

    /// All `d` magnitudes, descending.
    pub fn magnitudes(&self) -> Vec<f64> {
        let mut out = self.base.clone();
        out.extend(std::iter::repeat_n(self.tail, self.tail_multiplicity));
        out.sort_by(|a, b| b.total_cmp(a));
        out
    }
}

pub fn lifted_floquet(lifted: &LiftedDataset, base_cycle: &[Vec<f64>], eta: f64) -> Result<LiftedFloquet> {
    if base_cycle.is_empty() {
        return Err(Error::InvalidParameter("cycle has no points".into()));
    }
    let m = lifted.tail_dim() as f64;
    let mut tail = 1.0;
    for p in base_cycle {
        tail *= 1.0 - eta * lifted.pad_curvature(p)? / m;
    }
    let base = dynamics::floquet_multipliers(base_cycle, eta, lifted.base())?;
    Ok(LiftedFloquet { base, tail: tail.abs(), tail_multiplicity: lifted.tail_dim() })
}

/// Dense counterpart of [`lifted_floquet`] for small ambient dimensions.
pub fn lifted_floquet_dense(lifted: &LiftedDataset, cycle: &[Vec<f64>], eta: f64) -> Result<Vec<f64>> {
    let d = lifted.ambient_dim();
    if d > MATERIALIZE_LIMIT {
        return Err(Error::DimensionTooLarge { dim: d, limit: MATERIALIZE_LIMIT });
    }
    let mut m = nalgebra::DMatrix::<f64>::identity(d, d);
    for p in cycle {
        m = (nalgebra::DMatrix::<f64>::identity(d, d) - lifted.hessian(p)? * eta) * m;
    }
    Ok(eigen_magnitudes(m))
}
