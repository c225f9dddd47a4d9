//! Exact minimizer and curvature at the minimizer, which together fix the
//! step size `eta = gamma / lambda`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, SeparabilityCertificate};
use crate::linalg::{self, dot, norm, EigOptions};
use crate::model::{Dataset, Objective};

/// Result of a converged Newton solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub w_star: Vec<f64>,
    #[serde(rename = "lambda")]
    pub lambda_max: f64,
    pub grad_norm: f64,
    #[serde(rename = "iters")]
    pub newton_iters: usize,
    pub separable: bool,
    /// Gradient norm before each Newton step and at the returned point.
    #[serde(skip)]
    pub residuals: Vec<f64>,
}

#[derive(Debug, Clone, Copy)]
pub struct NewtonOptions {
    /// Stop once `|grad| <= tol`.
    pub tol: f64,
    pub max_iters: usize,
    /// Declare the data separable once `|w|` exceeds this while the gradient stalls.
    pub divergence_bound: f64,
    /// Options for the curvature computation at the solution.
    pub eig: EigOptions,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self { tol: 1e-12, max_iters: 500, divergence_bound: 1e4, eig: EigOptions::default() }
    }
}

const ARMIJO_SLOPE: f64 = 1e-4;
const BACKTRACK: f64 = 0.5;

/// Damped Newton from `w = 0` with Armijo backtracking.
pub fn solve_newton(data: &Dataset, opts: &NewtonOptions) -> Result<SolveReport> {
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidParameter(format!("tolerance {} must be positive", opts.tol)));
    }
    if data.dim() <= 3 {
        if let Some(w) = separating_direction(data)? {
            return Err(Error::Separable(SeparabilityCertificate::Direction(w)));
        }
    }
    let d = data.dim();
    let mut w = vec![0.0; d];
    let mut residuals = Vec::new();
    let mut f = data.loss(&w)?;
    for iter in 0..=opts.max_iters {
        let g = data.grad(&w)?;
        let gn = norm(&g);
        residuals.push(gn);
        if !gn.is_finite() || !f.is_finite() {
            return Err(Error::NonFinite(format!("Newton iteration {iter}")));
        }
        if gn <= opts.tol {
            // at a genuine minimizer some example has a non-positive margin;
            // otherwise the point itself separates the data
            if data.rows().all(|x| dot(x, &w) > 0.0) {
                let wn = norm(&w);
                return Err(Error::Separable(SeparabilityCertificate::Direction(w.iter().map(|v| v / wn).collect())));
            }
            let lambda_max = lambda_max(data, &w, opts.eig)?;
            return Ok(SolveReport {
                w_star: w,
                lambda_max,
                grad_norm: gn,
                newton_iters: iter,
                separable: false,
                residuals,
            });
        }
        if iter == opts.max_iters {
            break;
        }
        let wn = norm(&w);
        if wn > opts.divergence_bound {
            return Err(Error::Separable(SeparabilityCertificate::Divergence { norm: wn, grad_norm: gn }));
        }

        let h = data.hessian(&w)?;
        let step = newton_direction(&h, &g);
        let slope = dot(&g, &step);
        // Inside the quadratic region the loss change is below rounding, so
        // the sufficient-decrease test is meaningless; take the full step.
        let decrement_tiny = -slope <= 1e-14 * f.abs().max(1e-300);
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..80 {
            let trial: Vec<f64> = w.iter().zip(&step).map(|(a, b)| a + t * b).collect();
            let ft = data.loss(&trial)?;
            if decrement_tiny || ft <= f + ARMIJO_SLOPE * t * slope {
                w = trial;
                f = ft;
                accepted = true;
                break;
            }
            t *= BACKTRACK;
        }
        if !accepted {
            return Err(Error::NoConvergence { what: "Newton line search", iterations: iter + 1 });
        }
    }
    Err(Error::NoConvergence { what: "Newton solver", iterations: opts.max_iters })
}

/// Solves `H p = -g`, regularizing if `H` is numerically singular.
fn newton_direction(h: &DMatrix<f64>, g: &[f64]) -> Vec<f64> {
    let rhs = -DVector::from_column_slice(g);
    if let Some(ch) = h.clone().cholesky() {
        return ch.solve(&rhs).iter().copied().collect();
    }
    let d = h.nrows();
    let mut ridge = 1e-12 * h.diagonal().amax().max(1e-300);
    loop {
        let reg = h + DMatrix::<f64>::identity(d, d) * ridge;
        if let Some(ch) = reg.cholesky() {
            return ch.solve(&rhs).iter().copied().collect();
        }
        ridge *= 10.0;
    }
}

/// Top Hessian eigenvalue at `w_star`, from Hessian-vector products only.
pub fn lambda_max<O: Objective + ?Sized>(obj: &O, w_star: &[f64], opts: EigOptions) -> Result<f64> {
    crate::error::check_dim(obj.dim(), w_star.len())?;
    linalg::top_eigenvalue(obj.dim(), |v| obj.hvp(w_star, v), opts)
}

/// `eta = gamma / lambda`.
pub fn step_size(gamma: f64, lambda: f64) -> Result<f64> {
    if !(gamma > 0.0) || !(lambda > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "step size needs gamma > 0 and lambda > 0 (got {gamma}, {lambda})"
        )));
    }
    Ok(gamma / lambda)
}

/// Exact check for a nonzero `w` with `x_i . w >= 0` for all rows, which rules
/// out a unique finite minimizer. Supported for `dim <= 3`.
///
/// The cone `{w : X w >= 0}` is nonzero iff it contains either a null vector
/// of `X` or an extreme ray cut out by `dim - 1` active rows, so it suffices
/// to test those finitely many candidate directions.
pub fn separating_direction(data: &Dataset) -> Result<Option<Vec<f64>>> {
    let d = data.dim();
    let rows: Vec<&[f64]> = data.rows().filter(|r| norm(r) > 0.0).collect();
    let scale = data.max_row_norm();
    let tol = 1e-12 * scale;
    let feasible = |w: &[f64]| -> bool {
        let wn = norm(w);
        wn > 0.0 && rows.iter().all(|x| dot(x, w) >= -tol * wn)
    };
    let mut candidates: Vec<Vec<f64>> = Vec::new();
    match d {
        1 => {
            candidates.push(vec![1.0]);
        }
        2 => {
            candidates.push(vec![1.0, 0.0]);
            for x in &rows {
                candidates.push(vec![-x[1], x[0]]);
            }
        }
        3 => {
            candidates.push(vec![1.0, 0.0, 0.0]);
            let cross = |a: &[f64], b: &[f64]| {
                vec![a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
            };
            let axes = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
            for (i, a) in rows.iter().enumerate() {
                for b in &rows[i + 1..] {
                    let c = cross(a, b);
                    if norm(&c) > 1e-12 * norm(a) * norm(b) {
                        candidates.push(c);
                    }
                }
                for e in &axes {
                    let c = cross(a, e);
                    if norm(&c) > 0.0 {
                        candidates.push(c);
                    }
                }
            }
        }
        _ => return Err(Error::InvalidParameter(format!("exact separability check supports dim <= 3, got {d}"))),
    }
    for c in candidates {
        let n = norm(&c);
        let unit: Vec<f64> = c.iter().map(|v| v / n).collect();
        if feasible(&unit) {
            return Ok(Some(unit));
        }
        let neg: Vec<f64> = unit.iter().map(|v| -v).collect();
        if feasible(&neg) {
            return Ok(Some(neg));
        }
    }
    Ok(None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{self, Dataset};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn sphere_1d(plus: usize, minus: usize) -> Dataset {
        let mut rows = vec![[1.0]; plus];
        rows.extend(std::iter::repeat_n([-1.0], minus));
        Dataset::from_rows(&rows).unwrap()
    }

    fn random_nonseparable(rng: &mut ChaCha8Rng, n: usize, d: usize) -> Dataset {
        loop {
            let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| rng.random_range(-2.0..2.0)).collect()).collect();
            let data = Dataset::from_rows(&rows).unwrap();
            if d > 3 || separating_direction(&data).unwrap().is_none() {
                return data;
            }
        }
    }

    #[test]
    fn one_dim_solution_is_log_c() {
        let r = solve_newton(&sphere_1d(3, 1), &NewtonOptions::default()).unwrap();
        assert!((r.w_star[0] - 3.0f64.ln()).abs() < 1e-10);
        assert!((r.lambda_max - 0.1875).abs() < 1e-12);
        assert!(r.grad_norm <= 1e-12);
        let r = solve_newton(&sphere_1d(7, 2), &NewtonOptions::default()).unwrap();
        assert!((r.w_star[0] - 3.5f64.ln()).abs() < 1e-10);
    }

    #[test]
    fn symmetric_dataset_solves_to_origin() {
        let data = Dataset::from_rows(&[[0.4, -1.2], [-0.4, 1.2], [2.0, 0.3], [-2.0, -0.3]]).unwrap();
        let r = solve_newton(&data, &NewtonOptions::default()).unwrap();
        assert!(norm(&r.w_star) < 1e-14);
        assert_eq!(r.newton_iters, 0);
    }

    #[test]
    fn newton_agrees_with_grid_refinement() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..5 {
            let data = random_nonseparable(&mut rng, 12, 2);
            let r = solve_newton(&data, &NewtonOptions::default()).unwrap();
            // grid oracle: repeatedly zoom a 41x41 grid around the best loss
            let mut center = [0.0, 0.0];
            let mut half = 20.0;
            for _ in 0..40 {
                let mut best = (f64::INFINITY, center);
                for i in -20..=20 {
                    for j in -20..=20 {
                        let p = [center[0] + half * i as f64 / 20.0, center[1] + half * j as f64 / 20.0];
                        let f = model::loss(&p, &data).unwrap();
                        if f < best.0 {
                            best = (f, p);
                        }
                    }
                }
                center = best.1;
                half *= 0.5;
            }
            // the loss is flat to ~1e-16 within ~1e-8 of the minimizer
            assert!(linalg::dist(&center, &r.w_star) < 1e-6, "{center:?} vs {:?}", r.w_star);
        }
    }

    #[test]
    fn residuals_decay_quadratically() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..10 {
            let data = random_nonseparable(&mut rng, 30, 3);
            let r = solve_newton(&data, &NewtonOptions::default()).unwrap();
            let res = &r.residuals;
            assert!(res.len() >= 3);
            let k = res.len();
            // last three steps: each residual far below the previous one
            for w in res[k - 3..].windows(2) {
                assert!(w[1] < w[0]);
                if w[0] < 1e-3 {
                    assert!(w[1] <= 1e3 * w[0] * w[0] + 1e-15, "{res:?}");
                }
            }
        }
    }

    #[test]
    fn lambda_bounded_by_smoothness() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for d in 1..=3 {
            for _ in 0..5 {
                let data = random_nonseparable(&mut rng, 15, d);
                let r = solve_newton(&data, &NewtonOptions::default()).unwrap();
                assert!(r.lambda_max <= data.smoothness() + 1e-10);
                let dense = linalg::sym_max_eigenvalue(&data.hessian(&r.w_star).unwrap());
                assert!((r.lambda_max - dense).abs() <= 1e-9);
            }
        }
    }

    #[test]
    fn lambda_scales_quadratically() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let data = random_nonseparable(&mut rng, 20, 2);
        let base = solve_newton(&data, &NewtonOptions::default()).unwrap();
        for c in [0.5, 3.0] {
            let scaled = solve_newton(&data.scaled(c), &NewtonOptions::default()).unwrap();
            assert!((scaled.lambda_max / base.lambda_max - c * c).abs() < 1e-10 * c * c);
        }
    }

    #[test]
    fn separable_inputs_are_rejected() {
        let data = Dataset::from_rows(&[[1.0, 0.5], [0.3, 2.0], [2.0, -0.1]]).unwrap();
        match solve_newton(&data, &NewtonOptions::default()) {
            Err(Error::Separable(SeparabilityCertificate::Direction(w))) => {
                assert!(data.rows().all(|x| dot(x, &w) >= -1e-12));
            }
            other => panic!("expected separable, got {other:?}"),
        }
        assert!(matches!(solve_newton(&sphere_1d(4, 0), &NewtonOptions::default()), Err(Error::Separable(_))));
        // rank deficient: loss is flat along (0, 1)
        let flat = Dataset::from_rows(&[[1.0, 0.0], [-1.0, 0.0]]).unwrap();
        assert!(separating_direction(&flat).unwrap().is_some());
    }

    #[test]
    fn separable_high_dim_detected_at_spurious_minimizer() {
        // all rows have positive first coordinate
        let rows: Vec<Vec<f64>> = (0..6).map(|i| vec![1.0, (i as f64) - 2.5, 0.1 * i as f64, -0.3, 0.2]).collect();
        let data = Dataset::from_rows(&rows).unwrap();
        let r = solve_newton(&data, &NewtonOptions::default());
        match r {
            Err(Error::Separable(SeparabilityCertificate::Direction(w))) => {
                assert!(data.rows().all(|x| dot(x, &w) > 0.0));
            }
            other => panic!("expected separable, got {other:?}"),
        }
    }

    #[test]
    fn exact_check_three_dim() {
        let nonsep = Dataset::from_rows(&[
            [1.0, 0.0, 0.0],
            [-1.0, 0.1, 0.0],
            [0.0, 1.0, 0.0],
            [0.1, -1.0, 0.0],
            [0.0, 0.0, 1.0],
            [0.0, 0.2, -1.0],
        ])
        .unwrap();
        assert!(separating_direction(&nonsep).unwrap().is_none());
        let sep = Dataset::from_rows(&[[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [1.0, 1.0, -0.5]]).unwrap();
        assert!(separating_direction(&sep).unwrap().is_some());
        // rank one in 3D always admits an orthogonal direction
        let line = Dataset::from_rows(&[[1.0, 1.0, 1.0], [-2.0, -2.0, -2.0]]).unwrap();
        assert!(separating_direction(&line).unwrap().is_some());
    }

    #[test]
    fn step_size_examples() {
        assert!((step_size(1.8, 0.1875).unwrap() - 9.6).abs() < 1e-14);
        assert_eq!(step_size(2.0, 1.0).unwrap(), 2.0);
        assert!(step_size(0.0, 1.0).is_err());
        assert!(step_size(1.0, -1.0).is_err());
        assert!(solve_newton(&sphere_1d(2, 1), &NewtonOptions { tol: 0.0, ..Default::default() }).is_err());
    }
}
