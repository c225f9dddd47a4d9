//! Numerical acceptance suites. Each check compares library output against an
//! independent oracle (closed forms, finite differences, materialized data,
//! dense eigensolves, or a second trajectory) and reports one line.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dynamics::{detect_cycle_recurrence, floquet_multipliers, run_gd, spectral_period, RecordSpec};
use crate::error::Result;
use crate::lift::{build_lift, lifted_floquet, lifted_solution, DimChoice};
use crate::linalg::{dist, norm, sym_max_eigenvalue};
use crate::model::{Dataset, LiftedDataset, Objective, MATERIALIZE_LIMIT};
use crate::onedim::{crossing_point, rate_estimate, steps_to_converge, verify_lemmas, LemmaGrid, OneDimProblem};
use crate::solver::{lambda_max, solve_newton, NewtonOptions};
use crate::transforms::{hunt_single, verify_scaling, GeneratorSpec, HuntConfig};

/// One acceptance line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub id: u8,
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl std::fmt::Display for Check {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let verdict = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "[{verdict}] criterion {}: {}: {}", self.id, self.name, self.detail)
    }
}

/// Grid sizes: `Full` is the acceptance configuration, `Quick` a smoke run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Effort {
    Quick,
    Full,
}

pub const CS: [f64; 5] = [1.5, 2.0, 3.0, 10.0, 100.0];
pub const GAMMAS: [f64; 6] = [1.1, 1.3, 1.5, 1.7, 1.9, 1.99];
pub const TREND_GAMMAS: [f64; 4] = [1.5, 1.8, 1.95, 1.99];

pub const CONVERGENCE_TOL: f64 = 1e-8;
pub const CONVERGENCE_BUDGET: usize = 1_000_000;
pub const RATE_SLACK: f64 = 1e-12;
pub const SCALING_TOL: f64 = 1e-10;
pub const NORM_TOL: f64 = 1e-12;
pub const LIFT_GRAD_TOL: f64 = 1e-10;
pub const BLOCK_TOL: f64 = 1e-10;
pub const LAMBDA_TOL: f64 = 1e-9;
pub const CYCLE_TOL: f64 = 1e-7;
pub const TAIL_DECAY_TOL: f64 = 1e-8;
pub const FD_GRAD_TOL: f64 = 1e-6;
pub const FD_HESS_TOL: f64 = 1e-5;
pub const LIFTED_GRAD_TOL: f64 = 1e-12;

/// Hunted base datasets with verified stable cycles, as
/// `(seed, trial, period)` under [`HuntConfig::default`] at `gamma = 1.9`.
pub const HUNTED_BASES: [(u64, usize, usize); 5] =
    [(3, 1079, 2), (3, 1491, 4), (3, 1322, 8), (3, 341, 24), (4, 2390, 28)];

/// Base for the large-dimension run; its minimal lifting dimension is below 5000.
pub const DEMO_BASE: (u64, usize, usize) = (4, 532, 65);
pub const DEMO_DIM: usize = 5000;
pub const DEMO_STEPS: usize = 20_000;
pub const HUNT_GAMMA: f64 = 1.9;

fn check(id: u8, name: &str, passed: bool, detail: String) -> Check {
    Check { id, name: name.to_string(), passed, detail }
}

fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    dist(a, b) / norm(a).max(norm(b)).max(1e-8)
}

/// Random non-separable dataset with `n` rows in dimension `d`.
pub fn random_nonseparable(rng: &mut ChaCha8Rng, n: usize, d: usize) -> Dataset {
    loop {
        let shift: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| {
                let y = if rng.random_bool(0.7) { 1.0 } else { -1.0 };
                shift.iter().map(|m| y * (m + Distribution::<f64>::sample(&StandardNormal, rng))).collect()
            })
            .collect();
        let data = Dataset::from_rows(&rows).expect("finite rows");
        if solve_newton(&data, &NewtonOptions::default()).is_ok() {
            return data;
        }
    }
}

/// Criterion 1: GD on the 1D sphere problem converges to `ln c` from every start.
pub fn onedim_convergence(effort: Effort) -> Check {
    let (cs, points): (&[f64], usize) = match effort {
        Effort::Full => (&CS, 101),
        Effort::Quick => (&CS[1..4], 21),
    };
    let mut runs = 0;
    let mut slowest = 0;
    let mut failures = Vec::new();
    for &c in cs {
        let p = OneDimProblem::new(c).expect("c >= 1");
        let oracle = c.ln();
        for &gamma in &GAMMAS {
            for i in 0..points {
                let w0 = -50.0 + 100.0 * i as f64 / (points - 1) as f64;
                runs += 1;
                match steps_to_converge(&p, gamma, w0, CONVERGENCE_TOL, CONVERGENCE_BUDGET) {
                    Some(t) => {
                        slowest = slowest.max(t);
                        // confirm against the closed-form minimizer, not the stored one
                        let w = crate::onedim::orbit(w0, t, &p, gamma)[t];
                        if (w - oracle).abs() > CONVERGENCE_TOL {
                            failures.push(format!("c={c} gamma={gamma} w0={w0}"));
                        }
                    }
                    None => failures.push(format!("c={c} gamma={gamma} w0={w0}")),
                }
            }
        }
    }
    check(
        1,
        "1D global convergence",
        failures.is_empty(),
        format!(
            "{runs} runs reach |w - ln c| <= {CONVERGENCE_TOL:e}, slowest {slowest} steps of {CONVERGENCE_BUDGET}; {} failures{}",
            failures.len(),
            failures.first().map(|f| format!(" (first: {f})")).unwrap_or_default()
        ),
    )
}

/// Criterion 2: the three lemma inequalities over dense grids right of `w*`.
pub fn lemma_suite(effort: Effort) -> Check {
    let grid = match effort {
        Effort::Full => LemmaGrid::default(),
        Effort::Quick => LemmaGrid { points: 1000, ..LemmaGrid::default() },
    };
    let mut checked = 0;
    let mut min_margin = f64::INFINITY;
    let mut min_contraction = f64::INFINITY;
    let mut violations = Vec::new();
    for &c in &CS {
        let p = OneDimProblem::new(c).expect("c >= 1");
        for &gamma in &GAMMAS {
            match verify_lemmas(&p, gamma, grid) {
                Ok(r) => {
                    checked += r.checked;
                    if r.crossings > 0 {
                        min_margin = min_margin.min(r.worst_bound_margin);
                    }
                    min_contraction = min_contraction.min(r.worst_contraction_margin);
                }
                Err(e) => violations.push(format!("c={c} gamma={gamma}: {e}")),
            }
        }
    }
    check(
        2,
        "lemma suite",
        violations.is_empty(),
        format!(
            "{checked} grid points, {} violations (slack 1e-12); smallest two-step bound margin {min_margin:.3e}, smallest contraction margin {min_contraction:.3e}",
            violations.len()
        ),
    )
}

fn worst_two_step_ratio(p: &OneDimProblem, gamma: f64, points: usize) -> Result<f64> {
    let ws = p.w_star;
    let w_tilde = crossing_point(p, gamma)?;
    let mut worst = f64::NEG_INFINITY;
    for i in 1..points {
        let w = ws + (w_tilde - ws) * i as f64 / points as f64;
        let t1 = p.map(w, gamma);
        if t1 < ws {
            worst = worst.max((p.map(t1, gamma) - ws) / (w - ws));
        }
    }
    Ok(worst)
}

/// Criterion 3: two-step ratios inside `(w*, w~)` stay below `1 - (2 - gamma)/gamma`,
/// and approach it as `gamma -> 2`.
pub fn rate_bound(effort: Effort) -> Check {
    let points = match effort {
        Effort::Full => 10_000,
        Effort::Quick => 1000,
    };
    let mut problems = Vec::new();
    let mut observed = 0usize;
    for &c in &CS {
        let p = OneDimProblem::new(c).expect("c >= 1");
        for &gamma in GAMMAS.iter().chain(&TREND_GAMMAS) {
            let bound = rate_estimate(gamma).expect("gamma in (1, 2)");
            match worst_two_step_ratio(&p, gamma, points) {
                Ok(r) if r <= bound + RATE_SLACK => {}
                Ok(r) => problems.push(format!("c={c} gamma={gamma}: grid ratio {r} > {bound}")),
                Err(e) => problems.push(format!("c={c} gamma={gamma}: {e}")),
            }
            // ratios observed along actual orbits
            let w_tilde = crossing_point(&p, gamma).unwrap_or(f64::INFINITY);
            for w0 in [-50.0, -5.0, 0.3, 7.0, 50.0] {
                let orbit = crate::onedim::orbit(w0, 20_000, &p, gamma);
                for win in orbit.windows(3) {
                    let (a, b, z) = (win[0] - p.w_star, win[1] - p.w_star, win[2] - p.w_star);
                    if a > 1e-6 && win[0] < w_tilde && b < 0.0 && z > 0.0 {
                        observed += 1;
                        if z / a > bound + RATE_SLACK {
                            problems.push(format!("c={c} gamma={gamma} w0={w0}: orbit ratio {}", z / a));
                        }
                    }
                }
            }
        }
    }
    // slowdown: worst ratio rises toward the bound as gamma -> 2
    let p3 = OneDimProblem::new(3.0).expect("c >= 1");
    let mut trend = Vec::new();
    for &gamma in &TREND_GAMMAS {
        let r = worst_two_step_ratio(&p3, gamma, points).unwrap_or(f64::NAN);
        trend.push((gamma, r, rate_estimate(gamma).expect("gamma in (1, 2)") - r));
    }
    let rising = trend.windows(2).all(|w| w[1].1 > w[0].1 && w[1].2 < w[0].2);
    if !rising {
        problems.push("two-step ratio does not approach the bound monotonically".into());
    }
    let trend_text: Vec<String> =
        trend.iter().map(|(g, r, gap)| format!("gamma {g}: ratio {r:.4}, gap {gap:.4}")).collect();
    check(
        3,
        "two-step rate bound",
        problems.is_empty(),
        format!(
            "{observed} orbit crossings plus grids checked, {} problems; c=3 trend [{}]",
            problems.len(),
            trend_text.join("; ")
        ),
    )
}

/// Criterion 4: trajectories and curvature transport under dataset scaling.
pub fn scaling_invariance(effort: Effort) -> Check {
    let datasets = match effort {
        Effort::Full => 20,
        Effort::Quick => 6,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(0x5ca1e);
    let mut worst_dev = 0.0f64;
    let mut worst_lambda = 0.0f64;
    let mut problems = Vec::new();
    let dims = [1, 2, 5];
    for k in 0..datasets {
        let d = dims[k % 3];
        let data = random_nonseparable(&mut rng, 6 * d + 6, d);
        let w0: Vec<f64> = (0..d).map(|_| rng.random_range(-3.0..3.0)).collect();
        let gamma = rng.random_range(0.5..1.95);
        for c in [0.5, 2.0, 10.0] {
            match verify_scaling(&data, c, &w0, gamma, 500, &NewtonOptions::default()) {
                Ok(r) => {
                    worst_dev = worst_dev.max(r.max_deviation);
                    worst_lambda = worst_lambda.max(r.lambda_ratio_error);
                }
                Err(e) => problems.push(format!("dataset {k}, c={c}: {e}")),
            }
        }
    }
    // periods survive scaling
    let mut periods = Vec::new();
    if let Ok(Some(hit)) = hunt_single(&hunt_config(HUNTED_BASES[1].0), HUNTED_BASES[1].1) {
        for c in [0.5, 2.0] {
            let scaled = hit.dataset.scaled(c);
            let eta = hit.eta / (c * c);
            let start: Vec<f64> = hit.cycle_points[0].iter().map(|w| w / c).collect();
            let period = run_gd(&scaled, &start, eta, 4096, &RecordSpec::default())
                .ok()
                .and_then(|t| detect_cycle_recurrence(&t, CYCLE_TOL))
                .map(|r| r.period);
            periods.push(period);
            if period != Some(hit.cycle.period) {
                problems.push(format!("period changed under scaling by {c}: {period:?}"));
            }
        }
    } else {
        problems.push("hunted base for the period check not reproduced".into());
    }
    let passed = problems.is_empty() && worst_dev <= SCALING_TOL && worst_lambda <= SCALING_TOL;
    check(
        4,
        "scaling invariance",
        passed,
        format!(
            "{datasets} datasets x 3 scales, 500 steps: max trajectory deviation {worst_dev:.3e}, max |lambda^/(c^2 lambda) - 1| {worst_lambda:.3e} (tol {SCALING_TOL:e}); scaled cycle periods {periods:?}{}",
            problems.first().map(|p| format!("; {p}")).unwrap_or_default()
        ),
    )
}

fn random_base(rng: &mut ChaCha8Rng, index: usize) -> Dataset {
    if index.is_multiple_of(2) {
        // small interior clouds give moderate minimal dimensions
        loop {
            let n = rng.random_range(4..9);
            let rows: Vec<[f64; 2]> = (0..n)
                .map(|_| {
                    let r = rng.random_range(0.05..1.0);
                    let a = rng.random_range(0.0..std::f64::consts::TAU);
                    [r * a.cos(), r * a.sin()]
                })
                .collect();
            let data = Dataset::from_rows(&rows).expect("finite rows");
            if solve_newton(&data, &NewtonOptions::default()).is_ok() {
                return data;
            }
        }
    }
    let generator = GeneratorSpec::default();
    loop {
        let data = generator.sample(rng).expect("valid generator");
        if solve_newton(&data, &NewtonOptions::default()).is_ok() {
            return data;
        }
    }
}

/// Criterion 5: the lifted problem keeps unit norms, the solution, the block
/// Hessian and the predicted top curvature.
pub fn lift_correctness(effort: Effort) -> Check {
    let bases = match effort {
        Effort::Full => 20,
        Effort::Quick => 6,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(0x11f7);
    let opts = NewtonOptions::default();
    let (mut worst_norm, mut worst_grad, mut worst_block, mut worst_lambda) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    let mut below_checked = 0;
    let mut problems = Vec::new();
    for k in 0..bases {
        let base = random_base(&mut rng, k);
        let (_, auto) = match build_lift(&base, DimChoice::Auto, &opts) {
            Ok(x) => x,
            Err(e) => {
                problems.push(format!("base {k}: {e}"));
                continue;
            }
        };
        let mut dims = vec![auto.min_dim, auto.min_dim + 5, 30];
        if auto.min_dim > 3 {
            dims.push(auto.min_dim - 1);
        }
        for d in dims {
            let (lifted, rep) = match build_lift(&base, DimChoice::Fixed(d), &opts) {
                Ok(x) => x,
                Err(e) => {
                    problems.push(format!("base {k}, d={d}: {e}"));
                    continue;
                }
            };
            worst_norm = worst_norm.max(lifted_norm_error(&lifted));
            worst_grad = worst_grad.max(rep.grad_norm_at_lifted_solution);
            if let Some(b) = rep.block_check {
                worst_block = worst_block.max(b.max());
            }
            let expected = if d >= rep.min_dim {
                rep.lambda_b
            } else {
                if d == rep.min_dim - 1 {
                    below_checked += 1;
                }
                rep.c_b / (d - 2) as f64
            };
            // an oracle independent of the Lanczos routine where affordable
            let measured = if d <= MATERIALIZE_LIMIT {
                let w = lifted_solution(&rep.w_b_star, d).expect("d > 2");
                sym_max_eigenvalue(&lifted.materialize().expect("small d").hessian(&w).expect("dims match"))
            } else {
                rep.lambda_lifted
            };
            let err = (measured - expected).abs().max((rep.lambda_lifted - expected).abs());
            if d >= rep.min_dim || d == rep.min_dim - 1 {
                worst_lambda = worst_lambda.max(err);
            } else if err > LAMBDA_TOL {
                problems.push(format!("base {k}, d={d}: lambda {measured} vs predicted {expected}"));
            }
        }
    }
    let passed = problems.is_empty()
        && worst_norm <= NORM_TOL
        && worst_grad <= LIFT_GRAD_TOL
        && worst_block <= BLOCK_TOL
        && worst_lambda <= LAMBDA_TOL;
    check(
        5,
        "lift correctness",
        passed,
        format!(
            "{bases} bases: norm error {worst_norm:.2e} (tol {NORM_TOL:e}), lifted grad {worst_grad:.2e} (tol {LIFT_GRAD_TOL:e}), block residual {worst_block:.2e} (tol {BLOCK_TOL:e}), lambda error {worst_lambda:.2e} (tol {LAMBDA_TOL:e}), {below_checked} below-threshold dims{}",
            problems.first().map(|p| format!("; {p}")).unwrap_or_default()
        ),
    )
}

/// Largest deviation of a lifted example norm from one; materialized when small.
fn lifted_norm_error(lifted: &LiftedDataset) -> f64 {
    if lifted.ambient_dim() <= MATERIALIZE_LIMIT {
        let rows = lifted.materialize().expect("small d");
        rows.rows().map(|r| (norm(r) - 1.0).abs()).fold(0.0, f64::max)
    } else {
        lifted
            .base()
            .rows()
            .zip(lifted.pad())
            .map(|(x, s)| ((crate::linalg::dot(x, x) + s * s).sqrt() - 1.0).abs())
            .fold(0.0, f64::max)
    }
}

fn hunt_config(seed: u64) -> HuntConfig {
    HuntConfig { gamma: HUNT_GAMMA, seed, ..HuntConfig::default() }
}

/// Outcome of running the lifted problem from an embedded base cycle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LiftedCycleRun {
    pub base_period: usize,
    pub dim: usize,
    pub min_dim: usize,
    pub steps: usize,
    pub recurrence_period: Option<usize>,
    pub recurrence_residual: Option<f64>,
    pub spectral_period: Option<usize>,
    pub max_tail: f64,
    pub max_floquet: f64,
}

impl LiftedCycleRun {
    pub fn passed(&self) -> bool {
        self.recurrence_period == Some(self.base_period)
            && self.spectral_period == Some(self.base_period)
            && self.recurrence_residual.is_some_and(|r| r <= CYCLE_TOL * 10.0)
            && self.max_tail < TAIL_DECAY_TOL
            && self.max_floquet < 1.0
    }
}

/// Lifts a hunted base into `dim` (or `max(min_dim, 50)`), starts at the
/// embedded cycle plus a tail perturbation of norm `1e-4`, and characterizes
/// the run.
pub fn run_lifted_cycle(seed: u64, trial: usize, dim: Option<usize>, steps: usize) -> Result<LiftedCycleRun> {
    let hit = hunt_single(&hunt_config(seed), trial)?
        .ok_or_else(|| crate::Error::InvalidParameter(format!("hunt seed {seed} trial {trial} has no cycle")))?;
    let opts = NewtonOptions::default();
    let (_, auto) = build_lift(&hit.dataset, DimChoice::Auto, &opts)?;
    let d = dim.unwrap_or(auto.min_dim.max(50));
    let (lifted, rep) = build_lift(&hit.dataset, DimChoice::Fixed(d), &opts)?;
    let eta = HUNT_GAMMA / rep.lambda_lifted;

    // the normalized base carries the cycle scaled by 1/scale
    let base_cycle: Vec<Vec<f64>> =
        hit.cycle_points.iter().map(|p| p.iter().map(|w| w * rep.scale).collect()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ trial as u64);
    let mut w0 = lifted_solution(&base_cycle[0], d)?;
    let noise: Vec<f64> = (2..d).map(|_| StandardNormal.sample(&mut rng)).collect();
    let nn = norm(&noise);
    for (w, z) in w0[2..].iter_mut().zip(&noise) {
        *w = 1e-4 * z / nn;
    }
    let traj = run_gd(&lifted, &w0, eta, steps, &RecordSpec::default())?;
    let recurrence = detect_cycle_recurrence(&traj, CYCLE_TOL);
    let (_, spectral) = spectral_period(&traj.norm_series, 1024)?;
    let max_tail = traj.last()[2..].iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let period = recurrence.as_ref().map_or(hit.cycle.period, |r| r.period);
    let pts: Vec<Vec<f64>> = traj.last_points(period).iter().map(|p| p[..2].to_vec()).collect();
    let floquet = lifted_floquet(&lifted, &pts, eta)?;
    Ok(LiftedCycleRun {
        base_period: hit.cycle.period,
        dim: d,
        min_dim: auto.min_dim,
        steps,
        recurrence_period: recurrence.as_ref().map(|r| r.period),
        recurrence_residual: recurrence.map(|r| r.recurrence_residual),
        spectral_period: spectral,
        max_tail,
        max_floquet: floquet.max(),
    })
}

/// Criterion 6: base cycles survive lifting with the same period, spectral
/// signature, decaying tail and stability.
pub fn cycle_preservation(effort: Effort) -> Check {
    let (bases, steps): (&[(u64, usize, usize)], usize) = match effort {
        Effort::Full => (&HUNTED_BASES, 20_000),
        Effort::Quick => (&HUNTED_BASES[..2], 6000),
    };
    let mut lines = Vec::new();
    let mut passed = true;
    let mut runs: Vec<(Option<usize>, usize, u64, usize)> = bases.iter().map(|&(s, t, k)| (None, k, s, t)).collect();
    if effort == Effort::Full {
        runs.push((Some(DEMO_DIM), DEMO_BASE.2, DEMO_BASE.0, DEMO_BASE.1));
    }
    for (dim, k, seed, trial) in runs {
        let n_steps = if dim.is_some() { DEMO_STEPS } else { steps };
        match run_lifted_cycle(seed, trial, dim, n_steps) {
            Ok(run) => {
                let ok = run.passed() && run.base_period == k;
                passed &= ok;
                lines.push(format!(
                    "k={} d={} (min {}): recurrence {:?}, spectral {:?}, tail {:.1e}, floquet {:.3}{}",
                    run.base_period,
                    run.dim,
                    run.min_dim,
                    run.recurrence_period,
                    run.spectral_period,
                    run.max_tail,
                    run.max_floquet,
                    if ok { "" } else { " FAILED" }
                ));
            }
            Err(e) => {
                passed = false;
                lines.push(format!("seed {seed} trial {trial}: {e}"));
            }
        }
    }
    check(6, "cycle preservation and spectrum", passed, lines.join("; "))
}

/// Criterion 7: derivatives against finite differences and materialized data.
pub fn derivative_oracles(effort: Effort) -> Check {
    let cases = match effort {
        Effort::Full => 100,
        Effort::Quick => 20,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(0xd1ff);
    let (mut g_err, mut h_err, mut l_err) = (0.0f64, 0.0f64, 0.0f64);
    for _ in 0..cases {
        let d = rng.random_range(1..7);
        let n = rng.random_range(1..15);
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..d).map(|_| 2.0 * Distribution::<f64>::sample(&StandardNormal, &mut rng)).collect())
            .collect();
        let data = Dataset::from_rows(&rows).expect("finite rows");
        let w: Vec<f64> = (0..d).map(|_| rng.random_range(-2.0..2.0)).collect();
        let g = data.grad(&w).expect("dims match");
        let h = 1e-6;
        let fd: Vec<f64> = (0..d)
            .map(|j| {
                let (mut wp, mut wm) = (w.clone(), w.clone());
                wp[j] += h;
                wm[j] -= h;
                (data.loss(&wp).expect("dims match") - data.loss(&wm).expect("dims match")) / (2.0 * h)
            })
            .collect();
        g_err = g_err.max(rel_err(&g, &fd));

        let hess = data.hessian(&w).expect("dims match");
        let hh = 1e-5;
        let mut fd_h = Vec::with_capacity(d * d);
        let mut an_h = Vec::with_capacity(d * d);
        for j in 0..d {
            let (mut wp, mut wm) = (w.clone(), w.clone());
            wp[j] += hh;
            wm[j] -= hh;
            let gp = data.grad(&wp).expect("dims match");
            let gm = data.grad(&wm).expect("dims match");
            for i in 0..d {
                fd_h.push((gp[i] - gm[i]) / (2.0 * hh));
                an_h.push(hess[(i, j)]);
            }
        }
        h_err = h_err.max(rel_err(&an_h, &fd_h));

        // lifted gradient against the gradient of the materialized rows
        let nb = rng.random_range(1..6);
        let base_rows: Vec<[f64; 2]> = (0..nb)
            .map(|_| {
                let r = rng.random_range(0.0..1.0);
                let a = rng.random_range(0.0..std::f64::consts::TAU);
                [r * a.cos(), r * a.sin()]
            })
            .collect();
        let ambient = rng.random_range(3..21);
        let lifted = LiftedDataset::new(Dataset::from_rows(&base_rows).expect("finite"), ambient).expect("in ball");
        let wl: Vec<f64> = (0..ambient).map(|_| rng.random_range(-3.0..3.0)).collect();
        let fast = crate::model::lifted_grad(&wl, &lifted).expect("dims match");
        let slow = lifted.materialize().expect("small d").grad(&wl).expect("dims match");
        l_err = l_err.max(fast.iter().zip(&slow).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max));
    }
    check(
        7,
        "derivative oracles",
        g_err <= FD_GRAD_TOL && h_err <= FD_HESS_TOL && l_err <= LIFTED_GRAD_TOL,
        format!(
            "{cases} cases each: grad vs central differences {g_err:.2e} (tol {FD_GRAD_TOL:e}), hessian vs grad differences {h_err:.2e} (tol {FD_HESS_TOL:e}), lifted vs materialized grad {l_err:.2e} (tol {LIFTED_GRAD_TOL:e})"
        ),
    )
}

/// Criterion 8: monotone loss for `eta <= 1/smoothness`, instability of `w*`
/// at `gamma = 2.5`.
pub fn classical_regime(effort: Effort) -> Check {
    let (datasets, steps) = match effort {
        Effort::Full => (20, 2000),
        Effort::Quick => (6, 500),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(0xc1a5);
    let mut increases = 0;
    let mut min_unstable = f64::INFINITY;
    let mut escaped = 0;
    let mut problems = Vec::new();
    for k in 0..datasets {
        let d = rng.random_range(1..6);
        let data = random_nonseparable(&mut rng, 5 * d + 10, d);
        let eta = 1.0 / data.smoothness();
        let w0: Vec<f64> = (0..d).map(|_| rng.random_range(-5.0..5.0)).collect();
        let rec = RecordSpec { record_loss: true, tail_window: 1, ..RecordSpec::default() };
        match run_gd(&data, &w0, eta, steps, &rec) {
            Ok(traj) => {
                let losses = traj.loss_series.expect("recorded");
                // allow only rounding-level noise once converged
                increases += losses.windows(2).filter(|w| w[1] > w[0] + 4.0 * f64::EPSILON * w[0].abs()).count();
            }
            Err(e) => problems.push(format!("dataset {k}: {e}")),
        }
        let sol = match solve_newton(&data, &NewtonOptions::default()) {
            Ok(s) => s,
            Err(e) => {
                problems.push(format!("dataset {k}: {e}"));
                continue;
            }
        };
        let eta_unstable = 2.5 / sol.lambda_max;
        match floquet_multipliers(std::slice::from_ref(&sol.w_star), eta_unstable, &data) {
            Ok(m) => min_unstable = min_unstable.min(m[0]),
            Err(e) => problems.push(format!("dataset {k}: {e}")),
        }
        // a tiny perturbation is amplified rather than damped
        let start: Vec<f64> = sol.w_star.iter().enumerate().map(|(i, w)| w + if i == 0 { 1e-9 } else { 0.0 }).collect();
        if let Ok(traj) =
            run_gd(&data, &start, eta_unstable, 2000, &RecordSpec { tail_window: 1, ..RecordSpec::default() })
        {
            if dist(traj.last(), &sol.w_star) > 1e-6 {
                escaped += 1;
            }
        }
        let lam = lambda_max(&data, &sol.w_star, Default::default()).unwrap_or(f64::NAN);
        if (lam - sol.lambda_max).abs() > 1e-12 * lam {
            problems.push(format!("dataset {k}: lambda not reproducible"));
        }
    }
    let passed = increases == 0 && min_unstable > 1.0 && escaped == datasets && problems.is_empty();
    check(
        8,
        "classical regime control",
        passed,
        format!(
            "{datasets} datasets, {steps} steps at eta = 1/smoothness: {increases} loss increases; gamma = 2.5: smallest top Floquet magnitude {min_unstable:.4}, {escaped}/{datasets} perturbed runs escape w*{}",
            problems.first().map(|p| format!("; {p}")).unwrap_or_default()
        ),
    )
}

/// Suite names accepted by [`run_suite`].
pub const SUITES: [&str; 7] = ["onedim", "scaling", "lift", "cycles", "derivatives", "classical", "all"];

pub fn run_suite(name: &str, effort: Effort) -> Option<Vec<Check>> {
    let checks = match name {
        "onedim" => vec![onedim_convergence(effort), lemma_suite(effort), rate_bound(effort)],
        "scaling" => vec![scaling_invariance(effort)],
        "lift" => vec![lift_correctness(effort)],
        "cycles" => vec![cycle_preservation(effort)],
        "derivatives" => vec![derivative_oracles(effort)],
        "classical" => vec![classical_regime(effort)],
        "all" => vec![
            onedim_convergence(effort),
            lemma_suite(effort),
            rate_bound(effort),
            scaling_invariance(effort),
            lift_correctness(effort),
            cycle_preservation(effort),
            derivative_oracles(effort),
            classical_regime(effort),
        ],
        _ => return None,
    };
    Some(checks)
}
