//! Dataset scaling and a randomized search for 2D datasets whose GD
//! trajectories settle on stable cycles.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{detect_cycle_recurrence, floquet_multipliers, run_gd, CycleReport, RecordSpec, StopNear};
use crate::error::{check_dim, Error, Result};
use crate::linalg::{dist, norm};
use crate::model::{Dataset, Objective};
use crate::solver::{solve_newton, NewtonOptions};

/// Every example multiplied by `c > 0`.
pub fn scale_dataset(data: &Dataset, c: f64) -> Result<Dataset> {
    if !(c > 0.0) || !c.is_finite() {
        return Err(Error::InvalidParameter(format!("scale factor {c} must be positive and finite")));
    }
    Ok(data.scaled(c))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingReport {
    pub c: f64,
    pub steps: usize,
    /// `max_t |w^_t - w_t / c| / (1 + |w_t / c|)`.
    pub max_deviation: f64,
    pub lambda: f64,
    pub lambda_scaled: f64,
    /// `|lambda^ / (c^2 lambda) - 1|`.
    pub lambda_ratio_error: f64,
    /// `|w^* - w* / c| / (1 + |w* / c|)`.
    pub solution_error: f64,
}

/// Runs GD on `data` from `w0` and on `c data` from `w0 / c`, each with
/// `eta = gamma / lambda` for its own `lambda`, and compares the iterates.
pub fn verify_scaling(
    data: &Dataset,
    c: f64,
    w0: &[f64],
    gamma: f64,
    steps: usize,
    opts: &NewtonOptions,
) -> Result<ScalingReport> {
    check_dim(data.dim(), w0.len())?;
    if steps == 0 {
        return Err(Error::InvalidParameter("steps must be at least 1".into()));
    }
    let scaled = scale_dataset(data, c)?;
    let sol = solve_newton(data, opts)?;
    let sol_hat = solve_newton(&scaled, opts)?;
    let eta = crate::solver::step_size(gamma, sol.lambda_max)?;
    let eta_hat = crate::solver::step_size(gamma, sol_hat.lambda_max)?;

    let rel = |a: &[f64], b: &[f64]| dist(a, b) / (1.0 + norm(b));
    let transported = |w: &[f64]| w.iter().map(|x| x / c).collect::<Vec<f64>>();

    let mut w = w0.to_vec();
    let mut w_hat = transported(w0);
    let (mut g, mut g_hat) = (vec![0.0; w.len()], vec![0.0; w.len()]);
    let mut worst = rel(&w_hat, &transported(&w));
    for _ in 0..steps {
        data.grad_into(&w, &mut g)?;
        scaled.grad_into(&w_hat, &mut g_hat)?;
        for i in 0..w.len() {
            w[i] -= eta * g[i];
            w_hat[i] -= eta_hat * g_hat[i];
        }
        worst = worst.max(rel(&w_hat, &transported(&w)));
    }
    Ok(ScalingReport {
        c,
        steps,
        max_deviation: worst,
        lambda: sol.lambda_max,
        lambda_scaled: sol_hat.lambda_max,
        lambda_ratio_error: (sol_hat.lambda_max / (c * c * sol.lambda_max) - 1.0).abs(),
        solution_error: rel(&sol_hat.w_star, &transported(&sol.w_star)),
    })
}

/// Random 2D datasets: a noisy two-class cluster pair along a random
/// direction, labels flipped at random, plus an optional long example along
/// the cluster axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GeneratorSpec {
    pub n_min: usize,
    pub n_max: usize,
    /// Cluster means are `+-mu u` with `mu ~ U(mean_min, mean_max)`.
    pub mean_min: f64,
    pub mean_max: f64,
    /// Isotropic standard deviation around each mean.
    pub spread: f64,
    pub flip_prob: f64,
    pub outlier: Option<OutlierSpec>,
}

/// One extra example `R (u + noise z)` with `log R ~ U(ln r_min, ln r_max)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutlierSpec {
    pub r_min: f64,
    pub r_max: f64,
    pub noise: f64,
}

impl Default for GeneratorSpec {
    fn default() -> Self {
        Self {
            n_min: 3,
            n_max: 6,
            mean_min: 0.2,
            mean_max: 1.0,
            spread: 0.3,
            flip_prob: 0.3,
            outlier: Some(OutlierSpec { r_min: 3.0, r_max: 60.0, noise: 0.5 }),
        }
    }
}

impl GeneratorSpec {
    pub fn sample(&self, rng: &mut impl Rng) -> Result<Dataset> {
        if self.n_min == 0 || self.n_max < self.n_min {
            return Err(Error::InvalidParameter("generator needs 1 <= n_min <= n_max".into()));
        }
        let n = rng.random_range(self.n_min..=self.n_max);
        let angle = rng.random_range(0.0..std::f64::consts::TAU);
        let u = [angle.cos(), angle.sin()];
        let mu = rng.random_range(self.mean_min..=self.mean_max);
        let mut normal = || -> f64 { StandardNormal.sample(&mut *rng) };
        let mut rows = Vec::with_capacity(n + 1);
        let mut raw = Vec::with_capacity(n);
        for _ in 0..n {
            let y: f64 = if normal() >= 0.0 { 1.0 } else { -1.0 };
            let x = [y * mu * u[0] + self.spread * normal(), y * mu * u[1] + self.spread * normal()];
            raw.push((x, y));
        }
        for (x, y) in raw {
            let label = if rng.random_bool(self.flip_prob.clamp(0.0, 1.0)) { -y } else { y };
            rows.push([label * x[0], label * x[1]]);
        }
        if let Some(o) = &self.outlier {
            let r = rng.random_range(o.r_min.ln()..=o.r_max.ln()).exp();
            let z: [f64; 2] = [StandardNormal.sample(rng), StandardNormal.sample(rng)];
            rows.push([r * (u[0] + o.noise * z[0]), r * (u[1] + o.noise * z[1])]);
        }
        Dataset::from_rows(&rows)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HuntConfig {
    pub gamma: f64,
    pub trials: usize,
    pub seed: u64,
    /// GD steps per initialization.
    pub budget: usize,
    /// Initializations probed per dataset.
    pub inits: usize,
    pub cycle_tol: f64,
    /// Longest period searched; the recurrence window is twice this.
    pub max_period: usize,
    /// Datasets whose minimizer is farther out than this are skipped.
    pub max_solution_norm: f64,
    pub generator: GeneratorSpec,
}

impl Default for HuntConfig {
    fn default() -> Self {
        Self {
            gamma: 1.9,
            trials: 100,
            seed: 0,
            budget: 6000,
            inits: 64,
            cycle_tol: 1e-7,
            max_period: 256,
            max_solution_norm: 1e3,
            generator: GeneratorSpec::default(),
        }
    }
}

/// A dataset on which GD with `eta = gamma / lambda` settles on a stable cycle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HuntResult {
    pub trial: usize,
    #[serde(with = "crate::io::dataset_csv")]
    pub dataset: Dataset,
    pub gamma: f64,
    pub lambda: f64,
    pub eta: f64,
    pub w_star: Vec<f64>,
    pub cycle: CycleReport,
    /// The cycle, in iteration order.
    pub cycle_points: Vec<Vec<f64>>,
    /// Fraction of probed initializations that reached this cycle.
    pub basin_sample: f64,
    /// Recurrence residual after restarting from a perturbed cycle point.
    pub reverify_residual: f64,
}

/// Summary of a hunt, including trials without hits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HuntSummary {
    pub trials: usize,
    /// Trials whose dataset was non-separable and passed the solution-norm filter.
    pub usable: usize,
    pub hits: usize,
    pub hit_rate: f64,
}

/// Searches `config.trials` random datasets in parallel. Each trial draws from
/// its own ChaCha stream, so the output depends only on the seed.
pub fn hunt_cycles(config: &HuntConfig) -> Result<(Vec<HuntResult>, HuntSummary)> {
    check_config(config)?;
    let outcomes: Vec<Result<TrialOutcome>> =
        (0..config.trials).into_par_iter().map(|t| hunt_trial(config, t)).collect();
    let mut results = Vec::new();
    let mut usable = 0;
    for outcome in outcomes {
        match outcome? {
            TrialOutcome::Unusable => {}
            TrialOutcome::Converged => usable += 1,
            TrialOutcome::Hit(hit) => {
                usable += 1;
                results.push(*hit);
            }
        }
    }
    let summary = HuntSummary {
        trials: config.trials,
        usable,
        hits: results.len(),
        hit_rate: if usable > 0 { results.len() as f64 / usable as f64 } else { 0.0 },
    };
    Ok((results, summary))
}

fn check_config(config: &HuntConfig) -> Result<()> {
    if !(config.gamma > 0.0 && config.gamma < 2.0) {
        return Err(Error::InvalidParameter(format!("gamma = {} must lie in (0, 2)", config.gamma)));
    }
    if config.inits == 0 || config.budget == 0 || config.max_period == 0 {
        return Err(Error::InvalidParameter("hunt needs positive inits, budget and max_period".into()));
    }
    Ok(())
}

/// Replays a single trial of [`hunt_cycles`]; `None` when it produced no hit.
pub fn hunt_single(config: &HuntConfig, trial: usize) -> Result<Option<HuntResult>> {
    check_config(config)?;
    Ok(match hunt_trial(config, trial)? {
        TrialOutcome::Hit(hit) => Some(*hit),
        _ => None,
    })
}

enum TrialOutcome {
    Unusable,
    Converged,
    Hit(Box<HuntResult>),
}

/// Stream-separated generator for one trial.
pub fn trial_rng(seed: u64, trial: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial as u64);
    rng
}

fn hunt_trial(config: &HuntConfig, trial: usize) -> Result<TrialOutcome> {
    let mut rng = trial_rng(config.seed, trial);
    let data = config.generator.sample(&mut rng)?;
    let sol = match solve_newton(&data, &NewtonOptions::default()) {
        Ok(s) => s,
        Err(Error::Separable(_)) | Err(Error::NoConvergence { .. }) => return Ok(TrialOutcome::Unusable),
        Err(e) => return Err(e),
    };
    if norm(&sol.w_star) > config.max_solution_norm {
        return Ok(TrialOutcome::Unusable);
    }
    let eta = config.gamma / sol.lambda_max;
    let radius = norm(&sol.w_star).max(1.0);
    let record = RecordSpec {
        tail_window: 2 * config.max_period,
        stop_near: Some(StopNear { point: sol.w_star.clone(), tol: 1e-10, check_every: 64 }),
        ..RecordSpec::default()
    };

    let mut found: Option<(CycleReport, Vec<Vec<f64>>)> = None;
    let mut finals: Vec<(Option<usize>, Vec<f64>)> = Vec::with_capacity(config.inits);
    for _ in 0..config.inits {
        let spread = rng.random_range(-2.0f64..3.0).exp() * radius;
        let w0: Vec<f64> =
            sol.w_star.iter().map(|w| w + spread * Distribution::<f64>::sample(&StandardNormal, &mut rng)).collect();
        let traj = match run_gd(&data, &w0, eta, config.budget, &record) {
            Ok(t) => t,
            Err(Error::Diverged { .. }) => continue,
            Err(e) => return Err(e),
        };
        if traj.stopped_early {
            finals.push((Some(1), traj.last().to_vec()));
            continue;
        }
        let rep = detect_cycle_recurrence(&traj, config.cycle_tol);
        finals.push((rep.as_ref().map(|r| r.period), traj.last().to_vec()));
        if found.is_some() {
            continue;
        }
        if let Some(mut rep) = rep.filter(|r| r.period >= 2) {
            let pts = traj.last_points(rep.period);
            let mults = floquet_multipliers(&pts, eta, &data)?;
            if mults.iter().all(|&m| m < 1.0) {
                rep.floquet_multipliers = Some(mults);
                found = Some((rep, pts));
            }
        }
    }
    let Some((cycle, points)) = found else {
        return Ok(TrialOutcome::Converged);
    };

    // independent re-run from a perturbed cycle point
    let dir: Vec<f64> = (0..data.dim()).map(|_| StandardNormal.sample(&mut rng)).collect();
    let dn = norm(&dir);
    let start: Vec<f64> = points[0].iter().zip(&dir).map(|(p, z)| p + 1e-6 * z / dn).collect();
    let check = RecordSpec { tail_window: 2 * config.max_period, ..RecordSpec::default() };
    let reverify = run_gd(&data, &start, eta, config.budget, &check)?;
    let Some(again) = detect_cycle_recurrence(&reverify, config.cycle_tol) else {
        return Ok(TrialOutcome::Converged);
    };
    if again.period != cycle.period {
        return Ok(TrialOutcome::Converged);
    }

    let on_cycle = |w: &[f64]| points.iter().any(|p| dist(p, w) <= 1e-6 * (1.0 + norm(p)));
    let reached = finals.iter().filter(|(k, w)| *k == Some(cycle.period) && on_cycle(w)).count();
    Ok(TrialOutcome::Hit(Box::new(HuntResult {
        trial,
        dataset: data,
        gamma: config.gamma,
        lambda: sol.lambda_max,
        eta,
        w_star: sol.w_star,
        basin_sample: reached as f64 / config.inits as f64,
        reverify_residual: again.recurrence_residual,
        cycle,
        cycle_points: points,
    })))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_data(seed: u64, d: usize) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        loop {
            let rows: Vec<Vec<f64>> =
                (0..8).map(|_| (0..d).map(|_| StandardNormal.sample(&mut rng)).collect()).collect();
            let data = Dataset::from_rows(&rows).unwrap();
            if solve_newton(&data, &NewtonOptions::default()).is_ok() {
                return data;
            }
        }
    }

    #[test]
    fn scale_examples() {
        let data = random_data(1, 2);
        assert_eq!(scale_dataset(&data, 1.0).unwrap(), data);
        assert!(scale_dataset(&data, 0.0).is_err());
        assert!(scale_dataset(&data, -2.0).is_err());
        let s = scale_dataset(&data, 3.0).unwrap();
        assert_eq!(s.row(2)[1], 3.0 * data.row(2)[1]);
    }

    #[test]
    fn unit_scale_is_exact() {
        let data = random_data(2, 2);
        let rep = verify_scaling(&data, 1.0, &[1.0, -2.0], 1.5, 100, &NewtonOptions::default()).unwrap();
        assert_eq!(rep.max_deviation, 0.0);
        assert_eq!(rep.lambda_ratio_error, 0.0);
    }

    #[test]
    fn scaled_trajectories_correspond() {
        for (seed, d) in [(3, 1), (4, 2), (5, 5)] {
            let data = random_data(seed, d);
            let w0: Vec<f64> = (0..d).map(|i| 0.5 - i as f64 * 0.3).collect();
            for c in [0.5, 10.0] {
                let rep = verify_scaling(&data, c, &w0, 1.8, 500, &NewtonOptions::default()).unwrap();
                assert!(rep.max_deviation <= 1e-10, "{rep:?}");
                assert!(rep.lambda_ratio_error <= 1e-10, "{rep:?}");
                assert!(rep.solution_error <= 1e-10, "{rep:?}");
            }
        }
    }

    #[test]
    fn generator_is_seeded() {
        let g = GeneratorSpec::default();
        let a = g.sample(&mut trial_rng(9, 4)).unwrap();
        let b = g.sample(&mut trial_rng(9, 4)).unwrap();
        let c = g.sample(&mut trial_rng(9, 5)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_eq!(a.dim(), 2);
        assert!(a.len() >= 4 && a.len() <= 7);
    }

    #[test]
    fn classical_regime_finds_nothing() {
        let config = HuntConfig { gamma: 0.5, trials: 6, inits: 8, budget: 2000, ..HuntConfig::default() };
        let (hits, summary) = hunt_cycles(&config).unwrap();
        assert!(hits.is_empty());
        assert_eq!(summary.hits, 0);
        assert!(summary.usable > 0);
    }

    #[test]
    fn hunt_rejects_bad_gamma() {
        assert!(hunt_cycles(&HuntConfig { gamma: 2.0, ..HuntConfig::default() }).is_err());
        assert!(hunt_cycles(&HuntConfig { gamma: 0.0, ..HuntConfig::default() }).is_err());
    }
}
