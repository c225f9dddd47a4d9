//! Gradient descent trajectories and their long-run behaviour: recurrence
//! detection, norm-series spectra, and Floquet stability of detected cycles.

use std::collections::{BTreeMap, VecDeque};

use nalgebra::{Complex, DMatrix};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::linalg::{dist, norm};
use crate::model::{Objective, Problem, MATERIALIZE_LIMIT};

/// Early termination once the iterate is this close to `point`.
#[derive(Debug, Clone, PartialEq)]
pub struct StopNear {
    pub point: Vec<f64>,
    /// Relative: stop when `|w - point| <= tol (1 + |point|)`.
    pub tol: f64,
    pub check_every: usize,
}

/// What [`run_gd`] keeps besides the final iterate.
#[derive(Debug, Clone, PartialEq)]
pub struct RecordSpec {
    /// Coordinates whose full series is stored.
    pub sample_coords: Vec<usize>,
    /// Number of trailing full iterates kept.
    pub tail_window: usize,
    /// Norm above which the run is aborted as divergent.
    pub divergence_bound: f64,
    pub record_loss: bool,
    pub stop_near: Option<StopNear>,
}

impl Default for RecordSpec {
    fn default() -> Self {
        Self {
            sample_coords: Vec::new(),
            tail_window: 2048,
            divergence_bound: 1e10,
            record_loss: false,
            stop_near: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub w0: Vec<f64>,
    pub eta: f64,
    pub steps_run: usize,
    /// `|w_t|` for `t = 0..=steps_run`.
    pub norm_series: Vec<f64>,
    pub sampled_coords: BTreeMap<usize, Vec<f64>>,
    pub loss_series: Option<Vec<f64>>,
    /// The last `tail_window` iterates, oldest first.
    pub tail: VecDeque<Vec<f64>>,
    pub stopped_early: bool,
}

impl Trajectory {
    pub fn last(&self) -> &[f64] {
        self.tail.back().expect("a trajectory always holds w0")
    }

    /// The last `k` iterates, oldest first.
    pub fn last_points(&self, k: usize) -> Vec<Vec<f64>> {
        let skip = self.tail.len().saturating_sub(k);
        self.tail.iter().skip(skip).cloned().collect()
    }
}

/// `w_{t+1} = w_t - eta grad L(w_t)` for `steps` steps.
pub fn run_gd<O: Objective + ?Sized>(
    problem: &O,
    w0: &[f64],
    eta: f64,
    steps: usize,
    record: &RecordSpec,
) -> Result<Trajectory> {
    if !(eta > 0.0) || !eta.is_finite() {
        return Err(Error::InvalidParameter(format!("step size {eta} must be positive and finite")));
    }
    let d = problem.dim();
    check_dim(d, w0.len())?;
    if let Some(&j) = record.sample_coords.iter().find(|&&j| j >= d) {
        return Err(Error::InvalidParameter(format!("sampled coordinate {j} out of range for dimension {d}")));
    }
    if let Some(stop) = &record.stop_near {
        check_dim(d, stop.point.len())?;
    }
    let window = record.tail_window.max(1);

    let mut traj = Trajectory {
        w0: w0.to_vec(),
        eta,
        steps_run: 0,
        norm_series: Vec::with_capacity(steps + 1),
        sampled_coords: record.sample_coords.iter().map(|&j| (j, Vec::with_capacity(steps + 1))).collect(),
        loss_series: record.record_loss.then(|| Vec::with_capacity(steps + 1)),
        tail: VecDeque::with_capacity(window),
        stopped_early: false,
    };
    let mut w = w0.to_vec();
    let mut g = vec![0.0; d];
    push_record(&mut traj, problem, &w, window)?;

    let stop_scale = record.stop_near.as_ref().map(|s| s.tol * (1.0 + norm(&s.point)));
    for step in 1..=steps {
        problem.grad_into(&w, &mut g)?;
        for (wi, gi) in w.iter_mut().zip(&g) {
            *wi -= eta * gi;
        }
        let n = norm(&w);
        if !n.is_finite() || n > record.divergence_bound {
            return Err(Error::Diverged { step, norm: n });
        }
        traj.steps_run = step;
        push_record(&mut traj, problem, &w, window)?;
        if let (Some(stop), Some(scale)) = (&record.stop_near, stop_scale) {
            if step % stop.check_every.max(1) == 0 && dist(&w, &stop.point) <= scale {
                traj.stopped_early = true;
                break;
            }
        }
    }
    Ok(traj)
}

fn push_record<O: Objective + ?Sized>(traj: &mut Trajectory, problem: &O, w: &[f64], window: usize) -> Result<()> {
    traj.norm_series.push(norm(w));
    for (&j, series) in traj.sampled_coords.iter_mut() {
        series.push(w[j]);
    }
    if let Some(losses) = traj.loss_series.as_mut() {
        losses.push(problem.loss(w)?);
    }
    if traj.tail.len() == window {
        let mut slot = traj.tail.pop_front().expect("window is non-empty");
        slot.copy_from_slice(w);
        traj.tail.push_back(slot);
    } else {
        traj.tail.push_back(w.to_vec());
    }
    Ok(())
}

/// A detected periodic regime.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CycleReport {
    /// Smallest recurrence period; 1 for a fixed point.
    pub period: usize,
    /// Largest `|w_{t+k} - w_t|` over the tail window.
    pub recurrence_residual: f64,
    /// Strongest spectral peaks of the norm series as `(frequency, power)`.
    pub spectral_peaks: Vec<(f64, f64)>,
    pub spectral_period: Option<usize>,
    /// Floquet multiplier magnitudes, descending.
    pub floquet_multipliers: Option<Vec<f64>>,
}

impl CycleReport {
    pub fn is_stable(&self) -> Option<bool> {
        self.floquet_multipliers.as_ref().map(|m| m.iter().all(|&x| x < 1.0))
    }
}

/// Smallest `k` in `[1, W/2]` with `|w_{t+k} - w_t| <= tol (1 + |w_t|)` over the
/// whole tail window.
pub fn detect_cycle_recurrence(traj: &Trajectory, tol: f64) -> Option<CycleReport> {
    let pts = &traj.tail;
    let w = pts.len();
    if w < 2 {
        return None;
    }
    let norms: Vec<f64> = pts.iter().map(|p| norm(p)).collect();
    'period: for k in 1..=w / 2 {
        let mut worst = 0.0f64;
        for t in 0..w - k {
            let r = dist(&pts[t + k], &pts[t]);
            if !(r <= tol * (1.0 + norms[t])) {
                continue 'period;
            }
            worst = worst.max(r);
        }
        return Some(CycleReport {
            period: k,
            recurrence_residual: worst,
            spectral_peaks: Vec::new(),
            spectral_period: None,
            floquet_multipliers: None,
        });
    }
    None
}

/// In-place iterative radix-2 FFT; `buf.len()` must be a power of two.
pub fn fft(buf: &mut [Complex<f64>]) {
    let n = buf.len();
    if n <= 1 {
        return;
    }
    assert!(n.is_power_of_two(), "fft length {n} is not a power of two");
    let bits = n.trailing_zeros();
    for i in 0..n {
        let j = i.reverse_bits() >> (usize::BITS - bits);
        if j > i {
            buf.swap(i, j);
        }
    }
    let mut len = 2;
    while len <= n {
        let ang = -2.0 * std::f64::consts::PI / len as f64;
        for start in (0..n).step_by(len) {
            for k in 0..len / 2 {
                let tw = Complex::from_polar(1.0, ang * k as f64);
                let a = buf[start + k];
                let b = buf[start + k + len / 2] * tw;
                buf[start + k] = a + b;
                buf[start + k + len / 2] = a - b;
            }
        }
        len <<= 1;
    }
}

/// Window applied to the samples before the transform.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Taper {
    #[default]
    Rectangular,
    /// `sin^2(pi t / W)`; trades a wider main lobe for far lower leakage.
    Hann,
}

/// `(frequency, power)` pairs.
pub type Spectrum = Vec<(f64, f64)>;

/// `|DFT|^2` of the mean-removed last `window` samples, as `(j / window, power)`
/// for `j = 0..=window/2`.
pub fn power_spectrum(series: &[f64], window: usize) -> Result<Vec<(f64, f64)>> {
    power_spectrum_tapered(series, window, Taper::Rectangular)
}

pub fn power_spectrum_tapered(series: &[f64], window: usize, taper: Taper) -> Result<Vec<(f64, f64)>> {
    if window < 2 || !window.is_power_of_two() || window > series.len() {
        return Err(Error::InvalidWindow { window, len: series.len() });
    }
    let tail = &series[series.len() - window..];
    let mean = tail.iter().sum::<f64>() / window as f64;
    let mut buf: Vec<Complex<f64>> = tail
        .iter()
        .enumerate()
        .map(|(t, &x)| {
            let weight = match taper {
                Taper::Rectangular => 1.0,
                Taper::Hann => (std::f64::consts::PI * t as f64 / window as f64).sin().powi(2),
            };
            Complex::new((x - mean) * weight, 0.0)
        })
        .collect();
    fft(&mut buf);
    Ok(buf[..=window / 2].iter().enumerate().map(|(j, z)| (j as f64 / window as f64, z.norm_sqr())).collect())
}

/// Peak-to-median ratio a bin needs to count as a spectral peak.
pub const PEAK_RATIO: f64 = 10.0;

/// A candidate fundamental must carry at least this fraction of the top peak.
const SUBHARMONIC_FLOOR: f64 = 1e-6;

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn is_local_max(p: &[f64], i: usize) -> bool {
    let left = if i > 0 { p[i - 1] } else { f64::NEG_INFINITY };
    let right = p.get(i + 1).copied().unwrap_or(f64::NEG_INFINITY);
    p[i] >= left && p[i] >= right
}

/// Local maxima among the nonzero-frequency bins exceeding [`PEAK_RATIO`]
/// times the median, strongest first.
pub fn spectral_peaks(spectrum: &[(f64, f64)], max_peaks: usize) -> Vec<(f64, f64)> {
    if spectrum.len() < 3 {
        return Vec::new();
    }
    let power: Vec<f64> = spectrum.iter().map(|b| b.1).collect();
    let med = median(power[1..].to_vec());
    let mut peaks: Vec<(f64, f64)> = (1..spectrum.len())
        .filter(|&i| power[i] > PEAK_RATIO * med && power[i] > 0.0 && is_local_max(&power, i))
        .map(|i| spectrum[i])
        .collect();
    peaks.sort_by(|a, b| b.1.total_cmp(&a.1));
    peaks.truncate(max_peaks);
    peaks
}

/// Period of the strongest spectral line, corrected for harmonics.
///
/// A `k`-periodic norm series often puts most of its power on a harmonic `j/k`
/// rather than on `1/k`. Starting from the strongest bin `f*`, the lowest
/// subharmonic `f*/j` that is itself a significant local maximum is taken as
/// the fundamental, and the period is `round(j / f*)` with `f*` refined by
/// parabolic interpolation of the log power.
pub fn dominant_period(spectrum: &[(f64, f64)]) -> Option<usize> {
    if spectrum.len() < 3 {
        return None;
    }
    let power: Vec<f64> = spectrum.iter().map(|b| b.1).collect();
    let med = median(power[1..].to_vec());
    let (top, &p_top) = power.iter().enumerate().skip(1).max_by(|a, b| a.1.total_cmp(b.1))?;
    if !(p_top > 0.0) || p_top <= PEAK_RATIO * med {
        return None;
    }
    let window = 2 * (spectrum.len() - 1);
    let top_pos = refine(&power, top);

    let significant = |i: usize| power[i] > PEAK_RATIO * med && power[i] >= SUBHARMONIC_FLOOR * p_top;
    let mut order = 1usize;
    for j in (2..=top / 2).rev() {
        let b = (top_pos / j as f64).round() as usize;
        // the lobe maximum may sit one bin off the ideal position
        let hit = [b.saturating_sub(1), b, b + 1]
            .into_iter()
            .filter(|&i| i >= 2 && i < power.len())
            .max_by(|&x, &y| power[x].total_cmp(&power[y]))
            .is_some_and(|i| significant(i) && is_local_max(&power, i));
        if hit {
            order = j;
            break;
        }
    }
    let period = (order as f64 * window as f64 / top_pos).round();
    (period >= 1.0).then_some(period as usize)
}

/// Fractional bin of the peak at `i` from a parabola through the log power of
/// its neighbours (exact for Gaussian-shaped lobes, close for Hann lobes).
fn refine(power: &[f64], i: usize) -> f64 {
    if i == 0 || i + 1 >= power.len() || power[i - 1] <= 0.0 || power[i + 1] <= 0.0 {
        return i as f64;
    }
    let (a, b, c) = (power[i - 1].ln(), power[i].ln(), power[i + 1].ln());
    let denom = a - 2.0 * b + c;
    if !(denom < 0.0) {
        return i as f64;
    }
    let shift = 0.5 * (a - c) / denom;
    i as f64 + shift.clamp(-0.5, 0.5)
}

/// Hann-tapered spectrum of the trailing `window` samples and the period read
/// off it; the period is `None` for a flat series (converged to rounding
/// level) or an aperiodic one.
pub fn spectral_period(series: &[f64], window: usize) -> Result<(Spectrum, Option<usize>)> {
    let spectrum = power_spectrum_tapered(series, window, Taper::Hann)?;
    let tail = &series[series.len() - window..];
    let (lo, hi) = tail.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &x| (l.min(x), h.max(x)));
    let flat = hi - lo <= 1e-12 * (1.0 + hi.abs());
    let period = if flat { None } else { dominant_period(&spectrum) };
    Ok((spectrum, period))
}

/// Magnitudes (descending) of the eigenvalues of
/// `(I - eta H(w_k)) .. (I - eta H(w_1))` around the cycle.
pub fn floquet_multipliers<O: Objective + ?Sized>(
    cycle_points: &[Vec<f64>],
    eta: f64,
    problem: &O,
) -> Result<Vec<f64>> {
    let d = problem.dim();
    if d > MATERIALIZE_LIMIT {
        return Err(Error::DimensionTooLarge { dim: d, limit: MATERIALIZE_LIMIT });
    }
    if cycle_points.is_empty() {
        return Err(Error::InvalidParameter("cycle has no points".into()));
    }
    let mut m = DMatrix::<f64>::identity(d, d);
    for p in cycle_points {
        let jac = DMatrix::<f64>::identity(d, d) - problem.hessian(p)? * eta;
        m = jac * m;
    }
    Ok(eigen_magnitudes(m))
}

pub(crate) fn eigen_magnitudes(m: DMatrix<f64>) -> Vec<f64> {
    let mut mags: Vec<f64> = m.complex_eigenvalues().iter().map(|z| z.norm()).collect();
    mags.sort_by(|a, b| b.total_cmp(a));
    mags
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalysisOptions {
    pub tol: f64,
    pub window: usize,
    pub max_peaks: usize,
    pub floquet: bool,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        Self { tol: 1e-7, window: 1024, max_peaks: 8, floquet: true }
    }
}

/// Recurrence detection followed by spectral and (where affordable) Floquet
/// characterization. Lifted problems use the block reduction for Floquet
/// multipliers, so any ambient dimension is supported.
pub fn analyze(problem: &Problem, traj: &Trajectory, opts: &AnalysisOptions) -> Result<Option<CycleReport>> {
    let Some(mut report) = detect_cycle_recurrence(traj, opts.tol) else {
        return Ok(None);
    };
    if traj.norm_series.len() >= opts.window {
        let (spectrum, period) = spectral_period(&traj.norm_series, opts.window)?;
        report.spectral_peaks = spectral_peaks(&spectrum, opts.max_peaks);
        report.spectral_period = period;
    }
    if opts.floquet {
        let pts = traj.last_points(report.period);
        report.floquet_multipliers = match problem {
            Problem::Dense(data) if data.dim() <= MATERIALIZE_LIMIT => Some(floquet_multipliers(&pts, traj.eta, data)?),
            Problem::Dense(_) => None,
            Problem::Lifted(lifted) => {
                let base: Vec<Vec<f64>> = pts.iter().map(|p| p[..lifted.base_dim()].to_vec()).collect();
                Some(crate::lift::lifted_floquet(lifted, &base, traj.eta)?.magnitudes())
            }
        };
    }
    Ok(Some(report))
}
