//! One-dimensional unit-sphere data: `m` copies of `x = +1` and `n` copies of
//! `x = -1`, summarized by `c = m / n >= 1`.
//!
//! Everything reduces to closed forms in `c`: `w* = ln c`,
//! `lambda = sigma'(w*) = c / (c + 1)^2` and the GD map
//! `T(w) = w - (gamma / lambda) (sigma(w) - sigma(w*))`.
//!
//! Differences `sigma(w) - sigma(w*)` are evaluated through
//! `sinh((w - w*) / 2) / (2 cosh(w / 2) cosh(w* / 2))` in the log domain, which
//! keeps full relative accuracy next to `w*` (so `T(w*) = w*` exactly) and never
//! overflows.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{sigmoid, sigmoid_prime, Dataset};

const LN_2: f64 = std::f64::consts::LN_2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OneDimProblem {
    pub c: f64,
    pub w_star: f64,
    pub lambda: f64,
}

impl OneDimProblem {
    pub fn new(c: f64) -> Result<Self> {
        if !(c >= 1.0) || !c.is_finite() {
            return Err(Error::InvalidParameter(format!("c = {c} must be finite and >= 1")));
        }
        Ok(Self { c, w_star: c.ln(), lambda: c / ((c + 1.0) * (c + 1.0)) })
    }

    /// `plus` copies of `+1` and `minus` copies of `-1`.
    pub fn from_counts(plus: usize, minus: usize) -> Result<Self> {
        if minus == 0 || plus < minus {
            return Err(Error::InvalidParameter(format!("need 0 < minus <= plus, got plus = {plus}, minus = {minus}")));
        }
        Self::new(plus as f64 / minus as f64)
    }

    /// Explicit dataset behind [`from_counts`](Self::from_counts), for cross-checks.
    pub fn dataset(plus: usize, minus: usize) -> Result<Dataset> {
        let mut rows = vec![[1.0]; plus];
        rows.extend(std::iter::repeat_n([-1.0], minus));
        Dataset::from_rows(&rows)
    }

    pub fn eta(&self, gamma: f64) -> f64 {
        gamma / self.lambda
    }

    /// `L'(w) = sigma(w) - c / (c + 1)`.
    pub fn grad(&self, w: f64) -> f64 {
        let delta = w - self.w_star;
        if delta == 0.0 {
            return 0.0;
        }
        if delta.abs() > 40.0 {
            return sigmoid(w) - sigmoid(self.w_star);
        }
        let ln_mag = ln_sinh(delta.abs() / 2.0) - LN_2 - ln_cosh(w / 2.0) - ln_cosh(self.w_star / 2.0);
        delta.signum() * ln_mag.exp()
    }

    /// Average slope `R(w) = (sigma(w) - sigma(w*)) / (w - w*)`, extended by
    /// `sigma'(w*)` at `w = w*`.
    pub fn avg_slope(&self, w: f64) -> f64 {
        let delta = w - self.w_star;
        if delta == 0.0 {
            return self.lambda;
        }
        if delta.abs() > 40.0 {
            return (sigmoid(w) - sigmoid(self.w_star)) / delta;
        }
        let ln_r = ln_sinhc_half(delta) - LN_2 - ln_cosh(w / 2.0) - ln_cosh(self.w_star / 2.0);
        ln_r.exp()
    }

    /// One GD step.
    pub fn map(&self, w: f64, gamma: f64) -> f64 {
        w - self.eta(gamma) * self.grad(w)
    }

    /// `T'(w) = 1 - gamma sigma'(w) / sigma'(w*)`.
    pub fn map_derivative(&self, w: f64, gamma: f64) -> f64 {
        1.0 - gamma * sigmoid_prime(w) / self.lambda
    }
}

/// `ln sinh(a)` for `a > 0`.
fn ln_sinh(a: f64) -> f64 {
    if a < 1e-4 {
        a.ln() + (a * a / 6.0 + a.powi(4) / 120.0).ln_1p()
    } else if a < 20.0 {
        a.sinh().ln()
    } else {
        a + (-(-2.0 * a).exp()).ln_1p() - LN_2
    }
}

/// `ln cosh(x)`.
fn ln_cosh(x: f64) -> f64 {
    let a = x.abs();
    a + (-2.0 * a).exp().ln_1p() - LN_2
}

/// `ln(sinh(delta / 2) / delta)`.
fn ln_sinhc_half(delta: f64) -> f64 {
    let a = delta.abs() / 2.0;
    if a < 1e-4 {
        (0.5f64).ln() + (a * a / 6.0 + a.powi(4) / 120.0).ln_1p()
    } else {
        ln_sinh(a) - (2.0 * a).ln()
    }
}

pub fn grad_1d(w: f64, p: &OneDimProblem) -> f64 {
    p.grad(w)
}

pub fn map_t(w: f64, p: &OneDimProblem, gamma: f64) -> f64 {
    p.map(w, gamma)
}

pub fn avg_slope_r(w: f64, p: &OneDimProblem) -> f64 {
    p.avg_slope(w)
}

/// Critical points `(w_left, w_right) = (-w_r, w_r)` of `T`, where
/// `sigma'(w_r) = sigma'(w*) / gamma`.
pub fn stationary_points(p: &OneDimProblem, gamma: f64) -> Result<(f64, f64)> {
    if !(gamma > 0.0) {
        return Err(Error::InvalidParameter(format!("gamma = {gamma} must be positive")));
    }
    let ratio = p.lambda / gamma;
    if ratio > 0.25 {
        return Err(Error::NoStationaryPoints { ratio });
    }
    // sigma(w_r) = (1 + s) / 2 with s = sqrt(1 - 4 ratio), so w_r = 2 atanh(s)
    let s = (1.0 - 4.0 * ratio).sqrt();
    let w_r = 2.0 * s.atanh();
    Ok((-w_r, w_r))
}

fn require_oscillatory(gamma: f64) -> Result<()> {
    if gamma > 1.0 && gamma < 2.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("gamma = {gamma} must lie in (1, 2)")))
    }
}

/// The point `w~ > w*` with `T(w~) = w*`, by bisection on `gamma R(w) / lambda - 1`.
pub fn crossing_point(p: &OneDimProblem, gamma: f64) -> Result<f64> {
    require_oscillatory(gamma)?;
    let h = |w: f64| gamma * p.avg_slope(w) / p.lambda - 1.0;
    let mut lo = p.w_star;
    let mut width = 1.0;
    let mut hi = lo + width;
    let mut doublings = 0;
    while h(hi) > 0.0 {
        lo = hi;
        width *= 2.0;
        hi = p.w_star + width;
        doublings += 1;
        if doublings > 1100 {
            return Err(Error::BracketFailure("crossing point"));
        }
    }
    while hi - lo > 1e-13 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if h(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let w = 0.5 * (lo + hi);
    if (p.avg_slope(w) * p.eta(gamma) - 1.0).abs() > 1e-10 {
        return Err(Error::BracketFailure("crossing point (verification)"));
    }
    Ok(w)
}

/// `1 - gamma (2 - gamma) R(w)^2 / sigma'(w*)^2`.
pub fn two_step_bound(w: f64, p: &OneDimProblem, gamma: f64) -> f64 {
    let r = p.avg_slope(w) / p.lambda;
    1.0 - gamma * (2.0 - gamma) * r * r
}

/// Guaranteed two-step contraction factor inside the oscillation neighbourhood.
pub fn rate_estimate(gamma: f64) -> Result<f64> {
    require_oscillatory(gamma)?;
    Ok(1.0 - (2.0 - gamma) / gamma)
}

/// Starting points `w* + span * i / points`, `i = 1..=points`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LemmaGrid {
    pub points: usize,
    pub span: f64,
}

impl Default for LemmaGrid {
    fn default() -> Self {
        Self { points: 10_000, span: 20.0 }
    }
}

/// Slack applied to every inequality in [`verify_lemmas`].
pub const LEMMA_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LemmaReport {
    pub c: f64,
    pub gamma: f64,
    pub checked: usize,
    /// Grid points whose first step lands left of `w*`.
    pub crossings: usize,
    /// Largest `(T^2(w) - w*) / (w - w*)` over crossing points.
    pub worst_ratio: f64,
    /// Smallest `two_step_bound(w) - ratio` over crossing points.
    pub worst_bound_margin: f64,
    /// Smallest `|w - w*| - |T(w) - w*|` over all points.
    pub worst_contraction_margin: f64,
}

/// Checks one-step contraction, double crossing and the two-step bound over a
/// grid of starting points right of `w*`.
pub fn verify_lemmas(p: &OneDimProblem, gamma: f64, grid: LemmaGrid) -> Result<LemmaReport> {
    require_oscillatory(gamma)?;
    if grid.points == 0 || !(grid.span > 0.0) {
        return Err(Error::InvalidParameter("lemma grid must be non-empty".into()));
    }
    let ws = p.w_star;
    let mut report = LemmaReport {
        c: p.c,
        gamma,
        checked: 0,
        crossings: 0,
        worst_ratio: f64::NEG_INFINITY,
        worst_bound_margin: f64::INFINITY,
        worst_contraction_margin: f64::INFINITY,
    };
    for i in 1..=grid.points {
        let w = ws + grid.span * i as f64 / grid.points as f64;
        let t1 = p.map(w, gamma);
        let contraction = (w - ws).abs() - (t1 - ws).abs();
        report.worst_contraction_margin = report.worst_contraction_margin.min(contraction);
        if contraction <= -LEMMA_SLACK {
            return Err(Error::LemmaViolation { lemma: 1, w, margin: contraction });
        }
        report.checked += 1;
        if t1 < ws {
            report.crossings += 1;
            let t2 = p.map(t1, gamma);
            if t2 - ws <= -LEMMA_SLACK {
                return Err(Error::LemmaViolation { lemma: 2, w, margin: t2 - ws });
            }
            let ratio = (t2 - ws) / (w - ws);
            let margin = two_step_bound(w, p, gamma) - ratio;
            if margin < -LEMMA_SLACK {
                return Err(Error::LemmaViolation { lemma: 3, w, margin });
            }
            report.worst_ratio = report.worst_ratio.max(ratio);
            report.worst_bound_margin = report.worst_bound_margin.min(margin);
        }
    }
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SegmentKind {
    /// From `(w, w)` on the diagonal up or down to `(w, T(w))`.
    Vertical,
    /// From `(w, T(w))` across to the diagonal at `(T(w), T(w))`.
    Diagonal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CobwebSegment {
    pub w_from: f64,
    pub w_to: f64,
    pub segment_kind: SegmentKind,
}

/// Cobweb path of `steps` iterations from `w0`: one vertical and one
/// diagonal-bound segment per step.
pub fn cobweb(w0: f64, steps: usize, p: &OneDimProblem, gamma: f64) -> Vec<CobwebSegment> {
    let mut out = Vec::with_capacity(2 * steps);
    let mut w = w0;
    for _ in 0..steps {
        let next = p.map(w, gamma);
        out.push(CobwebSegment { w_from: w, w_to: next, segment_kind: SegmentKind::Vertical });
        out.push(CobwebSegment { w_from: w, w_to: next, segment_kind: SegmentKind::Diagonal });
        w = next;
    }
    out
}

/// `w_0, .., w_steps`.
pub fn orbit(w0: f64, steps: usize, p: &OneDimProblem, gamma: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(steps + 1);
    let mut w = w0;
    out.push(w);
    for _ in 0..steps {
        w = p.map(w, gamma);
        out.push(w);
    }
    out
}

/// First `t <= budget` with `|w_t - w*| <= tol`.
pub fn steps_to_converge(p: &OneDimProblem, gamma: f64, w0: f64, tol: f64, budget: usize) -> Option<usize> {
    let mut w = w0;
    for t in 0..=budget {
        if (w - p.w_star).abs() <= tol {
            return Some(t);
        }
        w = p.map(w, gamma);
    }
    None
}

/// First `t` at which the orbit enters `(2 w* - w~, w~)`, the oscillation
/// neighbourhood.
pub fn oscillation_entry(p: &OneDimProblem, gamma: f64, w0: f64, budget: usize) -> Result<Option<usize>> {
    let radius = crossing_point(p, gamma)? - p.w_star;
    let mut w = w0;
    for t in 0..=budget {
        if (w - p.w_star).abs() < radius {
            return Ok(Some(t));
        }
        w = p.map(w, gamma);
    }
    Ok(None)
}
