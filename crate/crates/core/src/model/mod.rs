//! Logistic objective `L(w) = (1/n) sum_i log(1 + exp(-w . x_i))` over
//! label-folded examples, with derivatives for dense and sphere-lifted data.

mod dataset;

pub use dataset::{Dataset, LiftedDataset, MATERIALIZE_LIMIT};

use nalgebra::DMatrix;

use crate::error::{check_dim, Error, Result};
use crate::linalg::{self, dot};

/// `log(1 + exp(z))`, evaluated without overflow.
#[inline]
pub fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

/// Logistic sigmoid, branch-stable for large `|z|`.
#[inline]
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `sigma'(z) = sigma(z) sigma(-z)`, which is also the logistic loss curvature.
#[inline]
pub fn sigmoid_prime(z: f64) -> f64 {
    let e = (-z.abs()).exp();
    e / ((1.0 + e) * (1.0 + e))
}

/// Anything gradient descent can run on.
pub trait Objective: Sync {
    fn dim(&self) -> usize;

    /// Number of (possibly implicit) examples.
    fn num_examples(&self) -> usize;

    fn loss(&self, w: &[f64]) -> Result<f64>;

    /// Writes the gradient at `w` into `out`.
    fn grad_into(&self, w: &[f64], out: &mut [f64]) -> Result<()>;

    fn grad(&self, w: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.dim()];
        self.grad_into(w, &mut out)?;
        Ok(out)
    }

    /// Hessian-vector product in `O(n d)`.
    fn hvp(&self, w: &[f64], v: &[f64]) -> Result<Vec<f64>>;

    /// Dense Hessian.
    fn hessian(&self, w: &[f64]) -> Result<DMatrix<f64>>;

    /// Global upper bound on the Hessian spectrum, `lambda_max(X^T X) / (4n)`.
    fn smoothness(&self) -> f64;
}

/// Objective value at `w`.
pub fn loss(w: &[f64], data: &Dataset) -> Result<f64> {
    data.loss(w)
}

/// `-(1/n) sum_i sigma(-w . x_i) x_i`.
pub fn grad(w: &[f64], data: &Dataset) -> Result<Vec<f64>> {
    data.grad(w)
}

pub fn hessian(w: &[f64], data: &Dataset) -> Result<DMatrix<f64>> {
    data.hessian(w)
}

pub fn hvp(w: &[f64], v: &[f64], data: &Dataset) -> Result<Vec<f64>> {
    data.hvp(w, v)
}

/// Gradient of the lifted objective without materializing the lifted rows.
pub fn lifted_grad(w: &[f64], lifted: &LiftedDataset) -> Result<Vec<f64>> {
    lifted.grad(w)
}

pub fn smoothness(data: &Dataset) -> f64 {
    data.smoothness()
}

/// Either kind of dataset, for callers that pick one at run time.
#[derive(Debug, Clone, PartialEq)]
pub enum Problem {
    Dense(Dataset),
    Lifted(LiftedDataset),
}

impl Problem {
    pub fn as_objective(&self) -> &dyn Objective {
        match self {
            Problem::Dense(d) => d,
            Problem::Lifted(l) => l,
        }
    }
}

impl Objective for Problem {
    fn dim(&self) -> usize {
        self.as_objective().dim()
    }

    fn num_examples(&self) -> usize {
        self.as_objective().num_examples()
    }

    fn loss(&self, w: &[f64]) -> Result<f64> {
        self.as_objective().loss(w)
    }

    fn grad_into(&self, w: &[f64], out: &mut [f64]) -> Result<()> {
        self.as_objective().grad_into(w, out)
    }

    fn hvp(&self, w: &[f64], v: &[f64]) -> Result<Vec<f64>> {
        self.as_objective().hvp(w, v)
    }

    fn hessian(&self, w: &[f64]) -> Result<DMatrix<f64>> {
        self.as_objective().hessian(w)
    }

    fn smoothness(&self) -> f64 {
        self.as_objective().smoothness()
    }
}

impl Objective for Dataset {
    fn dim(&self) -> usize {
        Dataset::dim(self)
    }

    fn num_examples(&self) -> usize {
        self.len()
    }

    fn loss(&self, w: &[f64]) -> Result<f64> {
        check_dim(self.dim(), w.len())?;
        let total: f64 = self.rows().map(|x| softplus(-dot(x, w))).sum();
        Ok(total / self.len() as f64)
    }

    fn grad_into(&self, w: &[f64], out: &mut [f64]) -> Result<()> {
        check_dim(self.dim(), w.len())?;
        check_dim(self.dim(), out.len())?;
        out.iter_mut().for_each(|g| *g = 0.0);
        for x in self.rows() {
            let p = sigmoid(-dot(x, w));
            linalg::axpy(p, x, out);
        }
        let scale = -1.0 / self.len() as f64;
        out.iter_mut().for_each(|g| *g *= scale);
        Ok(())
    }

    fn hvp(&self, w: &[f64], v: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim(), w.len())?;
        check_dim(self.dim(), v.len())?;
        let mut out = vec![0.0; self.dim()];
        for x in self.rows() {
            let c = sigmoid_prime(dot(x, w)) * dot(x, v);
            linalg::axpy(c, x, &mut out);
        }
        let scale = 1.0 / self.len() as f64;
        out.iter_mut().for_each(|g| *g *= scale);
        Ok(out)
    }

    fn hessian(&self, w: &[f64]) -> Result<DMatrix<f64>> {
        check_dim(self.dim(), w.len())?;
        let d = self.dim();
        let mut h = DMatrix::<f64>::zeros(d, d);
        for x in self.rows() {
            let c = sigmoid_prime(dot(x, w));
            for a in 0..d {
                let ca = c * x[a];
                for b in a..d {
                    h[(a, b)] += ca * x[b];
                }
            }
        }
        let scale = 1.0 / self.len() as f64;
        for a in 0..d {
            for b in a..d {
                h[(a, b)] *= scale;
                h[(b, a)] = h[(a, b)];
            }
        }
        Ok(h)
    }

    fn smoothness(&self) -> f64 {
        let (n, d) = (self.len(), self.dim());
        // the nonzero spectrum of X^T X equals that of X X^T; use the smaller one
        let gram = if d <= n {
            let x = DMatrix::from_row_slice(n, d, self.as_slice());
            x.transpose() * x
        } else {
            let x = DMatrix::from_row_slice(n, d, self.as_slice());
            &x * x.transpose()
        };
        linalg::sym_max_eigenvalue(&gram).max(0.0) / (4.0 * n as f64)
    }
}

impl LiftedDataset {
    fn base_margins(&self, w: &[f64]) -> Vec<f64> {
        let db = self.base_dim();
        self.base().rows().map(|x| dot(x, &w[..db])).collect()
    }

    /// Padded-block curvature `(1/n_b) sum_i sigma'(x_i . w_b) s_i^2` at a base point.
    pub fn pad_curvature(&self, w_base: &[f64]) -> Result<f64> {
        check_dim(self.base_dim(), w_base.len())?;
        let total: f64 = self.base().rows().zip(self.pad()).map(|(x, s)| sigmoid_prime(dot(x, w_base)) * s * s).sum();
        Ok(total / self.base().len() as f64)
    }
}

impl Objective for LiftedDataset {
    fn dim(&self) -> usize {
        self.ambient_dim()
    }

    fn num_examples(&self) -> usize {
        self.len()
    }

    fn loss(&self, w: &[f64]) -> Result<f64> {
        check_dim(self.dim(), w.len())?;
        let db = self.base_dim();
        let tail = &w[db..];
        let mut total = 0.0;
        for (m, &s) in self.base_margins(w).into_iter().zip(self.pad()) {
            for &t in tail {
                total += softplus(-(m + s * t)) + softplus(-(m - s * t));
            }
        }
        Ok(total / self.len() as f64)
    }

    fn grad_into(&self, w: &[f64], out: &mut [f64]) -> Result<()> {
        check_dim(self.dim(), w.len())?;
        check_dim(self.dim(), out.len())?;
        let db = self.base_dim();
        let (head, tail_out) = out.split_at_mut(db);
        head.iter_mut().for_each(|g| *g = 0.0);
        tail_out.iter_mut().for_each(|g| *g = 0.0);
        let tail = &w[db..];
        for ((x, &s), m) in self.base().rows().zip(self.pad()).zip(self.base_margins(w)) {
            let mut head_weight = 0.0;
            for (g, &t) in tail_out.iter_mut().zip(tail) {
                let plus = sigmoid(-(m + s * t));
                let minus = sigmoid(-(m - s * t));
                head_weight += plus + minus;
                *g += s * (plus - minus);
            }
            linalg::axpy(head_weight, x, head);
        }
        let scale = -1.0 / self.len() as f64;
        out.iter_mut().for_each(|g| *g *= scale);
        Ok(())
    }

    fn hvp(&self, w: &[f64], v: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim(), w.len())?;
        check_dim(self.dim(), v.len())?;
        let db = self.base_dim();
        let mut out = vec![0.0; self.dim()];
        let (head, tail_out) = out.split_at_mut(db);
        let (tail_w, tail_v) = (&w[db..], &v[db..]);
        for ((x, &s), m) in self.base().rows().zip(self.pad()).zip(self.base_margins(w)) {
            let a = dot(x, &v[..db]);
            let mut head_weight = 0.0;
            for ((g, &t), &u) in tail_out.iter_mut().zip(tail_w).zip(tail_v) {
                let cp = sigmoid_prime(m + s * t) * (a + s * u);
                let cm = sigmoid_prime(m - s * t) * (a - s * u);
                head_weight += cp + cm;
                *g += s * (cp - cm);
            }
            linalg::axpy(head_weight, x, head);
        }
        let scale = 1.0 / self.len() as f64;
        out.iter_mut().for_each(|g| *g *= scale);
        Ok(out)
    }

    fn hessian(&self, w: &[f64]) -> Result<DMatrix<f64>> {
        check_dim(self.dim(), w.len())?;
        let d = self.dim();
        if d > MATERIALIZE_LIMIT {
            return Err(Error::DimensionTooLarge { dim: d, limit: MATERIALIZE_LIMIT });
        }
        let mut h = DMatrix::<f64>::zeros(d, d);
        let mut e = vec![0.0; d];
        for j in 0..d {
            e[j] = 1.0;
            let col = self.hvp(w, &e)?;
            e[j] = 0.0;
            for i in 0..d {
                h[(i, j)] = col[i];
            }
        }
        // hvp columns agree with the transpose only up to rounding
        let sym = (&h + h.transpose()) * 0.5;
        Ok(sym)
    }

    fn smoothness(&self) -> f64 {
        // X^T X is block diagonal: 2 m sum x x^T on the head, 2 sum s^2 I on the tail
        let base = self.base();
        let head = base.smoothness() * base.len() as f64 * 2.0 * self.tail_dim() as f64;
        let tail = 2.0 * self.pad().iter().map(|s| s * s).sum::<f64>() / 4.0;
        head.max(tail) / self.len() as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn one_dim(c_plus: usize, c_minus: usize) -> Dataset {
        let mut rows = vec![[1.0]; c_plus];
        rows.extend(std::iter::repeat_n([-1.0], c_minus));
        Dataset::from_rows(&rows).unwrap()
    }

    #[test]
    fn scalar_helpers_are_stable() {
        assert_eq!(softplus(1000.0), 1000.0);
        assert!(softplus(-1000.0) >= 0.0 && softplus(-1000.0) < 1e-300);
        assert_eq!(sigmoid(-800.0), 0.0);
        assert_eq!(sigmoid(800.0), 1.0);
        assert_eq!(sigmoid_prime(0.0), 0.25);
        assert!((sigmoid(0.3) + sigmoid(-0.3) - 1.0).abs() < 1e-16);
    }

    #[test]
    fn loss_at_origin_is_log_two() {
        let d = Dataset::from_rows(&[[1.0, 2.0], [-3.0, 0.5], [0.0, 0.0]]).unwrap();
        assert!((loss(&[0.0, 0.0], &d).unwrap() - std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn loss_two_point_direct() {
        let d = one_dim(1, 1);
        let want = ((-5.0f64).exp().ln_1p() + 5.0f64.exp().ln_1p()) / 2.0;
        assert!((loss(&[5.0], &d).unwrap() - want).abs() < 1e-15);
    }

    #[test]
    fn one_dim_gradient_closed_form() {
        let d = one_dim(3, 1);
        for w in [-4.0, -1.0, 0.0, 0.5, 3.0_f64.ln(), 2.0, 7.0] {
            let g = grad(&[w], &d).unwrap()[0];
            assert!((g - (sigmoid(w) - 0.75)).abs() < 1e-15, "w = {w}");
        }
        assert!(grad(&[3.0_f64.ln()], &d).unwrap()[0].abs() < 1e-14);
    }

    #[test]
    fn hessian_at_origin_is_scaled_gram() {
        let d = Dataset::from_rows(&[[1.0, 2.0], [-3.0, 0.5], [0.2, -0.7]]).unwrap();
        let h = hessian(&[0.0, 0.0], &d).unwrap();
        let x = DMatrix::from_row_slice(3, 2, d.as_slice());
        let want = x.transpose() * x / 12.0;
        assert!((h - want).amax() < 1e-15);
    }

    #[test]
    fn one_dim_hessian_at_solution() {
        for (p, m) in [(3, 1), (5, 2), (10, 1)] {
            let c = p as f64 / m as f64;
            let h = hessian(&[c.ln()], &one_dim(p, m)).unwrap()[(0, 0)];
            assert!((h - c / ((c + 1.0) * (c + 1.0))).abs() < 1e-15);
        }
    }

    #[test]
    fn hvp_of_zero_is_zero() {
        let d = Dataset::from_rows(&[[1.0, 2.0], [-3.0, 0.5]]).unwrap();
        assert_eq!(hvp(&[0.3, 0.1], &[0.0, 0.0], &d).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn dimension_mismatch_errors() {
        let d = Dataset::from_rows(&[[1.0, 2.0]]).unwrap();
        assert!(matches!(loss(&[1.0], &d), Err(Error::DimensionMismatch { expected: 2, found: 1 })));
        assert!(grad(&[1.0, 2.0, 3.0], &d).is_err());
        assert!(hessian(&[1.0], &d).is_err());
        assert!(hvp(&[1.0, 2.0], &[1.0], &d).is_err());
        let lifted = LiftedDataset::new(d.scaled(0.1), 4).unwrap();
        assert!(lifted_grad(&[1.0, 2.0], &lifted).is_err());
    }

    #[test]
    fn smoothness_examples() {
        assert!((smoothness(&one_dim(3, 2)) - 0.25).abs() < 1e-15);
        let single = Dataset::from_rows(&[[3.0, 4.0]]).unwrap();
        assert!((smoothness(&single) - 25.0 / 4.0).abs() < 1e-13);
        // wide data goes through the n x n Gram
        let wide = Dataset::from_rows(&[[1.0, 0.0, 2.0, 0.0], [0.0, 1.0, 0.0, 0.0]]).unwrap();
        assert!((smoothness(&wide) - 5.0 / 8.0).abs() < 1e-14);
    }

    #[test]
    fn lifted_grad_with_zero_tail_reduces_to_base() {
        let base = Dataset::from_rows(&[[0.3, -0.2], [-0.5, 0.1], [0.1, 0.9], [0.6, 0.6]]).unwrap();
        let lifted = LiftedDataset::new(base.clone(), 9).unwrap();
        let w = [0.7, -1.3, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0];
        let g = lifted_grad(&w, &lifted).unwrap();
        let gb = grad(&w[..2], &base).unwrap();
        for k in 0..2 {
            assert!((g[k] - gb[k]).abs() <= 4.0 * f64::EPSILON * gb[k].abs());
        }
        assert!(g[2..].iter().all(|&t| t == 0.0));
    }

    #[test]
    fn lifted_smoothness_matches_materialized() {
        let base = Dataset::from_rows(&[[0.3, -0.2], [-0.5, 0.1], [0.1, 0.9]]).unwrap();
        for d in [3, 4, 10, 30] {
            let lifted = LiftedDataset::new(base.clone(), d).unwrap();
            let dense = lifted.materialize().unwrap();
            let a = lifted.smoothness();
            let b = dense.smoothness();
            assert!((a - b).abs() < 1e-14, "d = {d}: {a} vs {b}");
        }
    }

    proptest! {
        #[test]
        fn loss_is_convex_along_lines(
            rows in prop::collection::vec(prop::collection::vec(-3.0f64..3.0, 3), 1..12),
            w in prop::collection::vec(-5.0f64..5.0, 3),
            u in prop::collection::vec(-1.0f64..1.0, 3),
        ) {
            let d = Dataset::from_rows(&rows).unwrap();
            let h = 0.05;
            let f = |t: f64| {
                let p: Vec<f64> = w.iter().zip(&u).map(|(a, b)| a + t * b).collect();
                loss(&p, &d).unwrap()
            };
            for k in -5..5 {
                let t = k as f64 * h;
                let second = f(t - h) - 2.0 * f(t) + f(t + h);
                prop_assert!(second >= -1e-10);
            }
        }

        #[test]
        fn hessian_is_symmetric_psd(
            rows in prop::collection::vec(prop::collection::vec(-3.0f64..3.0, 3), 1..12),
            w in prop::collection::vec(-5.0f64..5.0, 3),
        ) {
            let d = Dataset::from_rows(&rows).unwrap();
            let h = hessian(&w, &d).unwrap();
            prop_assert!((&h - h.transpose()).amax() <= 1e-14);
            prop_assert!(linalg::sym_eigenvalues(&h)[0] >= -1e-12);
        }
    }
}
