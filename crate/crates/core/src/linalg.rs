//! Small dense-vector helpers and symmetric eigenvalue routines.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// `y += alpha * x`
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Largest eigenvalue of a dense symmetric matrix.
pub fn sym_max_eigenvalue(m: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(m.clone()).eigenvalues.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

/// Eigenvalues of a dense symmetric matrix, ascending.
pub fn sym_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    let mut ev: Vec<f64> = SymmetricEigen::new(m.clone()).eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// Options for [`top_eigenvalue`].
#[derive(Debug, Clone, Copy)]
pub struct EigOptions {
    /// Relative tolerance on successive Ritz values.
    pub tol: f64,
    /// Budget of operator applications.
    pub max_iters: usize,
    pub seed: u64,
    /// Krylov block size between restarts.
    pub krylov_dim: usize,
}

impl Default for EigOptions {
    fn default() -> Self {
        Self { tol: 1e-12, max_iters: 100_000, seed: 0x5eed, krylov_dim: 24 }
    }
}

/// Largest eigenvalue of a symmetric positive semidefinite operator given
/// only through matrix-vector products.
///
/// Power iteration from a seeded random vector, accelerated by Rayleigh-Ritz
/// on the Krylov block built from each restart vector (explicitly restarted
/// Lanczos with full reorthogonalization). Stops when successive top Ritz
/// values agree to `tol` relative and the Ritz residual is below `sqrt(tol)`
/// relative, or when the Krylov space becomes invariant.
pub fn top_eigenvalue<F>(dim: usize, mut apply: F, opts: EigOptions) -> Result<f64>
where
    F: FnMut(&[f64]) -> Result<Vec<f64>>,
{
    if dim == 0 {
        return Err(Error::InvalidParameter("operator dimension is zero".into()));
    }
    if dim == 1 {
        return Ok(apply(&[1.0])?[0]);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
    let n0 = norm(&v);
    v.iter_mut().for_each(|x| *x /= n0);

    let m = opts.krylov_dim.clamp(2, dim);
    let mut applied = 0usize;
    let mut prev = f64::NAN;
    while applied < opts.max_iters {
        let mut basis: Vec<Vec<f64>> = vec![v.clone()];
        let mut alphas = Vec::with_capacity(m);
        let mut betas: Vec<f64> = Vec::with_capacity(m);
        let mut invariant = false;
        let mut last_beta = 0.0;
        for j in 0..m {
            let mut z = apply(&basis[j])?;
            applied += 1;
            if z.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFinite("operator application".into()));
            }
            let alpha = dot(&basis[j], &z);
            alphas.push(alpha);
            // two passes of classical Gram-Schmidt against the whole basis
            for _ in 0..2 {
                for q in &basis {
                    let c = dot(q, &z);
                    axpy(-c, q, &mut z);
                }
            }
            let beta = norm(&z);
            let scale = alphas.iter().fold(0.0f64, |a, b| a.max(b.abs())).max(f64::MIN_POSITIVE);
            if beta <= 1e-14 * scale {
                invariant = true;
                last_beta = 0.0;
                break;
            }
            last_beta = beta;
            if j + 1 < m {
                betas.push(beta);
                z.iter_mut().for_each(|x| *x /= beta);
                basis.push(z);
            }
        }
        let k = alphas.len();
        let mut t = DMatrix::<f64>::zeros(k, k);
        for i in 0..k {
            t[(i, i)] = alphas[i];
            if i + 1 < k {
                t[(i, i + 1)] = betas[i];
                t[(i + 1, i)] = betas[i];
            }
        }
        let eig = SymmetricEigen::new(t);
        let (top_idx, theta) = eig
            .eigenvalues
            .iter()
            .copied()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .expect("non-empty tridiagonal");
        let y: DVector<f64> = eig.eigenvectors.column(top_idx).into_owned();
        let residual = last_beta * y[k - 1].abs();

        let mut next = vec![0.0; dim];
        for (coef, q) in y.iter().zip(&basis) {
            axpy(*coef, q, &mut next);
        }
        let nn = norm(&next);
        next.iter_mut().for_each(|x| *x /= nn);
        v = next;

        let scale = theta.abs().max(f64::MIN_POSITIVE);
        if invariant {
            return Ok(theta);
        }
        if (theta - prev).abs() <= opts.tol * scale && residual <= opts.tol.sqrt() * scale {
            return Ok(theta);
        }
        prev = theta;
    }
    Err(Error::NoConvergence { what: "top eigenvalue iteration", iterations: applied })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dense_apply(m: &DMatrix<f64>) -> impl FnMut(&[f64]) -> Result<Vec<f64>> + '_ {
        move |v| Ok((m * DVector::from_column_slice(v)).iter().copied().collect())
    }

    #[test]
    fn matches_dense_eigensolve() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for dim in [2, 3, 5, 12, 40] {
            let a = DMatrix::<f64>::from_fn(dim, dim, |_, _| StandardNormal.sample(&mut rng));
            let m = &a * a.transpose();
            let got = top_eigenvalue(dim, dense_apply(&m), EigOptions::default()).unwrap();
            let want = sym_max_eigenvalue(&m);
            assert!((got - want).abs() <= 1e-10 * want, "dim {dim}: {got} vs {want}");
        }
    }

    #[test]
    fn nearly_degenerate_top_pair() {
        // gap of one part in 10^6 between the two largest eigenvalues
        let diag = [1.0, 1.0 - 1e-6, 0.5, 0.25, 0.1, 0.1, 0.1, 0.0];
        let m = DMatrix::from_diagonal(&DVector::from_column_slice(&diag));
        let got = top_eigenvalue(diag.len(), dense_apply(&m), EigOptions::default()).unwrap();
        assert!((got - 1.0).abs() < 1e-12);
    }

    #[test]
    fn scalar_operator() {
        let got = top_eigenvalue(1, |v| Ok(vec![3.5 * v[0]]), EigOptions::default()).unwrap();
        assert_eq!(got, 3.5);
    }
}
