use crate::error::{Error, Result};

/// Largest ambient dimension for which a lifted dataset (or its Hessian) is
/// ever expanded into dense storage.
pub const MATERIALIZE_LIMIT: usize = 64;

/// Dense example matrix with labels folded into the rows.
///
/// Row `i` stores `y_i * x_i`, so every downstream routine treats the label
/// as `+1`. Storage is row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    n: usize,
    dim: usize,
    data: Vec<f64>,
}

impl Dataset {
    /// Builds a dataset from already-folded rows.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let dim = rows
            .first()
            .map(|r| r.as_ref().len())
            .ok_or_else(|| Error::InvalidDataset("dataset has no examples".into()))?;
        let mut data = Vec::with_capacity(rows.len() * dim);
        for (i, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != dim {
                return Err(Error::InvalidDataset(format!("row {i} has {} columns, expected {dim}", row.len())));
            }
            data.extend_from_slice(row);
        }
        Self::from_flat(rows.len(), dim, data)
    }

    /// Builds a dataset from raw examples and labels in `{-1, +1}`, folding
    /// each label into its row.
    pub fn from_labeled_rows<R: AsRef<[f64]>>(rows: &[R], labels: &[f64]) -> Result<Self> {
        if rows.len() != labels.len() {
            return Err(Error::InvalidDataset(format!("{} rows but {} labels", rows.len(), labels.len())));
        }
        let folded = rows
            .iter()
            .zip(labels)
            .enumerate()
            .map(|(i, (row, &y))| {
                if y == 1.0 || y == -1.0 {
                    Ok(row.as_ref().iter().map(|v| v * y).collect::<Vec<f64>>())
                } else {
                    Err(Error::InvalidDataset(format!("label {y} at row {i} is not +1 or -1")))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_rows(&folded)
    }

    pub fn from_flat(n: usize, dim: usize, data: Vec<f64>) -> Result<Self> {
        if n == 0 || dim == 0 {
            return Err(Error::InvalidDataset(format!("shape {n}x{dim} is empty")));
        }
        if data.len() != n * dim {
            return Err(Error::InvalidDataset(format!(
                "buffer of length {} does not match shape {n}x{dim}",
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidDataset(format!("non-finite entry at row {}, column {}", pos / dim, pos % dim)));
        }
        Ok(Self { n, dim, data })
    }

    /// Number of examples.
    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.dim)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row_norms(&self) -> Vec<f64> {
        self.rows().map(crate::linalg::norm).collect()
    }

    pub fn max_row_norm(&self) -> f64 {
        self.rows().map(crate::linalg::norm).fold(0.0, f64::max)
    }

    /// Returns a copy with every entry multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self { n: self.n, dim: self.dim, data: self.data.iter().map(|v| v * factor).collect() }
    }
}

/// Implicit sphere-lifted dataset.
///
/// Every base row `x_i` (norm at most one) stands for the `2 (d - d_b)`
/// examples `(x_i, +s_i e_j)` and `(x_i, -s_i e_j)`, `j = 1..d - d_b`, with
/// `s_i = sqrt(1 - |x_i|^2)`, so each implicit example has unit norm. Only the
/// base rows and the padding magnitudes are stored.
#[derive(Debug, Clone, PartialEq)]
pub struct LiftedDataset {
    base: Dataset,
    pad: Vec<f64>,
    ambient_dim: usize,
}

impl LiftedDataset {
    /// Rows with norm in `(1, 1 + 1e-12]` are treated as lying on the sphere.
    pub const NORM_SLACK: f64 = 1e-12;

    pub fn new(base: Dataset, ambient_dim: usize) -> Result<Self> {
        if ambient_dim <= base.dim() {
            return Err(Error::InvalidParameter(format!(
                "ambient dimension {ambient_dim} must exceed the base dimension {}",
                base.dim()
            )));
        }
        let pad = base
            .rows()
            .enumerate()
            .map(|(i, row)| {
                let sq: f64 = row.iter().map(|v| v * v).sum();
                if sq.sqrt() > 1.0 + Self::NORM_SLACK {
                    Err(Error::InvalidDataset(format!(
                        "base row {i} has norm {} > 1; normalize into the unit ball first",
                        sq.sqrt()
                    )))
                } else {
                    Ok((1.0 - sq).max(0.0).sqrt())
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { base, pad, ambient_dim })
    }

    pub fn base(&self) -> &Dataset {
        &self.base
    }

    /// Padding magnitudes `s_i`.
    pub fn pad(&self) -> &[f64] {
        &self.pad
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    pub fn base_dim(&self) -> usize {
        self.base.dim()
    }

    /// Number of padded coordinates, `d - d_b`.
    pub fn tail_dim(&self) -> usize {
        self.ambient_dim - self.base.dim()
    }

    /// Number of implicit examples, `2 (d - d_b) n_b`.
    pub fn len(&self) -> usize {
        2 * self.tail_dim() * self.base.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Expands the implicit examples in the order
    /// `(x_i, s_i e_1), .., (x_i, s_i e_m), (x_i, -s_i e_1), .., (x_i, -s_i e_m)`
    /// for each base row in turn.
    pub fn materialize(&self) -> Result<Dataset> {
        if self.ambient_dim > MATERIALIZE_LIMIT {
            return Err(Error::DimensionTooLarge { dim: self.ambient_dim, limit: MATERIALIZE_LIMIT });
        }
        Ok(self.materialize_unchecked())
    }

    pub(crate) fn materialize_unchecked(&self) -> Dataset {
        let d = self.ambient_dim;
        let db = self.base.dim();
        let m = self.tail_dim();
        let mut data = Vec::with_capacity(self.len() * d);
        for (row, &s) in self.base.rows().zip(&self.pad) {
            for sign in [1.0, -1.0] {
                for j in 0..m {
                    let start = data.len();
                    data.extend_from_slice(row);
                    data.resize(start + d, 0.0);
                    data[start + db + j] = sign * s;
                }
            }
        }
        Dataset::from_flat(self.len(), d, data).expect("lifted rows are finite")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn labels_fold_into_rows() {
        let d = Dataset::from_labeled_rows(&[[1.0, 2.0], [3.0, -1.0]], &[1.0, -1.0]).unwrap();
        assert_eq!(d.row(0), &[1.0, 2.0]);
        assert_eq!(d.row(1), &[-3.0, 1.0]);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(Dataset::from_rows::<[f64; 1]>(&[]).is_err());
        assert!(Dataset::from_rows(&[vec![1.0], vec![1.0, 2.0]]).is_err());
        assert!(Dataset::from_rows(&[[f64::NAN]]).is_err());
        assert!(Dataset::from_labeled_rows(&[[1.0]], &[0.5]).is_err());
    }

    #[test]
    fn lifted_counts_and_ordering() {
        let base = Dataset::from_rows(&[[0.6, 0.0], [0.0, 0.8], [0.3, 0.4], [1.0, 0.0]]).unwrap();
        let lifted = LiftedDataset::new(base, 6).unwrap();
        assert_eq!(lifted.len(), 32);
        let x = lifted.materialize().unwrap();
        assert_eq!(x.len(), 32);
        assert_eq!(x.row(0), &[0.6, 0.0, 0.8, 0.0, 0.0, 0.0]);
        assert_eq!(x.row(5), &[0.6, 0.0, 0.0, -0.8, 0.0, 0.0]);
        // the unit-norm base row pads with zeros in every copy
        for r in 24..32 {
            assert_eq!(&x.row(r)[2..], &[0.0; 4]);
        }
    }

    #[test]
    fn lifted_rejects_rows_outside_ball() {
        let base = Dataset::from_rows(&[[1.0, 0.1]]).unwrap();
        assert!(LiftedDataset::new(base.clone(), 5).is_err());
        assert!(LiftedDataset::new(base.scaled(0.5), 2).is_err());
    }

    #[test]
    fn materialize_limit() {
        let base = Dataset::from_rows(&[[0.5, 0.0]]).unwrap();
        let lifted = LiftedDataset::new(base, MATERIALIZE_LIMIT + 1).unwrap();
        assert!(matches!(lifted.materialize(), Err(Error::DimensionTooLarge { .. })));
    }
}
