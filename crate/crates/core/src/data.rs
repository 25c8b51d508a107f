use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `n` points in `R^d`, stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DatasetRepr", into = "DatasetRepr")]
pub struct Dataset {
    n: usize,
    d: usize,
    values: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct DatasetRepr {
    n: usize,
    d: usize,
    points: Vec<f64>,
}

impl TryFrom<DatasetRepr> for Dataset {
    type Error = Error;

    fn try_from(r: DatasetRepr) -> Result<Self> {
        Dataset::from_row_major(r.n, r.d, r.points)
    }
}

impl From<Dataset> for DatasetRepr {
    fn from(ds: Dataset) -> Self {
        DatasetRepr {
            n: ds.n,
            d: ds.d,
            points: ds.values,
        }
    }
}

impl Dataset {
    pub fn from_row_major(n: usize, d: usize, values: Vec<f64>) -> Result<Self> {
        if n == 0 || d == 0 {
            return Err(Error::input(format!("dataset must be non-empty, got {n}x{d}")));
        }
        if values.len() != n * d {
            return Err(Error::input(format!(
                "expected {} values for a {n}x{d} dataset, got {}",
                n * d,
                values.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::input(format!(
                "non-finite entry at row {}, column {}",
                pos / d,
                pos % d
            )));
        }
        Ok(Dataset { n, d, values })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let n = rows.len();
        let d = rows.first().map_or(0, |r| r.as_ref().len());
        let mut values = Vec::with_capacity(n * d);
        for (i, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != d {
                return Err(Error::input(format!("row {i} has {} columns, expected {d}", row.len())));
            }
            values.extend_from_slice(row);
        }
        Self::from_row_major(n, d, values)
    }

    pub fn from_matrix(m: &DMatrix<f64>) -> Result<Self> {
        let (n, d) = m.shape();
        let mut values = Vec::with_capacity(n * d);
        for i in 0..n {
            values.extend(m.row(i).iter().copied());
        }
        Self::from_row_major(n, d, values)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.values[i * self.d..(i + 1) * self.d]
    }

    pub fn points(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.d)
    }

    pub fn as_row_major(&self) -> &[f64] {
        &self.values
    }

    /// The `n x d` matrix of points.
    pub fn to_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.n, self.d, &self.values)
    }

    pub fn sq_norms(&self) -> Vec<f64> {
        self.points().map(|x| dot(x, x)).collect()
    }

    /// Rows at `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> Result<Self> {
        let mut values = Vec::with_capacity(indices.len() * self.d);
        for &i in indices {
            if i >= self.n {
                return Err(Error::Index { index: i, len: self.n });
            }
            values.extend_from_slice(self.point(i));
        }
        Self::from_row_major(indices.len(), self.d, values)
    }

    pub fn head(&self, count: usize) -> Result<Self> {
        let count = count.min(self.n);
        Self::from_row_major(count, self.d, self.values[..count * self.d].to_vec())
    }

    pub(crate) fn check_same_dim(&self, other: &Dataset) -> Result<()> {
        if self.d != other.d {
            return Err(Error::input(format!("dimension mismatch: {} vs {}", self.d, other.d)));
        }
        Ok(())
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
