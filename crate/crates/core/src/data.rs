//! Observation matrix.

use crate::error::{Error, Result};

/// An `n x p` matrix of finite observations, one row per observation.
///
/// Rows are stored contiguously so the hot loops in the optimizer can walk
/// observations as slices.
#[derive(Debug, Clone, PartialEq)]
pub struct DataSet {
    values: Vec<f64>,
    n: usize,
    p: usize,
    feature_names: Option<Vec<String>>,
}

impl DataSet {
    /// Builds a data set from row-major values.
    pub fn from_row_major(n: usize, p: usize, values: Vec<f64>) -> Result<Self> {
        if n == 0 || p == 0 {
            return Err(Error::InvalidInput(format!(
                "data set needs n >= 1 and p >= 1 (got {n} x {p})"
            )));
        }
        if values.len() != n * p {
            return Err(Error::DimensionMismatch {
                expected: n * p,
                found: values.len(),
            });
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "non-finite entry at row {}, column {}",
                pos / p,
                pos % p
            )));
        }
        Ok(Self {
            values,
            n,
            p,
            feature_names: None,
        })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let p = rows.first().map(|r| r.as_ref().len()).unwrap_or(0);
        let mut values = Vec::with_capacity(rows.len() * p);
        for row in rows {
            let row = row.as_ref();
            if row.len() != p {
                return Err(Error::DimensionMismatch {
                    expected: p,
                    found: row.len(),
                });
            }
            values.extend_from_slice(row);
        }
        Self::from_row_major(rows.len(), p, values)
    }

    /// One-dimensional data, one value per observation.
    pub fn from_column(values: &[f64]) -> Result<Self> {
        Self::from_row_major(values.len(), 1, values.to_vec())
    }

    pub fn with_feature_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.p {
            return Err(Error::DimensionMismatch {
                expected: self.p,
                found: names.len(),
            });
        }
        self.feature_names = Some(names);
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn feature_names(&self) -> Option<&[String]> {
        self.feature_names.as_deref()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.p..(i + 1) * self.p]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.values.chunks_exact(self.p)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Applies `f` to every entry, keeping the shape.
    pub fn map(&self, mut f: impl FnMut(usize, f64) -> f64) -> Result<Self> {
        let p = self.p;
        let values = self
            .values
            .iter()
            .enumerate()
            .map(|(idx, &v)| f(idx % p, v))
            .collect();
        let out = Self::from_row_major(self.n, self.p, values)?;
        Ok(match &self.feature_names {
            Some(names) => out.with_feature_names(names.clone())?,
            None => out,
        })
    }

    /// Data set made of the given rows, in the given order.
    pub fn select_rows(&self, indices: &[usize]) -> Result<Self> {
        let mut values = Vec::with_capacity(indices.len() * self.p);
        for &i in indices {
            values.extend_from_slice(self.row(i));
        }
        Self::from_row_major(indices.len(), self.p, values)
    }

    /// Per-feature `(min, max)`.
    pub fn bounds(&self) -> Vec<(f64, f64)> {
        let mut bounds = vec![(f64::INFINITY, f64::NEG_INFINITY); self.p];
        for row in self.rows() {
            for (b, &v) in bounds.iter_mut().zip(row) {
                b.0 = b.0.min(v);
                b.1 = b.1.max(v);
            }
        }
        bounds
    }

    pub fn column_means(&self) -> Vec<f64> {
        let mut mean = vec![0.0; self.p];
        for row in self.rows() {
            for (m, &v) in mean.iter_mut().zip(row) {
                *m += v;
            }
        }
        let n = self.n as f64;
        mean.iter_mut().for_each(|m| *m /= n);
        mean
    }
}

/// Largest per-feature range, `max_j (max_i x_ij - min_i x_ij)`.
pub fn max_range(data: &DataSet) -> f64 {
    data.bounds()
        .into_iter()
        .map(|(lo, hi)| hi - lo)
        .fold(0.0, f64::max)
}

pub(crate) fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}
