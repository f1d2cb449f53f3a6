//! Power index and Gaussian components.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tolerances::TOLERANCES;

/// Strictly positive power index of the gamma-divergence.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct GammaIndex(f64);

impl GammaIndex {
    pub fn new(gamma: f64) -> Result<Self> {
        if gamma.is_finite() && gamma > 0.0 {
            Ok(Self(gamma))
        } else {
            Err(Error::InvalidInput(format!(
                "gamma must be finite and > 0 (got {gamma})"
            )))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for GammaIndex {
    type Error = Error;
    fn try_from(v: f64) -> Result<Self> {
        Self::new(v)
    }
}

impl From<GammaIndex> for f64 {
    fn from(g: GammaIndex) -> f64 {
        g.0
    }
}

impl std::fmt::Display for GammaIndex {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        self.0.fmt(f)
    }
}

/// Normal distribution `N(mu, sigma)` with a symmetric positive-definite
/// covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianComponent {
    mu: DVector<f64>,
    sigma: DMatrix<f64>,
}

impl GaussianComponent {
    pub fn new(mu: DVector<f64>, sigma: DMatrix<f64>) -> Result<Self> {
        let p = mu.len();
        if p == 0 {
            return Err(Error::InvalidInput("empty mean vector".into()));
        }
        if sigma.nrows() != p || sigma.ncols() != p {
            return Err(Error::DimensionMismatch {
                expected: p,
                found: sigma.nrows().max(sigma.ncols()),
            });
        }
        if mu.iter().chain(sigma.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite mean or covariance".into()));
        }
        for i in 0..p {
            for j in 0..i {
                if (sigma[(i, j)] - sigma[(j, i)]).abs() > TOLERANCES.symmetry {
                    return Err(Error::InvalidInput(format!(
                        "covariance not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        let sigma = symmetrize(sigma);
        let eig = SymmetricEigen::new(sigma.clone()).eigenvalues;
        if eig.min() <= 0.0 {
            return Err(Error::InvalidInput(format!(
                "covariance not positive definite (smallest eigenvalue {:.3e})",
                eig.min()
            )));
        }
        Ok(Self { mu, sigma })
    }

    pub fn from_slices(mu: &[f64], sigma_row_major: &[f64]) -> Result<Self> {
        let p = mu.len();
        if sigma_row_major.len() != p * p {
            return Err(Error::DimensionMismatch {
                expected: p * p,
                found: sigma_row_major.len(),
            });
        }
        Self::new(
            DVector::from_column_slice(mu),
            DMatrix::from_row_slice(p, p, sigma_row_major),
        )
    }

    /// `N(mu, I)`.
    pub fn identity(mu: &[f64]) -> Self {
        let p = mu.len();
        Self {
            mu: DVector::from_column_slice(mu),
            sigma: DMatrix::identity(p, p),
        }
    }

    /// `N(mu, s I)`.
    pub fn spherical(mu: &[f64], variance: f64) -> Result<Self> {
        let p = mu.len();
        Self::new(
            DVector::from_column_slice(mu),
            DMatrix::identity(p, p) * variance,
        )
    }

    pub fn dim(&self) -> usize {
        self.mu.len()
    }

    pub fn mu(&self) -> &DVector<f64> {
        &self.mu
    }

    pub fn sigma(&self) -> &DMatrix<f64> {
        &self.sigma
    }

    pub fn with_mu(&self, mu: DVector<f64>) -> Self {
        Self {
            mu,
            sigma: self.sigma.clone(),
        }
    }

    /// Cholesky factorization used for every density and distance evaluation.
    pub fn factor(&self) -> Result<FactoredGaussian> {
        FactoredGaussian::new(self)
    }

    /// Returns `Some(s)` when the covariance equals `s I` within `tol`.
    pub fn spherical_variance(&self, tol: f64) -> Option<f64> {
        let p = self.dim();
        let s = self.sigma[(0, 0)];
        for i in 0..p {
            for j in 0..p {
                let target = if i == j { s } else { 0.0 };
                if (self.sigma[(i, j)] - target).abs() > tol {
                    return None;
                }
            }
        }
        Some(s)
    }
}

pub(crate) fn symmetrize(m: DMatrix<f64>) -> DMatrix<f64> {
    (&m + m.transpose()) * 0.5
}

/// A Gaussian with its covariance factored as `L L^T`.
#[derive(Debug, Clone)]
pub struct FactoredGaussian {
    mu: Vec<f64>,
    /// Lower-triangular factor, row-major.
    lower: Vec<f64>,
    log_det: f64,
}

impl FactoredGaussian {
    fn new(c: &GaussianComponent) -> Result<Self> {
        let p = c.dim();
        let eig = SymmetricEigen::new(c.sigma.clone()).eigenvalues;
        let (lo, hi) = (eig.min(), eig.max());
        let condition = if lo > 0.0 { hi / lo } else { f64::INFINITY };
        if !(condition <= TOLERANCES.max_condition) {
            return Err(Error::SingularCovariance { condition });
        }
        let chol = c
            .sigma
            .clone()
            .cholesky()
            .ok_or(Error::SingularCovariance { condition })?;
        let l = chol.l();
        let mut lower = vec![0.0; p * p];
        let mut log_det = 0.0;
        for i in 0..p {
            for j in 0..=i {
                lower[i * p + j] = l[(i, j)];
            }
            log_det += 2.0 * l[(i, i)].ln();
        }
        Ok(Self {
            mu: c.mu.iter().copied().collect(),
            lower,
            log_det,
        })
    }

    pub fn dim(&self) -> usize {
        self.mu.len()
    }

    pub fn mu(&self) -> &[f64] {
        &self.mu
    }

    pub fn log_det(&self) -> f64 {
        self.log_det
    }

    /// `(x - mu)^T Sigma^{-1} (x - mu)`, solving `L y = x - mu` into `scratch`.
    pub fn mahalanobis_sq_with(&self, x: &[f64], scratch: &mut [f64]) -> f64 {
        let p = self.mu.len();
        let mut acc = 0.0;
        for i in 0..p {
            let row = &self.lower[i * p..i * p + i];
            let partial: f64 = row.iter().zip(&scratch[..i]).map(|(l, y)| l * y).sum();
            let y = (x[i] - self.mu[i] - partial) / self.lower[i * p + i];
            scratch[i] = y;
            acc += y * y;
        }
        acc
    }

    pub fn mahalanobis_sq(&self, x: &[f64]) -> f64 {
        let mut scratch = vec![0.0; self.mu.len()];
        self.mahalanobis_sq_with(x, &mut scratch)
    }

    /// Log of the normal density at `x`.
    pub fn log_density(&self, x: &[f64]) -> f64 {
        let p = self.mu.len() as f64;
        -0.5 * (p * (2.0 * PI).ln() + self.log_det + self.mahalanobis_sq(x))
    }
}

/// `(x - mu)^T Sigma^{-1} (x - mu)` for a component.
pub fn mahalanobis_sq(x: &[f64], c: &GaussianComponent) -> Result<f64> {
    if x.len() != c.dim() {
        return Err(Error::DimensionMismatch {
            expected: c.dim(),
            found: x.len(),
        });
    }
    Ok(c.factor()?.mahalanobis_sq(x))
}

/// Normal density `phi(x, mu, s I)` in closed form.
pub(crate) fn spherical_density(x: &[f64], mu: &[f64], variance: f64) -> f64 {
    let p = x.len() as f64;
    let d2 = crate::data::squared_distance(x, mu);
    (2.0 * PI * variance).powf(-p / 2.0) * (-d2 / (2.0 * variance)).exp()
}
