//! Gamma-loss functions, weights, and the gamma cross entropy family for
//! Gaussian models.
//!
//! Two normalizations of the sample loss are kept as they are used:
//! [`loss_mu`] averages over observations (identity covariance), while
//! [`loss_mu_sigma`] sums and carries the determinant factor. Their
//! minimizers coincide with those of the normalized cross entropy because
//! the two differ only by positive constants.

use std::f64::consts::PI;

use crate::data::{squared_distance, DataSet};
use crate::error::{Error, Result};
use crate::gaussian::{spherical_density, FactoredGaussian, GammaIndex, GaussianComponent};
use crate::model::MixtureSpec;
use crate::tolerances::TOLERANCES;

fn check_dim(data: &DataSet, p: usize) -> Result<()> {
    if data.p() != p {
        return Err(Error::DimensionMismatch {
            expected: data.p(),
            found: p,
        });
    }
    Ok(())
}

/// `-(gamma/2) (x_i - mu)^T Sigma^{-1} (x_i - mu)` for every observation.
pub(crate) fn exponents(data: &DataSet, f: &FactoredGaussian, gamma: f64) -> Vec<f64> {
    let mut scratch = vec![0.0; data.p()];
    data.rows()
        .map(|x| -0.5 * gamma * f.mahalanobis_sq_with(x, &mut scratch))
        .collect()
}

/// `log sum_i exp(a_i)` with the maximum shifted out.
pub(crate) fn log_sum_exp(a: &[f64]) -> f64 {
    let m = a.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + a.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
}

/// Softmax of `a`, computed after subtracting the maximum.
pub(crate) fn softmax(a: &[f64]) -> Vec<f64> {
    let m = a.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut w: Vec<f64> = a.iter().map(|v| (v - m).exp()).collect();
    let s: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= s);
    w
}

/// Gamma-loss of the identity-covariance normal at `mu`:
/// `-(1/n) sum_i exp(-(gamma/2) |x_i - mu|^2)`.
pub fn loss_mu(data: &DataSet, mu: &[f64], gamma: GammaIndex) -> Result<f64> {
    check_dim(data, mu.len())?;
    let g = gamma.value();
    let a: Vec<f64> = data
        .rows()
        .map(|x| -0.5 * g * squared_distance(x, mu))
        .collect();
    Ok(-(log_sum_exp(&a) - (data.n() as f64).ln()).exp())
}

/// Analytic gradient of [`loss_mu`] with respect to `mu`.
pub fn loss_mu_gradient(data: &DataSet, mu: &[f64], gamma: GammaIndex) -> Result<Vec<f64>> {
    check_dim(data, mu.len())?;
    let g = gamma.value();
    let mut grad = vec![0.0; mu.len()];
    for x in data.rows() {
        let e = (-0.5 * g * squared_distance(x, mu)).exp();
        for (gr, (xi, m)) in grad.iter_mut().zip(x.iter().zip(mu)) {
            *gr -= g * e * (xi - m);
        }
    }
    let n = data.n() as f64;
    grad.iter_mut().for_each(|v| *v /= n);
    Ok(grad)
}

/// Gamma-loss of `N(mu, Sigma)` without the `1/n` factor:
/// `-det(Sigma)^{-gamma/(2(1+gamma))} sum_i exp(-(gamma/2) q_i)`.
pub fn loss_mu_sigma(data: &DataSet, c: &GaussianComponent, gamma: GammaIndex) -> Result<f64> {
    check_dim(data, c.dim())?;
    let f = c.factor()?;
    Ok(loss_mu_sigma_factored(data, &f, gamma.value()))
}

pub(crate) fn loss_mu_sigma_factored(data: &DataSet, f: &FactoredGaussian, gamma: f64) -> f64 {
    let a = exponents(data, f, gamma);
    let log_det_term = -gamma / (2.0 * (1.0 + gamma)) * f.log_det();
    -(log_det_term + log_sum_exp(&a)).exp()
}

/// Normalized weights `w_gamma(x_i, mu, Sigma)`; non-negative and summing to one.
pub fn weights(data: &DataSet, c: &GaussianComponent, gamma: GammaIndex) -> Result<Vec<f64>> {
    check_dim(data, c.dim())?;
    let f = c.factor()?;
    Ok(softmax(&exponents(data, &f, gamma.value())))
}

/// Closed-form population gamma cross entropy of a spherical mixture against
/// `N(mu, I)`, up to a positive constant:
/// `-sum_k tau_k phi(mu, mu_k, (sigma_k^2 + 1/gamma) I)`.
pub fn gamma_cross_entropy_gaussian(
    g: &MixtureSpec,
    mu: &[f64],
    gamma: GammaIndex,
) -> Result<f64> {
    if mu.len() != g.dim() {
        return Err(Error::DimensionMismatch {
            expected: g.dim(),
            found: mu.len(),
        });
    }
    let inv_gamma = 1.0 / gamma.value();
    let mut total = 0.0;
    for (k, (c, &tau)) in g.components().iter().zip(g.proportions()).enumerate() {
        let s2 = c
            .spherical_variance(TOLERANCES.spherical)
            .ok_or(Error::NonSphericalComponent(k))?;
        let mean: Vec<f64> = c.mu().iter().copied().collect();
        total -= tau * spherical_density(mu, &mean, s2 + inv_gamma);
    }
    Ok(total)
}

/// Constant relating [`gamma_cross_entropy_gaussian`] to the unscaled
/// integral `-int g(x) phi(x, mu, I)^gamma dx`: the integral equals this
/// factor times the closed form.
pub fn cross_entropy_scale(p: usize, gamma: GammaIndex) -> f64 {
    let g = gamma.value();
    let p = p as f64;
    (2.0 * PI).powf(p * (1.0 - g) / 2.0) * g.powf(-p / 2.0)
}

/// Normalizing constant `(int phi(x)^{1+gamma} dx)^{-gamma/(1+gamma)}` of a
/// Gaussian, in closed form.
pub fn kappa(c: &GaussianComponent, gamma: GammaIndex) -> Result<f64> {
    let f = c.factor()?;
    Ok(kappa_from_log_det(c.dim(), f.log_det(), gamma.value()))
}

fn kappa_from_log_det(p: usize, log_det: f64, g: f64) -> f64 {
    let p = p as f64;
    let log_inner =
        0.5 * p * (1.0 + g).ln() + 0.5 * g * p * (2.0 * PI).ln() + 0.5 * g * log_det;
    (g / (1.0 + g) * log_inner).exp()
}

/// Sample gamma cross entropy `-kappa(theta) (1/n) sum_i phi(x_i, theta)^gamma`.
///
/// The gamma-divergence from the sampling density `g` is this value minus
/// the entropy `H_gamma(g)`, which does not depend on the model, so the two
/// share minimizers. `H_gamma(g)` is not estimable from a sample; see
/// [`gamma_entropy_mixture`] for known mixtures.
pub fn gamma_divergence(
    g_sample: &DataSet,
    c: &GaussianComponent,
    gamma: GammaIndex,
) -> Result<f64> {
    check_dim(g_sample, c.dim())?;
    let f = c.factor()?;
    let g = gamma.value();
    let log_phi: Vec<f64> = g_sample.rows().map(|x| g * f.log_density(x)).collect();
    let kappa = kappa_from_log_det(c.dim(), f.log_det(), g);
    Ok(-kappa * (log_sum_exp(&log_phi) - (g_sample.n() as f64).ln()).exp())
}

/// Gamma entropy `H_gamma(g) = -(int g^{1+gamma})^{1/(1+gamma)}` of a known
/// mixture in one or two dimensions, by trapezoid quadrature on a box
/// covering every component to eight standard deviations.
pub fn gamma_entropy_mixture(g: &MixtureSpec, gamma: GammaIndex, nodes: usize) -> Result<f64> {
    let p = g.dim();
    if p > 2 {
        return Err(Error::InvalidInput(
            "gamma entropy quadrature is available for p <= 2 only".into(),
        ));
    }
    if nodes < 3 {
        return Err(Error::InvalidInput("need at least 3 quadrature nodes".into()));
    }
    let factored: Vec<FactoredGaussian> = g
        .components()
        .iter()
        .map(|c| c.factor())
        .collect::<Result<_>>()?;
    let mut lo = vec![f64::INFINITY; p];
    let mut hi = vec![f64::NEG_INFINITY; p];
    for c in g.components() {
        for j in 0..p {
            let sd = c.sigma()[(j, j)].sqrt();
            lo[j] = lo[j].min(c.mu()[j] - 8.0 * sd);
            hi[j] = hi[j].max(c.mu()[j] + 8.0 * sd);
        }
    }
    let g1 = 1.0 + gamma.value();
    let density_pow = |x: &[f64]| -> f64 {
        let d: f64 = factored
            .iter()
            .zip(g.proportions())
            .map(|(f, t)| t * f.log_density(x).exp())
            .sum();
        d.powf(g1)
    };
    let step: Vec<f64> = (0..p).map(|j| (hi[j] - lo[j]) / (nodes - 1) as f64).collect();
    let edge = |i: usize| if i == 0 || i == nodes - 1 { 0.5 } else { 1.0 };
    let mut integral = 0.0;
    if p == 1 {
        for i in 0..nodes {
            integral += edge(i) * density_pow(&[lo[0] + i as f64 * step[0]]);
        }
        integral *= step[0];
    } else {
        for i in 0..nodes {
            for j in 0..nodes {
                let x = [lo[0] + i as f64 * step[0], lo[1] + j as f64 * step[1]];
                integral += edge(i) * edge(j) * density_pow(&x);
            }
        }
        integral *= step[0] * step[1];
    }
    Ok(-integral.powf(1.0 / g1))
}
