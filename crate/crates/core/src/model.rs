//! Fitted cluster models, partitions and ground-truth mixtures.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::MixtureJson;
use crate::gaussian::{GammaIndex, GaussianComponent};
use crate::tolerances::TOLERANCES;

fn check_proportions(proportions: &[f64], k: usize, strictly_positive: bool) -> Result<()> {
    if proportions.len() != k {
        return Err(Error::DimensionMismatch {
            expected: k,
            found: proportions.len(),
        });
    }
    for (i, &t) in proportions.iter().enumerate() {
        let ok = if strictly_positive { t > 0.0 } else { t >= 0.0 };
        if !ok || !t.is_finite() {
            return Err(Error::InvalidInput(format!("invalid proportion {t} at {i}")));
        }
    }
    let sum: f64 = proportions.iter().sum();
    if (sum - 1.0).abs() > TOLERANCES.proportion_sum {
        return Err(Error::InvalidInput(format!(
            "proportions sum to {sum}, not 1"
        )));
    }
    Ok(())
}

fn check_dims(components: &[GaussianComponent]) -> Result<usize> {
    let p = components
        .first()
        .ok_or_else(|| Error::InvalidInput("no components".into()))?
        .dim();
    if let Some(c) = components.iter().find(|c| c.dim() != p) {
        return Err(Error::DimensionMismatch {
            expected: p,
            found: c.dim(),
        });
    }
    Ok(p)
}

/// Population mixture `g(x) = sum_k tau_k f_k(x)` with Gaussian `f_k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MixtureJson", into = "MixtureJson")]
pub struct MixtureSpec {
    components: Vec<GaussianComponent>,
    proportions: Vec<f64>,
}

impl MixtureSpec {
    pub fn new(components: Vec<GaussianComponent>, proportions: Vec<f64>) -> Result<Self> {
        check_dims(&components)?;
        check_proportions(&proportions, components.len(), true)?;
        Ok(Self {
            components,
            proportions,
        })
    }

    pub fn equal_weights(components: Vec<GaussianComponent>) -> Result<Self> {
        let k = components.len();
        let proportions = equal_proportions(k);
        Self::new(components, proportions)
    }

    pub fn components(&self) -> &[GaussianComponent] {
        &self.components
    }

    pub fn proportions(&self) -> &[f64] {
        &self.proportions
    }

    pub fn k(&self) -> usize {
        self.components.len()
    }

    pub fn dim(&self) -> usize {
        self.components[0].dim()
    }

    /// Mixture density at `x`.
    pub fn density(&self, x: &[f64]) -> Result<f64> {
        let mut total = 0.0;
        for (c, &t) in self.components.iter().zip(&self.proportions) {
            total += t * c.factor()?.log_density(x).exp();
        }
        Ok(total)
    }
}

/// `1/k` repeated `k` times, with the rounding error folded into the last
/// entry so the sum is exactly representable as one.
pub(crate) fn equal_proportions(k: usize) -> Vec<f64> {
    if k == 0 {
        return Vec::new();
    }
    let mut v = vec![1.0 / k as f64; k];
    let head: f64 = v[..k - 1].iter().sum();
    v[k - 1] = 1.0 - head;
    v
}

/// Cluster centers and covariances found by spontaneous clustering.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterModel {
    components: Vec<GaussianComponent>,
    proportions: Vec<f64>,
    gamma_mu: GammaIndex,
    gamma_sigma: GammaIndex,
}

impl ClusterModel {
    pub fn new(
        components: Vec<GaussianComponent>,
        proportions: Vec<f64>,
        gamma_mu: GammaIndex,
        gamma_sigma: GammaIndex,
    ) -> Result<Self> {
        check_dims(&components)?;
        check_proportions(&proportions, components.len(), false)?;
        Ok(Self {
            components,
            proportions,
            gamma_mu,
            gamma_sigma,
        })
    }

    /// Model with provisional equal proportions, to be replaced after
    /// assignment.
    pub(crate) fn unassigned(
        components: Vec<GaussianComponent>,
        gamma_mu: GammaIndex,
        gamma_sigma: GammaIndex,
    ) -> Result<Self> {
        let k = components.len();
        Self::new(components, equal_proportions(k), gamma_mu, gamma_sigma)
    }

    pub fn components(&self) -> &[GaussianComponent] {
        &self.components
    }

    pub fn proportions(&self) -> &[f64] {
        &self.proportions
    }

    pub fn gamma_mu(&self) -> GammaIndex {
        self.gamma_mu
    }

    pub fn gamma_sigma(&self) -> GammaIndex {
        self.gamma_sigma
    }

    pub fn k(&self) -> usize {
        self.components.len()
    }

    pub fn dim(&self) -> usize {
        self.components[0].dim()
    }

    pub(crate) fn into_parts(self) -> (Vec<GaussianComponent>, Vec<f64>) {
        (self.components, self.proportions)
    }
}

/// Hard assignment of each observation to a cluster label in `0..k`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    labels: Vec<usize>,
    k: usize,
}

impl Partition {
    pub fn new(labels: Vec<usize>, k: usize) -> Result<Self> {
        if let Some(&bad) = labels.iter().find(|&&l| l >= k) {
            return Err(Error::InvalidInput(format!(
                "label {bad} out of range for k = {k}"
            )));
        }
        Ok(Self { labels, k })
    }

    /// Relabels arbitrary identifiers to `0..k` in order of first appearance.
    pub fn from_identifiers<T: Eq + std::hash::Hash + Clone>(ids: &[T]) -> Self {
        let mut seen = std::collections::HashMap::new();
        let labels = ids
            .iter()
            .map(|id| {
                let next = seen.len();
                *seen.entry(id.clone()).or_insert(next)
            })
            .collect();
        Self {
            labels,
            k: seen.len(),
        }
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &l in &self.labels {
            sizes[l] += 1;
        }
        sizes
    }
}
