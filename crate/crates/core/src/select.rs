//! Choosing the power index: the range heuristic and AIC grid search.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::clustering::{
    complete_clustering, detect_centers, Clustering, CovarianceFit, RestartConfig,
};
use crate::data::{max_range, DataSet};
use crate::error::{Error, Result};
use crate::gaussian::GammaIndex;
use crate::model::{ClusterModel, Partition};
use crate::objective::log_sum_exp;
use crate::optimizer::IterationConfig;

/// Strictly increasing grid of power indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct GammaGrid {
    values: Vec<GammaIndex>,
}

impl GammaGrid {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidInput("empty gamma grid".into()));
        }
        if values.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidInput("gamma grid must be strictly increasing".into()));
        }
        let values = values
            .into_iter()
            .map(GammaIndex::new)
            .collect::<Result<_>>()?;
        Ok(Self { values })
    }

    /// `n` log-spaced points from `lo` to `hi` inclusive.
    pub fn log_spaced(lo: f64, hi: f64, n: usize) -> Result<Self> {
        if n == 0 || !(lo > 0.0) || !(hi >= lo) {
            return Err(Error::InvalidInput(format!("bad grid {lo}:{hi}:{n}")));
        }
        if n == 1 {
            return Self::new(vec![lo]);
        }
        let (a, b) = (lo.ln(), hi.ln());
        Self::new(
            (0..n)
                .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
                .collect(),
        )
    }

    pub fn values(&self) -> &[GammaIndex] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

impl Default for GammaGrid {
    fn default() -> Self {
        Self::log_spaced(0.05, 3.0, 20).expect("default grid is valid")
    }
}

impl TryFrom<Vec<f64>> for GammaGrid {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<GammaGrid> for Vec<f64> {
    fn from(g: GammaGrid) -> Self {
        g.values.into_iter().map(f64::from).collect()
    }
}

/// `gamma = 9 / (2 r^2)` with `r = R / (2 k_prior)`, i.e. `18 k^2 / R^2`.
pub fn gamma_by_range(data: &DataSet, k_prior: usize) -> Result<GammaIndex> {
    if k_prior < 2 {
        return Err(Error::InvalidInput(format!("k_prior must be >= 2 (got {k_prior})")));
    }
    let range = max_range(data);
    if range <= 0.0 {
        return Err(Error::ZeroRange);
    }
    let r = range / (2.0 * k_prior as f64);
    GammaIndex::new(9.0 / (2.0 * r * r))
}

/// Number of free parameters of a `k`-component full-covariance mixture in
/// `p` dimensions.
pub fn parameter_count(k: usize, p: usize) -> usize {
    k * p * (p + 3) / 2 + k - 1
}

/// AIC penalty `2 (K p (p + 3) / 2 + K - 1)`.
pub fn aic_penalty(k: usize, p: usize) -> f64 {
    2.0 * parameter_count(k, p) as f64
}

/// Sum of `log g(x_i)` for the mixture the model implies.
pub fn log_likelihood(data: &DataSet, model: &ClusterModel) -> Result<f64> {
    if let Some(k) = model.proportions().iter().position(|&t| t <= 0.0) {
        return Err(Error::ZeroDensity(k));
    }
    let factors = model
        .components()
        .iter()
        .map(|c| c.factor())
        .collect::<Result<Vec<_>>>()?;
    let log_tau: Vec<f64> = model.proportions().iter().map(|t| t.ln()).collect();
    let mut terms = vec![0.0; factors.len()];
    let mut total = 0.0;
    for x in data.rows() {
        for (t, (f, lt)) in terms.iter_mut().zip(factors.iter().zip(&log_tau)) {
            *t = lt + f.log_density(x);
        }
        total += log_sum_exp(&terms);
    }
    Ok(total)
}

/// `AIC = -2 sum_i log g(x_i) + 2 (K p (p + 3) / 2 + K - 1)` with `g` the
/// normal mixture weighted by assigned proportions.
pub fn aic(data: &DataSet, model: &ClusterModel, partition: &Partition) -> Result<f64> {
    if partition.n() != data.n() {
        return Err(Error::DimensionMismatch {
            expected: data.n(),
            found: partition.n(),
        });
    }
    if partition.k() != model.k() {
        return Err(Error::DimensionMismatch {
            expected: model.k(),
            found: partition.k(),
        });
    }
    let value = -2.0 * log_likelihood(data, model)? + aic_penalty(model.k(), data.p());
    if !value.is_finite() {
        return Err(Error::ZeroDensity(0));
    }
    Ok(value)
}

#[derive(Debug, Clone)]
pub struct AicRecord {
    pub gamma_mu: GammaIndex,
    pub gamma_sigma: GammaIndex,
    pub k: usize,
    pub aic: f64,
    pub clustering: Clustering,
}

#[derive(Debug, Clone)]
pub struct AicReport {
    /// Successful evaluations in grid order.
    pub records: Vec<AicRecord>,
    /// Grid points that failed, with the reason.
    pub failures: Vec<(GammaIndex, GammaIndex, String)>,
    best: usize,
}

impl AicReport {
    fn from_parts(
        records: Vec<AicRecord>,
        failures: Vec<(GammaIndex, GammaIndex, String)>,
    ) -> Result<Self> {
        // Strict comparison keeps the earliest (smallest gamma) on ties.
        let mut best: Option<usize> = None;
        for (i, r) in records.iter().enumerate() {
            if best.map_or(true, |b| r.aic < records[b].aic) {
                best = Some(i);
            }
        }
        match best {
            Some(best) => Ok(Self {
                records,
                failures,
                best,
            }),
            None => Err(Error::AllGammaFailed(
                failures
                    .last()
                    .map(|f| f.2.clone())
                    .unwrap_or_else(|| "empty grid".into()),
            )),
        }
    }

    pub fn best(&self) -> &AicRecord {
        &self.records[self.best]
    }

    pub fn best_gamma(&self) -> GammaIndex {
        self.best().gamma_mu
    }

    pub fn best_model(&self) -> &ClusterModel {
        &self.best().clustering.model
    }
}

fn evaluate(
    data: &DataSet,
    detection: &Result<crate::clustering::Detection>,
    covariance: CovarianceFit,
    icfg: &IterationConfig,
) -> Result<(usize, f64, Clustering)> {
    let detection = detection.as_ref().map_err(|e| Error::InvalidInput(e.to_string()))?;
    let clustering = complete_clustering(data, detection, covariance, icfg)?;
    let value = aic(data, &clustering.model, &clustering.partition)?;
    Ok((clustering.k(), value, clustering))
}

/// Runs spontaneous clustering at every grid value (the same index for
/// centers and covariances, or identity covariances) and keeps the AIC
/// minimizer. Ties go to the smaller index.
pub fn select_gamma_aic(
    data: &DataSet,
    grid: &GammaGrid,
    rcfg: &RestartConfig,
    icfg: &IterationConfig,
    covariance: CovarianceChoice,
) -> Result<AicReport> {
    let outcomes: Vec<_> = grid
        .values()
        .par_iter()
        .map(|&g| {
            let detection = detect_centers(data, g, rcfg, icfg);
            let cov = match covariance {
                CovarianceChoice::SameIndex => CovarianceFit::Fitted(g),
                CovarianceChoice::FixedIdentity => CovarianceFit::FixedIdentity,
            };
            (g, evaluate(data, &detection, cov, icfg))
        })
        .collect();
    let mut records = Vec::new();
    let mut failures = Vec::new();
    for (g, outcome) in outcomes {
        match outcome {
            Ok((k, value, clustering)) => records.push(AicRecord {
                gamma_mu: g,
                gamma_sigma: clustering.model.gamma_sigma(),
                k,
                aic: value,
                clustering,
            }),
            Err(e) => failures.push((g, g, e.to_string())),
        }
    }
    AicReport::from_parts(records, failures)
}

/// Covariance handling during a single-index search.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CovarianceChoice {
    /// Covariances fitted with the same index as the centers.
    #[default]
    SameIndex,
    FixedIdentity,
}

/// Product-grid search over separate indices for centers and covariances.
///
/// Records are ordered by center index, then covariance index; ties go to the
/// earliest pair. Center detection depends on the center index only and is
/// shared across the covariance grid.
pub fn select_gamma_aic_two_index(
    data: &DataSet,
    grid_mu: &GammaGrid,
    grid_sigma: &GammaGrid,
    rcfg: &RestartConfig,
    icfg: &IterationConfig,
) -> Result<AicReport> {
    let outcomes: Vec<Vec<_>> = grid_mu
        .values()
        .par_iter()
        .map(|&g1| {
            let detection = detect_centers(data, g1, rcfg, icfg);
            grid_sigma
                .values()
                .iter()
                .map(|&g2| (g1, g2, evaluate(data, &detection, CovarianceFit::Fitted(g2), icfg)))
                .collect()
        })
        .collect();
    let mut records = Vec::new();
    let mut failures = Vec::new();
    for (g1, g2, outcome) in outcomes.into_iter().flatten() {
        match outcome {
            Ok((k, value, clustering)) => records.push(AicRecord {
                gamma_mu: g1,
                gamma_sigma: g2,
                k,
                aic: value,
                clustering,
            }),
            Err(e) => failures.push((g1, g2, e.to_string())),
        }
    }
    AicReport::from_parts(records, failures)
}
