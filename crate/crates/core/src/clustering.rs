//! Spontaneous clustering with normal models.
//!
//! Centers are collected round by round: the first round starts the
//! mean-only iteration from `m` random observations, every later round from
//! the `m` observations farthest from the centers found so far. Rounds stop
//! once a round contributes no new center. Covariances are then fitted
//! around each center and observations go to the nearest center in
//! Mahalanobis distance.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{max_range, squared_distance, DataSet};
use crate::error::{Error, Result};
use crate::gaussian::{GammaIndex, GaussianComponent};
use crate::model::{ClusterModel, Partition};
use crate::optimizer::{find_center, find_local_min, IterationConfig, UpdateMode};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RestartConfig {
    /// Initial values per round.
    pub m: usize,
    /// Fixed points closer than this to a known center are merged into it.
    /// `None` means `1e-3` times the maximum range of the data.
    pub dedup_radius: Option<f64>,
    pub max_rounds: usize,
    pub seed: u64,
}

impl Default for RestartConfig {
    fn default() -> Self {
        Self {
            m: 10,
            dedup_radius: None,
            max_rounds: 20,
            seed: 0,
        }
    }
}

impl RestartConfig {
    pub fn with_seed(self, seed: u64) -> Self {
        Self { seed, ..self }
    }

    /// Merge radius actually used for `data`.
    pub fn radius_for(&self, data: &DataSet) -> Result<f64> {
        let r = match self.dedup_radius {
            Some(r) => r,
            None => {
                let range = max_range(data);
                1e-3 * if range > 0.0 { range } else { 1.0 }
            }
        };
        if !(r > 0.0) || !r.is_finite() {
            return Err(Error::InvalidInput(format!("dedup radius must be > 0 (got {r})")));
        }
        Ok(r)
    }

    fn validate(&self) -> Result<()> {
        if self.m == 0 || self.max_rounds == 0 {
            return Err(Error::InvalidInput(format!("invalid restart config {self:?}")));
        }
        Ok(())
    }
}

/// Local minima of the mean-only gamma-loss found so far.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CenterSet {
    centers: Vec<Vec<f64>>,
}

impl CenterSet {
    pub fn new(centers: Vec<Vec<f64>>) -> Self {
        Self { centers }
    }

    pub fn centers(&self) -> &[Vec<f64>] {
        &self.centers
    }

    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    /// `min_c |x - c|`, infinite for an empty set.
    pub fn distance(&self, x: &[f64]) -> f64 {
        self.centers
            .iter()
            .map(|c| squared_distance(x, c))
            .fold(f64::INFINITY, f64::min)
            .sqrt()
    }

    /// Adds `c` unless it lies within `radius` of an existing center.
    fn merge(&mut self, c: Vec<f64>, radius: f64) -> bool {
        if self.distance(&c) < radius {
            false
        } else {
            self.centers.push(c);
            true
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct DetectionDiagnostics {
    pub rounds: usize,
    pub restarts: usize,
    pub non_converged: usize,
    pub failed: usize,
}

#[derive(Debug, Clone)]
pub struct Detection {
    pub centers: CenterSet,
    pub gamma: GammaIndex,
    pub diagnostics: DetectionDiagnostics,
}

/// Indices of the `m` rows farthest from `centers`, ties to the lower index.
pub fn farthest_point_indices(data: &DataSet, centers: &CenterSet, m: usize) -> Vec<usize> {
    let mut order: Vec<(f64, usize)> = data
        .rows()
        .enumerate()
        .map(|(i, x)| (centers.distance(x), i))
        .collect();
    order.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    order.into_iter().take(m).map(|(_, i)| i).collect()
}

/// The `m` rows farthest from `centers`.
pub fn farthest_points(data: &DataSet, centers: &CenterSet, m: usize) -> Vec<Vec<f64>> {
    farthest_point_indices(data, centers, m)
        .into_iter()
        .map(|i| data.row(i).to_vec())
        .collect()
}

/// Finds local minima of the mean-only gamma-loss by farthest-point restarts.
///
/// Non-converged runs are dropped and counted in the diagnostics. Fails
/// with [`Error::NoCenters`] only if no run converges at all.
pub fn detect_centers(
    data: &DataSet,
    gamma: GammaIndex,
    rcfg: &RestartConfig,
    icfg: &IterationConfig,
) -> Result<Detection> {
    rcfg.validate()?;
    icfg.validate()?;
    let radius = rcfg.radius_for(data)?;
    let mut rng = ChaCha8Rng::seed_from_u64(rcfg.seed);
    let mut centers = CenterSet::default();
    let mut diagnostics = DetectionDiagnostics::default();

    for _ in 0..rcfg.max_rounds {
        let starts = if centers.is_empty() {
            let m = rcfg.m.min(data.n());
            let mut idx = rand::seq::index::sample(&mut rng, data.n(), m).into_vec();
            idx.sort_unstable();
            idx
        } else {
            farthest_point_indices(data, &centers, rcfg.m)
        };
        diagnostics.rounds += 1;
        diagnostics.restarts += starts.len();

        let runs: Vec<_> = starts
            .par_iter()
            .map(|&i| find_center(data, data.row(i), gamma, icfg))
            .collect();

        let mut added = 0;
        for run in runs {
            match run {
                Ok(r) if r.converged => {
                    let c: Vec<f64> = r.component.mu().iter().copied().collect();
                    added += usize::from(centers.merge(c, radius));
                }
                Ok(_) => diagnostics.non_converged += 1,
                Err(_) => diagnostics.failed += 1,
            }
        }
        if added == 0 {
            break;
        }
    }

    if centers.is_empty() {
        return Err(Error::NoCenters);
    }
    Ok(Detection {
        centers,
        gamma,
        diagnostics,
    })
}

/// Fits a covariance around every center by the covariance-only iteration
/// started from the identity. Proportions are provisional until [`assign`].
pub fn fit_covariances(
    data: &DataSet,
    centers: &CenterSet,
    gamma_mu: GammaIndex,
    gamma_sigma: GammaIndex,
    icfg: &IterationConfig,
) -> Result<ClusterModel> {
    if centers.is_empty() {
        return Err(Error::InvalidInput("no centers to fit".into()));
    }
    let components = centers
        .centers()
        .par_iter()
        .enumerate()
        .map(|(k, c)| {
            find_local_min(
                data,
                &GaussianComponent::identity(c),
                gamma_sigma,
                icfg,
                UpdateMode::SigmaOnly,
            )
            .map(|r| r.component)
            .map_err(|e| Error::SingularAtCenter {
                center: k,
                source: Box::new(e),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    ClusterModel::unassigned(components, gamma_mu, gamma_sigma)
}

/// Assigns every observation to the component with the smallest Mahalanobis
/// distance (ties to the lower index) and sets the proportions to the
/// assigned fractions. Components that attract no observation are removed.
pub fn assign(data: &DataSet, model: ClusterModel) -> Result<(ClusterModel, Partition)> {
    if data.p() != model.dim() {
        return Err(Error::DimensionMismatch {
            expected: data.p(),
            found: model.dim(),
        });
    }
    let factors = model
        .components()
        .iter()
        .map(|c| c.factor())
        .collect::<Result<Vec<_>>>()?;
    let mut scratch = vec![0.0; data.p()];
    let labels: Vec<usize> = data
        .rows()
        .map(|x| {
            let mut best = (f64::INFINITY, 0);
            for (k, f) in factors.iter().enumerate() {
                let q = f.mahalanobis_sq_with(x, &mut scratch);
                if q < best.0 {
                    best = (q, k);
                }
            }
            best.1
        })
        .collect();

    let mut sizes = vec![0usize; model.k()];
    for &l in &labels {
        sizes[l] += 1;
    }
    let mut remap = vec![usize::MAX; model.k()];
    let mut kept = 0;
    for (k, &s) in sizes.iter().enumerate() {
        if s > 0 {
            remap[k] = kept;
            kept += 1;
        }
    }
    let gamma_mu = model.gamma_mu();
    let gamma_sigma = model.gamma_sigma();
    let (components, _) = model.into_parts();
    let n = data.n() as f64;
    let mut kept_components = Vec::with_capacity(kept);
    let mut proportions = Vec::with_capacity(kept);
    for (k, c) in components.into_iter().enumerate() {
        if sizes[k] > 0 {
            kept_components.push(c);
            proportions.push(sizes[k] as f64 / n);
        }
    }
    let labels = labels.into_iter().map(|l| remap[l]).collect();
    let model = ClusterModel::new(kept_components, proportions, gamma_mu, gamma_sigma)?;
    let partition = Partition::new(labels, kept)?;
    Ok((model, partition))
}

/// How cluster covariances are obtained after the centers are known.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CovarianceFit {
    /// Covariance-only iteration with the given index.
    Fitted(GammaIndex),
    /// Every cluster keeps the identity covariance.
    FixedIdentity,
}

#[derive(Debug, Clone)]
pub struct Clustering {
    pub model: ClusterModel,
    pub partition: Partition,
    pub diagnostics: DetectionDiagnostics,
}

impl Clustering {
    pub fn k(&self) -> usize {
        self.model.k()
    }
}

/// Finishes a clustering from already detected centers.
pub fn complete_clustering(
    data: &DataSet,
    detection: &Detection,
    covariance: CovarianceFit,
    icfg: &IterationConfig,
) -> Result<Clustering> {
    let model = match covariance {
        CovarianceFit::Fitted(gamma_sigma) => {
            fit_covariances(data, &detection.centers, detection.gamma, gamma_sigma, icfg)?
        }
        CovarianceFit::FixedIdentity => ClusterModel::unassigned(
            detection
                .centers
                .centers()
                .iter()
                .map(|c| GaussianComponent::identity(c))
                .collect(),
            detection.gamma,
            detection.gamma,
        )?,
    };
    let (model, partition) = assign(data, model)?;
    Ok(Clustering {
        model,
        partition,
        diagnostics: detection.diagnostics,
    })
}

/// Centers, covariances and assignment; the number of clusters is an output.
pub fn spontaneous_cluster(
    data: &DataSet,
    gamma_mu: GammaIndex,
    gamma_sigma: GammaIndex,
    rcfg: &RestartConfig,
    icfg: &IterationConfig,
) -> Result<Clustering> {
    let detection = detect_centers(data, gamma_mu, rcfg, icfg)?;
    complete_clustering(data, &detection, CovarianceFit::Fitted(gamma_sigma), icfg)
}

/// Spontaneous clustering with every covariance fixed at the identity.
pub fn spontaneous_cluster_fixed_identity(
    data: &DataSet,
    gamma: GammaIndex,
    rcfg: &RestartConfig,
    icfg: &IterationConfig,
) -> Result<Clustering> {
    let detection = detect_centers(data, gamma, rcfg, icfg)?;
    complete_clustering(data, &detection, CovarianceFit::FixedIdentity, icfg)
}
