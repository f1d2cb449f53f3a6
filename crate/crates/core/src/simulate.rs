//! Mixture sampling and seeded Monte-Carlo experiments comparing
//! spontaneous clustering with K-means baselines.

use std::collections::BTreeMap;
use std::io::Write;

use nalgebra::DMatrix;
use rand::distributions::WeightedIndex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::clustering::{spontaneous_cluster, spontaneous_cluster_fixed_identity, RestartConfig};
use crate::data::DataSet;
use crate::error::{Error, Result};
use crate::evaluation::{bhi, select_k_by_ch, select_k_by_gap, GapRule, LabeledPartition};
use crate::gaussian::{GammaIndex, GaussianComponent};
use crate::model::{MixtureSpec, Partition};
use crate::objective::loss_mu;
use crate::optimizer::IterationConfig;
use crate::select::{
    gamma_by_range, select_gamma_aic, select_gamma_aic_two_index, CovarianceChoice, GammaGrid,
};

/// Draws `n` observations: a component index by the proportions, then a
/// point from that component. Returns the data and the component indices.
pub fn sample_mixture(spec: &MixtureSpec, n: usize, seed: u64) -> Result<(DataSet, Vec<usize>)> {
    let p = spec.dim();
    let factors: Vec<DMatrix<f64>> = spec
        .components()
        .iter()
        .map(|c| {
            c.sigma()
                .clone()
                .cholesky()
                .map(|ch| ch.l())
                .ok_or(Error::SingularCovariance {
                    condition: f64::INFINITY,
                })
        })
        .collect::<Result<_>>()?;
    let pick = WeightedIndex::new(spec.proportions())
        .map_err(|e| Error::InvalidInput(format!("proportions: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut values = Vec::with_capacity(n * p);
    let mut labels = Vec::with_capacity(n);
    let mut z = vec![0.0; p];
    for _ in 0..n {
        let k = rng.sample(&pick);
        z.iter_mut().for_each(|v| *v = rng.sample(StandardNormal));
        let (mu, l) = (spec.components()[k].mu(), &factors[k]);
        for i in 0..p {
            values.push(mu[i] + (0..=i).map(|j| l[(i, j)] * z[j]).sum::<f64>());
        }
        labels.push(k);
    }
    Ok((DataSet::from_row_major(n, p, values)?, labels))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Spontaneous clustering with the range heuristic.
    SpontRange,
    /// Spontaneous clustering with the AIC grid search.
    SpontAic,
    /// K-means with the Calinski-Harabasz index.
    KmeansCh,
    /// K-means with the gap statistic.
    KmeansGap,
}

impl Method {
    pub const ALL: [Method; 4] = [
        Method::SpontRange,
        Method::SpontAic,
        Method::KmeansCh,
        Method::KmeansGap,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::SpontRange => "spont_range",
            Method::SpontAic => "spont_aic",
            Method::KmeansCh => "kmeans_ch",
            Method::KmeansGap => "kmeans_gap",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub mixture: MixtureSpec,
    pub n: usize,
    pub runs: usize,
    pub methods: Vec<Method>,
    #[serde(default)]
    pub seed: u64,
    /// Grid for the AIC search (the center index when a covariance grid is
    /// also given).
    #[serde(default)]
    pub gamma_grid: GammaGrid,
    /// Separate covariance-index grid; enables the two-index search.
    #[serde(default)]
    pub gamma_grid_sigma: Option<GammaGrid>,
    /// Keep every cluster covariance at the identity.
    #[serde(default)]
    pub fixed_identity: bool,
    #[serde(default = "default_k_prior")]
    pub k_prior: usize,
    /// Largest K tried by the K-means baselines.
    #[serde(default = "default_k_max")]
    pub k_max: usize,
    #[serde(default = "default_gap_references")]
    pub gap_references: usize,
    #[serde(default)]
    pub gap_rule: GapRule,
    #[serde(default = "default_kmeans_restarts")]
    pub kmeans_restarts: usize,
    #[serde(default)]
    pub restart: RestartConfig,
    #[serde(default)]
    pub iteration: IterationConfig,
}

fn default_k_prior() -> usize {
    2
}

fn default_k_max() -> usize {
    10
}

fn default_gap_references() -> usize {
    20
}

fn default_kmeans_restarts() -> usize {
    10
}

impl ExperimentConfig {
    /// Defaults for everything but the design itself.
    pub fn new(mixture: MixtureSpec, n: usize, runs: usize, methods: Vec<Method>) -> Self {
        Self {
            mixture,
            n,
            runs,
            methods,
            seed: 0,
            gamma_grid: GammaGrid::default(),
            gamma_grid_sigma: None,
            fixed_identity: false,
            k_prior: default_k_prior(),
            k_max: default_k_max(),
            gap_references: default_gap_references(),
            gap_rule: GapRule::default(),
            kmeans_restarts: default_kmeans_restarts(),
            restart: RestartConfig::default(),
            iteration: IterationConfig::default(),
        }
    }

    /// Five unit-variance spherical clusters at the origin and `(+-3, +-3)`,
    /// `n = 200`, covariances known to be the identity.
    pub fn five_spherical(runs: usize) -> Self {
        let means = [[0.0, 0.0], [3.0, 3.0], [-3.0, 3.0], [-3.0, -3.0], [3.0, -3.0]];
        let mixture = MixtureSpec::equal_weights(
            means.iter().map(|m| GaussianComponent::identity(m)).collect(),
        )
        .expect("valid design");
        Self {
            fixed_identity: true,
            ..Self::new(mixture, 200, runs, Method::ALL.to_vec())
        }
    }

    /// Two correlated clusters at `(0, 0)` and `(3, 3)`, `n = 100`, with
    /// separate index grids for centers and covariances.
    pub fn two_ellipsoidal(runs: usize) -> Self {
        let mixture = MixtureSpec::equal_weights(vec![
            GaussianComponent::from_slices(&[0.0, 0.0], &[1.0, 0.5, 0.5, 1.0]).expect("valid"),
            GaussianComponent::from_slices(&[3.0, 3.0], &[2.0, -0.5, -0.5, 2.0]).expect("valid"),
        ])
        .expect("valid design");
        Self {
            gamma_grid: GammaGrid::log_spaced(0.1, 1.0, 8).expect("valid grid"),
            gamma_grid_sigma: Some(GammaGrid::log_spaced(0.1, 1.5, 8).expect("valid grid")),
            ..Self::new(mixture, 100, runs, vec![Method::SpontAic])
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.runs == 0 || self.n < 2 {
            return Err(Error::InvalidInput(format!(
                "need runs >= 1 and n >= 2 (got runs = {}, n = {})",
                self.runs, self.n
            )));
        }
        if self.methods.is_empty() {
            return Err(Error::InvalidInput("no methods selected".into()));
        }
        if self.k_max < 2 || self.gap_references == 0 {
            return Err(Error::InvalidInput("k_max >= 2 and gap_references >= 1 required".into()));
        }
        self.iteration.validate()
    }
}

/// One method applied to one simulated sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub run: usize,
    pub method: Method,
    /// Detected number of clusters; 0 when the method failed.
    pub k: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bhi: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma_mu: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma_sigma: Option<f64>,
    /// Center distance per true component, when `k` is correct.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dm: Option<Vec<f64>>,
    /// Covariance Frobenius distance per true component, when `k` is correct
    /// and covariances were fitted.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dv: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: Method,
    /// Runs per detected K; failed runs are counted under K = 0.
    pub k_frequency: BTreeMap<usize, usize>,
    pub failures: usize,
    /// Mean BHI over successful runs.
    pub mean_bhi: Option<f64>,
    /// Runs that detected the true K.
    pub correct_k: usize,
    /// Mean center distance per true component over correct-K runs.
    pub mean_dm: Option<Vec<f64>>,
    pub mean_dv: Option<Vec<f64>>,
}

impl MethodSummary {
    pub fn frequency(&self, k: usize) -> usize {
        self.k_frequency.get(&k).copied().unwrap_or(0)
    }

    /// Most frequent K (smallest on ties).
    pub fn modal_k(&self) -> usize {
        let mut best = (0, 0);
        for (&k, &c) in &self.k_frequency {
            if c > best.1 {
                best = (k, c);
            }
        }
        best.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub true_k: usize,
    pub runs: usize,
    pub summaries: Vec<MethodSummary>,
    /// Per-run results in run order, then method order.
    pub records: Vec<RunRecord>,
}

impl ExperimentReport {
    pub fn summary(&self, method: Method) -> Option<&MethodSummary> {
        self.summaries.iter().find(|s| s.method == method)
    }

    /// One JSON object per line: every run record, then every summary.
    pub fn write_json_lines<W: Write>(&self, mut sink: W) -> Result<()> {
        for r in &self.records {
            serde_json::to_writer(&mut sink, &Line::Run(r))?;
            writeln!(sink)?;
        }
        for s in &self.summaries {
            serde_json::to_writer(&mut sink, &Line::Summary(s))?;
            writeln!(sink)?;
        }
        Ok(())
    }
}

#[derive(Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum Line<'a> {
    Run(&'a RunRecord),
    Summary(&'a MethodSummary),
}

/// Fitted centers and, when estimated, covariances of one clustering.
struct Fit {
    partition: Partition,
    centers: Vec<Vec<f64>>,
    covariances: Option<Vec<DMatrix<f64>>>,
    gamma: Option<(GammaIndex, GammaIndex)>,
}

fn run_method(cfg: &ExperimentConfig, data: &DataSet, method: Method, seed: u64) -> Result<Fit> {
    let rcfg = cfg.restart.with_seed(seed);
    let icfg = &cfg.iteration;
    let from_model = |c: crate::clustering::Clustering, fitted: bool| Fit {
        centers: c
            .model
            .components()
            .iter()
            .map(|k| k.mu().iter().copied().collect())
            .collect(),
        covariances: fitted
            .then(|| c.model.components().iter().map(|k| k.sigma().clone()).collect()),
        gamma: Some((c.model.gamma_mu(), c.model.gamma_sigma())),
        partition: c.partition,
    };
    match method {
        Method::SpontRange => {
            let g = gamma_by_range(data, cfg.k_prior)?;
            let c = if cfg.fixed_identity {
                spontaneous_cluster_fixed_identity(data, g, &rcfg, icfg)?
            } else {
                spontaneous_cluster(data, g, g, &rcfg, icfg)?
            };
            Ok(from_model(c, !cfg.fixed_identity))
        }
        Method::SpontAic => {
            let report = match (&cfg.gamma_grid_sigma, cfg.fixed_identity) {
                (Some(grid_sigma), false) => {
                    select_gamma_aic_two_index(data, &cfg.gamma_grid, grid_sigma, &rcfg, icfg)?
                }
                (_, fixed) => {
                    let choice = if fixed {
                        CovarianceChoice::FixedIdentity
                    } else {
                        CovarianceChoice::SameIndex
                    };
                    select_gamma_aic(data, &cfg.gamma_grid, &rcfg, icfg, choice)?
                }
            };
            let best = report.best().clustering.clone();
            Ok(from_model(best, !cfg.fixed_identity))
        }
        Method::KmeansCh => {
            let (fit, _) = select_k_by_ch(data, cfg.k_max, cfg.kmeans_restarts, seed)?;
            Ok(Fit {
                partition: fit.partition,
                centers: fit.centers,
                covariances: None,
                gamma: None,
            })
        }
        Method::KmeansGap => {
            let (fit, _) = select_k_by_gap(
                data,
                cfg.k_max,
                cfg.gap_references,
                cfg.kmeans_restarts,
                cfg.gap_rule,
                seed,
            )?;
            Ok(Fit {
                partition: fit.partition,
                centers: fit.centers,
                covariances: None,
                gamma: None,
            })
        }
    }
}

/// Greedy matching: repeatedly pair the closest remaining (cluster, true
/// component). Returns the cluster matched to each true component.
pub fn greedy_match(centers: &[Vec<f64>], truth: &[Vec<f64>]) -> Vec<Option<usize>> {
    let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
    for (i, c) in centers.iter().enumerate() {
        for (j, t) in truth.iter().enumerate() {
            let d: f64 = c.iter().zip(t).map(|(a, b)| (a - b) * (a - b)).sum();
            pairs.push((d, i, j));
        }
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut used = vec![false; centers.len()];
    let mut matched = vec![None; truth.len()];
    for (_, i, j) in pairs {
        if !used[i] && matched[j].is_none() {
            used[i] = true;
            matched[j] = Some(i);
        }
    }
    matched
}

fn record(
    cfg: &ExperimentConfig,
    run: usize,
    method: Method,
    truth: &[usize],
    outcome: Result<Fit>,
) -> RunRecord {
    let fit = match outcome {
        Ok(fit) => fit,
        Err(e) => {
            return RunRecord {
                run,
                method,
                k: 0,
                bhi: None,
                gamma_mu: None,
                gamma_sigma: None,
                dm: None,
                dv: None,
                error: Some(e.to_string()),
            }
        }
    };
    let k = fit.partition.k();
    let score = LabeledPartition::new(fit.partition, truth.to_vec())
        .map(|lp| bhi(&lp))
        .ok();
    let components = cfg.mixture.components();
    let (mut dm, mut dv) = (None, None);
    if k == components.len() {
        let means: Vec<Vec<f64>> = components.iter().map(|c| c.mu().iter().copied().collect()).collect();
        let matched = greedy_match(&fit.centers, &means);
        dm = Some(
            matched
                .iter()
                .zip(&means)
                .map(|(m, t)| {
                    let c = &fit.centers[m.expect("as many clusters as components")];
                    c.iter().zip(t).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
                })
                .collect(),
        );
        dv = fit.covariances.as_ref().map(|covs| {
            matched
                .iter()
                .zip(components)
                .map(|(m, t)| (&covs[m.expect("matched")] - t.sigma()).norm())
                .collect()
        });
    }
    RunRecord {
        run,
        method,
        k,
        bhi: score,
        gamma_mu: fit.gamma.map(|g| g.0.value()),
        gamma_sigma: fit.gamma.map(|g| g.1.value()),
        dm,
        dv,
        error: None,
    }
}

fn mean_columns(rows: &[&Vec<f64>]) -> Option<Vec<f64>> {
    let first = rows.first()?;
    let mut acc = vec![0.0; first.len()];
    for r in rows {
        for (a, v) in acc.iter_mut().zip(r.iter()) {
            *a += v;
        }
    }
    Some(acc.into_iter().map(|a| a / rows.len() as f64).collect())
}

fn summarize(method: Method, true_k: usize, records: &[RunRecord]) -> MethodSummary {
    let mine: Vec<&RunRecord> = records.iter().filter(|r| r.method == method).collect();
    let mut k_frequency = BTreeMap::new();
    for r in &mine {
        *k_frequency.entry(r.k).or_insert(0) += 1;
    }
    let scores: Vec<f64> = mine.iter().filter_map(|r| r.bhi).collect();
    let dms: Vec<&Vec<f64>> = mine.iter().filter_map(|r| r.dm.as_ref()).collect();
    let dvs: Vec<&Vec<f64>> = mine.iter().filter_map(|r| r.dv.as_ref()).collect();
    MethodSummary {
        method,
        k_frequency,
        failures: mine.iter().filter(|r| r.error.is_some()).count(),
        mean_bhi: (!scores.is_empty()).then(|| scores.iter().sum::<f64>() / scores.len() as f64),
        correct_k: mine.iter().filter(|r| r.k == true_k).count(),
        mean_dm: mean_columns(&dms),
        mean_dv: mean_columns(&dvs),
    }
}

/// Runs every method on `runs` samples; run `r` uses seed `seed + r`.
/// Runs execute concurrently and the report is assembled in run order.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let mut methods = cfg.methods.clone();
    methods.sort();
    methods.dedup();
    let per_run: Vec<Vec<RunRecord>> = (0..cfg.runs)
        .into_par_iter()
        .map(|r| {
            let seed = cfg.seed.wrapping_add(r as u64);
            match sample_mixture(&cfg.mixture, cfg.n, seed) {
                Ok((data, truth)) => methods
                    .iter()
                    .map(|&m| record(cfg, r, m, &truth, run_method(cfg, &data, m, seed)))
                    .collect(),
                Err(e) => methods
                    .iter()
                    .map(|&m| record(cfg, r, m, &[], Err(Error::InvalidInput(e.to_string()))))
                    .collect(),
            }
        })
        .collect();
    let records: Vec<RunRecord> = per_run.into_iter().flatten().collect();
    let true_k = cfg.mixture.k();
    Ok(ExperimentReport {
        true_k,
        runs: cfg.runs,
        summaries: methods.iter().map(|&m| summarize(m, true_k, &records)).collect(),
        records,
    })
}

/// Mean-only gamma-loss along the segment from `from` to `to` at `points`
/// evenly spaced positions. The first column is the coordinate itself for
/// one-dimensional data and the distance from `from` otherwise.
pub fn loss_profile(
    data: &DataSet,
    from: &[f64],
    to: &[f64],
    gamma: GammaIndex,
    points: usize,
) -> Result<Vec<(f64, f64)>> {
    if from.len() != data.p() || to.len() != data.p() {
        return Err(Error::DimensionMismatch {
            expected: data.p(),
            found: from.len().max(to.len()),
        });
    }
    if points < 2 {
        return Err(Error::InvalidInput("a profile needs at least 2 points".into()));
    }
    let length = from
        .iter()
        .zip(to)
        .map(|(a, b)| (b - a) * (b - a))
        .sum::<f64>()
        .sqrt();
    (0..points)
        .map(|i| {
            let s = i as f64 / (points - 1) as f64;
            let mu: Vec<f64> = from.iter().zip(to).map(|(a, b)| a + s * (b - a)).collect();
            let x = if data.p() == 1 { mu[0] } else { s * length };
            Ok((x, loss_mu(data, &mu, gamma)?))
        })
        .collect()
}
