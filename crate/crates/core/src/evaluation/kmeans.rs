use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::indices::{ch_index, gap_statistic, GapResult};
use crate::data::{squared_distance, DataSet};
use crate::error::{Error, Result};
use crate::model::Partition;

const MAX_LLOYD_ITER: usize = 300;

#[derive(Debug, Clone)]
pub struct KMeansFit {
    pub centers: Vec<Vec<f64>>,
    pub partition: Partition,
    pub within_ss: f64,
    /// Within-cluster sum of squares after each Lloyd iteration.
    pub trace: Vec<f64>,
}

/// Total squared distance of each row to the mean of its cluster.
pub fn within_ss(data: &DataSet, partition: &Partition) -> f64 {
    let centers = centroids(data, partition);
    data.rows()
        .zip(partition.labels())
        .map(|(x, &l)| squared_distance(x, &centers[l]))
        .sum()
}

pub(crate) fn centroids(data: &DataSet, partition: &Partition) -> Vec<Vec<f64>> {
    let p = data.p();
    let mut sums = vec![vec![0.0; p]; partition.k()];
    let mut counts = vec![0usize; partition.k()];
    for (x, &l) in data.rows().zip(partition.labels()) {
        counts[l] += 1;
        for (s, v) in sums[l].iter_mut().zip(x) {
            *s += v;
        }
    }
    for (s, &c) in sums.iter_mut().zip(&counts) {
        if c > 0 {
            s.iter_mut().for_each(|v| *v /= c as f64);
        }
    }
    sums
}

fn nearest(x: &[f64], centers: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (k, c) in centers.iter().enumerate() {
        let d = squared_distance(x, c);
        if d < best.1 {
            best = (k, d);
        }
    }
    best
}

/// Random first center, then repeatedly the row farthest from the chosen
/// centers.
fn farthest_first(data: &DataSet, k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let mut centers = vec![data.row(rng.gen_range(0..data.n())).to_vec()];
    let mut dist: Vec<f64> = data
        .rows()
        .map(|x| squared_distance(x, &centers[0]))
        .collect();
    while centers.len() < k {
        let (far, _) = dist
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |acc, (i, &d)| if d > acc.1 { (i, d) } else { acc });
        let c = data.row(far).to_vec();
        for (d, x) in dist.iter_mut().zip(data.rows()) {
            *d = d.min(squared_distance(x, &c));
        }
        centers.push(c);
    }
    centers
}

fn lloyd(data: &DataSet, mut centers: Vec<Vec<f64>>) -> Result<KMeansFit> {
    let k = centers.len();
    let mut labels = vec![usize::MAX; data.n()];
    let mut trace = Vec::new();
    for _ in 0..MAX_LLOYD_ITER {
        let mut changed = false;
        let mut dists = Vec::with_capacity(data.n());
        for (i, x) in data.rows().enumerate() {
            let (l, d) = nearest(x, &centers);
            changed |= labels[i] != l;
            labels[i] = l;
            dists.push(d);
        }
        // Repair empty clusters with the worst-served observation.
        let mut counts = vec![0usize; k];
        labels.iter().for_each(|&l| counts[l] += 1);
        let empties: Vec<usize> = (0..k).filter(|&c| counts[c] == 0).collect();
        for empty in empties {
            let (far, _) = dists
                .iter()
                .enumerate()
                .filter(|(i, _)| counts[labels[*i]] > 1)
                .fold((usize::MAX, f64::NEG_INFINITY), |acc, (i, &d)| {
                    if d > acc.1 { (i, d) } else { acc }
                });
            if far == usize::MAX {
                break;
            }
            counts[labels[far]] -= 1;
            labels[far] = empty;
            counts[empty] = 1;
            dists[far] = 0.0;
            changed = true;
        }
        let partition = Partition::new(labels.clone(), k)?;
        centers = centroids(data, &partition);
        trace.push(within_ss(data, &partition));
        if !changed {
            break;
        }
    }
    let partition = Partition::new(labels, k)?;
    let within_ss = *trace.last().expect("at least one iteration");
    Ok(KMeansFit {
        centers,
        partition,
        within_ss,
        trace,
    })
}

/// Lloyd's algorithm from `restarts` farthest-first seedings; keeps the
/// lowest within-cluster sum of squares (earliest restart on ties).
pub fn kmeans(data: &DataSet, k: usize, restarts: usize, seed: u64) -> Result<KMeansFit> {
    if k == 0 || k > data.n() {
        return Err(Error::DegenerateK { k, n: data.n() });
    }
    let restarts = restarts.max(1);
    let fits = (0..restarts)
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(r as u64);
            lloyd(data, farthest_first(data, k, &mut rng))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut best: Option<KMeansFit> = None;
    for fit in fits {
        if best.as_ref().map_or(true, |b| fit.within_ss < b.within_ss) {
            best = Some(fit);
        }
    }
    Ok(best.expect("restarts >= 1"))
}

/// K-means over `2..=k_max`, keeping the `k` with the largest CH index.
pub fn select_k_by_ch(
    data: &DataSet,
    k_max: usize,
    restarts: usize,
    seed: u64,
) -> Result<(KMeansFit, Vec<(usize, f64)>)> {
    let upper = k_max.min(data.n() - 1);
    if upper < 2 {
        return Err(Error::DegenerateK { k: k_max, n: data.n() });
    }
    let mut curve = Vec::new();
    let mut best: Option<(f64, KMeansFit)> = None;
    for k in 2..=upper {
        let fit = kmeans(data, k, restarts, seed)?;
        let value = ch_index(data, &fit.partition)?.as_f64();
        curve.push((k, value));
        if best.as_ref().map_or(true, |b| value > b.0) {
            best = Some((value, fit));
        }
    }
    Ok((best.expect("non-empty k range").1, curve))
}

/// Decision rule applied to the gap curve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GapRule {
    /// Largest gap.
    Argmax,
    /// Smallest `k` with `Gap(k) >= Gap(k+1) - s(k+1)`.
    #[default]
    FirstSeMax,
}

pub fn select_k_by_gap(
    data: &DataSet,
    k_max: usize,
    b_refs: usize,
    restarts: usize,
    rule: GapRule,
    seed: u64,
) -> Result<(KMeansFit, GapResult)> {
    let upper = k_max.min(data.n() - 1).max(1);
    let gap = gap_statistic(data, 1..=upper, b_refs, restarts, seed)?;
    let k = match rule {
        GapRule::Argmax => gap.argmax(),
        GapRule::FirstSeMax => gap.first_se_max(),
    };
    Ok((kmeans(data, k, restarts, seed)?, gap))
}
