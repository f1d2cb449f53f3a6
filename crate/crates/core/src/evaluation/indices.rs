use std::ops::RangeInclusive;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::kmeans::{centroids, kmeans};
use crate::data::{squared_distance, DataSet};
use crate::error::{Error, Result};
use crate::model::Partition;

/// Predicted clusters together with known categories.
#[derive(Debug, Clone)]
pub struct LabeledPartition {
    predicted: Partition,
    truth: Vec<usize>,
}

impl LabeledPartition {
    pub fn new(predicted: Partition, truth: Vec<usize>) -> Result<Self> {
        if predicted.n() != truth.len() {
            return Err(Error::DimensionMismatch {
                expected: predicted.n(),
                found: truth.len(),
            });
        }
        Ok(Self { predicted, truth })
    }

    pub fn predicted(&self) -> &Partition {
        &self.predicted
    }

    pub fn truth(&self) -> &[usize] {
        &self.truth
    }
}

/// Biological homogeneity index: the average over clusters of the fraction
/// of ordered pairs within the cluster sharing a category. Clusters with at
/// most one member count toward `K` but contribute zero.
pub fn bhi(lp: &LabeledPartition) -> f64 {
    let k = lp.predicted.k();
    if k == 0 {
        return 0.0;
    }
    let categories = lp.truth.iter().copied().max().map_or(0, |m| m + 1);
    let mut table = vec![vec![0usize; categories]; k];
    for (&l, &c) in lp.predicted.labels().iter().zip(&lp.truth) {
        table[l][c] += 1;
    }
    let mut fractions: Vec<f64> = table
        .iter()
        .map(|row| {
            let nk: usize = row.iter().sum();
            if nk <= 1 {
                return 0.0;
            }
            let same: usize = row.iter().map(|&m| m * m.saturating_sub(1)).sum();
            same as f64 / (nk * (nk - 1)) as f64
        })
        .collect();
    // Summing in sorted order makes the result exactly invariant to how
    // clusters are numbered.
    fractions.sort_by(f64::total_cmp);
    let total: f64 = fractions.iter().sum();
    total / k as f64
}

/// Calinski-Harabasz index; `PerfectSeparation` when the within-cluster
/// scatter vanishes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ChIndex {
    Value(f64),
    PerfectSeparation,
}

impl ChIndex {
    pub fn as_f64(self) -> f64 {
        match self {
            ChIndex::Value(v) => v,
            ChIndex::PerfectSeparation => f64::INFINITY,
        }
    }
}

/// `CH(k) = (B(k) / (k - 1)) / (W(k) / (n - k))`.
pub fn ch_index(data: &DataSet, partition: &Partition) -> Result<ChIndex> {
    let (n, k) = (data.n(), partition.k());
    if partition.n() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: partition.n(),
        });
    }
    if k < 2 || k >= n {
        return Err(Error::DegenerateK { k, n });
    }
    let mean = data.column_means();
    let centers = centroids(data, partition);
    let mut within = 0.0;
    let mut total = 0.0;
    for (x, &l) in data.rows().zip(partition.labels()) {
        within += squared_distance(x, &centers[l]);
        total += squared_distance(x, &mean);
    }
    if within <= 0.0 {
        return Ok(ChIndex::PerfectSeparation);
    }
    let between = (total - within).max(0.0);
    Ok(ChIndex::Value(
        (between / (k - 1) as f64) / (within / (n - k) as f64),
    ))
}

/// Gap curve over a range of cluster counts.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GapResult {
    pub ks: Vec<usize>,
    /// `log W_k` of the data.
    pub log_w: Vec<f64>,
    /// Mean of `log W_k` over the reference draws.
    pub reference_log_w: Vec<f64>,
    /// Standard deviation of the reference `log W_k`, times `sqrt(1 + 1/B)`.
    pub s: Vec<f64>,
    pub gap: Vec<f64>,
}

impl GapResult {
    /// `k` with the largest gap (earliest on ties).
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for i in 1..self.gap.len() {
            if self.gap[i] > self.gap[best] {
                best = i;
            }
        }
        self.ks[best]
    }

    /// Smallest `k` with `Gap(k) >= Gap(k+1) - s(k+1)`; the last `k` if none.
    pub fn first_se_max(&self) -> usize {
        for i in 0..self.gap.len().saturating_sub(1) {
            if self.gap[i] >= self.gap[i + 1] - self.s[i + 1] {
                return self.ks[i];
            }
        }
        *self.ks.last().expect("non-empty k range")
    }
}

/// Gap statistic with reference draws uniform on the per-feature bounding
/// box of the data. `W_k` is the K-means within-cluster sum of squares.
pub fn gap_statistic(
    data: &DataSet,
    ks: RangeInclusive<usize>,
    b_refs: usize,
    restarts: usize,
    seed: u64,
) -> Result<GapResult> {
    let ks: Vec<usize> = ks.collect();
    if ks.is_empty() || ks[0] == 0 || *ks.last().unwrap() >= data.n() {
        return Err(Error::DegenerateK {
            k: ks.last().copied().unwrap_or(0),
            n: data.n(),
        });
    }
    if b_refs == 0 {
        return Err(Error::InvalidInput("b_refs must be >= 1".into()));
    }
    let log_w_of = |d: &DataSet, s: u64| -> Result<Vec<f64>> {
        ks.iter()
            .map(|&k| kmeans(d, k, restarts, s).map(|f| f.within_ss.ln()))
            .collect()
    };
    let log_w = log_w_of(data, seed)?;

    let bounds = data.bounds();
    let references = (0..b_refs)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(b as u64 + 1);
            let mut values = Vec::with_capacity(data.n() * data.p());
            for _ in 0..data.n() {
                for &(lo, hi) in &bounds {
                    values.push(if hi > lo { rng.gen_range(lo..hi) } else { lo });
                }
            }
            let reference = DataSet::from_row_major(data.n(), data.p(), values)?;
            log_w_of(&reference, rng.gen())
        })
        .collect::<Result<Vec<_>>>()?;

    let b = b_refs as f64;
    let mut reference_log_w = Vec::with_capacity(ks.len());
    let mut s = Vec::with_capacity(ks.len());
    for i in 0..ks.len() {
        let mean = references.iter().map(|r| r[i]).sum::<f64>() / b;
        let var = references.iter().map(|r| (r[i] - mean).powi(2)).sum::<f64>() / b;
        reference_log_w.push(mean);
        s.push(var.sqrt() * (1.0 + 1.0 / b).sqrt());
    }
    let gap = reference_log_w
        .iter()
        .zip(&log_w)
        .map(|(r, w)| r - w)
        .collect();
    Ok(GapResult {
        ks,
        log_w,
        reference_log_w,
        s,
        gap,
    })
}
