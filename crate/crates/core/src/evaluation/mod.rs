//! Clustering quality indices and the K-means comparator.

mod indices;
mod kmeans;

pub use indices::{bhi, ch_index, gap_statistic, ChIndex, GapResult, LabeledPartition};
pub use kmeans::{kmeans, select_k_by_ch, select_k_by_gap, within_ss, GapRule, KMeansFit};
