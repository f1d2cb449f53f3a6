//! Spontaneous clustering.
//!
//! Cluster centers are the local minima of the gamma-loss of a normal model,
//! located by restarting a monotone fixed-point iteration from the data
//! points farthest from the centers found so far. The number of clusters is
//! an output; the power index `gamma` is the tuning knob, chosen either from
//! the data range or by AIC.

pub mod bimodality;
pub mod clustering;
pub mod data;
pub mod error;
pub mod evaluation;
pub mod gaussian;
pub mod io;
pub mod model;
pub mod objective;
pub mod optimizer;
pub mod select;
pub mod simulate;
pub mod tolerances;

pub use clustering::{
    assign, detect_centers, farthest_points, fit_covariances, spontaneous_cluster,
    spontaneous_cluster_fixed_identity, CenterSet, Clustering, CovarianceFit, Detection,
    DetectionDiagnostics, RestartConfig,
};
pub use data::{max_range, DataSet};
pub use error::{Error, Result};
pub use gaussian::{mahalanobis_sq, GammaIndex, GaussianComponent};
pub use model::{ClusterModel, MixtureSpec, Partition};
pub use optimizer::{find_local_min, update_step, FixedPointResult, IterationConfig, UpdateMode};
pub use tolerances::{Tolerances, TOLERANCES};
