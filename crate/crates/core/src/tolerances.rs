//! Numerical tolerances shared across the crate.

/// Every fixed tolerance the library checks against lives here.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Absolute elementwise asymmetry allowed in a covariance matrix.
    pub symmetry: f64,
    /// Covariances with a larger condition number are treated as singular.
    pub max_condition: f64,
    /// Allowed deviation of mixing proportions from summing to one.
    pub proportion_sum: f64,
    /// Off-identity slack when a covariance must be spherical.
    pub spherical: f64,
}

pub const TOLERANCES: Tolerances = Tolerances {
    symmetry: 1e-10,
    max_condition: 1e12,
    proportion_sum: 1e-12,
    spherical: 1e-10,
};

impl Default for Tolerances {
    fn default() -> Self {
        TOLERANCES
    }
}
