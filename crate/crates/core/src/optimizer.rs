//! Fixed-point (CCCP) iteration for local minima of the gamma-loss.
//!
//! Each step maximizes the Jensen minorant of the log of the loss, so the
//! loss never increases. Weights are evaluated at the current iterate, while
//! the covariance update uses deviations from the *new* mean.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::data::DataSet;
use crate::error::{Error, Result};
use crate::gaussian::{symmetrize, GammaIndex, GaussianComponent};
use crate::objective::{exponents, log_sum_exp, loss_mu_sigma_factored, softmax};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IterationConfig {
    /// Stop once `|mu' - mu| + |Sigma' - Sigma|_F` falls below this.
    pub epsilon: f64,
    pub max_iter: usize,
    /// Relative eigenvalue floor for covariance repair.
    pub ridge: f64,
}

impl Default for IterationConfig {
    fn default() -> Self {
        Self {
            epsilon: 1e-8,
            max_iter: 500,
            ridge: 1e-9,
        }
    }
}

impl IterationConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0) || self.max_iter == 0 || !(self.ridge >= 0.0) {
            return Err(Error::InvalidInput(format!(
                "invalid iteration config {self:?}"
            )));
        }
        Ok(())
    }
}

/// Which parameters a step updates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UpdateMode {
    /// Mean only, covariance held at its initial value.
    MuOnly,
    /// Covariance only, mean held at its initial value.
    SigmaOnly,
    Joint,
}

impl UpdateMode {
    fn updates_mu(self) -> bool {
        matches!(self, UpdateMode::MuOnly | UpdateMode::Joint)
    }

    fn updates_sigma(self) -> bool {
        matches!(self, UpdateMode::SigmaOnly | UpdateMode::Joint)
    }
}

#[derive(Debug, Clone)]
pub struct FixedPointResult {
    pub component: GaussianComponent,
    /// Number of update steps applied.
    pub iterations: usize,
    pub converged: bool,
    /// Loss at the initial value followed by the loss after each step.
    pub loss_trace: Vec<f64>,
    /// Steps (1-based, indexing `loss_trace`) whose covariance needed the
    /// ridge repair. Descent is only guaranteed across unrepaired steps.
    pub repaired_steps: Vec<usize>,
}

struct Step {
    component: GaussianComponent,
    repaired: bool,
}

/// One application of the mean/covariance update formulas.
pub fn update_step(
    data: &DataSet,
    current: &GaussianComponent,
    gamma: GammaIndex,
    mode: UpdateMode,
    ridge: f64,
) -> Result<GaussianComponent> {
    if data.p() != current.dim() {
        return Err(Error::DimensionMismatch {
            expected: data.p(),
            found: current.dim(),
        });
    }
    step(data, current, gamma.value(), mode, ridge).map(|s| s.component)
}

fn step(
    data: &DataSet,
    current: &GaussianComponent,
    gamma: f64,
    mode: UpdateMode,
    ridge: f64,
) -> Result<Step> {
    let p = data.p();
    let f = current.factor()?;
    let w = softmax(&exponents(data, &f, gamma));

    let mu = if mode.updates_mu() {
        // Accumulate deviations from the heaviest row, which keeps the
        // result exact when all rows coincide.
        let heaviest = (0..w.len()).fold(0, |b, i| if w[i] > w[b] { i } else { b });
        let anchor = data.row(heaviest);
        let mut m = DVector::from_column_slice(anchor);
        for (x, &wi) in data.rows().zip(&w) {
            for j in 0..p {
                m[j] += wi * (x[j] - anchor[j]);
            }
        }
        m
    } else {
        current.mu().clone()
    };

    if !mode.updates_sigma() {
        return Ok(Step {
            component: current.with_mu(mu),
            repaired: false,
        });
    }

    let mut scatter = DMatrix::zeros(p, p);
    let mut dev = vec![0.0; p];
    for (x, &wi) in data.rows().zip(&w) {
        for j in 0..p {
            dev[j] = x[j] - mu[j];
        }
        for a in 0..p {
            for b in 0..=a {
                scatter[(a, b)] += wi * dev[a] * dev[b];
            }
        }
    }
    for a in 0..p {
        for b in 0..a {
            scatter[(b, a)] = scatter[(a, b)];
        }
    }
    let sigma = symmetrize(scatter * (1.0 + gamma));
    let (sigma, repaired) = ridge_repair(sigma, ridge);
    let component = GaussianComponent::new(mu, sigma).map_err(|_| Error::SingularCovariance {
        condition: f64::INFINITY,
    })?;
    component.factor()?;
    Ok(Step {
        component,
        repaired,
    })
}

/// Adds `ridge * trace / p` to the diagonal when the smallest eigenvalue
/// falls below that level. A zero matrix gets `ridge` on the diagonal.
fn ridge_repair(sigma: DMatrix<f64>, ridge: f64) -> (DMatrix<f64>, bool) {
    let p = sigma.nrows();
    let floor = ridge * sigma.trace() / p as f64;
    let floor = if floor > 0.0 { floor } else { ridge };
    let min_eig = SymmetricEigen::new(sigma.clone()).eigenvalues.min();
    if min_eig < floor {
        let mut repaired = sigma;
        for i in 0..p {
            repaired[(i, i)] += floor;
        }
        (repaired, true)
    } else {
        (sigma, false)
    }
}

fn mode_loss(data: &DataSet, c: &GaussianComponent, gamma: f64, mode: UpdateMode) -> Result<f64> {
    let f = c.factor()?;
    Ok(match mode {
        // In mean-only mode the objective is the averaged loss.
        UpdateMode::MuOnly => {
            let a = exponents(data, &f, gamma);
            -(log_sum_exp(&a) - (data.n() as f64).ln()).exp()
        }
        _ => loss_mu_sigma_factored(data, &f, gamma),
    })
}

/// Iterates [`update_step`] from `init` until the step change drops below
/// `cfg.epsilon` or `cfg.max_iter` steps have been taken.
pub fn find_local_min(
    data: &DataSet,
    init: &GaussianComponent,
    gamma: GammaIndex,
    cfg: &IterationConfig,
    mode: UpdateMode,
) -> Result<FixedPointResult> {
    cfg.validate()?;
    if data.p() != init.dim() {
        return Err(Error::DimensionMismatch {
            expected: data.p(),
            found: init.dim(),
        });
    }
    let g = gamma.value();
    let mut current = init.clone();
    let mut loss_trace = vec![mode_loss(data, &current, g, mode)?];
    let mut repaired_steps = Vec::new();
    for iteration in 1..=cfg.max_iter {
        let at = |e: Error| Error::SingularAtIteration {
            iteration,
            source: Box::new(e),
        };
        let next = step(data, &current, g, mode, cfg.ridge).map_err(at)?;
        if next.repaired {
            repaired_steps.push(iteration);
        }
        let next = next.component;
        let change = (next.mu() - current.mu()).norm() + (next.sigma() - current.sigma()).norm();
        loss_trace.push(mode_loss(data, &next, g, mode).map_err(at)?);
        current = next;
        if change < cfg.epsilon {
            return Ok(FixedPointResult {
                component: current,
                iterations: iteration,
                converged: true,
                loss_trace,
                repaired_steps,
            });
        }
    }
    Ok(FixedPointResult {
        component: current,
        iterations: cfg.max_iter,
        converged: false,
        loss_trace,
        repaired_steps,
    })
}

/// Mean-only search with the identity covariance, as used for center
/// detection.
pub fn find_center(
    data: &DataSet,
    start: &[f64],
    gamma: GammaIndex,
    cfg: &IterationConfig,
) -> Result<FixedPointResult> {
    find_local_min(
        data,
        &GaussianComponent::identity(start),
        gamma,
        cfg,
        UpdateMode::MuOnly,
    )
}
