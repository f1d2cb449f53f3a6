//! When does the population gamma cross entropy of a two-component
//! spherical mixture have two local minima?
//!
//! With `nu = (mu_1 - mu_2) / 2`, `a = gamma / (1 + gamma sigma^2)` and
//! `d = |nu|^2 - (sigma^2 + 1 / gamma)`, two minima exist iff
//!
//! * `d > 0`,
//! * `exp(2 a |nu| sqrt(d)) > a (|nu| + sqrt(d))^2 tau_1 / tau_2`,
//! * `exp(-2 a |nu| sqrt(d)) < a (|nu| - sqrt(d))^2 tau_1 / tau_2`.
//!
//! Both exponential inequalities are compared in log space. Along the
//! segment `t nu` (midpoint at the origin) the sign of the derivative is that
//! of `h(t) = -4 C t + log(1 + t) - log(1 - t) - log(tau_1 / tau_2)`, with
//! `C = |nu|^2 a / 2`; [`profile_h`] exposes it for cross-checking.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::gaussian::{GammaIndex, GaussianComponent};
use crate::model::MixtureSpec;
use crate::objective::gamma_cross_entropy_gaussian;

#[derive(Debug, Clone, PartialEq)]
pub struct TwoComponentSpec {
    nu: Vec<f64>,
    sigma2: f64,
    tau1: f64,
    gamma: GammaIndex,
}

impl TwoComponentSpec {
    pub fn new(nu: Vec<f64>, sigma2: f64, tau1: f64, gamma: GammaIndex) -> Result<Self> {
        if nu.is_empty() || nu.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("nu must be a finite, non-empty vector".into()));
        }
        if !(sigma2 > 0.0) || !sigma2.is_finite() {
            return Err(Error::InvalidInput(format!("sigma2 must be > 0 (got {sigma2})")));
        }
        if !(tau1 > 0.0 && tau1 < 1.0) {
            return Err(Error::InvalidInput(format!("tau1 must lie in (0, 1) (got {tau1})")));
        }
        Ok(Self {
            nu,
            sigma2,
            tau1,
            gamma,
        })
    }

    /// Spec from the two component means.
    pub fn from_means(
        mu1: &[f64],
        mu2: &[f64],
        sigma2: f64,
        tau1: f64,
        gamma: GammaIndex,
    ) -> Result<Self> {
        if mu1.len() != mu2.len() {
            return Err(Error::DimensionMismatch {
                expected: mu1.len(),
                found: mu2.len(),
            });
        }
        let nu = mu1.iter().zip(mu2).map(|(a, b)| (a - b) / 2.0).collect();
        Self::new(nu, sigma2, tau1, gamma)
    }

    pub fn nu(&self) -> &[f64] {
        &self.nu
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    pub fn tau1(&self) -> f64 {
        self.tau1
    }

    pub fn tau2(&self) -> f64 {
        1.0 - self.tau1
    }

    pub fn gamma(&self) -> GammaIndex {
        self.gamma
    }

    pub fn nu_norm(&self) -> f64 {
        self.nu_norm_sq().sqrt()
    }

    fn nu_norm_sq(&self) -> f64 {
        self.nu.iter().map(|v| v * v).sum()
    }

    /// `|nu|^2 - (sigma^2 + 1/gamma)`.
    pub fn d(&self) -> f64 {
        self.nu_norm_sq() - (self.sigma2 + 1.0 / self.gamma.value())
    }

    /// `gamma / (1 + gamma sigma^2)`.
    fn a(&self) -> f64 {
        let g = self.gamma.value();
        g / (1.0 + g * self.sigma2)
    }

    /// `C = |nu|^2 gamma / (2 (1 + sigma^2 gamma))`.
    pub fn curvature(&self) -> f64 {
        self.nu_norm_sq() * self.a() / 2.0
    }

    /// The mixture with means `+nu` and `-nu` and covariance `sigma^2 I`.
    pub fn mixture(&self) -> Result<MixtureSpec> {
        let minus: Vec<f64> = self.nu.iter().map(|v| -v).collect();
        MixtureSpec::new(
            vec![
                GaussianComponent::spherical(&self.nu, self.sigma2)?,
                GaussianComponent::spherical(&minus, self.sigma2)?,
            ],
            vec![self.tau1, self.tau2()],
        )
    }

    /// Same spec with the roles of the two components exchanged.
    pub fn swapped(&self) -> Self {
        Self {
            nu: self.nu.iter().map(|v| -v).collect(),
            sigma2: self.sigma2,
            tau1: self.tau2(),
            gamma: self.gamma,
        }
    }
}

/// Log-space sides of one exponential inequality.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LogInequality {
    pub lhs: f64,
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BimodalityVerdict {
    pub bimodal: bool,
    pub d: f64,
    /// `log` of both sides of `exp(2 a |nu| sqrt d) > a (|nu| + sqrt d)^2 tau_1/tau_2`.
    pub upper: Option<LogInequality>,
    /// `log` of both sides of `exp(-2 a |nu| sqrt d) < a (|nu| - sqrt d)^2 tau_1/tau_2`.
    pub lower: Option<LogInequality>,
    /// `|nu| - sqrt d`, bounding how far each minimum sits from its mean.
    pub displacement_bound: Option<f64>,
}

impl BimodalityVerdict {
    pub fn upper_holds(&self) -> bool {
        self.upper.map_or(false, |c| c.lhs > c.rhs)
    }

    pub fn lower_holds(&self) -> bool {
        self.lower.map_or(false, |c| c.lhs < c.rhs)
    }
}

/// Evaluates the three conditions. `d <= 0` is unimodal.
pub fn check_bimodal(spec: &TwoComponentSpec) -> BimodalityVerdict {
    let d = spec.d();
    if !(d > 0.0) {
        return BimodalityVerdict {
            bimodal: false,
            d,
            upper: None,
            lower: None,
            displacement_bound: None,
        };
    }
    let norm = spec.nu_norm();
    let root = d.sqrt();
    let a = spec.a();
    let log_ratio = (spec.tau1() / spec.tau2()).ln();
    let exponent = 2.0 * a * norm * root;
    let upper = LogInequality {
        lhs: exponent,
        rhs: a.ln() + 2.0 * (norm + root).ln() + log_ratio,
    };
    let lower = LogInequality {
        lhs: -exponent,
        rhs: a.ln() + 2.0 * (norm - root).ln() + log_ratio,
    };
    let bimodal = upper.lhs > upper.rhs && lower.lhs < lower.rhs;
    BimodalityVerdict {
        bimodal,
        d,
        upper: Some(upper),
        lower: Some(lower),
        displacement_bound: bimodal.then_some(norm - root),
    }
}

fn check_t(t: f64) -> Result<()> {
    if t > -1.0 && t < 1.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("t = {t} outside (-1, 1)")))
    }
}

/// `h(t) = -4 C t + log(t + 1) - log(1 - t) - log(tau_1 / tau_2)`.
pub fn profile_h(spec: &TwoComponentSpec, t: f64) -> Result<f64> {
    check_t(t)?;
    Ok(-4.0 * spec.curvature() * t + (1.0 + t).ln() - (1.0 - t).ln()
        - (spec.tau1() / spec.tau2()).ln())
}

/// `h'(t) = -4 C + 1 / (t + 1) + 1 / (1 - t)`.
pub fn profile_h_prime(spec: &TwoComponentSpec, t: f64) -> Result<f64> {
    check_t(t)?;
    Ok(-4.0 * spec.curvature() + 1.0 / (t + 1.0) + 1.0 / (1.0 - t))
}

/// Positive root `D = sqrt(1 - 1 / (2 C))` of `h'`, when `2 C > 1`.
pub fn profile_root(spec: &TwoComponentSpec) -> Option<f64> {
    let c = spec.curvature();
    (2.0 * c > 1.0).then(|| (1.0 - 1.0 / (2.0 * c)).sqrt())
}

/// Result of the brute-force mode count along the segment.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleModes {
    /// Segment parameters `t` (location `t nu`) of the local minima.
    pub minima: Vec<f64>,
    /// Grid spacing in `t`.
    pub spacing: f64,
}

impl OracleModes {
    pub fn count(&self) -> usize {
        self.minima.len()
    }
}

/// Counts local minima of the closed-form cross entropy along the line
/// through both means by dense evaluation.
///
/// The grid covers `t` in `[-1.25, 1.25]`; beyond the means the restriction
/// is monotone, so the extension only guards minima sitting next to a mean.
pub fn oracle_modes(spec: &TwoComponentSpec, grid_n: usize) -> Result<OracleModes> {
    if grid_n < 1000 {
        return Err(Error::InvalidInput(format!("grid_n must be >= 1000 (got {grid_n})")));
    }
    let g = spec.mixture()?;
    let (lo, hi) = (-1.25, 1.25);
    let spacing = (hi - lo) / (grid_n - 1) as f64;
    let mut point = vec![0.0; spec.nu.len()];
    let values = (0..grid_n)
        .map(|i| {
            let t = lo + i as f64 * spacing;
            for (p, v) in point.iter_mut().zip(&spec.nu) {
                *p = t * v;
            }
            gamma_cross_entropy_gaussian(&g, &point, spec.gamma)
        })
        .collect::<Result<Vec<f64>>>()?;
    let minima = (1..grid_n - 1)
        .filter(|&i| values[i] < values[i - 1] && values[i] < values[i + 1])
        .map(|i| lo + i as f64 * spacing)
        .collect();
    Ok(OracleModes { minima, spacing })
}

pub fn oracle_mode_count(spec: &TwoComponentSpec, grid_n: usize) -> Result<usize> {
    oracle_modes(spec, grid_n).map(|m| m.count())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn gamma(v: f64) -> GammaIndex {
        GammaIndex::new(v).unwrap()
    }

    fn spec(nu: Vec<f64>, s2: f64, tau1: f64, g: f64) -> TwoComponentSpec {
        TwoComponentSpec::new(nu, s2, tau1, gamma(g)).unwrap()
    }

    #[test]
    fn validation() {
        assert!(TwoComponentSpec::new(vec![1.0], 0.0, 0.5, gamma(1.0)).is_err());
        assert!(TwoComponentSpec::new(vec![1.0], 1.0, 1.0, gamma(1.0)).is_err());
        assert!(TwoComponentSpec::new(vec![], 1.0, 0.5, gamma(1.0)).is_err());
    }

    #[test]
    fn equal_weights_bimodal_iff_d_positive() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..500 {
            let s = spec(
                vec![rng.gen_range(0.1..6.0), rng.gen_range(-3.0..3.0)],
                rng.gen_range(0.25..4.0),
                0.5,
                rng.gen_range(0.1..4.0),
            );
            assert_eq!(check_bimodal(&s).bimodal, s.d() > 0.0);
        }
    }

    #[test]
    fn calibration_separation() {
        let r = 3.0 * 2f64.sqrt() / 2.0;
        let s = spec(vec![r], 1.0, 0.5, 1.0);
        let v = check_bimodal(&s);
        assert!((v.d - 2.5).abs() < 1e-12);
        assert!(v.bimodal);
        let bound = v.displacement_bound.unwrap();
        assert!((bound - (r - 2.5f64.sqrt())).abs() < 1e-12);
        assert!((bound - 0.540).abs() < 1e-3);
        assert_eq!(oracle_mode_count(&s, 20_000).unwrap(), 2);
    }

    #[test]
    fn equal_weight_endpoints() {
        let boundary = TwoComponentSpec::from_means(&[0.0, 0.0], &[2.0, 2.0], 1.0, 0.5, gamma(1.0))
            .unwrap();
        let v = check_bimodal(&boundary);
        assert_eq!(v.d, 0.0);
        assert!(!v.bimodal);
        assert!(v.displacement_bound.is_none());

        let far = TwoComponentSpec::from_means(&[0.0, 0.0], &[4.0, 4.0], 1.0, 0.5, gamma(1.0))
            .unwrap();
        let v = check_bimodal(&far);
        assert!((v.d - 6.0).abs() < 1e-12);
        assert!(v.bimodal);
    }

    #[test]
    fn h_at_zero_and_unimodal_branch() {
        let s = spec(vec![2.0], 1.0, 0.5, 1.0);
        assert_eq!(profile_h(&s, 0.0).unwrap(), 0.0);
        assert!(profile_h(&s, 1.0).is_err());
        assert!(profile_h_prime(&s, -1.0).is_err());

        // C = |nu|^2 a / 2 = 0.25 with |nu| = 1, a = 1/2.
        let flat = spec(vec![1.0], 1.0, 0.3, 1.0);
        assert!((flat.curvature() - 0.25).abs() < 1e-15);
        assert!(profile_root(&flat).is_none());
        for i in 1..2000 {
            let t = -1.0 + i as f64 * 1e-3;
            assert!(profile_h_prime(&flat, t).unwrap() > 0.0);
        }
    }

    #[test]
    fn h_sign_pattern_matches_checker() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..1000 {
            let s = spec(
                vec![rng.gen_range(0.1..6.0)],
                rng.gen_range(0.25..4.0),
                rng.gen_range(0.05..0.95),
                rng.gen_range(0.1..4.0),
            );
            let by_h = match profile_root(&s) {
                Some(d) => profile_h(&s, -d).unwrap() > 0.0 && profile_h(&s, d).unwrap() < 0.0,
                None => false,
            };
            assert_eq!(by_h, check_bimodal(&s).bimodal, "{s:?}");
        }
    }

    #[test]
    fn unbalanced_weights_can_kill_the_minor_mode() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut found = None;
        for _ in 0..100_000 {
            let s = spec(vec![rng.gen_range(1.0..4.0)], 1.0, 0.99, 1.0);
            let v = check_bimodal(&s);
            if v.d > 0.0 && v.upper_holds() != v.lower_holds() {
                found = Some(s);
                break;
            }
        }
        let s = found.expect("violating spec exists");
        assert!(!check_bimodal(&s).bimodal);
        assert_eq!(oracle_mode_count(&s, 20_000).unwrap(), 1);
    }

    #[test]
    fn negative_d_has_one_mode() {
        let s = spec(vec![0.5, 0.5], 1.0, 0.4, 1.0);
        assert!(s.d() < 0.0);
        assert_eq!(oracle_mode_count(&s, 5000).unwrap(), 1);
        assert!(oracle_mode_count(&s, 10).is_err());
    }

    #[test]
    fn swapping_components_keeps_verdict() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..500 {
            let s = spec(
                vec![rng.gen_range(-4.0..4.0), rng.gen_range(-4.0..4.0)],
                rng.gen_range(0.25..4.0),
                rng.gen_range(0.05..0.95),
                rng.gen_range(0.1..4.0),
            );
            assert_eq!(check_bimodal(&s).bimodal, check_bimodal(&s.swapped()).bimodal);
        }
    }
}
