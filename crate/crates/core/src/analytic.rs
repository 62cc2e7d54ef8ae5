//! Closed forms for the binary Markov source with the consecutive-ones
//! distortion (see [`DistortionSpec::consecutive_ones`]).
//!
//! The optimal per-letter kernel has the shape
//!
//! ```text
//! P*(0 | x_i, x_{i-1}) = α    for (x_i, x_{i-1}) ≠ (1, 1)
//! P*(1 | 1, 1)         = β
//! P*(y_i = 0)          = γ
//! ```
//!
//! and the rate is `H(q(1+p)/(p+q)) − H(D)` below `D_max`, zero above it.

use crate::distortion::DistortionSpec;
use crate::error::{Error, Result};
use crate::prob::{binary_entropy, StochasticKernel};
use crate::solver::{CausalPolicy, StationaryPolicy};

/// Slack allowed when checking that α, β, γ are probabilities.
const VALIDITY_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BinaryExampleParams {
    /// `P(x_i = 1 | x_{i-1} = 0)`.
    pub p: f64,
    /// `P(x_i = 0 | x_{i-1} = 1)`.
    pub q: f64,
    /// Distortion level.
    pub d: f64,
}

impl BinaryExampleParams {
    pub fn new(p: f64, q: f64, d: f64) -> Result<Self> {
        check_pq(p, q)?;
        if !d.is_finite() || d < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "distortion must be finite and nonnegative, got {d}"
            )));
        }
        Ok(Self { p, q, d })
    }

    /// `q(1+p)/(p+q)`, the steady-state probability that the pair is not `11`.
    pub fn pi0(&self) -> f64 {
        self.q * (1.0 + self.p) / (self.p + self.q)
    }
}

fn check_pq(p: f64, q: f64) -> Result<()> {
    for v in [p, q] {
        if !(v > 0.0 && v < 1.0) {
            return Err(Error::ProbabilityOutOfRange(v));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalyticKernel {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    /// False when `D > D_max` or a value falls outside `[0, 1]`.
    pub valid: bool,
}

impl AnalyticKernel {
    /// Stationary policy over `(x_i, x_{i-1})` windows.
    pub fn policy(&self) -> Result<CausalPolicy> {
        let a = self.alpha;
        let b = self.beta;
        let kernel = StochasticKernel::new(vec![
            vec![a, 1.0 - a],
            vec![a, 1.0 - a],
            vec![a, 1.0 - a],
            vec![1.0 - b, b],
        ])?;
        Ok(CausalPolicy::Stationary(StationaryPolicy::new(2, 1, kernel)?))
    }
}

pub fn analytic_kernel(params: &BinaryExampleParams) -> Result<AnalyticKernel> {
    let BinaryExampleParams { p, q, d } = *params;
    check_pq(p, q)?;
    let denom = 1.0 - 2.0 * d;
    if denom.abs() < 1e-15 {
        return Err(Error::Singular("D = 1/2 makes 1 − 2D vanish".into()));
    }
    if d > 0.5 {
        return Err(Error::InvalidArgument(format!(
            "closed forms need D < 1/2, got {d}"
        )));
    }
    let alpha = (1.0 - d) * (q - d * p - d * q + p * q) / (q * denom * (1.0 + p));
    let beta = (1.0 - d) * (p - p * q - d * p - d * q) / (p * denom * (1.0 - q));
    let gamma = (q - d * p - d * q + p * q) / (denom * (p + q));
    let in_unit = |v: f64| (-VALIDITY_SLACK..=1.0 + VALIDITY_SLACK).contains(&v);
    let valid = d <= analytic_dmax(p, q)? && in_unit(alpha) && in_unit(beta) && in_unit(gamma);
    Ok(AnalyticKernel {
        alpha,
        beta,
        gamma,
        valid,
    })
}

/// Rate in bits per letter.
pub fn analytic_rdf(params: &BinaryExampleParams) -> Result<f64> {
    check_pq(params.p, params.q)?;
    if params.d > analytic_dmax(params.p, params.q)? {
        return Ok(0.0);
    }
    Ok(binary_entropy(params.pi0())? - binary_entropy(params.d)?)
}

pub fn analytic_dmax(p: f64, q: f64) -> Result<f64> {
    check_pq(p, q)?;
    Ok((q * (1.0 + p) / (p + q)).min(p * (1.0 - q) / (p + q)))
}

/// Whether `(p, q)` lies on the manifold `q(1+p)/(p+q) = 1/2`, where the
/// curve reduces to `1 − H(D)`.
pub fn on_special_case(p: f64, q: f64, tol: f64) -> bool {
    (q * (1.0 + p) / (p + q) - 0.5).abs() <= tol
}

/// The `q` that puts `(p, q)` on the special-case manifold.
pub fn special_case_q(p: f64) -> Result<f64> {
    check_pq(p, 0.5)?;
    Ok(p / (1.0 + 2.0 * p))
}

/// The distortion measure these closed forms refer to.
pub fn distortion() -> DistortionSpec {
    DistortionSpec::consecutive_ones()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn reference() -> BinaryExampleParams {
        BinaryExampleParams::new(0.55, 0.45, 0.2).unwrap()
    }

    #[test]
    fn reference_kernel_values() {
        let k = analytic_kernel(&reference()).unwrap();
        assert_abs_diff_eq!(k.alpha, 0.951015531660693, epsilon = 1e-14);
        assert_abs_diff_eq!(k.gamma, 0.829166666666667, epsilon = 1e-14);
        assert_abs_diff_eq!(k.beta, 0.451790633608815, epsilon = 1e-14);
        assert!(k.valid);
    }

    #[test]
    fn beta_is_bayes_consistent() {
        // γ = α (1 − π11) + (1 − β) π11 with π11 = p(1−q)/(p+q)
        let k = analytic_kernel(&reference()).unwrap();
        let pi11 = 0.55 * 0.55;
        assert_abs_diff_eq!(k.alpha * (1.0 - pi11) + (1.0 - k.beta) * pi11, k.gamma, epsilon = 1e-14);
    }

    #[test]
    fn reference_rate() {
        assert_abs_diff_eq!(analytic_rdf(&reference()).unwrap(), 0.162397350610939, epsilon = 1e-13);
    }

    #[test]
    fn zero_distortion_is_deterministic() {
        let k = analytic_kernel(&BinaryExampleParams::new(0.55, 0.45, 0.0).unwrap()).unwrap();
        assert_abs_diff_eq!(k.alpha, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(k.beta, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn half_distortion_is_singular() {
        let r = analytic_kernel(&BinaryExampleParams::new(0.55, 0.45, 0.5).unwrap());
        assert!(matches!(r, Err(Error::Singular(_))));
    }

    #[test]
    fn above_dmax_flags_and_zero_rate() {
        let params = BinaryExampleParams::new(0.55, 0.45, 0.35).unwrap();
        assert!(!analytic_kernel(&params).unwrap().valid);
        assert_eq!(analytic_rdf(&params).unwrap(), 0.0);
    }

    #[test]
    fn dmax_examples() {
        assert_abs_diff_eq!(analytic_dmax(0.55, 0.45).unwrap(), 0.3025, epsilon = 1e-15);
        let p = 0.3;
        assert_abs_diff_eq!(analytic_dmax(p, p).unwrap(), (1.0 - p) / 2.0, epsilon = 1e-15);
    }

    #[test]
    fn special_case_curve() {
        let q = special_case_q(0.5).unwrap();
        assert_abs_diff_eq!(q, 0.25, epsilon = 1e-15);
        assert!(on_special_case(0.5, q, 1e-15));
        let r = analytic_rdf(&BinaryExampleParams::new(0.5, q, 0.25).unwrap()).unwrap();
        assert_abs_diff_eq!(r, 0.188721875540867, epsilon = 1e-13);
        let k = analytic_kernel(&BinaryExampleParams::new(0.5, q, 0.25).unwrap()).unwrap();
        assert_abs_diff_eq!(k.alpha, 0.75, epsilon = 1e-14);
        assert_abs_diff_eq!(k.beta, 0.75, epsilon = 1e-14);
        assert_abs_diff_eq!(k.gamma, 0.5, epsilon = 1e-14);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(BinaryExampleParams::new(0.0, 0.5, 0.1).is_err());
        assert!(BinaryExampleParams::new(0.5, 1.0, 0.1).is_err());
        assert!(BinaryExampleParams::new(0.5, 0.5, -0.1).is_err());
    }

    proptest! {
        #[test]
        fn rate_strictly_decreasing_below_dmax(p in 0.05f64..0.95, q in 0.05f64..0.95, u in 0.01f64..0.98) {
            let dmax = analytic_dmax(p, q).unwrap();
            let d1 = u * dmax;
            let d2 = (u + 0.01) * dmax;
            let r1 = analytic_rdf(&BinaryExampleParams::new(p, q, d1).unwrap()).unwrap();
            let r2 = analytic_rdf(&BinaryExampleParams::new(p, q, d2).unwrap()).unwrap();
            prop_assert!(r1 > r2);
        }

        #[test]
        fn kernel_valid_below_dmax(p in 0.05f64..0.95, q in 0.05f64..0.95, u in 0.0f64..0.999) {
            let d = u * analytic_dmax(p, q).unwrap();
            let k = analytic_kernel(&BinaryExampleParams::new(p, q, d).unwrap()).unwrap();
            prop_assert!(k.valid, "{k:?}");
        }
    }
}
