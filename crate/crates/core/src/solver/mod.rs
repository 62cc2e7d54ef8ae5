//! Causal rate distortion solver.
//!
//! The solver alternates three maps until the reconstruction marginals stop
//! moving:
//!
//! 1. [`backward_g`] runs the backward potentials `g_i(x^i, y^i)` with
//!    `g_n ≡ 0`;
//! 2. [`optimal_stage_kernel`] tilts each stage marginal,
//!    `P*(y_i | y^{i-1}, x^i) ∝ exp(s ρ_i − g_i) P*(y_i | y^{i-1})`;
//! 3. [`update_output_marginals`] recomputes `P*(y_i | y^{i-1})` from the
//!    joint the source and the new kernels induce.
//!
//! Two modes are supported. [`SolverMode::Exact`] keeps kernels over full
//! histories for a finite horizon. [`SolverMode::Stationary`] keeps one
//! per-letter kernel over the distortion's source window together with a
//! constant output marginal; every potential is then zero.
//!
//! Rates are reported in bits per stage and distortions per stage. The slope
//! `s` multiplies the distortion inside `exp(·)`, so the slope of the curve in
//! bits is `s / ln 2`.

mod exact;
mod fixed_point;
mod stationary;
mod sweep;

use crate::distortion::DistortionSpec;
use crate::error::{Error, Result};
use crate::history::{history_index, tail_window_index};
use crate::prob::{Distribution, MarkovSource, StochasticKernel};

pub use fixed_point::{solve_fixed_point, solve_fixed_point_from, Solution};
pub use sweep::{
    d_max, d_max_exact, d_min, d_min_exact, solve_for_target_distortion, solve_targets_threaded,
    sweep_curve, sweep_curve_threaded, TargetSolution,
};

/// Largest `|X|^{n+1} · |Y|^{n+1}` handled in exact mode (nine binary stages).
pub const MAX_EXACT_STATES: usize = 1 << 18;

/// Exact-mode horizon limit for the given alphabet sizes.
pub fn exact_horizon_limit(source_size: usize, recon_size: usize) -> usize {
    let per_stage = source_size * recon_size;
    let mut n = 0usize;
    let mut states = per_stage;
    while states.saturating_mul(per_stage) <= MAX_EXACT_STATES {
        states *= per_stage;
        n += 1;
    }
    n
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverMode {
    /// Full-history kernels over stages `0..=horizon`.
    Exact { horizon: usize },
    /// Time-invariant per-letter kernel with a constant output marginal.
    Stationary,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    /// Lagrange slope `s ≤ 0`.
    pub slope: f64,
    /// Sup-norm threshold on the marginal change between iterations.
    pub tol: f64,
    pub max_iter: usize,
    /// Weight of the previous marginal in the update, in `[0, 1)`.
    pub damping: f64,
    pub mode: SolverMode,
}

impl SolverConfig {
    pub fn stationary(slope: f64) -> Self {
        Self {
            slope,
            tol: 1e-13,
            max_iter: 1_000_000,
            damping: 0.0,
            mode: SolverMode::Stationary,
        }
    }

    pub fn exact(horizon: usize, slope: f64) -> Self {
        Self {
            slope,
            tol: 1e-12,
            max_iter: 200_000,
            damping: 0.0,
            mode: SolverMode::Exact { horizon },
        }
    }

    pub fn with_slope(mut self, slope: f64) -> Self {
        self.slope = slope;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.slope <= 0.0) || !self.slope.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "slope must be finite and nonpositive, got {}",
                self.slope
            )));
        }
        if !(self.tol > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "tolerance must be positive, got {}",
                self.tol
            )));
        }
        if !(0.0..1.0).contains(&self.damping) {
            return Err(Error::InvalidArgument(format!(
                "damping must lie in [0, 1), got {}",
                self.damping
            )));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidArgument("max_iter must be positive".into()));
        }
        Ok(())
    }
}

/// Full-history causal kernels `P(y_i | y^{i-1}, x^i)`, `i = 0..=n`.
///
/// Stage `i` rows are indexed by `history(y^{i-1}) · |X|^{i+1} + history(x^i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExactPolicy {
    source_size: usize,
    recon_size: usize,
    stages: Vec<StochasticKernel>,
}

impl ExactPolicy {
    pub fn new(source_size: usize, recon_size: usize, stages: Vec<StochasticKernel>) -> Result<Self> {
        for (i, k) in stages.iter().enumerate() {
            let rows = recon_size.pow(i as u32) * source_size.pow(i as u32 + 1);
            if k.num_inputs() != rows || k.num_outputs() != recon_size {
                return Err(Error::InvalidArgument(format!(
                    "stage {i} kernel must be {rows}x{recon_size}, got {}x{}",
                    k.num_inputs(),
                    k.num_outputs()
                )));
            }
        }
        if stages.is_empty() {
            return Err(Error::InvalidArgument("policy needs at least one stage".into()));
        }
        Ok(Self {
            source_size,
            recon_size,
            stages,
        })
    }

    pub fn horizon(&self) -> usize {
        self.stages.len() - 1
    }

    pub fn stages(&self) -> &[StochasticKernel] {
        &self.stages
    }

    pub fn source_size(&self) -> usize {
        self.source_size
    }

    pub fn recon_size(&self) -> usize {
        self.recon_size
    }

    /// Row for `x^i = xs` and `y^{i-1} = ys_prev`.
    pub fn row(&self, xs: &[usize], ys_prev: &[usize]) -> &[f64] {
        let stage = xs.len() - 1;
        let a_pow = self.source_size.pow(stage as u32 + 1);
        let idx = history_index(ys_prev, self.recon_size) * a_pow + history_index(xs, self.source_size);
        self.stages[stage].row(idx)
    }
}

/// Time-invariant kernel `P(y_i | x_i, …, x_{i-m})`; rows follow the window
/// convention of [`crate::history`].
#[derive(Debug, Clone, PartialEq)]
pub struct StationaryPolicy {
    source_size: usize,
    memory: usize,
    kernel: StochasticKernel,
}

impl StationaryPolicy {
    pub fn new(source_size: usize, memory: usize, kernel: StochasticKernel) -> Result<Self> {
        let rows = source_size.pow(memory as u32 + 1);
        if kernel.num_inputs() != rows {
            return Err(Error::LengthMismatch {
                expected: rows,
                found: kernel.num_inputs(),
            });
        }
        Ok(Self {
            source_size,
            memory,
            kernel,
        })
    }

    pub fn memory(&self) -> usize {
        self.memory
    }

    pub fn kernel(&self) -> &StochasticKernel {
        &self.kernel
    }

    pub fn source_size(&self) -> usize {
        self.source_size
    }

    pub fn recon_size(&self) -> usize {
        self.kernel.num_outputs()
    }

    pub fn row(&self, xs: &[usize]) -> &[f64] {
        self.kernel
            .row(tail_window_index(xs, self.memory + 1, self.source_size))
    }
}

/// Reconstruction kernels, causal by construction: stage `i` sees only
/// `(y^{i-1}, x^i)`.
#[derive(Debug, Clone, PartialEq)]
pub enum CausalPolicy {
    Exact(ExactPolicy),
    Stationary(StationaryPolicy),
}

impl CausalPolicy {
    pub fn source_size(&self) -> usize {
        match self {
            CausalPolicy::Exact(p) => p.source_size,
            CausalPolicy::Stationary(p) => p.source_size,
        }
    }

    pub fn recon_size(&self) -> usize {
        match self {
            CausalPolicy::Exact(p) => p.recon_size,
            CausalPolicy::Stationary(p) => p.recon_size(),
        }
    }

    /// Finite horizon of an exact policy.
    pub fn horizon(&self) -> Option<usize> {
        match self {
            CausalPolicy::Exact(p) => Some(p.horizon()),
            CausalPolicy::Stationary(_) => None,
        }
    }

    /// Kernel row for `x^i = xs` and `y^{i-1} = ys_prev`.
    pub fn row(&self, xs: &[usize], ys_prev: &[usize]) -> &[f64] {
        match self {
            CausalPolicy::Exact(p) => p.row(xs, ys_prev),
            CausalPolicy::Stationary(p) => p.row(xs),
        }
    }

    /// Full-history form over stages `0..=horizon`.
    pub fn unroll(&self, horizon: usize) -> Result<ExactPolicy> {
        match self {
            CausalPolicy::Exact(p) => {
                if p.horizon() < horizon {
                    return Err(Error::InvalidArgument(format!(
                        "policy covers {} stages, {} requested",
                        p.horizon() + 1,
                        horizon + 1
                    )));
                }
                ExactPolicy::new(p.source_size, p.recon_size, p.stages[..=horizon].to_vec())
            }
            CausalPolicy::Stationary(p) => {
                let (a, b) = (p.source_size, p.recon_size());
                let mut stages = Vec::with_capacity(horizon + 1);
                let mut xs = Vec::new();
                for i in 0..=horizon {
                    let xa = a.pow(i as u32 + 1);
                    let rows = b.pow(i as u32) * xa;
                    let mut data = Vec::with_capacity(rows * b);
                    xs.resize(i + 1, 0);
                    for r in 0..rows {
                        crate::history::decode_history(r % xa, a, &mut xs);
                        data.extend_from_slice(p.row(&xs));
                    }
                    stages.push(StochasticKernel::from_normalized(rows, b, data));
                }
                ExactPolicy::new(a, b, stages)
            }
        }
    }

    pub fn max_row_error(&self) -> f64 {
        match self {
            CausalPolicy::Exact(p) => p.stages.iter().map(|k| k.max_row_error()).fold(0.0, f64::max),
            CausalPolicy::Stationary(p) => p.kernel.max_row_error(),
        }
    }

    pub fn kernels(&self) -> Vec<&StochasticKernel> {
        match self {
            CausalPolicy::Exact(p) => p.stages.iter().collect(),
            CausalPolicy::Stationary(p) => vec![&p.kernel],
        }
    }
}

/// Reconstruction marginals `P*(y_i | y^{i-1})`.
#[derive(Debug, Clone, PartialEq)]
pub enum OutputMarginalFamily {
    /// Stage `i` rows indexed by `history(y^{i-1})`.
    Exact(Vec<StochasticKernel>),
    /// Constant per-letter marginal `P*(y_i)`.
    Stationary(Distribution),
}

impl OutputMarginalFamily {
    pub fn uniform(mode: SolverMode, recon_size: usize) -> Result<Self> {
        let u = Distribution::uniform(recon_size)?;
        Ok(match mode {
            SolverMode::Stationary => OutputMarginalFamily::Stationary(u),
            SolverMode::Exact { horizon } => OutputMarginalFamily::Exact(
                (0..=horizon)
                    .map(|i| StochasticKernel::constant(recon_size.pow(i as u32), &u))
                    .collect(),
            ),
        })
    }

    /// Largest absolute entry difference; infinite when shapes disagree.
    pub fn sup_distance(&self, other: &Self) -> f64 {
        let pairs: Vec<(&[f64], &[f64])> = match (self, other) {
            (OutputMarginalFamily::Stationary(a), OutputMarginalFamily::Stationary(b)) => {
                vec![(a.probs(), b.probs())]
            }
            (OutputMarginalFamily::Exact(a), OutputMarginalFamily::Exact(b)) if a.len() == b.len() => {
                a.iter().zip(b).map(|(x, y)| (x.as_slice(), y.as_slice())).collect()
            }
            _ => return f64::INFINITY,
        };
        let mut d = 0.0f64;
        for (x, y) in pairs {
            if x.len() != y.len() {
                return f64::INFINITY;
            }
            for (u, v) in x.iter().zip(y) {
                d = d.max((u - v).abs());
            }
        }
        d
    }

    /// `weight · self + (1 − weight) · other`.
    pub(crate) fn mix(&self, other: &Self, weight: f64) -> Self {
        let blend = |a: &[f64], b: &[f64]| -> Vec<f64> {
            a.iter().zip(b).map(|(u, v)| weight * u + (1.0 - weight) * v).collect()
        };
        match (self, other) {
            (OutputMarginalFamily::Stationary(a), OutputMarginalFamily::Stationary(b)) => {
                let v = blend(a.probs(), b.probs());
                OutputMarginalFamily::Stationary(Distribution::from_weights(&v).unwrap_or_else(|_| b.clone()))
            }
            (OutputMarginalFamily::Exact(a), OutputMarginalFamily::Exact(b)) => OutputMarginalFamily::Exact(
                a.iter()
                    .zip(b)
                    .map(|(x, y)| {
                        StochasticKernel::from_normalized(
                            x.num_inputs(),
                            x.num_outputs(),
                            blend(x.as_slice(), y.as_slice()),
                        )
                    })
                    .collect(),
            ),
            _ => other.clone(),
        }
    }
}

/// Backward potentials `g_i(x^i, y^i)`.
///
/// Stage `i` values are indexed by `history(y^i) · |X|^{i+1} + history(x^i)`.
/// In stationary mode the table holds a single all-zero stage over
/// `(window context, y)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GTable {
    stages: Vec<Vec<f64>>,
}

impl GTable {
    pub(crate) fn from_stages(stages: Vec<Vec<f64>>) -> Self {
        Self { stages }
    }

    pub fn stages(&self) -> &[Vec<f64>] {
        &self.stages
    }

    pub fn stage(&self, i: usize) -> &[f64] {
        &self.stages[i]
    }

    pub fn last_stage(&self) -> &[f64] {
        self.stages.last().expect("at least one stage")
    }

    pub fn is_finite(&self) -> bool {
        self.stages.iter().flatten().all(|v| v.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        self.stages.iter().flatten().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// One point `(s, D, R)` of the causal rate distortion curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RdPoint {
    pub slope: f64,
    /// Average distortion per stage.
    pub distortion: f64,
    /// Bits per stage.
    pub rate: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Final sup-norm marginal change.
    pub residual: f64,
}

/// Rate and distortion of a policy, both per stage.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolicyEvaluation {
    pub rate: f64,
    pub distortion: f64,
}

fn check_sizes(source: &MarkovSource, dist: &DistortionSpec) -> Result<()> {
    if dist.source_size() != source.size() {
        return Err(Error::LengthMismatch {
            expected: source.size(),
            found: dist.source_size(),
        });
    }
    Ok(())
}

/// Backward potentials for the given marginals. Exact marginals yield
/// stages `0..=n` with `g_n ≡ 0`; stationary marginals yield a single zero
/// stage.
pub fn backward_g(
    source: &MarkovSource,
    dist: &DistortionSpec,
    marginals: &OutputMarginalFamily,
    slope: f64,
) -> Result<GTable> {
    check_sizes(source, dist)?;
    match marginals {
        OutputMarginalFamily::Exact(m) => {
            let cache = exact::RhoCache::new(dist, m.len() - 1)?;
            exact::backward_g(source, &cache, m, slope)
        }
        OutputMarginalFamily::Stationary(_) => Ok(stationary::zero_g(dist)?),
    }
}

/// Tilted kernel of stage `stage`.
pub fn optimal_stage_kernel(
    dist: &DistortionSpec,
    g: &GTable,
    marginals: &OutputMarginalFamily,
    slope: f64,
    stage: usize,
) -> Result<StochasticKernel> {
    match marginals {
        OutputMarginalFamily::Exact(m) => {
            let cache = exact::RhoCache::new(dist, m.len() - 1)?;
            exact::stage_kernel(&cache, g, m, slope, stage)
        }
        OutputMarginalFamily::Stationary(r) => stationary::kernel(dist, r, slope),
    }
}

/// Marginals induced by `policy` on `source`.
pub fn update_output_marginals(
    source: &MarkovSource,
    policy: &CausalPolicy,
) -> Result<OutputMarginalFamily> {
    match policy {
        CausalPolicy::Exact(p) => Ok(OutputMarginalFamily::Exact(exact::marginals(source, p)?)),
        CausalPolicy::Stationary(p) => Ok(OutputMarginalFamily::Stationary(
            stationary::marginal(source, p)?,
        )),
    }
}

/// Rate from the exact mutual information of the induced joint and the
/// average distortion, both per stage. Stationary policies are evaluated
/// per letter under the steady-state source.
pub fn evaluate_policy(
    source: &MarkovSource,
    dist: &DistortionSpec,
    policy: &CausalPolicy,
) -> Result<PolicyEvaluation> {
    check_sizes(source, dist)?;
    match policy {
        CausalPolicy::Exact(p) => {
            let cache = exact::RhoCache::new(dist, p.horizon())?;
            exact::evaluate(source, &cache, p)
        }
        CausalPolicy::Stationary(p) => stationary::evaluate(source, dist, p),
    }
}

/// Rate in bits per stage from the closed-form expression in terms of the
/// potentials and marginals that generated `policy`. Agrees with
/// [`evaluate_policy`] at a fixed point.
pub fn closed_form_rate(
    source: &MarkovSource,
    dist: &DistortionSpec,
    policy: &CausalPolicy,
    marginals: &OutputMarginalFamily,
    g: &GTable,
    slope: f64,
) -> Result<f64> {
    check_sizes(source, dist)?;
    match (policy, marginals) {
        (CausalPolicy::Exact(p), OutputMarginalFamily::Exact(m)) => {
            let cache = exact::RhoCache::new(dist, p.horizon())?;
            exact::closed_form_rate(source, &cache, p, m, g, slope)
        }
        (CausalPolicy::Stationary(p), OutputMarginalFamily::Stationary(r)) => {
            stationary::closed_form_rate(source, dist, p, r, slope)
        }
        _ => Err(Error::InvalidArgument(
            "policy and marginals come from different modes".into(),
        )),
    }
}

pub(crate) fn log_sum_exp(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let m = values.clone().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + values.map(|v| (v - m).exp()).sum::<f64>().ln()
}

/// Softmax of log-weights into `out`; `None` when every weight is `-∞`.
pub(crate) fn normalize_log_weights(logw: &[f64], out: &mut [f64]) -> Option<()> {
    let m = logw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY || m.is_nan() {
        return None;
    }
    let mut total = 0.0;
    for (o, &w) in out.iter_mut().zip(logw) {
        *o = (w - m).exp();
        total += *o;
    }
    out.iter_mut().for_each(|o| *o /= total);
    Some(())
}

pub(crate) fn ln_or_neg_inf(p: f64) -> f64 {
    if p > 0.0 {
        p.ln()
    } else {
        f64::NEG_INFINITY
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn horizon_limit_binary_is_eight() {
        assert_eq!(exact_horizon_limit(2, 2), 8);
    }

    #[test]
    fn config_validation() {
        assert!(SolverConfig::stationary(-1.0).validate().is_ok());
        assert!(SolverConfig::stationary(0.5).validate().is_err());
        assert!(SolverConfig::stationary(f64::NAN).validate().is_err());
        let mut c = SolverConfig::exact(2, -1.0);
        c.damping = 1.0;
        assert!(c.validate().is_err());
        c.damping = 0.5;
        c.tol = 0.0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn lse_handles_neg_infinity() {
        assert_eq!(log_sum_exp([f64::NEG_INFINITY, f64::NEG_INFINITY].into_iter()), f64::NEG_INFINITY);
        let v = log_sum_exp([0.0f64, 0.0].into_iter());
        assert!((v - 2f64.ln()).abs() < 1e-15);
    }
}
