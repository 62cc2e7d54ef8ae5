use super::exact::{self, RhoCache};
use super::stationary::{self, Problem};
use super::{
    check_sizes, CausalPolicy, ExactPolicy, GTable, OutputMarginalFamily, RdPoint, SolverConfig,
    SolverMode, StationaryPolicy,
};
use crate::distortion::DistortionSpec;
use crate::error::{Error, Result};
use crate::prob::{Distribution, MarkovSource, StochasticKernel};

/// Output of [`solve_fixed_point`]: the policy together with the marginals and
/// potentials it was tilted from.
#[derive(Debug, Clone)]
pub struct Solution {
    pub policy: CausalPolicy,
    pub marginals: OutputMarginalFamily,
    pub g: GTable,
    pub point: RdPoint,
    /// Rate from the closed-form expression, bits per stage.
    pub closed_form_rate: f64,
}

pub fn solve_fixed_point(
    source: &MarkovSource,
    dist: &DistortionSpec,
    config: &SolverConfig,
) -> Result<Solution> {
    solve_fixed_point_from(source, dist, config, None)
}

/// Like [`solve_fixed_point`], starting from `init` instead of uniform
/// marginals.
pub fn solve_fixed_point_from(
    source: &MarkovSource,
    dist: &DistortionSpec,
    config: &SolverConfig,
    init: Option<&OutputMarginalFamily>,
) -> Result<Solution> {
    config.validate()?;
    check_sizes(source, dist)?;
    match config.mode {
        SolverMode::Stationary => solve_stationary(source, dist, config, init),
        SolverMode::Exact { horizon } => solve_exact(source, dist, config, horizon, init),
    }
}

fn solve_stationary(
    source: &MarkovSource,
    dist: &DistortionSpec,
    config: &SolverConfig,
    init: Option<&OutputMarginalFamily>,
) -> Result<Solution> {
    let problem = Problem::new(source, dist)?;
    let b = problem.b;
    let mut r = match init {
        Some(OutputMarginalFamily::Stationary(d)) if d.len() == b => d.probs().to_vec(),
        Some(_) => {
            return Err(Error::InvalidArgument(
                "initial marginals do not match stationary mode".into(),
            ))
        }
        None => vec![1.0 / b as f64; b],
    };
    let mut kernel = problem.kernel(&r, config.slope)?;
    let mut residual = f64::INFINITY;
    let mut iterations = 0;
    while iterations < config.max_iter {
        iterations += 1;
        let fresh = problem.marginal(&kernel);
        let next: Vec<f64> = r
            .iter()
            .zip(&fresh)
            .map(|(old, new)| config.damping * old + (1.0 - config.damping) * new)
            .collect();
        residual = r.iter().zip(&next).fold(0.0f64, |m, (u, v)| m.max((u - v).abs()));
        if residual < config.tol {
            break;
        }
        r = next;
        kernel = problem.kernel(&r, config.slope)?;
    }
    let converged = residual < config.tol;
    let policy = CausalPolicy::Stationary(StationaryPolicy::new(source.size(), problem.memory, kernel)?);
    let marginals = OutputMarginalFamily::Stationary(Distribution::new(r)?);
    let g = stationary::zero_g(dist)?;
    finish(source, dist, config, policy, marginals, g, iterations, converged, residual)
}

fn solve_exact(
    source: &MarkovSource,
    dist: &DistortionSpec,
    config: &SolverConfig,
    horizon: usize,
    init: Option<&OutputMarginalFamily>,
) -> Result<Solution> {
    let cache = RhoCache::new(dist, horizon)?;
    let (a, b) = (source.size(), dist.recon_size());
    let mut marginals: Vec<StochasticKernel> = match init {
        Some(OutputMarginalFamily::Exact(m)) if m.len() == horizon + 1 => m.clone(),
        Some(_) => {
            return Err(Error::InvalidArgument(
                "initial marginals do not match the exact horizon".into(),
            ))
        }
        None => match OutputMarginalFamily::uniform(config.mode, b)? {
            OutputMarginalFamily::Exact(m) => m,
            OutputMarginalFamily::Stationary(_) => unreachable!(),
        },
    };
    let mut g = exact::backward_g(source, &cache, &marginals, config.slope)?;
    let mut policy = ExactPolicy::new(a, b, exact::all_kernels(&cache, &g, &marginals, config.slope)?)?;
    let mut residual = f64::INFINITY;
    let mut iterations = 0;
    while iterations < config.max_iter {
        iterations += 1;
        let fresh = exact::marginals(source, &policy)?;
        let old = OutputMarginalFamily::Exact(marginals.clone());
        let next = old.mix(&OutputMarginalFamily::Exact(fresh), config.damping);
        residual = old.sup_distance(&next);
        if residual < config.tol {
            break;
        }
        marginals = match next {
            OutputMarginalFamily::Exact(m) => m,
            OutputMarginalFamily::Stationary(_) => unreachable!(),
        };
        g = exact::backward_g(source, &cache, &marginals, config.slope)?;
        policy = ExactPolicy::new(a, b, exact::all_kernels(&cache, &g, &marginals, config.slope)?)?;
    }
    let converged = residual < config.tol;
    finish(
        source,
        dist,
        config,
        CausalPolicy::Exact(policy),
        OutputMarginalFamily::Exact(marginals),
        g,
        iterations,
        converged,
        residual,
    )
}

#[allow(clippy::too_many_arguments)]
pub(super) fn finish(
    source: &MarkovSource,
    dist: &DistortionSpec,
    config: &SolverConfig,
    policy: CausalPolicy,
    marginals: OutputMarginalFamily,
    g: GTable,
    iterations: usize,
    converged: bool,
    residual: f64,
) -> Result<Solution> {
    let eval = super::evaluate_policy(source, dist, &policy)?;
    let closed_form_rate =
        super::closed_form_rate(source, dist, &policy, &marginals, &g, config.slope)?;
    Ok(Solution {
        point: RdPoint {
            slope: config.slope,
            distortion: eval.distortion,
            rate: eval.rate,
            iterations,
            converged,
            residual,
        },
        policy,
        marginals,
        g,
        closed_form_rate,
    })
}
