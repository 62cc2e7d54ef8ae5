use rayon::prelude::*;

use super::exact::{self, RhoCache};
use super::fixed_point::{finish, solve_fixed_point, Solution};
use super::stationary::Problem;
use super::{
    check_sizes, CausalPolicy, GTable, OutputMarginalFamily, RdPoint, SolverConfig, SolverMode,
    StationaryPolicy,
};
use crate::distortion::DistortionSpec;
use crate::error::{Error, Result};
use crate::prob::{Distribution, MarkovSource, StochasticKernel};

/// Most negative slope tried when searching for a target distortion.
const MIN_SLOPE: f64 = -200.0;
const DISTORTION_TOL: f64 = 1e-9;
const MAX_BISECTIONS: usize = 200;

/// Result of [`solve_for_target_distortion`].
#[derive(Debug, Clone)]
pub struct TargetSolution {
    /// Reported `(D, R)`. When the curve has a jump at the target this is the
    /// time-sharing point between the two bracketing solutions.
    pub point: RdPoint,
    /// Solver output closest to the target.
    pub solution: Solution,
    pub interpolated: bool,
    pub diagnostics: Vec<String>,
}

fn stationary_dmax(source: &MarkovSource, dist: &DistortionSpec) -> Result<(f64, usize)> {
    check_sizes(source, dist)?;
    let p = Problem::new(source, dist)?;
    let mut best = (f64::INFINITY, 0);
    for y in 0..p.b {
        let d: f64 = p
            .window_probs
            .iter()
            .enumerate()
            .map(|(c, w)| w * p.rho[c * p.b + y])
            .sum();
        if d < best.0 {
            best = (d, y);
        }
    }
    Ok(best)
}

/// Smallest distortion reachable with a reconstruction independent of the
/// source; the steady-state curve is zero from here on.
pub fn d_max(source: &MarkovSource, dist: &DistortionSpec) -> Result<f64> {
    Ok(stationary_dmax(source, dist)?.0)
}

/// Steady-state distortion of the per-window best symbol.
pub fn d_min(source: &MarkovSource, dist: &DistortionSpec) -> Result<f64> {
    check_sizes(source, dist)?;
    let p = Problem::new(source, dist)?;
    Ok(p.window_probs
        .iter()
        .enumerate()
        .map(|(c, w)| {
            w * p.rho[c * p.b..(c + 1) * p.b]
                .iter()
                .copied()
                .fold(f64::INFINITY, f64::min)
        })
        .sum())
}

/// [`d_max`] over stages `0..=horizon`.
pub fn d_max_exact(source: &MarkovSource, dist: &DistortionSpec, horizon: usize) -> Result<f64> {
    check_sizes(source, dist)?;
    let cache = RhoCache::new(dist, horizon)?;
    Ok(exact::d_max(source, &cache).0)
}

/// [`d_min`] over stages `0..=horizon`.
pub fn d_min_exact(source: &MarkovSource, dist: &DistortionSpec, horizon: usize) -> Result<f64> {
    check_sizes(source, dist)?;
    let cache = RhoCache::new(dist, horizon)?;
    Ok(exact::d_min(source, &cache))
}

fn check_grid(slopes: &[f64]) -> Result<()> {
    if let Some(s) = slopes.iter().find(|s| !(**s <= 0.0) || !s.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "slopes must be finite and nonpositive, found {s}"
        )));
    }
    let up = slopes.windows(2).all(|w| w[0] <= w[1]);
    let down = slopes.windows(2).all(|w| w[0] >= w[1]);
    if !up && !down {
        return Err(Error::InvalidArgument("slope grid must be sorted".into()));
    }
    Ok(())
}

fn mode_dmax(source: &MarkovSource, dist: &DistortionSpec, mode: SolverMode) -> Result<f64> {
    match mode {
        SolverMode::Stationary => d_max(source, dist),
        SolverMode::Exact { horizon } => d_max_exact(source, dist, horizon),
    }
}

fn curve_point(
    source: &MarkovSource,
    dist: &DistortionSpec,
    base: &SolverConfig,
    slope: f64,
    dmax: f64,
) -> Result<RdPoint> {
    let mut point = solve_fixed_point(source, dist, &base.with_slope(slope))?.point;
    if point.distortion >= dmax {
        point.rate = 0.0;
    }
    Ok(point)
}

/// Solves each slope of `slopes` from uniform marginals.
pub fn sweep_curve(
    source: &MarkovSource,
    dist: &DistortionSpec,
    base: &SolverConfig,
    slopes: &[f64],
) -> Result<Vec<RdPoint>> {
    check_grid(slopes)?;
    let dmax = mode_dmax(source, dist, base.mode)?;
    slopes
        .iter()
        .map(|&s| curve_point(source, dist, base, s, dmax))
        .collect()
}

/// [`sweep_curve`] on a rayon pool of `threads` workers. Output order and
/// values match the serial sweep.
pub fn sweep_curve_threaded(
    source: &MarkovSource,
    dist: &DistortionSpec,
    base: &SolverConfig,
    slopes: &[f64],
    threads: usize,
) -> Result<Vec<RdPoint>> {
    check_grid(slopes)?;
    if threads <= 1 {
        return sweep_curve(source, dist, base, slopes);
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let dmax = mode_dmax(source, dist, base.mode)?;
    pool.install(|| {
        slopes
            .par_iter()
            .map(|&s| curve_point(source, dist, base, s, dmax))
            .collect()
    })
}

/// [`solve_for_target_distortion`] for each of `targets`, on `threads`
/// rayon workers when `threads > 1`. Output order follows `targets`.
pub fn solve_targets_threaded(
    source: &MarkovSource,
    dist: &DistortionSpec,
    base: &SolverConfig,
    targets: &[f64],
    threads: usize,
) -> Result<Vec<TargetSolution>> {
    if threads <= 1 {
        return targets
            .iter()
            .map(|&t| solve_for_target_distortion(source, dist, base, t))
            .collect();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    pool.install(|| {
        targets
            .par_iter()
            .map(|&t| solve_for_target_distortion(source, dist, base, t))
            .collect()
    })
}

/// Zero-rate solution that emits the best source-independent symbols.
fn zero_rate_solution(
    source: &MarkovSource,
    dist: &DistortionSpec,
    base: &SolverConfig,
) -> Result<Solution> {
    let (a, b) = (source.size(), dist.recon_size());
    let config = base.with_slope(0.0);
    let (policy, marginals, g) = match base.mode {
        SolverMode::Stationary => {
            let (_, y) = stationary_dmax(source, dist)?;
            let point = Distribution::point(b, y)?;
            let p = Problem::new(source, dist)?;
            let kernel = StochasticKernel::constant(p.contexts(), &point);
            (
                CausalPolicy::Stationary(StationaryPolicy::new(a, p.memory, kernel)?),
                OutputMarginalFamily::Stationary(point),
                super::stationary::zero_g(dist)?,
            )
        }
        SolverMode::Exact { horizon } => {
            let cache = RhoCache::new(dist, horizon)?;
            let (_, seq) = exact::d_max(source, &cache);
            let policy = exact::constant_policy(a, b, &seq);
            let marginals: Vec<StochasticKernel> = seq
                .iter()
                .enumerate()
                .map(|(i, &y)| {
                    Distribution::point(b, y).map(|d| StochasticKernel::constant(b.pow(i as u32), &d))
                })
                .collect::<Result<_>>()?;
            let g = GTable::from_stages(cache.stages.iter().map(|s| vec![0.0; s.len()]).collect());
            (
                CausalPolicy::Exact(policy),
                OutputMarginalFamily::Exact(marginals),
                g,
            )
        }
    };
    finish(source, dist, &config, policy, marginals, g, 0, true, 0.0)
}

/// Finds the slope whose solution meets `target` and reports its rate.
///
/// Targets at or above the zero-rate distortion return rate zero; targets
/// below the minimum achievable distortion are infeasible. When the
/// distortion jumps across the target between two slopes closer than
/// machine precision, the reported point time-shares the two solutions.
pub fn solve_for_target_distortion(
    source: &MarkovSource,
    dist: &DistortionSpec,
    base: &SolverConfig,
    target: f64,
) -> Result<TargetSolution> {
    base.validate()?;
    check_sizes(source, dist)?;
    if !target.is_finite() || target < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "target distortion must be finite and nonnegative, got {target}"
        )));
    }
    let dmax = mode_dmax(source, dist, base.mode)?;
    let dmin = match base.mode {
        SolverMode::Stationary => d_min(source, dist)?,
        SolverMode::Exact { horizon } => d_min_exact(source, dist, horizon)?,
    };
    if target >= dmax {
        let solution = zero_rate_solution(source, dist, base)?;
        let mut point = solution.point;
        point.rate = 0.0;
        return Ok(TargetSolution {
            point,
            solution,
            interpolated: false,
            diagnostics: vec![],
        });
    }
    if target < dmin - 1e-12 {
        return Err(Error::Infeasible {
            target,
            minimum: dmin,
        });
    }

    let mut diagnostics = Vec::new();
    // D(s) is nonincreasing as s decreases; `hi` keeps D > target.
    let mut hi = solve_fixed_point(source, dist, &base.with_slope(0.0))?;
    if hi.point.distortion <= target {
        hi = zero_rate_solution(source, dist, base)?;
    }
    let mut slope = -1.0;
    let mut lo = solve_fixed_point(source, dist, &base.with_slope(slope))?;
    while lo.point.distortion > target + DISTORTION_TOL {
        if slope <= MIN_SLOPE {
            diagnostics.push(format!(
                "slope reached {slope} with distortion {} above target",
                lo.point.distortion
            ));
            return Ok(TargetSolution {
                point: lo.point,
                solution: lo,
                interpolated: false,
                diagnostics,
            });
        }
        hi = lo;
        slope = (2.0 * slope).max(MIN_SLOPE);
        lo = solve_fixed_point(source, dist, &base.with_slope(slope))?;
    }
    if (lo.point.distortion - target).abs() <= DISTORTION_TOL {
        return Ok(done(lo, diagnostics));
    }
    for _ in 0..MAX_BISECTIONS {
        let (s_lo, s_hi) = (lo.point.slope, hi.point.slope);
        let mid = 0.5 * (s_lo + s_hi);
        if mid <= s_lo || mid >= s_hi {
            break;
        }
        let sol = solve_fixed_point(source, dist, &base.with_slope(mid))?;
        if !sol.point.converged {
            diagnostics.push(format!("slope {mid} did not converge"));
        }
        if (sol.point.distortion - target).abs() <= DISTORTION_TOL {
            return Ok(done(sol, diagnostics));
        }
        if sol.point.distortion > target {
            hi = sol;
        } else {
            lo = sol;
        }
    }
    // D(s) jumps across the target: mix the two bracketing solutions.
    let (d0, d1) = (hi.point.distortion, lo.point.distortion);
    let w = (d0 - target) / (d0 - d1);
    let rate = (1.0 - w) * hi.point.rate + w * lo.point.rate;
    diagnostics.push(format!(
        "distortion jumps from {d0} to {d1} at slope {}; time-sharing with weight {w}",
        lo.point.slope
    ));
    let mut point = lo.point;
    point.distortion = target;
    point.rate = rate;
    point.converged = lo.point.converged && hi.point.converged;
    Ok(TargetSolution {
        point,
        solution: if w >= 0.5 { lo } else { hi },
        interpolated: true,
        diagnostics,
    })
}

fn done(solution: Solution, diagnostics: Vec<String>) -> TargetSolution {
    TargetSolution {
        point: solution.point,
        solution,
        interpolated: false,
        diagnostics,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn example() -> (MarkovSource, DistortionSpec) {
        (
            MarkovSource::binary(0.55, 0.45).unwrap(),
            DistortionSpec::consecutive_ones(),
        )
    }

    #[test]
    fn dmax_of_consecutive_ones_is_pi1() {
        let (src, d) = example();
        assert!((d_max(&src, &d).unwrap() - 0.3025).abs() < 1e-12);
        assert_eq!(d_min(&src, &d).unwrap(), 0.0);
    }

    #[test]
    fn threaded_sweep_matches_serial() {
        let (src, d) = example();
        let grid = [-0.5, -1.0, -2.0, -4.0];
        let cfg = SolverConfig::stationary(0.0);
        let a = sweep_curve(&src, &d, &cfg, &grid).unwrap();
        let b = sweep_curve_threaded(&src, &d, &cfg, &grid, 3).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn threaded_targets_match_serial() {
        let (src, d) = example();
        let targets = [0.05, 0.2, 0.4];
        let cfg = SolverConfig::stationary(0.0);
        let a = solve_targets_threaded(&src, &d, &cfg, &targets, 1).unwrap();
        let b = solve_targets_threaded(&src, &d, &cfg, &targets, 3).unwrap();
        let pts = |v: &[TargetSolution]| v.iter().map(|t| t.point).collect::<Vec<_>>();
        assert_eq!(pts(&a), pts(&b));
        assert_eq!(b[2].point.rate, 0.0);
    }

    #[test]
    fn rejects_bad_grids() {
        let (src, d) = example();
        let cfg = SolverConfig::stationary(0.0);
        assert!(sweep_curve(&src, &d, &cfg, &[0.1]).is_err());
        assert!(sweep_curve(&src, &d, &cfg, &[-1.0, -3.0, -2.0]).is_err());
    }

    #[test]
    fn zero_slope_point_has_zero_rate() {
        let (src, d) = example();
        let pts = sweep_curve(&src, &d, &SolverConfig::stationary(0.0), &[0.0]).unwrap();
        assert_eq!(pts[0].rate, 0.0);
        assert!(pts[0].distortion >= 0.3025);
        assert!(pts[0].iterations <= 2);
    }

    #[test]
    fn target_above_dmax_gives_zero_rate() {
        let (src, d) = example();
        let t = solve_for_target_distortion(&src, &d, &SolverConfig::stationary(0.0), 0.4).unwrap();
        assert_eq!(t.point.rate, 0.0);
        assert!((t.point.distortion - 0.3025).abs() < 1e-12);
    }

    #[test]
    fn target_below_dmin_is_infeasible() {
        let src = MarkovSource::binary(0.3, 0.3).unwrap();
        // strictly positive costs everywhere
        let d = DistortionSpec::windowed(2, 2, 0, 0, vec![vec![0.5, 1.0], vec![1.0, 0.5]]).unwrap();
        let err = solve_for_target_distortion(&src, &d, &SolverConfig::stationary(0.0), 0.1);
        assert!(matches!(err, Err(Error::Infeasible { .. })));
    }

    #[test]
    fn target_hits_requested_distortion() {
        let (src, d) = example();
        let t = solve_for_target_distortion(&src, &d, &SolverConfig::stationary(0.0), 0.2).unwrap();
        assert!((t.point.distortion - 0.2).abs() < 1e-8);
        assert!((t.point.slope - (0.2f64 / 0.8).ln()).abs() < 1e-6);
    }
}
