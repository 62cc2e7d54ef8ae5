//! WebAssembly bindings for the static demo page in `www/`.
//!
//! Every function takes the binary source `P(1|0) = p`, `P(0|1) = q` with
//! the consecutive-ones distortion and returns a flat `Float64Array`.

use causal_rdf::analytic::{analytic_dmax, analytic_kernel, analytic_rdf, BinaryExampleParams};
use causal_rdf::realization::{empirical_stats, identity_realization, simulate};
use causal_rdf::solver::{evaluate_policy, solve_for_target_distortion};
use causal_rdf::{DistortionSpec, MarkovSource, SolverConfig};
use wasm_bindgen::prelude::*;

/// Longest simulation the page may request.
pub const MAX_STEPS: u32 = 5_000_000;
/// Most curve points the page may request.
pub const MAX_POINTS: u32 = 400;

fn source(p: f64, q: f64) -> Result<MarkovSource, String> {
    MarkovSource::binary(p, q).map_err(|e| e.to_string())
}

/// `[alpha, beta, gamma, D_max, R]` from the closed forms.
#[wasm_bindgen]
pub fn analytic_point(p: f64, q: f64, d: f64) -> Result<Vec<f64>, String> {
    let params = BinaryExampleParams::new(p, q, d).map_err(|e| e.to_string())?;
    let k = analytic_kernel(&params).map_err(|e| e.to_string())?;
    let dmax = analytic_dmax(p, q).map_err(|e| e.to_string())?;
    let rate = analytic_rdf(&params).map_err(|e| e.to_string())?;
    Ok(vec![k.alpha, k.beta, k.gamma, dmax, rate])
}

/// `points` triples `[D, R_solver, R_closed_form]` on an even grid over
/// `(0, 1.1 D_max]`.
#[wasm_bindgen]
pub fn rd_curve(p: f64, q: f64, points: u32) -> Result<Vec<f64>, String> {
    if points == 0 || points > MAX_POINTS {
        return Err(format!("points must lie in 1..={MAX_POINTS}"));
    }
    let src = source(p, q)?;
    let dist = DistortionSpec::consecutive_ones();
    let dmax = analytic_dmax(p, q).map_err(|e| e.to_string())?;
    let config = SolverConfig::stationary(0.0);
    let mut out = Vec::with_capacity(3 * points as usize);
    for k in 1..=points {
        let d = 1.1 * dmax * k as f64 / points as f64;
        let solved = solve_for_target_distortion(&src, &dist, &config, d).map_err(|e| e.to_string())?;
        let closed = if d >= 0.5 {
            0.0
        } else {
            analytic_rdf(&BinaryExampleParams::new(p, q, d).map_err(|e| e.to_string())?)
                .map_err(|e| e.to_string())?
        };
        out.extend([solved.point.distortion, solved.point.rate, closed]);
    }
    Ok(out)
}

/// Simulates the identity realization of the policy solved at distortion
/// `d`: `[target D, empirical D, standard error, target P(y=0), empirical
/// P(y=0)]`.
#[wasm_bindgen]
pub fn simulate_cascade(p: f64, q: f64, d: f64, steps: u32, seed: u32) -> Result<Vec<f64>, String> {
    if steps == 0 || steps > MAX_STEPS {
        return Err(format!("steps must lie in 1..={MAX_STEPS}"));
    }
    let src = source(p, q)?;
    let dist = DistortionSpec::consecutive_ones();
    let solved = solve_for_target_distortion(&src, &dist, &SolverConfig::stationary(0.0), d)
        .map_err(|e| e.to_string())?;
    let policy = &solved.solution.policy;
    let target = evaluate_policy(&src, &dist, policy).map_err(|e| e.to_string())?;
    let gamma = match &solved.solution.marginals {
        causal_rdf::solver::OutputMarginalFamily::Stationary(r) => r[0],
        causal_rdf::solver::OutputMarginalFamily::Exact(_) => f64::NAN,
    };
    let spec = identity_realization(policy).map_err(|e| e.to_string())?;
    let trace = simulate(&src, &spec, &dist, steps as usize, u64::from(seed)).map_err(|e| e.to_string())?;
    let stats = empirical_stats(&trace, &dist).map_err(|e| e.to_string())?;
    Ok(vec![
        target.distortion,
        stats.mean_distortion,
        stats.std_err,
        gamma,
        stats.marginal_y[0],
    ])
}
