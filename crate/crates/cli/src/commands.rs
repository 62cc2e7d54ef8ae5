use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use causal_rdf::analytic::{analytic_kernel, analytic_rdf, on_special_case, BinaryExampleParams};
use causal_rdf::causality::{check_causality, check_sequence_kernel, CausalityReport, SequenceKernel};
use causal_rdf::config::{load_distortion, load_model};
use causal_rdf::oracle::{brute_force_rdf, OracleSettings};
use causal_rdf::realization::{
    bsc_realization, empirical_stats, identity_realization, simulate as run_simulation,
    verify_realization, RNG_NAME,
};
use causal_rdf::solver::{
    d_max, d_max_exact, evaluate_policy, exact_horizon_limit, solve_fixed_point,
    solve_for_target_distortion, solve_targets_threaded, sweep_curve_threaded, Solution,
};
use causal_rdf::{DistortionSpec, MarkovSource, RdPoint, SolverConfig, SolverMode};
use serde::Serialize;
use serde_json::json;

use crate::format::{parse_grid, sig12};
use crate::manifest::RunManifest;
use crate::{
    AnalyticArgs, CurveArgs, Failure, Inputs, Mode, ModeArgs, Realization, SimulateArgs, SolveArgs,
    Target, VerifyArgs, EXIT_CONVERGENCE, EXIT_VERIFICATION,
};

type Outcome = Result<u8, Failure>;

const ORACLE_HORIZON: usize = 2;
const ORACLE_TOLERANCE: f64 = 1e-3;
const FIXED_POINT_TOLERANCE: f64 = 1e-8;
const ROW_TOLERANCE: f64 = 1e-12;
const REALIZATION_TOLERANCE: f64 = 1e-9;

fn load(inputs: &Inputs, manifest: &mut RunManifest) -> Result<(MarkovSource, DistortionSpec), Failure> {
    manifest.input(&inputs.model);
    manifest.input(&inputs.distortion_file);
    let source = load_model(&inputs.model)?;
    let dist = load_distortion(&inputs.distortion_file, source.size())?;
    Ok((source, dist))
}

fn solver_config(mode: &ModeArgs) -> Result<SolverConfig, Failure> {
    let mut config = match (mode.mode, mode.horizon) {
        (Mode::Stationary, None) => SolverConfig::stationary(0.0),
        (Mode::Stationary, Some(_)) => {
            return Err(Failure::usage("--horizon applies only with --mode exact"))
        }
        (Mode::Exact, Some(n)) => SolverConfig::exact(n, 0.0),
        (Mode::Exact, None) => return Err(Failure::usage("--mode exact needs --horizon")),
    };
    if let Some(tol) = mode.tol {
        config.tol = tol;
    }
    if let Some(max_iter) = mode.max_iter {
        config.max_iter = max_iter;
    }
    config.validate()?;
    Ok(config)
}

fn config_json(config: &SolverConfig) -> serde_json::Value {
    let (mode, horizon) = match config.mode {
        SolverMode::Stationary => ("stationary", None),
        SolverMode::Exact { horizon } => ("exact", Some(horizon)),
    };
    json!({
        "mode": mode,
        "horizon": horizon,
        "tol": config.tol,
        "max_iter": config.max_iter,
        "damping": config.damping,
    })
}

fn zero_rate_distortion(source: &MarkovSource, dist: &DistortionSpec, config: &SolverConfig) -> Result<f64, Failure> {
    Ok(match config.mode {
        SolverMode::Stationary => d_max(source, dist)?,
        SolverMode::Exact { horizon } => d_max_exact(source, dist, horizon)?,
    })
}

/// Solves at a slope, reporting zero rate where the solution is no better
/// than a source-independent reconstruction.
fn solve_at_slope(
    source: &MarkovSource,
    dist: &DistortionSpec,
    config: &SolverConfig,
    slope: f64,
) -> Result<(Solution, RdPoint, f64), Failure> {
    let solution = solve_fixed_point(source, dist, &config.with_slope(slope))?;
    let dmax = zero_rate_distortion(source, dist, config)?;
    let mut point = solution.point;
    if slope == 0.0 || point.distortion >= dmax {
        point.rate = 0.0;
    }
    Ok((solution, point, dmax))
}

fn csv_writer(path: &Path) -> Result<BufWriter<File>, Failure> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Failure::usage(format!("{}: {e}", path.display())))
}

pub fn curve(args: &CurveArgs, manifest: &mut RunManifest) -> Outcome {
    let (source, dist) = load(&args.inputs, manifest)?;
    let config = solver_config(&args.mode)?;
    if args.threads == 0 {
        return Err(Failure::usage("--threads must be at least 1"));
    }
    let (kind, text) = match (&args.grid.s_grid, &args.grid.d_grid) {
        (Some(s), None) => ("slope", s),
        (None, Some(d)) => ("distortion", d),
        _ => return Err(Failure::usage("give exactly one of --s-grid and --d-grid")),
    };
    let grid = parse_grid(text).map_err(Failure::usage)?;
    manifest.config = json!({
        "solver": config_json(&config),
        "grid_kind": kind,
        "grid": grid,
        "threads": args.threads,
    });
    let points: Vec<RdPoint> = if kind == "slope" {
        sweep_curve_threaded(&source, &dist, &config, &grid, args.threads)?
    } else {
        if let Some(d) = grid.iter().find(|d| **d < 0.0) {
            return Err(Failure::usage(format!("distortion grid value {d} is negative")));
        }
        let solved = solve_targets_threaded(&source, &dist, &config, &grid, args.threads)?;
        for (t, s) in grid.iter().zip(&solved) {
            for note in &s.diagnostics {
                eprintln!("note: D = {}: {note}", sig12(*t));
            }
        }
        solved.into_iter().map(|s| s.point).collect()
    };
    let mut out = csv_writer(&args.out)?;
    writeln!(out, "s,D,R,iterations,converged")?;
    for p in &points {
        writeln!(
            out,
            "{},{},{},{},{}",
            sig12(p.slope),
            sig12(p.distortion),
            sig12(p.rate),
            p.iterations,
            p.converged
        )?;
    }
    out.flush()?;
    manifest.output(&args.out);
    let failed = points.iter().filter(|p| !p.converged).count();
    if failed > 0 {
        eprintln!("warning: {failed} of {} points did not converge", points.len());
        return Ok(EXIT_CONVERGENCE);
    }
    println!("wrote {} points to {}", points.len(), args.out.display());
    Ok(0)
}

/// Solution at the requested slope or distortion, with notes for the user.
fn solve_target(
    source: &MarkovSource,
    dist: &DistortionSpec,
    config: &SolverConfig,
    target: &Target,
) -> Result<(Solution, RdPoint, Vec<String>), Failure> {
    match (target.distortion, target.slope) {
        (Some(d), None) => {
            let solved = solve_for_target_distortion(source, dist, config, d)?;
            let mut notes = solved.diagnostics;
            let dmax = zero_rate_distortion(source, dist, config)?;
            if d >= dmax {
                notes.push(format!("target is at or above D_max = {}; rate is zero", sig12(dmax)));
            }
            Ok((solved.solution, solved.point, notes))
        }
        (None, Some(s)) => {
            let (solution, point, dmax) = solve_at_slope(source, dist, config, s)?;
            let mut notes = Vec::new();
            if point.distortion >= dmax {
                notes.push(format!("distortion is at or above D_max = {}; rate is zero", sig12(dmax)));
            }
            Ok((solution, point, notes))
        }
        _ => Err(Failure::usage("give exactly one of --distortion and --slope")),
    }
}

fn target_json(target: &Target) -> serde_json::Value {
    json!({ "distortion": target.distortion, "slope": target.slope })
}

fn write_kernels(path: &Path, solution: &Solution) -> Result<(), Failure> {
    let mut out = csv_writer(path)?;
    writeln!(out, "stage,context,y,p")?;
    for (stage, kernel) in solution.policy.kernels().iter().enumerate() {
        for (ctx, row) in kernel.rows().enumerate() {
            for (y, p) in row.iter().enumerate() {
                writeln!(out, "{stage},{ctx},{y},{}", sig12(*p))?;
            }
        }
    }
    out.flush()?;
    Ok(())
}

pub fn solve(args: &SolveArgs, manifest: &mut RunManifest) -> Outcome {
    let (source, dist) = load(&args.inputs, manifest)?;
    let config = solver_config(&args.mode)?;
    manifest.config = json!({
        "solver": config_json(&config),
        "target": target_json(&args.target),
    });
    let (solution, point, notes) = solve_target(&source, &dist, &config, &args.target)?;
    println!("s = {}", sig12(point.slope));
    println!("D = {}", sig12(point.distortion));
    println!("R = {}", sig12(point.rate));
    println!("iterations = {}", point.iterations);
    println!("converged = {}", point.converged);
    for note in notes {
        println!("note: {note}");
    }
    if let Some(path) = &args.kernel_out {
        write_kernels(path, &solution)?;
        manifest.output(path);
    }
    Ok(if point.converged { 0 } else { EXIT_CONVERGENCE })
}

#[derive(Serialize)]
struct StatsFile {
    steps: usize,
    seed: u64,
    rng: String,
    realization: String,
    slope: f64,
    target_distortion: f64,
    target_rate: f64,
    mean_distortion: f64,
    std_err: f64,
    deviation_in_std_err: f64,
    marginal_y: Vec<f64>,
    transition_counts: Vec<Vec<u64>>,
}

fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

pub fn simulate(args: &SimulateArgs, manifest: &mut RunManifest) -> Outcome {
    let (source, dist) = load(&args.inputs, manifest)?;
    let config = solver_config(&args.mode)?;
    let realization_name = match args.realization {
        Realization::Identity => "identity",
        Realization::Bsc => "bsc",
    };
    manifest.config = json!({
        "solver": config_json(&config),
        "target": target_json(&args.target),
        "steps": args.steps,
        "seed": args.seed,
        "rng": RNG_NAME,
        "realization": realization_name,
    });
    let (solution, point, notes) = solve_target(&source, &dist, &config, &args.target)
        .map_err(|f| Failure {
            code: if f.code == crate::EXIT_USAGE { f.code } else { EXIT_CONVERGENCE },
            message: f.message,
        })?;
    for note in notes {
        println!("note: {note}");
    }
    if !point.converged {
        return Err(Failure {
            code: EXIT_CONVERGENCE,
            message: format!("solver did not converge at s = {}", sig12(point.slope)),
        });
    }
    // evaluate the policy that is simulated, not the time-shared report
    let target = evaluate_policy(&source, &dist, &solution.policy)?;
    let spec = match args.realization {
        Realization::Identity => identity_realization(&solution.policy)?,
        Realization::Bsc => bsc_realization(&source, &dist, target.distortion)?,
    };
    let trace = run_simulation(&source, &spec, &dist, args.steps, args.seed)?;
    let stats = empirical_stats(&trace, &dist)?;

    let trace_path = with_suffix(&args.out_prefix, "_trace.csv");
    let mut out = csv_writer(&trace_path)?;
    trace.write_csv(&mut out)?;
    out.flush()?;
    manifest.output(&trace_path);

    let deviation = if stats.std_err > 0.0 {
        (stats.mean_distortion - target.distortion) / stats.std_err
    } else {
        0.0
    };
    let file = StatsFile {
        steps: stats.n,
        seed: args.seed,
        rng: RNG_NAME.to_string(),
        realization: realization_name.to_string(),
        slope: solution.point.slope,
        target_distortion: target.distortion,
        target_rate: target.rate,
        mean_distortion: stats.mean_distortion,
        std_err: stats.std_err,
        deviation_in_std_err: deviation,
        marginal_y: stats.marginal_y.clone(),
        transition_counts: stats.transition_counts.clone(),
    };
    let stats_path = with_suffix(&args.out_prefix, "_stats.toml");
    let text = toml::to_string(&file).map_err(|e| Failure::usage(e.to_string()))?;
    std::fs::write(&stats_path, text)?;
    manifest.output(&stats_path);

    println!(
        "empirical D = {} +/- {} (target {}, {} SE)",
        sig12(stats.mean_distortion),
        sig12(stats.std_err),
        sig12(target.distortion),
        sig12(deviation)
    );
    let marginal: Vec<String> = stats.marginal_y.iter().map(|p| sig12(*p)).collect();
    println!("empirical P(y) = [{}]", marginal.join(", "));
    Ok(0)
}

struct Check {
    name: String,
    value: f64,
    threshold: f64,
    passed: bool,
}

impl Check {
    fn below(name: &str, value: f64, threshold: f64) -> Self {
        Self {
            name: name.to_string(),
            value,
            threshold,
            passed: value < threshold,
        }
    }
}

pub fn verify(args: &VerifyArgs, manifest: &mut RunManifest) -> Outcome {
    let (source, dist) = load(&args.inputs, manifest)?;
    let n = args.horizon;
    let limit = exact_horizon_limit(source.size(), dist.recon_size());
    if n > limit {
        return Err(Failure::usage(format!(
            "horizon {n} exceeds the enumerable limit {limit} for alphabets of size {} and {}",
            source.size(),
            dist.recon_size()
        )));
    }
    let config = SolverConfig::exact(n, 0.0);
    let dmax = d_max_exact(&source, &dist, n)?;
    let target = Target {
        distortion: args.distortion.or(args.slope.is_none().then_some(0.5 * dmax)),
        slope: args.slope,
    };
    manifest.config = json!({
        "solver": config_json(&config),
        "target": target_json(&target),
        "anticausal_fixture": args.anticausal_fixture,
        "oracle_horizon_limit": ORACLE_HORIZON,
    });
    let (solution, point, _) = solve_target(&source, &dist, &config, &target)?;
    println!(
        "checking exact-mode solution at n = {n}: s = {}, D = {}, R = {}",
        sig12(point.slope),
        sig12(point.distortion),
        sig12(point.rate)
    );

    let mut checks = Vec::new();
    let causality: CausalityReport = if args.anticausal_fixture {
        if source.size() != 2 {
            return Err(Failure::usage("the anticausal fixture needs a binary source"));
        }
        check_sequence_kernel(&source, &SequenceKernel::anticausal_copy(n.max(1))?)?
    } else {
        check_causality(&source, &solution.policy, n)?
    };
    checks.push(Check::below(
        if args.anticausal_fixture {
            "causality (anticausal fixture)"
        } else {
            "causality"
        },
        causality.max_violation,
        causality.tolerance,
    ));

    let fp = solution.point;
    let gap = (solution.closed_form_rate - fp.rate).abs();
    let mut fixed = Check::below("fixed point |R_cf - R_MI|", gap, FIXED_POINT_TOLERANCE);
    fixed.passed &= fp.converged && solution.policy.max_row_error() < ROW_TOLERANCE;
    checks.push(fixed);

    if n <= ORACLE_HORIZON {
        let oracle = brute_force_rdf(&source, &dist, fp.distortion, n, &OracleSettings::default())?;
        checks.push(Check::below(
            "oracle |R - R_brute|",
            (fp.rate - oracle.rate).abs(),
            ORACLE_TOLERANCE,
        ));
    } else {
        println!("oracle comparison skipped for n > {ORACLE_HORIZON}");
    }

    let spec = identity_realization(&solution.policy)?;
    let realization = verify_realization(&source, &spec, &solution.policy, n)?;
    checks.push(Check::below(
        "realization deviation",
        realization.max_deviation,
        REALIZATION_TOLERANCE,
    ));

    println!("{:<32} {:>20} {:>12}  result", "check", "value", "threshold");
    for c in &checks {
        println!(
            "{:<32} {:>20} {:>12}  {}",
            c.name,
            sig12(c.value),
            format!("{:.0e}", c.threshold),
            if c.passed { "PASS" } else { "FAIL" }
        );
    }
    let failed: Vec<&str> = checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
    if failed.is_empty() {
        println!("all checks passed");
        Ok(0)
    } else {
        eprintln!("failed checks: {}", failed.join(", "));
        Ok(EXIT_VERIFICATION)
    }
}

pub fn analytic(args: &AnalyticArgs, manifest: &mut RunManifest) -> Outcome {
    manifest.config = json!({ "p": args.p, "q": args.q, "d": args.d });
    let params = BinaryExampleParams::new(args.p, args.q, args.d)?;
    let kernel = analytic_kernel(&params)?;
    let rate = analytic_rdf(&params)?;
    let dmax = causal_rdf::analytic::analytic_dmax(args.p, args.q)?;
    println!("alpha = {}", sig12(kernel.alpha));
    println!("beta = {}", sig12(kernel.beta));
    println!("gamma = {}", sig12(kernel.gamma));
    println!("D_max = {}", sig12(dmax));
    println!("R = {}", sig12(rate));
    if !kernel.valid {
        println!("note: the kernel entries are not probabilities at this D (D > D_max)");
    }
    if on_special_case(args.p, args.q, 1e-12) {
        println!("note: special case q = p/(1+2p); R = 1 - H(D)");
    }
    Ok(0)
}
