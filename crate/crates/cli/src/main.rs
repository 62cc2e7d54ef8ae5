//! `causal-rdf`: curve sweeps, single solves, simulation, verification and
//! closed-form evaluation for causal rate distortion problems.
//!
//! Exit codes: 0 success, 1 usage or input error, 2 convergence failure,
//! 3 verification failure.

mod commands;
mod format;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};

use manifest::RunManifest;

pub const EXIT_USAGE: u8 = 1;
pub const EXIT_CONVERGENCE: u8 = 2;
pub const EXIT_VERIFICATION: u8 = 3;

/// Causal rate distortion functions of finite-alphabet Markov sources.
///
/// Rates are in bits per stage and distortions are averages per stage.
/// The slope `s` multiplies the distortion inside the exponential of the
/// optimal kernel and is measured in nats.
#[derive(Debug, Parser)]
#[command(name = "causal-rdf", version)]
struct Cli {
    /// Where to write the run manifest (JSON). Defaults to a file next to
    /// the command's outputs.
    #[arg(long, global = true, value_name = "PATH")]
    manifest: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Sweep the rate distortion curve over a slope or distortion grid.
    Curve(CurveArgs),
    /// Solve a single point at a given slope or distortion.
    Solve(SolveArgs),
    /// Simulate the encoder/channel/decoder cascade for a solved policy.
    Simulate(SimulateArgs),
    /// Run causality, fixed-point, oracle and realization checks.
    Verify(VerifyArgs),
    /// Evaluate the closed forms for the binary consecutive-ones example.
    Analytic(AnalyticArgs),
}

#[derive(Debug, Clone, Args)]
struct Inputs {
    /// Source model file (TOML).
    model: PathBuf,
    /// Distortion measure file (TOML).
    distortion_file: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Mode {
    Stationary,
    Exact,
}

#[derive(Debug, Clone, Args)]
struct ModeArgs {
    /// Per-letter stationary kernels or full-history finite-horizon kernels.
    #[arg(long, value_enum, default_value = "stationary")]
    mode: Mode,
    /// Last stage index n for exact mode (stages 0..=n).
    #[arg(long)]
    horizon: Option<usize>,
    /// Sup-norm stopping threshold on the marginal change.
    #[arg(long)]
    tol: Option<f64>,
    /// Iteration cap of the fixed point.
    #[arg(long)]
    max_iter: Option<usize>,
}

#[derive(Debug, Clone, Args)]
#[group(required = true, multiple = false)]
struct Target {
    /// Target average distortion per stage.
    #[arg(long)]
    distortion: Option<f64>,
    /// Lagrange slope s <= 0.
    #[arg(long, allow_negative_numbers = true)]
    slope: Option<f64>,
}

#[derive(Debug, Clone, Args)]
#[group(required = true, multiple = false)]
struct Grid {
    /// Slopes as `a,b,c` or `start:stop:count`.
    #[arg(long, allow_hyphen_values = true)]
    s_grid: Option<String>,
    /// Target distortions as `a,b,c` or `start:stop:count`.
    #[arg(long, allow_hyphen_values = true)]
    d_grid: Option<String>,
}

#[derive(Debug, Args)]
struct CurveArgs {
    #[command(flatten)]
    inputs: Inputs,
    #[command(flatten)]
    grid: Grid,
    #[command(flatten)]
    mode: ModeArgs,
    /// Output CSV with columns s,D,R,iterations,converged.
    #[arg(long)]
    out: PathBuf,
    /// Worker threads for the sweep.
    #[arg(long, default_value_t = 1)]
    threads: usize,
}

#[derive(Debug, Args)]
struct SolveArgs {
    #[command(flatten)]
    inputs: Inputs,
    #[command(flatten)]
    target: Target,
    #[command(flatten)]
    mode: ModeArgs,
    /// Write the kernel table as CSV (stage,context,y,p).
    #[arg(long)]
    kernel_out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Realization {
    /// Copy encoder, the policy as channel, copy decoder.
    Identity,
    /// Zero-cost symbol through a binary symmetric channel; needs a source on
    /// the special-case manifold.
    Bsc,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[command(flatten)]
    inputs: Inputs,
    #[command(flatten)]
    target: Target,
    #[command(flatten)]
    mode: ModeArgs,
    /// Number of time steps.
    #[arg(long)]
    steps: usize,
    /// Seed of the ChaCha20 generator.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Prefix for `<prefix>_trace.csv`, `<prefix>_stats.toml` and the manifest.
    #[arg(long)]
    out_prefix: PathBuf,
    #[arg(long, value_enum, default_value = "identity")]
    realization: Realization,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    #[command(flatten)]
    inputs: Inputs,
    /// Last stage index n of the exact-mode problem.
    #[arg(long)]
    horizon: usize,
    /// Target distortion of the checked solution; defaults to half of the
    /// zero-rate distortion.
    #[arg(long, conflicts_with = "slope")]
    distortion: Option<f64>,
    /// Slope of the checked solution.
    #[arg(long, allow_negative_numbers = true)]
    slope: Option<f64>,
    /// Replace the solver kernel by an anticausal copy in the causality
    /// check (binary sources only).
    #[arg(long)]
    anticausal_fixture: bool,
}

#[derive(Debug, Args)]
struct AnalyticArgs {
    /// P(1 | 0).
    p: f64,
    /// P(0 | 1).
    q: f64,
    /// Distortion level.
    #[arg(allow_negative_numbers = true)]
    d: f64,
}

/// Error carrying its exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn usage(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }
}

impl From<causal_rdf::Error> for Failure {
    fn from(err: causal_rdf::Error) -> Self {
        use causal_rdf::Error as E;
        let code = match err {
            E::DegenerateMarginal { .. } | E::DegenerateKernel { .. } | E::ImpossibleEvidence { .. } => {
                EXIT_CONVERGENCE
            }
            _ => EXIT_USAGE,
        };
        Self {
            code,
            message: err.to_string(),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(err: std::io::Error) -> Self {
        Self::usage(err.to_string())
    }
}

fn default_manifest(command: &Command) -> PathBuf {
    let beside = |p: &PathBuf, suffix: &str| {
        let mut s = p.clone().into_os_string();
        s.push(suffix);
        PathBuf::from(s)
    };
    match command {
        Command::Curve(a) => beside(&a.out, ".manifest.json"),
        Command::Simulate(a) => beside(&a.out_prefix, "_manifest.json"),
        Command::Solve(SolveArgs {
            kernel_out: Some(k), ..
        }) => beside(k, ".manifest.json"),
        Command::Solve(_) => PathBuf::from("causal-rdf-solve.manifest.json"),
        Command::Verify(_) => PathBuf::from("causal-rdf-verify.manifest.json"),
        Command::Analytic(_) => PathBuf::from("causal-rdf-analytic.manifest.json"),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let _ = err.print();
            return ExitCode::from(if err.use_stderr() { EXIT_USAGE } else { 0 });
        }
    };
    let manifest_path = cli.manifest.clone().unwrap_or_else(|| default_manifest(&cli.command));
    let start = Instant::now();
    let name = match &cli.command {
        Command::Curve(_) => "curve",
        Command::Solve(_) => "solve",
        Command::Simulate(_) => "simulate",
        Command::Verify(_) => "verify",
        Command::Analytic(_) => "analytic",
    };
    let mut manifest = RunManifest::new(name);
    let result = match &cli.command {
        Command::Curve(a) => commands::curve(a, &mut manifest),
        Command::Solve(a) => commands::solve(a, &mut manifest),
        Command::Simulate(a) => commands::simulate(a, &mut manifest),
        Command::Verify(a) => commands::verify(a, &mut manifest),
        Command::Analytic(a) => commands::analytic(a, &mut manifest),
    };
    let code = result.unwrap_or_else(|failure| {
        eprintln!("error: {}", failure.message);
        failure.code
    });
    manifest.finish(start.elapsed(), code);
    if let Err(err) = manifest.write(&manifest_path) {
        eprintln!("error: cannot write manifest {}: {err}", manifest_path.display());
        return ExitCode::from(if code == 0 { EXIT_USAGE } else { code });
    }
    ExitCode::from(code)
}
