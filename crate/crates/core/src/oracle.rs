//! Direct minimisation of `I(X^n; Y^n)` over causal kernels.
//!
//! Every stage row `P(y_i | y^{i-1}, x^i)` is a free softmax vector. For a
//! Lagrange weight `λ` the objective `I/(n+1) + λ·D` is evaluated on the fully
//! enumerated joint and minimised by L-BFGS from several starts. An outer
//! bisection on `λ` hits the distortion target. Nothing here uses the
//! backward potentials or the marginal fixed point.

use std::collections::VecDeque;
use std::f64::consts::LN_2;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::distortion::DistortionSpec;
use crate::error::{Error, Result};
use crate::history::decode_history;
use crate::prob::MarkovSource;

/// Largest horizon the oracle accepts.
pub const MAX_ORACLE_HORIZON: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleSettings {
    /// Random restarts on top of the uniform and greedy starts.
    pub random_starts: usize,
    pub seed: u64,
    /// L-BFGS iteration cap per start.
    pub max_iter: usize,
    /// Stop when the objective improves by less than this.
    pub ftol: f64,
    /// Log-spaced λ grid used to bracket the target.
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub lambda_points: usize,
    /// Bisection stops once `|D − target|` drops below this.
    pub distortion_tol: f64,
    pub max_bisections: usize,
}

impl Default for OracleSettings {
    fn default() -> Self {
        Self {
            random_starts: 2,
            seed: 7,
            max_iter: 2000,
            ftol: 1e-15,
            lambda_min: 1e-3,
            lambda_max: 1e3,
            lambda_points: 25,
            distortion_tol: 1e-7,
            max_bisections: 60,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleResult {
    /// Bits per stage.
    pub rate: f64,
    /// Distortion per stage of the reported point.
    pub distortion: f64,
    /// Weight on the per-stage distortion, in bits per unit distortion.
    pub lambda: f64,
    /// `|D − target|` of the closest solved point.
    pub resolution: f64,
    /// True when the target fell in a jump and the rate was interpolated.
    pub interpolated: bool,
}

/// Fully enumerated problem: stage row offsets and per-sequence costs.
struct Problem {
    a: usize,
    b: usize,
    n: usize,
    /// `P(x^n)`.
    px: Vec<f64>,
    /// Per-stage distortion of each `(x^n, y^n)`, indexed `x * ny + y`.
    cost: Vec<f64>,
    /// Offset of each stage's rows in the parameter vector.
    offsets: Vec<usize>,
    /// For each `(x^n, y^n)` and stage, the parameter row it reads.
    rows: Vec<usize>,
    nparams: usize,
}

impl Problem {
    fn new(source: &MarkovSource, dist: &DistortionSpec, n: usize) -> Self {
        let (a, b) = (source.size(), dist.recon_size());
        let nx = a.pow(n as u32 + 1);
        let ny = b.pow(n as u32 + 1);
        let mut offsets = Vec::with_capacity(n + 1);
        let mut total = 0;
        for i in 0..=n {
            offsets.push(total);
            total += b.pow(i as u32) * a.pow(i as u32 + 1);
        }
        let mut xs = vec![0; n + 1];
        let mut ys = vec![0; n + 1];
        let mut px = vec![0.0; nx];
        let mut cost = vec![0.0; nx * ny];
        let mut rows = vec![0; nx * ny * (n + 1)];
        for x in 0..nx {
            decode_history(x, a, &mut xs);
            let mut p = source.initial()[xs[0]];
            for i in 1..=n {
                p *= source.step_prob(Some(xs[i - 1]), xs[i]);
            }
            px[x] = p;
            for y in 0..ny {
                decode_history(y, b, &mut ys);
                let mut c = 0.0;
                let (mut xi, mut yi) = (0, 0);
                for i in 0..=n {
                    c += dist.rho(&xs[..=i], &ys[..=i]);
                    xi = xi * a + xs[i];
                    // row index: history(y^{i-1}) * a^{i+1} + history(x^i)
                    rows[(x * ny + y) * (n + 1) + i] = offsets[i] + yi * a.pow(i as u32 + 1) + xi;
                    yi = yi * b + ys[i];
                }
                cost[x * ny + y] = c / (n + 1) as f64;
            }
        }
        Self {
            a,
            b,
            n,
            px,
            cost,
            offsets,
            rows,
            nparams: total * b,
        }
    }

    fn ny(&self) -> usize {
        self.b.pow(self.n as u32 + 1)
    }

    fn kernels(&self, theta: &[f64]) -> Vec<f64> {
        let b = self.b;
        let mut q = vec![0.0; theta.len()];
        for (t, out) in theta.chunks(b).zip(q.chunks_mut(b)) {
            let m = t.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let mut s = 0.0;
            for (o, v) in out.iter_mut().zip(t) {
                *o = (v - m).exp();
                s += *o;
            }
            out.iter_mut().for_each(|o| *o /= s);
        }
        q
    }

    /// Sequence kernel `K(y^n | x^n)` and the joint output marginal.
    fn sequence(&self, q: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let (b, n) = (self.b, self.n);
        let ny = self.ny();
        let mut ys = vec![0; n + 1];
        let mut k = vec![0.0; self.px.len() * ny];
        let mut py = vec![0.0; ny];
        for x in 0..self.px.len() {
            for y in 0..ny {
                decode_history(y, b, &mut ys);
                let base = (x * ny + y) * (n + 1);
                let mut p = 1.0;
                for i in 0..=n {
                    p *= q[self.rows[base + i] * b + ys[i]];
                }
                k[x * ny + y] = p;
                py[y] += self.px[x] * p;
            }
        }
        (k, py)
    }

    /// Per-stage rate (bits) and distortion of the kernels.
    fn evaluate(&self, q: &[f64]) -> (f64, f64) {
        let ny = self.ny();
        let (k, py) = self.sequence(q);
        let mut rate = 0.0;
        let mut dist = 0.0;
        for (x, &p) in self.px.iter().enumerate() {
            for y in 0..ny {
                let j = p * k[x * ny + y];
                if j > 0.0 {
                    rate += j * (k[x * ny + y].ln() - py[y].ln());
                    dist += j * self.cost[x * ny + y];
                }
            }
        }
        ((rate / LN_2 / (self.n + 1) as f64).max(0.0), dist)
    }

    /// Objective `I/(n+1) + λ D` and its gradient with respect to the logits.
    fn objective(&self, theta: &[f64], lambda: f64, grad: &mut [f64]) -> f64 {
        let (b, n) = (self.b, self.n);
        let ny = self.ny();
        let q = self.kernels(theta);
        let (k, py) = self.sequence(&q);
        let scale = 1.0 / (LN_2 * (n + 1) as f64);
        let mut value = 0.0;
        let mut gq = vec![0.0; q.len()];
        let mut ys = vec![0; n + 1];
        let mut factors = vec![0.0; n + 1];
        let mut suffix = vec![0.0; n + 2];
        for (x, &p) in self.px.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            for y in 0..ny {
                let kv = k[x * ny + y];
                let log_ratio = if kv > 0.0 && py[y] > 0.0 {
                    kv.ln() - py[y].ln()
                } else {
                    -700.0
                };
                // dF/dK(y|x) = P(x) [log(K/P(y)) / ((n+1) ln 2) + λ d(x,y)]
                let g = p * (log_ratio * scale + lambda * self.cost[x * ny + y]);
                value += p * kv * (log_ratio.max(-700.0) * scale + lambda * self.cost[x * ny + y]);
                decode_history(y, b, &mut ys);
                let base = (x * ny + y) * (n + 1);
                for i in 0..=n {
                    factors[i] = q[self.rows[base + i] * b + ys[i]];
                }
                suffix[n + 1] = 1.0;
                for i in (0..=n).rev() {
                    suffix[i] = suffix[i + 1] * factors[i];
                }
                let mut prefix = 1.0;
                for i in 0..=n {
                    gq[self.rows[base + i] * b + ys[i]] += g * prefix * suffix[i + 1];
                    prefix *= factors[i];
                }
            }
        }
        for ((gr, qr), out) in gq.chunks(b).zip(q.chunks(b)).zip(grad.chunks_mut(b)) {
            let mean: f64 = gr.iter().zip(qr).map(|(g, q)| g * q).sum();
            for j in 0..b {
                out[j] = qr[j] * (gr[j] - mean);
            }
        }
        value
    }

    /// Logits favouring each row's cheapest symbol for the current stage.
    fn greedy_start(&self, dist: &DistortionSpec) -> Vec<f64> {
        let (a, b, n) = (self.a, self.b, self.n);
        let mut theta = vec![0.0; self.nparams];
        for i in 0..=n {
            let xa = a.pow(i as u32 + 1);
            let rows = b.pow(i as u32) * xa;
            let mut xs = vec![0; i + 1];
            let mut ys = vec![0; i + 1];
            for r in 0..rows {
                decode_history(r % xa, a, &mut xs);
                decode_history(r / xa, b, &mut ys[..i]);
                let costs: Vec<f64> = (0..b)
                    .map(|y| {
                        ys[i] = y;
                        dist.rho(&xs, &ys)
                    })
                    .collect();
                let best = costs
                    .iter()
                    .enumerate()
                    .fold(0, |best, (y, &c)| if c < costs[best] { y } else { best });
                theta[(self.offsets[i] + r) * b + best] = 4.0;
            }
        }
        theta
    }
}

/// L-BFGS with Armijo backtracking; returns the final objective.
fn lbfgs(
    problem: &Problem,
    lambda: f64,
    theta: &mut [f64],
    max_iter: usize,
    ftol: f64,
) -> f64 {
    const MEMORY: usize = 10;
    let dim = theta.len();
    let mut grad = vec![0.0; dim];
    let mut f = problem.objective(theta, lambda, &mut grad);
    let mut history: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::with_capacity(MEMORY);
    let mut trial = vec![0.0; dim];
    let mut trial_grad = vec![0.0; dim];
    for _ in 0..max_iter {
        // two-loop recursion
        let mut dir: Vec<f64> = grad.iter().map(|g| -g).collect();
        let mut alphas = Vec::with_capacity(history.len());
        for (s, y, rho) in history.iter().rev() {
            let alpha = rho * dot(s, &dir);
            axpy(-alpha, y, &mut dir);
            alphas.push(alpha);
        }
        if let Some((s, y, _)) = history.back() {
            let gamma = dot(s, y) / dot(y, y);
            dir.iter_mut().for_each(|d| *d *= gamma);
        }
        for ((s, y, rho), alpha) in history.iter().zip(alphas.iter().rev()) {
            let beta = rho * dot(y, &dir);
            axpy(alpha - beta, s, &mut dir);
        }
        let mut slope = dot(&grad, &dir);
        if slope >= 0.0 {
            dir = grad.iter().map(|g| -g).collect();
            slope = -dot(&grad, &grad);
            history.clear();
        }
        if slope.abs() < 1e-30 {
            break;
        }
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            for ((t, x), d) in trial.iter_mut().zip(theta.iter()).zip(&dir) {
                *t = x + step * d;
            }
            let ft = problem.objective(&trial, lambda, &mut trial_grad);
            if ft <= f + 1e-4 * step * slope {
                accepted = Some(ft);
                break;
            }
            step *= 0.5;
        }
        let Some(ft) = accepted else { break };
        let s: Vec<f64> = trial.iter().zip(theta.iter()).map(|(t, x)| t - x).collect();
        let y: Vec<f64> = trial_grad.iter().zip(&grad).map(|(u, v)| u - v).collect();
        let sy = dot(&s, &y);
        if sy > 1e-20 {
            if history.len() == MEMORY {
                history.pop_front();
            }
            history.push_back((s, y, 1.0 / sy));
        }
        theta.copy_from_slice(&trial);
        grad.copy_from_slice(&trial_grad);
        let improvement = f - ft;
        f = ft;
        if improvement < ftol {
            break;
        }
    }
    f
}

fn dot(u: &[f64], v: &[f64]) -> f64 {
    u.iter().zip(v).map(|(a, b)| a * b).sum()
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

struct Solved {
    lambda: f64,
    rate: f64,
    distortion: f64,
    theta: Vec<f64>,
}

fn solve_lambda(
    problem: &Problem,
    starts: &[Vec<f64>],
    warm: Option<&[f64]>,
    lambda: f64,
    settings: &OracleSettings,
) -> Solved {
    let mut best: Option<(f64, Vec<f64>)> = None;
    for start in starts.iter().map(|s| s.as_slice()).chain(warm) {
        let mut theta = start.to_vec();
        let f = lbfgs(problem, lambda, &mut theta, settings.max_iter, settings.ftol);
        if best.as_ref().is_none_or(|(bf, _)| f < *bf) {
            best = Some((f, theta));
        }
    }
    let (_, theta) = best.expect("at least one start");
    let (rate, distortion) = problem.evaluate(&problem.kernels(&theta));
    Solved {
        lambda,
        rate,
        distortion,
        theta,
    }
}

/// Smallest per-stage distortion over causal policies, by dynamic
/// programming over the enumerated tree.
fn min_distortion(problem: &Problem, source: &MarkovSource) -> f64 {
    fn value(p: &Problem, src: &MarkovSource, i: usize, x: usize, y: usize) -> f64 {
        let (a, b) = (p.a, p.b);
        (0..b)
            .map(|yi| {
                let y = y * b + yi;
                if i == p.n {
                    p.cost[x * p.ny() + y]
                } else {
                    (0..a)
                        .map(|xn| src.step_prob(Some(x % a), xn) * value(p, src, i + 1, x * a + xn, y))
                        .sum()
                }
            })
            .fold(f64::INFINITY, f64::min)
    }
    (0..problem.a)
        .map(|x0| source.initial()[x0] * value(problem, source, 0, x0, 0))
        .sum()
}

/// Causal rate distortion function at `target` (per-stage distortion), in
/// bits per stage, by brute-force minimisation over stages `0..=horizon`.
pub fn brute_force_rdf(
    source: &MarkovSource,
    dist: &DistortionSpec,
    target: f64,
    horizon: usize,
    settings: &OracleSettings,
) -> Result<OracleResult> {
    if horizon > MAX_ORACLE_HORIZON {
        return Err(Error::HorizonTooLarge {
            horizon,
            limit: MAX_ORACLE_HORIZON,
        });
    }
    if source.size() != dist.source_size() {
        return Err(Error::LengthMismatch {
            expected: source.size(),
            found: dist.source_size(),
        });
    }
    if !target.is_finite() || target < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "target distortion must be finite and nonnegative, got {target}"
        )));
    }
    let problem = Problem::new(source, dist, horizon);
    let minimum = min_distortion(&problem, source);
    if target < minimum - 1e-12 {
        return Err(Error::Infeasible { target, minimum });
    }

    // zero-rate floor: best constant sequence
    let ny = problem.ny();
    let zero_rate_d = (0..ny)
        .map(|y| {
            problem
                .px
                .iter()
                .enumerate()
                .map(|(x, p)| p * problem.cost[x * ny + y])
                .sum::<f64>()
        })
        .fold(f64::INFINITY, f64::min);
    if target >= zero_rate_d {
        return Ok(OracleResult {
            rate: 0.0,
            distortion: zero_rate_d,
            lambda: 0.0,
            resolution: 0.0,
            interpolated: false,
        });
    }

    let mut rng = ChaCha20Rng::seed_from_u64(settings.seed);
    let mut starts = vec![vec![0.0; problem.nparams], problem.greedy_start(dist)];
    for _ in 0..settings.random_starts {
        starts.push((0..problem.nparams).map(|_| rng.gen_range(-2.0..2.0)).collect());
    }

    // bracket on a log grid: D(λ) is nonincreasing in λ
    let ratio = (settings.lambda_max / settings.lambda_min).ln() / (settings.lambda_points - 1).max(1) as f64;
    let mut above: Option<Solved> = None;
    let mut below: Option<Solved> = None;
    let mut warm: Option<Vec<f64>> = None;
    for k in 0..settings.lambda_points {
        let lambda = settings.lambda_min * (ratio * k as f64).exp();
        let s = solve_lambda(&problem, &starts, warm.as_deref(), lambda, settings);
        warm = Some(s.theta.clone());
        if s.distortion > target {
            above = Some(s);
        } else {
            below = Some(s);
            break;
        }
    }
    let Some(mut lo) = below else {
        // the largest λ still sits above the target; `resolution` says by how much
        return Ok(result(&above.expect("grid is nonempty"), target, false));
    };
    let Some(mut hi) = above else {
        // already below target at the smallest λ
        return Ok(result(&lo, target, false));
    };
    for _ in 0..settings.max_bisections {
        if (lo.distortion - target).abs() < settings.distortion_tol {
            return Ok(result(&lo, target, false));
        }
        if (hi.distortion - target).abs() < settings.distortion_tol {
            return Ok(result(&hi, target, false));
        }
        let mid = (hi.lambda * lo.lambda).sqrt();
        if mid <= hi.lambda || mid >= lo.lambda {
            break;
        }
        let warm = if target - lo.distortion < hi.distortion - target {
            lo.theta.clone()
        } else {
            hi.theta.clone()
        };
        let s = solve_lambda(&problem, &starts, Some(&warm), mid, settings);
        if s.distortion > target {
            hi = s;
        } else {
            lo = s;
        }
    }
    // time-share the bracketing solutions
    let w = (hi.distortion - target) / (hi.distortion - lo.distortion);
    Ok(OracleResult {
        rate: (1.0 - w) * hi.rate + w * lo.rate,
        distortion: target,
        lambda: lo.lambda,
        resolution: (lo.distortion - target).abs().min((hi.distortion - target).abs()),
        interpolated: true,
    })
}

fn result(s: &Solved, target: f64, interpolated: bool) -> OracleResult {
    OracleResult {
        rate: s.rate,
        distortion: s.distortion,
        lambda: s.lambda,
        resolution: (s.distortion - target).abs(),
        interpolated,
    }
}
