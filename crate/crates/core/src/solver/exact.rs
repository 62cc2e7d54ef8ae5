//! Full-history kernels for a finite horizon.

use std::f64::consts::LN_2;

use super::{
    exact_horizon_limit, ln_or_neg_inf, log_sum_exp, normalize_log_weights, ExactPolicy, GTable,
    PolicyEvaluation, MAX_EXACT_STATES,
};
use crate::distortion::DistortionSpec;
use crate::error::{Error, Result};
use crate::history::decode_history;
use crate::prob::{mutual_information, JointTable, MarkovSource, StochasticKernel};

/// `ρ_i` tabulated over `(y^i, x^i)` for every stage, computed once per solve.
pub(crate) struct RhoCache {
    pub a: usize,
    pub b: usize,
    pub stages: Vec<Vec<f64>>,
}

impl RhoCache {
    pub fn new(dist: &DistortionSpec, horizon: usize) -> Result<Self> {
        let (a, b) = (dist.source_size(), dist.recon_size());
        let states = a
            .checked_pow(horizon as u32 + 1)
            .zip(b.checked_pow(horizon as u32 + 1))
            .and_then(|(x, y)| x.checked_mul(y));
        if states.is_none_or(|s| s > MAX_EXACT_STATES) {
            return Err(Error::HorizonTooLarge {
                horizon,
                limit: exact_horizon_limit(a, b),
            });
        }
        if let Some(last) = dist.max_stage() {
            if last < horizon {
                return Err(Error::InvalidArgument(format!(
                    "distortion covers stages 0..={last}, horizon is {horizon}"
                )));
            }
        }
        let mut stages = Vec::with_capacity(horizon + 1);
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for i in 0..=horizon {
            let xa = a.pow(i as u32 + 1);
            let yb = b.pow(i as u32 + 1);
            xs.resize(i + 1, 0);
            ys.resize(i + 1, 0);
            let mut t = vec![0.0; xa * yb];
            for y in 0..yb {
                decode_history(y, b, &mut ys);
                for x in 0..xa {
                    decode_history(x, a, &mut xs);
                    t[y * xa + x] = dist.rho(&xs, &ys);
                }
            }
            stages.push(t);
        }
        Ok(Self { a, b, stages })
    }

    pub fn horizon(&self) -> usize {
        self.stages.len() - 1
    }

    pub fn x_count(&self, stage: usize) -> usize {
        self.a.pow(stage as u32 + 1)
    }
}

pub(crate) fn backward_g(
    source: &MarkovSource,
    cache: &RhoCache,
    marginals: &[StochasticKernel],
    slope: f64,
) -> Result<GTable> {
    let (a, b) = (cache.a, cache.b);
    let n = cache.horizon();
    if marginals.len() != n + 1 {
        return Err(Error::LengthMismatch {
            expected: n + 1,
            found: marginals.len(),
        });
    }
    let t = source.transition();
    let mut stages: Vec<Vec<f64>> = vec![Vec::new(); n + 1];
    stages[n] = vec![0.0; cache.x_count(n) * b.pow(n as u32 + 1)];
    for i in (0..n).rev() {
        let xa = cache.x_count(i);
        let xa1 = xa * a;
        let yb = b.pow(i as u32 + 1);
        let rho1 = &cache.stages[i + 1];
        let g1 = &stages[i + 1];
        let log_r1: Vec<f64> = marginals[i + 1].as_slice().iter().map(|&p| ln_or_neg_inf(p)).collect();
        let mut cur = vec![0.0; yb * xa];
        for y in 0..yb {
            for x in 0..xa {
                let last = x % a;
                let mut acc = 0.0;
                for xn in 0..a {
                    let tp = t.get(last, xn);
                    if tp == 0.0 {
                        continue;
                    }
                    let xi = x * a + xn;
                    let terms = (0..b).map(|yn| {
                        let k = (y * b + yn) * xa1 + xi;
                        log_r1[y * b + yn] + slope * rho1[k] - g1[k]
                    });
                    let lse = log_sum_exp(terms);
                    if !lse.is_finite() {
                        return Err(Error::DegenerateMarginal { stage: i + 1 });
                    }
                    acc += tp * lse;
                }
                cur[y * xa + x] = -acc;
            }
        }
        stages[i] = cur;
    }
    Ok(GTable::from_stages(stages))
}

pub(crate) fn stage_kernel(
    cache: &RhoCache,
    g: &GTable,
    marginals: &[StochasticKernel],
    slope: f64,
    stage: usize,
) -> Result<StochasticKernel> {
    let b = cache.b;
    let xa = cache.x_count(stage);
    let prev = b.pow(stage as u32);
    let rho = &cache.stages[stage];
    let gs = g.stage(stage);
    let r = &marginals[stage];
    let mut data = vec![0.0; prev * xa * b];
    let mut logw = vec![0.0; b];
    for yp in 0..prev {
        let rrow = r.row(yp);
        for x in 0..xa {
            for y in 0..b {
                let k = (yp * b + y) * xa + x;
                logw[y] = ln_or_neg_inf(rrow[y]) + slope * rho[k] - gs[k];
            }
            let row = yp * xa + x;
            normalize_log_weights(&logw, &mut data[row * b..(row + 1) * b])
                .ok_or(Error::DegenerateKernel { stage, row })?;
        }
    }
    Ok(StochasticKernel::from_normalized(prev * xa, b, data))
}

pub(crate) fn all_kernels(
    cache: &RhoCache,
    g: &GTable,
    marginals: &[StochasticKernel],
    slope: f64,
) -> Result<Vec<StochasticKernel>> {
    (0..=cache.horizon())
        .map(|i| stage_kernel(cache, g, marginals, slope, i))
        .collect()
}

/// `P(x^i, y^{i-1})` for every stage, indexed `history(y^{i-1}) · |X|^{i+1} + history(x^i)`.
pub(crate) fn forward(source: &MarkovSource, policy: &ExactPolicy) -> Vec<Vec<f64>> {
    let (a, b) = (policy.source_size(), policy.recon_size());
    let n = policy.horizon();
    let t = source.transition();
    let mut out = Vec::with_capacity(n + 1);
    out.push(source.initial().probs().to_vec());
    for i in 0..n {
        let xa = a.pow(i as u32 + 1);
        let xa1 = xa * a;
        let prev = b.pow(i as u32);
        let q = &policy.stages()[i];
        let cur = &out[i];
        let mut next = vec![0.0; prev * b * xa1];
        for yp in 0..prev {
            for x in 0..xa {
                let p = cur[yp * xa + x];
                if p == 0.0 {
                    continue;
                }
                let row = q.row(yp * xa + x);
                let last = x % a;
                for (y, &qy) in row.iter().enumerate() {
                    let py = p * qy;
                    if py == 0.0 {
                        continue;
                    }
                    let base = (yp * b + y) * xa1 + x * a;
                    for xn in 0..a {
                        next[base + xn] += py * t.get(last, xn);
                    }
                }
            }
        }
        out.push(next);
    }
    out
}

pub(crate) fn marginals(source: &MarkovSource, policy: &ExactPolicy) -> Result<Vec<StochasticKernel>> {
    if policy.source_size() != source.size() {
        return Err(Error::LengthMismatch {
            expected: source.size(),
            found: policy.source_size(),
        });
    }
    let (a, b) = (policy.source_size(), policy.recon_size());
    let joints = forward(source, policy);
    let mut out = Vec::with_capacity(joints.len());
    for (i, j) in joints.iter().enumerate() {
        let xa = a.pow(i as u32 + 1);
        let prev = b.pow(i as u32);
        let q = &policy.stages()[i];
        let mut px = vec![0.0; xa];
        for yp in 0..prev {
            for x in 0..xa {
                px[x] += j[yp * xa + x];
            }
        }
        let mut data = vec![0.0; prev * b];
        for yp in 0..prev {
            let row = &mut data[yp * b..(yp + 1) * b];
            let mut mass = 0.0;
            for x in 0..xa {
                let p = j[yp * xa + x];
                mass += p;
                for (y, &qy) in q.row(yp * xa + x).iter().enumerate() {
                    row[y] += p * qy;
                }
            }
            if !(mass > 0.0) {
                // Unreachable reconstruction history: mix over the source marginal.
                row.iter_mut().for_each(|v| *v = 0.0);
                for x in 0..xa {
                    for (y, &qy) in q.row(yp * xa + x).iter().enumerate() {
                        row[y] += px[x] * qy;
                    }
                }
            }
            let s: f64 = row.iter().sum();
            row.iter_mut().for_each(|v| *v /= s);
        }
        out.push(StochasticKernel::from_normalized(prev, b, data));
    }
    Ok(out)
}

fn total_distortion(cache: &RhoCache, policy: &ExactPolicy, joints: &[Vec<f64>]) -> f64 {
    let b = cache.b;
    let mut total = 0.0;
    for (i, j) in joints.iter().enumerate() {
        let xa = cache.x_count(i);
        let prev = b.pow(i as u32);
        let q = &policy.stages()[i];
        let rho = &cache.stages[i];
        for yp in 0..prev {
            for x in 0..xa {
                let p = j[yp * xa + x];
                if p == 0.0 {
                    continue;
                }
                for (y, &qy) in q.row(yp * xa + x).iter().enumerate() {
                    total += p * qy * rho[(yp * b + y) * xa + x];
                }
            }
        }
    }
    total
}

/// Joint `P(y^n, x^n)` as a `[|Y|^{n+1}, |X|^{n+1}]` table.
fn final_joint_from(policy: &ExactPolicy, joints: &[Vec<f64>]) -> JointTable {
    let (a, b) = (policy.source_size(), policy.recon_size());
    let n = policy.horizon();
    let xa = a.pow(n as u32 + 1);
    let prev = b.pow(n as u32);
    let q = &policy.stages()[n];
    let j = &joints[n];
    let mut probs = vec![0.0; prev * b * xa];
    for yp in 0..prev {
        for x in 0..xa {
            let p = j[yp * xa + x];
            for (y, &qy) in q.row(yp * xa + x).iter().enumerate() {
                probs[(yp * b + y) * xa + x] = p * qy;
            }
        }
    }
    JointTable::from_unchecked(vec![prev * b, xa], probs)
}

pub(crate) fn evaluate(
    source: &MarkovSource,
    cache: &RhoCache,
    policy: &ExactPolicy,
) -> Result<PolicyEvaluation> {
    let stages = (policy.horizon() + 1) as f64;
    let joints = forward(source, policy);
    let joint = final_joint_from(policy, &joints);
    let mi = mutual_information(&joint)?;
    Ok(PolicyEvaluation {
        rate: mi / stages,
        distortion: total_distortion(cache, policy, &joints) / stages,
    })
}

pub(crate) fn closed_form_rate(
    source: &MarkovSource,
    cache: &RhoCache,
    policy: &ExactPolicy,
    marginals: &[StochasticKernel],
    g: &GTable,
    slope: f64,
) -> Result<f64> {
    let b = cache.b;
    let n = policy.horizon();
    if marginals.len() != n + 1 || g.stages().len() != n + 1 {
        return Err(Error::LengthMismatch {
            expected: n + 1,
            found: marginals.len().min(g.stages().len()),
        });
    }
    let joints = forward(source, policy);
    let mut total = slope * total_distortion(cache, policy, &joints);
    for (i, j) in joints.iter().enumerate() {
        let xa = cache.x_count(i);
        let prev = b.pow(i as u32);
        let q = &policy.stages()[i];
        let rho = &cache.stages[i];
        let gs = g.stage(i);
        let r = &marginals[i];
        for yp in 0..prev {
            let rrow = r.row(yp);
            for x in 0..xa {
                let p = j[yp * xa + x];
                if p == 0.0 {
                    continue;
                }
                let qrow = q.row(yp * xa + x);
                let mut expected_g = 0.0;
                for (y, &qy) in qrow.iter().enumerate() {
                    expected_g += qy * gs[(yp * b + y) * xa + x];
                }
                let lse = log_sum_exp((0..b).map(|y| {
                    let k = (yp * b + y) * xa + x;
                    ln_or_neg_inf(rrow[y]) + slope * rho[k] - gs[k]
                }));
                total += p * (-expected_g - lse);
            }
        }
    }
    Ok(total / LN_2 / (n + 1) as f64)
}

/// `P(x^i)` for every stage.
fn source_marginals(source: &MarkovSource, horizon: usize) -> Vec<Vec<f64>> {
    let a = source.size();
    let t = source.transition();
    let mut out = vec![source.initial().probs().to_vec()];
    for _ in 0..horizon {
        let cur = out.last().unwrap();
        let mut next = vec![0.0; cur.len() * a];
        for (x, &p) in cur.iter().enumerate() {
            for xn in 0..a {
                next[x * a + xn] = p * t.get(x % a, xn);
            }
        }
        out.push(next);
    }
    out
}

/// Best source-independent reconstruction sequence and its per-stage
/// distortion. Ties go to the smallest sequence index.
pub(crate) fn d_max(source: &MarkovSource, cache: &RhoCache) -> (f64, Vec<usize>) {
    let b = cache.b;
    let n = cache.horizon();
    let px = source_marginals(source, n);
    let count = b.pow(n as u32 + 1);
    let mut best = (f64::INFINITY, 0usize);
    let mut ys = vec![0; n + 1];
    for seq in 0..count {
        decode_history(seq, b, &mut ys);
        let mut cost = 0.0;
        let mut yi = 0;
        for i in 0..=n {
            yi = yi * b + ys[i];
            let xa = cache.x_count(i);
            let rho = &cache.stages[i];
            cost += px[i].iter().enumerate().map(|(x, p)| p * rho[yi * xa + x]).sum::<f64>();
        }
        if cost < best.0 {
            best = (cost, seq);
        }
    }
    decode_history(best.1, b, &mut ys);
    (best.0 / (n + 1) as f64, ys)
}

/// Smallest achievable per-stage distortion over causal policies.
pub(crate) fn d_min(source: &MarkovSource, cache: &RhoCache) -> f64 {
    let (a, b) = (cache.a, cache.b);
    let n = cache.horizon();
    let t = source.transition();
    let mut next: Vec<f64> = Vec::new();
    for i in (0..=n).rev() {
        let xa = cache.x_count(i);
        let prev = b.pow(i as u32);
        let rho = &cache.stages[i];
        let mut cur = vec![0.0; prev * xa];
        for yp in 0..prev {
            for x in 0..xa {
                let mut best = f64::INFINITY;
                for y in 0..b {
                    let yi = yp * b + y;
                    let mut v = rho[yi * xa + x];
                    if i < n {
                        let xa1 = xa * a;
                        for xn in 0..a {
                            v += t.get(x % a, xn) * next[yi * xa1 + x * a + xn];
                        }
                    }
                    best = best.min(v);
                }
                cur[yp * xa + x] = best;
            }
        }
        next = cur;
    }
    let total: f64 = source
        .initial()
        .probs()
        .iter()
        .zip(&next)
        .map(|(p, v)| p * v)
        .sum();
    total / (n + 1) as f64
}

/// Deterministic policy emitting `seq[i]` at stage `i` regardless of inputs.
pub(crate) fn constant_policy(a: usize, b: usize, seq: &[usize]) -> ExactPolicy {
    let stages = seq
        .iter()
        .enumerate()
        .map(|(i, &y)| {
            let rows = b.pow(i as u32) * a.pow(i as u32 + 1);
            let mut data = vec![0.0; rows * b];
            for r in 0..rows {
                data[r * b + y] = 1.0;
            }
            StochasticKernel::from_normalized(rows, b, data)
        })
        .collect();
    ExactPolicy::new(a, b, stages).expect("shapes follow the layout")
}
