//! Per-letter kernels under the steady-state source.

use std::f64::consts::LN_2;

use super::{ln_or_neg_inf, log_sum_exp, normalize_log_weights, GTable, PolicyEvaluation, StationaryPolicy};
use crate::distortion::DistortionSpec;
use crate::error::{Error, Result};
use crate::prob::{steady_window_probs, Distribution, MarkovSource, StochasticKernel};

/// Steady-state window probabilities paired with the distortion rows.
pub(crate) struct Problem {
    pub memory: usize,
    pub b: usize,
    pub window_probs: Vec<f64>,
    pub rho: Vec<f64>,
}

pub(crate) fn memory_of(dist: &DistortionSpec) -> Result<usize> {
    match (dist.source_window(), dist.recon_window()) {
        (Some(m), Some(0)) => Ok(m),
        _ => Err(Error::InvalidArgument(
            "stationary mode needs a windowed distortion without reconstruction memory".into(),
        )),
    }
}

impl Problem {
    pub fn new(source: &MarkovSource, dist: &DistortionSpec) -> Result<Self> {
        let memory = memory_of(dist)?;
        let window_probs = steady_window_probs(source, memory)?;
        let contexts = window_probs.len();
        let rho = (0..contexts)
            .flat_map(|c| dist.row(c).expect("windowed").to_vec())
            .collect();
        Ok(Self {
            memory,
            b: dist.recon_size(),
            window_probs,
            rho,
        })
    }

    pub fn contexts(&self) -> usize {
        self.window_probs.len()
    }

    pub fn kernel(&self, r: &[f64], slope: f64) -> Result<StochasticKernel> {
        let b = self.b;
        let log_r: Vec<f64> = r.iter().map(|&p| ln_or_neg_inf(p)).collect();
        let mut data = vec![0.0; self.contexts() * b];
        let mut logw = vec![0.0; b];
        for c in 0..self.contexts() {
            for y in 0..b {
                logw[y] = log_r[y] + slope * self.rho[c * b + y];
            }
            normalize_log_weights(&logw, &mut data[c * b..(c + 1) * b])
                .ok_or(Error::DegenerateKernel { stage: 0, row: c })?;
        }
        Ok(StochasticKernel::from_normalized(self.contexts(), b, data))
    }

    pub fn marginal(&self, kernel: &StochasticKernel) -> Vec<f64> {
        let mut r = vec![0.0; self.b];
        for (c, &p) in self.window_probs.iter().enumerate() {
            for (y, &q) in kernel.row(c).iter().enumerate() {
                r[y] += p * q;
            }
        }
        let s: f64 = r.iter().sum();
        r.iter_mut().for_each(|v| *v /= s);
        r
    }
}

pub(crate) fn zero_g(dist: &DistortionSpec) -> Result<GTable> {
    let memory = memory_of(dist)?;
    let contexts = dist.source_size().pow(memory as u32 + 1);
    Ok(GTable::from_stages(vec![vec![0.0; contexts * dist.recon_size()]]))
}

pub(crate) fn kernel(dist: &DistortionSpec, r: &Distribution, slope: f64) -> Result<StochasticKernel> {
    let memory = memory_of(dist)?;
    let contexts = dist.source_size().pow(memory as u32 + 1);
    let problem = Problem {
        memory,
        b: dist.recon_size(),
        window_probs: vec![0.0; contexts],
        rho: (0..contexts).flat_map(|c| dist.row(c).unwrap().to_vec()).collect(),
    };
    if r.len() != problem.b {
        return Err(Error::LengthMismatch {
            expected: problem.b,
            found: r.len(),
        });
    }
    problem.kernel(r.probs(), slope)
}

pub(crate) fn marginal(source: &MarkovSource, policy: &StationaryPolicy) -> Result<Distribution> {
    let probs = steady_window_probs(source, policy.memory())?;
    let mut r = vec![0.0; policy.recon_size()];
    for (c, &p) in probs.iter().enumerate() {
        for (y, &q) in policy.kernel().row(c).iter().enumerate() {
            r[y] += p * q;
        }
    }
    Distribution::from_weights(&r)
}

/// Steady-state windows long enough for both the policy and the distortion,
/// with the context index each of them reads.
fn joint_windows(
    source: &MarkovSource,
    dist: &DistortionSpec,
    policy: &StationaryPolicy,
) -> Result<Vec<(f64, usize, usize)>> {
    let dm = memory_of(dist)?;
    let pm = policy.memory();
    let m = dm.max(pm);
    let a = source.size();
    let probs = steady_window_probs(source, m)?;
    Ok(probs
        .into_iter()
        .enumerate()
        .map(|(w, p)| (p, w / a.pow((m - pm) as u32), w / a.pow((m - dm) as u32)))
        .collect())
}

pub(crate) fn evaluate(
    source: &MarkovSource,
    dist: &DistortionSpec,
    policy: &StationaryPolicy,
) -> Result<PolicyEvaluation> {
    let b = policy.recon_size();
    let windows = joint_windows(source, dist, policy)?;
    let mut r = vec![0.0; b];
    let mut distortion = 0.0;
    for &(p, pc, dc) in &windows {
        let row = policy.kernel().row(pc);
        let rho = dist.row(dc).expect("windowed");
        for y in 0..b {
            r[y] += p * row[y];
            distortion += p * row[y] * rho[y];
        }
    }
    let mut rate = 0.0;
    for &(p, pc, _) in &windows {
        for (y, &q) in policy.kernel().row(pc).iter().enumerate() {
            if p > 0.0 && q > 0.0 {
                rate += p * q * (q.log2() - r[y].log2());
            }
        }
    }
    Ok(PolicyEvaluation {
        rate: rate.max(0.0),
        distortion,
    })
}

pub(crate) fn closed_form_rate(
    source: &MarkovSource,
    dist: &DistortionSpec,
    policy: &StationaryPolicy,
    r: &Distribution,
    slope: f64,
) -> Result<f64> {
    let windows = joint_windows(source, dist, policy)?;
    let log_r: Vec<f64> = r.probs().iter().map(|&p| ln_or_neg_inf(p)).collect();
    let mut total = 0.0;
    for &(p, pc, dc) in &windows {
        let row = policy.kernel().row(pc);
        let rho = dist.row(dc).expect("windowed");
        let d: f64 = row.iter().zip(rho).map(|(q, c)| q * c).sum();
        let lse = log_sum_exp(log_r.iter().zip(rho).map(|(lr, c)| lr + slope * c));
        total += p * (slope * d - lse);
    }
    Ok(total / LN_2)
}
