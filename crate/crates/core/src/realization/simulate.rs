use std::io::{self, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::Serialize;

use super::{empty_view, RealizationSpec, Stream};
use crate::distortion::DistortionSpec;
use crate::error::{Error, Result};
use crate::prob::MarkovSource;

/// Generator recorded in every trace.
pub const RNG_NAME: &str = "ChaCha20 (rand_chacha 0.3, seed_from_u64)";

/// One sample path of the cascade.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub seed: u64,
    pub rng: String,
    pub x: Vec<usize>,
    pub a: Vec<usize>,
    pub b: Vec<usize>,
    pub y: Vec<usize>,
    /// Per-stage distortion `ρ_i(x^i, y^i)`.
    pub rho: Vec<f64>,
}

impl Trace {
    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    /// CSV with header `t,x,a,b,y,rho`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "t,x,a,b,y,rho")?;
        for t in 0..self.len() {
            writeln!(
                w,
                "{t},{},{},{},{},{}",
                self.x[t], self.a[t], self.b[t], self.y[t], self.rho[t]
            )?;
        }
        Ok(())
    }
}

fn sample(rng: &mut ChaCha20Rng, row: &[f64]) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    let mut last = 0;
    for (k, &p) in row.iter().enumerate() {
        if p > 0.0 {
            acc += p;
            last = k;
            if u < acc {
                return k;
            }
        }
    }
    last
}

/// Draws `steps` time steps of source and cascade from a seeded generator.
/// Identical seeds give identical traces.
pub fn simulate(
    source: &MarkovSource,
    spec: &RealizationSpec,
    dist: &DistortionSpec,
    steps: usize,
    seed: u64,
) -> Result<Trace> {
    if steps == 0 {
        return Err(Error::InvalidArgument("steps must be at least 1".into()));
    }
    if source.size() != spec.source_size() || dist.source_size() != spec.source_size() {
        return Err(Error::LengthMismatch {
            expected: spec.source_size(),
            found: source.size().max(dist.source_size()),
        });
    }
    if dist.recon_size() != spec.recon_size() {
        return Err(Error::LengthMismatch {
            expected: spec.recon_size(),
            found: dist.recon_size(),
        });
    }
    let limits = [spec.horizon(), dist.max_stage()];
    if let Some(h) = limits.iter().flatten().min() {
        if steps > h + 1 {
            return Err(Error::HorizonTooLarge {
                horizon: steps - 1,
                limit: *h,
            });
        }
    }
    let sizes = *spec.sizes();
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut x = Vec::with_capacity(steps);
    let mut a = Vec::with_capacity(steps);
    let mut b = Vec::with_capacity(steps);
    let mut y = Vec::with_capacity(steps);
    let mut rho = Vec::with_capacity(steps);
    for i in 0..steps {
        let xi = match x.last() {
            None => sample(&mut rng, source.initial().probs()),
            Some(&prev) => sample(&mut rng, source.transition().row(prev)),
        };
        let mut view = empty_view();
        view.past = [&x, &a, &b, &y];
        view.current[Stream::Source.slot()] = Some(xi);
        let ai = sample(&mut rng, spec.encoder.row(&sizes, i, &view));
        view.current[Stream::Encoded.slot()] = Some(ai);
        let bi = sample(&mut rng, spec.channel.row(&sizes, i, &view));
        view.current[Stream::Received.slot()] = Some(bi);
        let yi = sample(&mut rng, spec.decoder.row(&sizes, i, &view));
        x.push(xi);
        a.push(ai);
        b.push(bi);
        y.push(yi);
        rho.push(dist.rho(&x, &y));
    }
    Ok(Trace {
        seed,
        rng: RNG_NAME.to_string(),
        x,
        a,
        b,
        y,
        rho,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmpiricalStats {
    pub n: usize,
    pub mean_distortion: f64,
    /// Sample standard deviation over `sqrt(n)`.
    pub std_err: f64,
    pub marginal_y: Vec<f64>,
    /// `transition_counts[u][v]` counts source steps `u → v`.
    pub transition_counts: Vec<Vec<u64>>,
}

pub fn empirical_stats(trace: &Trace, dist: &DistortionSpec) -> Result<EmpiricalStats> {
    let n = trace.len();
    if n == 0 {
        return Err(Error::InvalidArgument("trace is empty".into()));
    }
    let mean = trace.rho.iter().sum::<f64>() / n as f64;
    let std_err = if n > 1 {
        let var = trace.rho.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        (var / n as f64).sqrt()
    } else {
        0.0
    };
    let mut marginal_y = vec![0.0; dist.recon_size()];
    for &y in &trace.y {
        marginal_y[y] += 1.0;
    }
    marginal_y.iter_mut().for_each(|m| *m /= n as f64);
    let a = dist.source_size();
    let mut transition_counts = vec![vec![0u64; a]; a];
    for w in trace.x.windows(2) {
        transition_counts[w[0]][w[1]] += 1;
    }
    Ok(EmpiricalStats {
        n,
        mean_distortion: mean,
        std_err,
        marginal_y,
        transition_counts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prob::StochasticKernel;
    use crate::realization::identity_realization;
    use crate::solver::{CausalPolicy, StationaryPolicy};

    fn copy_spec() -> RealizationSpec {
        let policy = CausalPolicy::Stationary(
            StationaryPolicy::new(2, 0, StochasticKernel::identity(2)).unwrap(),
        );
        identity_realization(&policy).unwrap()
    }

    #[test]
    fn same_seed_same_trace() {
        let src = MarkovSource::binary(0.55, 0.45).unwrap();
        let d = DistortionSpec::consecutive_ones();
        let t1 = simulate(&src, &copy_spec(), &d, 500, 42).unwrap();
        let t2 = simulate(&src, &copy_spec(), &d, 500, 42).unwrap();
        let t3 = simulate(&src, &copy_spec(), &d, 500, 43).unwrap();
        assert_eq!(t1, t2);
        assert_ne!(t1.x, t3.x);
        assert_eq!(t1.rng, RNG_NAME);
    }

    #[test]
    fn copy_cascade_reproduces_source() {
        let src = MarkovSource::binary(0.3, 0.2).unwrap();
        let d = DistortionSpec::hamming(2).unwrap();
        let t = simulate(&src, &copy_spec(), &d, 1000, 1).unwrap();
        assert_eq!(t.x, t.y);
        assert_eq!(t.x, t.a);
        let stats = empirical_stats(&t, &d).unwrap();
        assert_eq!(stats.mean_distortion, 0.0);
        assert_eq!(stats.std_err, 0.0);
        assert!((stats.marginal_y.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let total: u64 = stats.transition_counts.iter().flatten().sum();
        assert_eq!(total, 999);
    }

    #[test]
    fn csv_layout() {
        let src = MarkovSource::binary(0.3, 0.2).unwrap();
        let d = DistortionSpec::hamming(2).unwrap();
        let t = simulate(&src, &copy_spec(), &d, 3, 5).unwrap();
        let mut out = Vec::new();
        t.write_csv(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "t,x,a,b,y,rho");
        assert_eq!(lines.len(), 4);
        assert!(lines[1].starts_with("0,"));
    }

    #[test]
    fn zero_steps_rejected() {
        let src = MarkovSource::binary(0.3, 0.2).unwrap();
        let d = DistortionSpec::hamming(2).unwrap();
        assert!(simulate(&src, &copy_spec(), &d, 0, 5).is_err());
    }
}
