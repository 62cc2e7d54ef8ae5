use std::collections::BTreeMap;

use super::{empty_view, RealizationSpec, Stream};
use crate::error::{Error, Result};
use crate::prob::MarkovSource;
use crate::solver::CausalPolicy;

/// Largest number of joint states kept while marginalizing.
const MAX_STATES: usize = 1 << 20;

#[derive(Debug, Clone, PartialEq)]
pub struct RealizationReport {
    /// Largest total-variation distance between the induced and the target
    /// `P(y_i | y^{i-1}, x^i)` over reachable rows, per stage.
    pub per_stage: Vec<f64>,
    pub max_deviation: f64,
}

type Histories = [Vec<usize>; 4];

/// Marginalizes the encoder and channel symbols out of the cascade over
/// stages `0..=horizon` and compares the induced causal kernel with
/// `policy`.
pub fn verify_realization(
    source: &MarkovSource,
    spec: &RealizationSpec,
    policy: &CausalPolicy,
    horizon: usize,
) -> Result<RealizationReport> {
    if source.size() != spec.source_size() || policy.source_size() != spec.source_size() {
        return Err(Error::LengthMismatch {
            expected: spec.source_size(),
            found: policy.source_size(),
        });
    }
    if policy.recon_size() != spec.recon_size() {
        return Err(Error::LengthMismatch {
            expected: policy.recon_size(),
            found: spec.recon_size(),
        });
    }
    let limits = [spec.horizon(), policy.horizon()];
    if let Some(h) = limits.iter().flatten().min() {
        if horizon > *h {
            return Err(Error::HorizonTooLarge {
                horizon,
                limit: *h,
            });
        }
    }
    let sizes = *spec.sizes();
    let mut states: BTreeMap<Histories, f64> = BTreeMap::new();
    states.insert(Default::default(), 1.0);
    let mut per_stage = Vec::with_capacity(horizon + 1);
    for i in 0..=horizon {
        let mut next: BTreeMap<Histories, f64> = BTreeMap::new();
        // (x^i, y^{i-1}) -> (mass, Σ mass · (P(y_i | hidden) − target))
        let mut induced: BTreeMap<(Vec<usize>, Vec<usize>), (f64, Vec<f64>)> = BTreeMap::new();
        let mut cond = vec![0.0; sizes[3]];
        for (h, &w) in &states {
            for x in 0..sizes[0] {
                let px = source.step_prob(h[0].last().copied(), x);
                if px == 0.0 {
                    continue;
                }
                cond.iter_mut().for_each(|c| *c = 0.0);
                let mut view = empty_view();
                view.past = [&h[0], &h[1], &h[2], &h[3]];
                view.current[Stream::Source.slot()] = Some(x);
                let enc = spec.encoder.row(&sizes, i, &view).to_vec();
                for (a, &pa) in enc.iter().enumerate() {
                    if pa == 0.0 {
                        continue;
                    }
                    view.current[Stream::Encoded.slot()] = Some(a);
                    let ch = spec.channel.row(&sizes, i, &view).to_vec();
                    for (b, &pb) in ch.iter().enumerate() {
                        if pb == 0.0 {
                            continue;
                        }
                        view.current[Stream::Received.slot()] = Some(b);
                        let dec = spec.decoder.row(&sizes, i, &view);
                        for (y, &py) in dec.iter().enumerate() {
                            let p = pa * pb * py;
                            if p == 0.0 {
                                continue;
                            }
                            cond[y] += p;
                            let mut key = h.clone();
                            key[0].push(x);
                            key[1].push(a);
                            key[2].push(b);
                            key[3].push(y);
                            *next.entry(key).or_insert(0.0) += w * px * p;
                        }
                    }
                }
                let mut xs = h[0].clone();
                xs.push(x);
                let target = policy.row(&xs, &h[3]);
                let mass = w * px;
                let entry = induced
                    .entry((xs, h[3].clone()))
                    .or_insert_with(|| (0.0, vec![0.0; sizes[3]]));
                entry.0 += mass;
                for (acc, (c, t)) in entry.1.iter_mut().zip(cond.iter().zip(target)) {
                    *acc += mass * (c - t);
                }
            }
        }
        if next.len() > MAX_STATES {
            return Err(Error::HorizonTooLarge {
                horizon,
                limit: i.saturating_sub(1),
            });
        }
        let mut worst = 0.0f64;
        for (mass, diff) in induced.values() {
            if *mass <= 0.0 {
                continue;
            }
            let tv = 0.5 * diff.iter().map(|d| d.abs()).sum::<f64>() / mass;
            worst = worst.max(tv);
        }
        per_stage.push(worst);
        states = next;
    }
    let max_deviation = per_stage.iter().copied().fold(0.0, f64::max);
    Ok(RealizationReport {
        per_stage,
        max_deviation,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distortion::DistortionSpec;
    use crate::prob::StochasticKernel;
    use crate::realization::{bsc_realization, identity_realization};
    use crate::solver::StationaryPolicy;

    fn bsc_policy(d: f64) -> CausalPolicy {
        let good = vec![1.0 - d, d];
        let bad = vec![d, 1.0 - d];
        let k = StochasticKernel::new(vec![good.clone(), good.clone(), good, bad]).unwrap();
        CausalPolicy::Stationary(StationaryPolicy::new(2, 1, k).unwrap())
    }

    #[test]
    fn identity_realization_is_exact() {
        let src = MarkovSource::binary(0.55, 0.45).unwrap();
        let policy = bsc_policy(0.2);
        let spec = identity_realization(&policy).unwrap();
        let report = verify_realization(&src, &spec, &policy, 4).unwrap();
        assert_eq!(report.max_deviation, 0.0);
        assert_eq!(report.per_stage.len(), 5);
    }

    #[test]
    fn bsc_matches_and_perturbation_is_seen() {
        let src = MarkovSource::binary(0.5, 0.25).unwrap();
        let d = DistortionSpec::consecutive_ones();
        let spec = bsc_realization(&src, &d, 0.2).unwrap();
        let ok = verify_realization(&src, &spec, &bsc_policy(0.2), 4).unwrap();
        assert!(ok.max_deviation < 1e-12, "{ok:?}");
        let off = bsc_realization(&src, &d, 0.3).unwrap();
        let bad = verify_realization(&src, &off, &bsc_policy(0.2), 4).unwrap();
        assert!((bad.max_deviation - 0.1).abs() < 1e-12, "{bad:?}");
    }
}
