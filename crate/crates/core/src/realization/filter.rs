use std::collections::BTreeMap;

use super::{empty_view, RealizationSpec, Stream};
use crate::error::{Error, Result};
use crate::prob::{Distribution, MarkovSource};

type Hidden = (Vec<usize>, Vec<usize>);

fn push_tail(hist: &[usize], sym: usize, keep: usize) -> Vec<usize> {
    let mut v = Vec::with_capacity(hist.len() + 1);
    let start = (hist.len() + 1).saturating_sub(keep);
    v.extend(hist.iter().copied().chain(std::iter::once(sym)).skip(start));
    v
}

/// Posterior `P(x_i | b^{i-1})` for `i = observed.len()`.
///
/// The hidden state is the tail of `(x, a)` the encoder and channel read;
/// each received symbol reweights it by the encoder-channel likelihood and
/// the source transition predicts the next symbol.
pub fn bayes_filter(
    source: &MarkovSource,
    spec: &RealizationSpec,
    observed: &[usize],
) -> Result<Distribution> {
    if source.size() != spec.source_size() {
        return Err(Error::LengthMismatch {
            expected: spec.source_size(),
            found: source.size(),
        });
    }
    if let Some(&bad) = observed.iter().find(|&&b| b >= spec.received_size()) {
        return Err(Error::InvalidArgument(format!(
            "received symbol {bad} outside alphabet of size {}",
            spec.received_size()
        )));
    }
    if let Some(h) = spec.horizon() {
        if observed.len() > h + 1 {
            return Err(Error::HorizonTooLarge {
                horizon: observed.len(),
                limit: h + 1,
            });
        }
    }
    let sizes = *spec.sizes();
    let memory = spec.memory();
    let x_keep = memory[Stream::Source.slot()].max(1);
    let a_keep = memory[Stream::Encoded.slot()];
    let (nx, na) = (sizes[0], sizes[1]);

    let mut states: BTreeMap<Hidden, f64> = BTreeMap::new();
    states.insert((vec![], vec![]), 1.0);
    for (j, &bj) in observed.iter().enumerate() {
        let mut next: BTreeMap<Hidden, f64> = BTreeMap::new();
        for ((xp, ap), &w) in &states {
            for x in 0..nx {
                let px = source.step_prob(xp.last().copied(), x);
                if px == 0.0 {
                    continue;
                }
                let mut view = empty_view();
                view.past[Stream::Source.slot()] = xp;
                view.past[Stream::Encoded.slot()] = ap;
                view.past[Stream::Received.slot()] = &observed[..j];
                view.current[Stream::Source.slot()] = Some(x);
                let enc = spec.encoder.row(&sizes, j, &view);
                for (a, &pa) in enc.iter().enumerate().take(na) {
                    if pa == 0.0 {
                        continue;
                    }
                    view.current[Stream::Encoded.slot()] = Some(a);
                    let pb = spec.channel.row(&sizes, j, &view)[bj];
                    let weight = w * px * pa * pb;
                    if weight == 0.0 {
                        continue;
                    }
                    let key = (push_tail(xp, x, x_keep), push_tail(ap, a, a_keep));
                    *next.entry(key).or_insert(0.0) += weight;
                }
            }
        }
        let total: f64 = next.values().sum();
        if !(total > 0.0) {
            return Err(Error::ImpossibleEvidence { step: j });
        }
        next.values_mut().for_each(|v| *v /= total);
        states = next;
    }
    let mut post = vec![0.0; nx];
    for ((xp, _), &w) in &states {
        for (x, p) in post.iter_mut().enumerate() {
            *p += w * source.step_prob(xp.last().copied(), x);
        }
    }
    Distribution::from_weights(&post)
}
