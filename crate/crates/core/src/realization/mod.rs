//! Source → encoder → channel → decoder cascades that reproduce a causal
//! reconstruction kernel.
//!
//! At time `i` the cascade draws, in order,
//!
//! ```text
//! x_i ~ P(x_i | x_{i-1})
//! a_i ~ P(a_i | a^{i-1}, b^{i-1}, x^i)
//! b_i ~ P(b_i | b^{i-1}, a^i)
//! y_i ~ P(y_i | y^{i-1}, b^i)
//! ```
//!
//! Each component reads a list of [`Tap`]s; its row index concatenates the
//! tap contexts in order, the first tap most significant.

mod filter;
mod simulate;
mod verify;

pub use filter::bayes_filter;
pub use simulate::{empirical_stats, simulate, EmpiricalStats, Trace, RNG_NAME};
pub use verify::{verify_realization, RealizationReport};

use crate::distortion::DistortionSpec;
use crate::error::{Error, Result};
use crate::history::history_index;
use crate::prob::{steady_window_probs, MarkovSource, StochasticKernel};
use crate::solver::CausalPolicy;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Stream {
    Source,
    Encoded,
    Received,
    Reconstructed,
}

impl Stream {
    fn slot(self) -> usize {
        self as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Depth {
    /// The `k` most recent symbols, most recent first; positions before time
    /// 0 read as symbol 0.
    Last(usize),
    /// The whole history, oldest symbol most significant.
    All,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Tap {
    pub stream: Stream,
    /// Whether the window starts at the current time rather than one step back.
    pub current: bool,
    pub depth: Depth,
}

impl Tap {
    pub fn last(stream: Stream, current: bool, k: usize) -> Self {
        Self {
            stream,
            current,
            depth: Depth::Last(k),
        }
    }

    pub fn all(stream: Stream, current: bool) -> Self {
        Self {
            stream,
            current,
            depth: Depth::All,
        }
    }

    fn len_at(&self, stage: usize) -> usize {
        match self.depth {
            Depth::Last(k) => k,
            Depth::All => stage + usize::from(self.current),
        }
    }
}

/// Symbols visible to a component at one time step: for each stream the
/// past (possibly only its tail) and, once drawn, the current symbol.
#[derive(Debug, Clone, Copy)]
pub(crate) struct View<'a> {
    pub past: [&'a [usize]; 4],
    pub current: [Option<usize>; 4],
}

/// One component of the cascade.
#[derive(Debug, Clone, PartialEq)]
pub struct CascadeKernel {
    taps: Vec<Tap>,
    output_size: usize,
    /// One kernel reused at every step, or one per stage when a tap reads the
    /// whole history.
    kernels: Vec<StochasticKernel>,
}

impl CascadeKernel {
    pub fn new(taps: Vec<Tap>, kernels: Vec<StochasticKernel>) -> Result<Self> {
        let first = kernels
            .first()
            .ok_or_else(|| Error::InvalidArgument("component needs a kernel".into()))?;
        let output_size = first.num_outputs();
        let per_stage = taps.iter().any(|t| t.depth == Depth::All);
        if !per_stage && kernels.len() != 1 {
            return Err(Error::InvalidArgument(
                "windowed components take exactly one kernel".into(),
            ));
        }
        if kernels.iter().any(|k| k.num_outputs() != output_size) {
            return Err(Error::InvalidArgument(
                "stage kernels disagree on the output alphabet".into(),
            ));
        }
        Ok(Self {
            taps,
            output_size,
            kernels,
        })
    }

    pub fn taps(&self) -> &[Tap] {
        &self.taps
    }

    pub fn output_size(&self) -> usize {
        self.output_size
    }

    pub fn kernels(&self) -> &[StochasticKernel] {
        &self.kernels
    }

    /// Last stage a per-stage component covers.
    pub fn horizon(&self) -> Option<usize> {
        self.taps
            .iter()
            .any(|t| t.depth == Depth::All)
            .then(|| self.kernels.len() - 1)
    }

    fn rows_at(&self, sizes: &[usize; 4], stage: usize) -> Option<usize> {
        self.taps.iter().try_fold(1usize, |acc, t| {
            crate::history::count(sizes[t.stream.slot()], t.len_at(stage))
                .and_then(|c| acc.checked_mul(c))
        })
    }

    fn kernel_at(&self, stage: usize) -> &StochasticKernel {
        if self.kernels.len() == 1 {
            &self.kernels[0]
        } else {
            &self.kernels[stage]
        }
    }

    pub(crate) fn row<'a>(&'a self, sizes: &[usize; 4], stage: usize, view: &View) -> &'a [f64] {
        let mut idx = 0;
        let mut buf = Vec::new();
        for t in &self.taps {
            let s = t.stream.slot();
            let radix = sizes[s];
            let past = view.past[s];
            let cur = if t.current { view.current[s] } else { None };
            let len = t.len_at(stage);
            let sub = match t.depth {
                Depth::Last(k) => {
                    let mut w = 0;
                    let mut it = cur.into_iter().chain(past.iter().rev().copied());
                    for _ in 0..k {
                        w = w * radix + it.next().unwrap_or(0);
                    }
                    w
                }
                Depth::All => {
                    buf.clear();
                    buf.extend_from_slice(past);
                    buf.extend(cur);
                    debug_assert_eq!(buf.len(), len);
                    history_index(&buf, radix)
                }
            };
            idx = idx * radix.pow(len as u32) + sub;
        }
        self.kernel_at(stage).row(idx)
    }
}

/// Encoder, channel and decoder with their alphabets.
#[derive(Debug, Clone, PartialEq)]
pub struct RealizationSpec {
    /// `[|X|, |A|, |B|, |Y|]`.
    sizes: [usize; 4],
    encoder: CascadeKernel,
    channel: CascadeKernel,
    decoder: CascadeKernel,
}

impl RealizationSpec {
    pub fn new(
        source_size: usize,
        encoder: CascadeKernel,
        channel: CascadeKernel,
        decoder: CascadeKernel,
    ) -> Result<Self> {
        let sizes = [
            source_size,
            encoder.output_size,
            channel.output_size,
            decoder.output_size,
        ];
        // streams each component may read, and which of them it sees at time i
        let rules: [(&CascadeKernel, &str, [bool; 4], [bool; 4]); 3] = [
            (&encoder, "encoder", [true, true, true, false], [true, false, false, false]),
            (&channel, "channel", [false, true, true, false], [false, true, false, false]),
            (&decoder, "decoder", [false, false, true, true], [false, false, true, false]),
        ];
        for (comp, name, readable, current) in rules {
            for t in &comp.taps {
                let s = t.stream.slot();
                if !readable[s] || (t.current && !current[s]) {
                    return Err(Error::InvalidArgument(format!(
                        "{name} cannot read {:?}{}",
                        t.stream,
                        if t.current { " at the current time" } else { "" }
                    )));
                }
                if t.current && t.depth == Depth::Last(0) {
                    return Err(Error::InvalidArgument(format!(
                        "{name} tap on the current {:?} symbol needs depth at least 1",
                        t.stream
                    )));
                }
            }
            let stages = comp.kernels.len();
            for stage in 0..stages {
                let rows = comp.rows_at(&sizes, stage).ok_or_else(|| {
                    Error::InvalidArgument(format!("{name} context is too large"))
                })?;
                let k = &comp.kernels[stage];
                if k.num_inputs() != rows {
                    return Err(Error::InvalidArgument(format!(
                        "{name} kernel at stage {stage} needs {rows} rows, has {}",
                        k.num_inputs()
                    )));
                }
            }
        }
        Ok(Self {
            sizes,
            encoder,
            channel,
            decoder,
        })
    }

    pub fn source_size(&self) -> usize {
        self.sizes[0]
    }

    pub fn encoded_size(&self) -> usize {
        self.sizes[1]
    }

    pub fn received_size(&self) -> usize {
        self.sizes[2]
    }

    pub fn recon_size(&self) -> usize {
        self.sizes[3]
    }

    pub fn encoder(&self) -> &CascadeKernel {
        &self.encoder
    }

    pub fn channel(&self) -> &CascadeKernel {
        &self.channel
    }

    pub fn decoder(&self) -> &CascadeKernel {
        &self.decoder
    }

    /// Last stage covered when some component has per-stage kernels.
    pub fn horizon(&self) -> Option<usize> {
        [&self.encoder, &self.channel, &self.decoder]
            .iter()
            .filter_map(|c| c.horizon())
            .min()
    }

    /// How many past symbols of each stream any component reads;
    /// `usize::MAX` for whole histories.
    pub(crate) fn memory(&self) -> [usize; 4] {
        let mut out = [0; 4];
        for comp in [&self.encoder, &self.channel, &self.decoder] {
            for t in &comp.taps {
                let need = match t.depth {
                    Depth::Last(k) => k,
                    Depth::All => usize::MAX,
                };
                let s = t.stream.slot();
                out[s] = out[s].max(need);
            }
        }
        out
    }

    pub(crate) fn sizes(&self) -> &[usize; 4] {
        &self.sizes
    }
}

/// Copy encoder, the policy itself as the channel, copy decoder.
pub fn identity_realization(policy: &CausalPolicy) -> Result<RealizationSpec> {
    let (a, b) = (policy.source_size(), policy.recon_size());
    let encoder = CascadeKernel::new(
        vec![Tap::last(Stream::Source, true, 1)],
        vec![StochasticKernel::identity(a)],
    )?;
    let channel = match policy {
        CausalPolicy::Exact(p) => CascadeKernel::new(
            vec![
                Tap::all(Stream::Received, false),
                Tap::all(Stream::Encoded, true),
            ],
            p.stages().to_vec(),
        )?,
        CausalPolicy::Stationary(p) => CascadeKernel::new(
            vec![Tap::last(Stream::Encoded, true, p.memory() + 1)],
            vec![p.kernel().clone()],
        )?,
    };
    let decoder = CascadeKernel::new(
        vec![Tap::last(Stream::Received, true, 1)],
        vec![StochasticKernel::identity(b)],
    )?;
    RealizationSpec::new(a, encoder, channel, decoder)
}

/// Tolerance on the special-case condition `P(best symbol = 0) = 1/2`.
pub const SPECIAL_CASE_TOLERANCE: f64 = 1e-9;

/// Encoder that sends each source window's zero-cost symbol through a binary
/// symmetric channel with crossover `crossover`, decoded by copying.
///
/// Requires a binary reconstruction alphabet, a windowed distortion without
/// reconstruction memory, and a source for which the encoded symbol is
/// equiprobable in steady state.
pub fn bsc_realization(
    source: &MarkovSource,
    dist: &DistortionSpec,
    crossover: f64,
) -> Result<RealizationSpec> {
    if !(0.0..0.5).contains(&crossover) {
        return Err(Error::InvalidArgument(format!(
            "crossover must lie in [0, 1/2), got {crossover}"
        )));
    }
    if dist.recon_size() != 2 || dist.source_size() != source.size() {
        return Err(Error::InvalidArgument(
            "binary symmetric realization needs a binary reconstruction alphabet".into(),
        ));
    }
    let memory = match (dist.source_window(), dist.recon_window()) {
        (Some(m), Some(0)) => m,
        _ => {
            return Err(Error::InvalidArgument(
                "binary symmetric realization needs a windowed distortion without reconstruction memory"
                    .into(),
            ))
        }
    };
    let windows = steady_window_probs(source, memory)?;
    let best: Vec<usize> = (0..windows.len())
        .map(|c| dist.best_symbol(c).expect("windowed"))
        .collect();
    let p0: f64 = windows
        .iter()
        .zip(&best)
        .filter(|(_, &y)| y == 0)
        .map(|(p, _)| p)
        .sum();
    if (p0 - 0.5).abs() > SPECIAL_CASE_TOLERANCE {
        return Err(Error::InvalidArgument(format!(
            "source is off the special-case manifold: P(encoded = 0) = {p0}, needs 1/2"
        )));
    }
    let enc_rows = best
        .iter()
        .map(|&y| if y == 0 { vec![1.0, 0.0] } else { vec![0.0, 1.0] })
        .collect();
    let encoder = CascadeKernel::new(
        vec![Tap::last(Stream::Source, true, memory + 1)],
        vec![StochasticKernel::new(enc_rows)?],
    )?;
    let d = crossover;
    let channel = CascadeKernel::new(
        vec![Tap::last(Stream::Encoded, true, 1)],
        vec![StochasticKernel::new(vec![vec![1.0 - d, d], vec![d, 1.0 - d]])?],
    )?;
    let decoder = CascadeKernel::new(
        vec![Tap::last(Stream::Received, true, 1)],
        vec![StochasticKernel::identity(2)],
    )?;
    RealizationSpec::new(source.size(), encoder, channel, decoder)
}

pub(crate) fn empty_view<'a>() -> View<'a> {
    View {
        past: [&[]; 4],
        current: [None; 4],
    }
}
