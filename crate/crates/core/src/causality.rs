//! Markov-chain checks that a reconstruction kernel does not look ahead.
//!
//! For a kernel `P(y^n | x^n)` and a source without feedback, causality is
//! equivalent to each of
//!
//! * `Y^i ↔ X^i ↔ X_{i+1}` for every `i < n`, and
//! * `Y_i ↔ (X^i, Y^{i-1}) ↔ X_{i+1..n}` for every `i < n`.
//!
//! Both are measured as conditional mutual informations on the enumerated
//! joint.

use crate::error::{Error, Result};
use crate::history::{count, decode_history};
use crate::prob::{conditional_mutual_information, JointTable, MarkovSource, StochasticKernel};
use crate::solver::{CausalPolicy, MAX_EXACT_STATES};

/// Default threshold below which a conditional mutual information counts as zero.
pub const CAUSALITY_TOLERANCE: f64 = 1e-10;

/// A block kernel `P(y^n | x^n)` over whole sequences, rows and columns
/// indexed by history (oldest symbol most significant).
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceKernel {
    source_size: usize,
    recon_size: usize,
    horizon: usize,
    kernel: StochasticKernel,
}

impl SequenceKernel {
    pub fn new(
        source_size: usize,
        recon_size: usize,
        horizon: usize,
        kernel: StochasticKernel,
    ) -> Result<Self> {
        check_size(source_size, recon_size, horizon)?;
        let rows = source_size.pow(horizon as u32 + 1);
        let cols = recon_size.pow(horizon as u32 + 1);
        if kernel.num_inputs() != rows || kernel.num_outputs() != cols {
            return Err(Error::InvalidArgument(format!(
                "sequence kernel must be {rows}x{cols}, got {}x{}",
                kernel.num_inputs(),
                kernel.num_outputs()
            )));
        }
        Ok(Self {
            source_size,
            recon_size,
            horizon,
            kernel,
        })
    }

    /// Product of the policy's stage kernels over stages `0..=horizon`.
    pub fn from_policy(policy: &CausalPolicy, horizon: usize) -> Result<Self> {
        let (a, b) = (policy.source_size(), policy.recon_size());
        check_size(a, b, horizon)?;
        let exact = policy.unroll(horizon)?;
        let rows = a.pow(horizon as u32 + 1);
        let cols = b.pow(horizon as u32 + 1);
        let mut data = vec![0.0; rows * cols];
        let mut xs = vec![0; horizon + 1];
        let mut ys = vec![0; horizon + 1];
        for x in 0..rows {
            decode_history(x, a, &mut xs);
            for y in 0..cols {
                decode_history(y, b, &mut ys);
                let mut p = 1.0;
                for i in 0..=horizon {
                    p *= exact.row(&xs[..=i], &ys[..i])[ys[i]];
                    if p == 0.0 {
                        break;
                    }
                }
                data[x * cols + y] = p;
            }
        }
        let kernel = StochasticKernel::from_flat(rows, cols, data)?;
        Self::new(a, b, horizon, kernel)
    }

    /// Binary kernel with `y_0 = x_1` and `y_i = x_i` afterwards.
    pub fn anticausal_copy(horizon: usize) -> Result<Self> {
        if horizon == 0 {
            return Err(Error::InvalidArgument(
                "an anticausal kernel needs at least two stages".into(),
            ));
        }
        let n = 1usize << (horizon + 1);
        let mut xs = vec![0; horizon + 1];
        let mut data = vec![0.0; n * n];
        for x in 0..n {
            decode_history(x, 2, &mut xs);
            let mut ys = xs.clone();
            ys[0] = xs[1];
            data[x * n + crate::history::history_index(&ys, 2)] = 1.0;
        }
        Self::new(2, 2, horizon, StochasticKernel::from_flat(n, n, data)?)
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn kernel(&self) -> &StochasticKernel {
        &self.kernel
    }
}

fn check_size(a: usize, b: usize, horizon: usize) -> Result<()> {
    let states = count(a, horizon + 1)
        .zip(count(b, horizon + 1))
        .and_then(|(x, y)| x.checked_mul(y));
    match states {
        Some(s) if s <= MAX_EXACT_STATES => Ok(()),
        _ => Err(Error::HorizonTooLarge {
            horizon,
            limit: crate::solver::exact_horizon_limit(a, b),
        }),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CausalityReport {
    /// `I(Y^i; X_{i+1} | X^i)` in bits, `i = 0..n-1`.
    pub lookahead: Vec<f64>,
    /// `I(Y_i; X_{i+1..n} | X^i, Y^{i-1})` in bits, `i = 0..n-1`.
    pub future_dependence: Vec<f64>,
    pub max_violation: f64,
    pub tolerance: f64,
    pub passed: bool,
}

/// Checks a policy unrolled to `horizon`.
pub fn check_causality(
    source: &MarkovSource,
    policy: &CausalPolicy,
    horizon: usize,
) -> Result<CausalityReport> {
    check_sequence_kernel(source, &SequenceKernel::from_policy(policy, horizon)?)
}

pub fn check_sequence_kernel(
    source: &MarkovSource,
    kernel: &SequenceKernel,
) -> Result<CausalityReport> {
    if source.size() != kernel.source_size {
        return Err(Error::LengthMismatch {
            expected: source.size(),
            found: kernel.source_size,
        });
    }
    let (a, b, n) = (kernel.source_size, kernel.recon_size, kernel.horizon);
    let rows = a.pow(n as u32 + 1);
    let cols = b.pow(n as u32 + 1);
    let mut xs = vec![0; n + 1];
    let mut joint = vec![0.0; rows * cols];
    for x in 0..rows {
        decode_history(x, a, &mut xs);
        let mut px = source.initial()[xs[0]];
        for i in 1..=n {
            px *= source.step_prob(Some(xs[i - 1]), xs[i]);
        }
        for (y, &k) in kernel.kernel.row(x).iter().enumerate() {
            joint[x * cols + y] = px * k;
        }
    }

    let mut lookahead = Vec::with_capacity(n);
    let mut future_dependence = Vec::with_capacity(n);
    for i in 0..n {
        let xa = a.pow(i as u32 + 1);
        let x_future = a.pow((n - i) as u32);
        let y_tail = b.pow((n - i) as u32);
        let yb = b.pow(i as u32 + 1);

        // axes (Y^i, X_{i+1}, X^i)
        let mut t3 = vec![0.0; yb * a * xa];
        // axes (Y_i, X_{i+1..n}, (X^i, Y^{i-1}))
        let ctx = xa * b.pow(i as u32);
        let mut t2 = vec![0.0; b * x_future * ctx];
        for x in 0..rows {
            let x_head = x / x_future;
            let x_rest = x % x_future;
            let x_next = x_rest / a.pow((n - i - 1) as u32);
            for y in 0..cols {
                let p = joint[x * cols + y];
                if p == 0.0 {
                    continue;
                }
                let y_head = y / y_tail;
                t3[(y_head * a + x_next) * xa + x_head] += p;
                let (y_prev, y_cur) = (y_head / b, y_head % b);
                t2[(y_cur * x_future + x_rest) * ctx + x_head * b.pow(i as u32) + y_prev] += p;
            }
        }
        lookahead.push(conditional_mutual_information(&JointTable::new(
            vec![yb, a, xa],
            t3,
        )?)?);
        future_dependence.push(conditional_mutual_information(&JointTable::new(
            vec![b, x_future, ctx],
            t2,
        )?)?);
    }
    let max_violation = lookahead
        .iter()
        .chain(&future_dependence)
        .fold(0.0f64, |m, v| m.max(*v));
    Ok(CausalityReport {
        lookahead,
        future_dependence,
        max_violation,
        tolerance: CAUSALITY_TOLERANCE,
        passed: max_violation < CAUSALITY_TOLERANCE,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prob::Distribution;
    use crate::solver::{ExactPolicy, StationaryPolicy};

    fn source() -> MarkovSource {
        MarkovSource::binary(0.55, 0.45).unwrap()
    }

    #[test]
    fn anticausal_copy_is_detected() {
        let report = check_sequence_kernel(&source(), &SequenceKernel::anticausal_copy(2).unwrap()).unwrap();
        assert!(!report.passed);
        assert!(report.lookahead[0] > 0.1, "{report:?}");
    }

    #[test]
    fn copy_policy_passes() {
        let kernel = StochasticKernel::identity(2);
        let policy = CausalPolicy::Stationary(StationaryPolicy::new(2, 0, kernel).unwrap());
        let report = check_causality(&source(), &policy, 3).unwrap();
        assert!(report.passed, "{report:?}");
        assert_eq!(report.lookahead.len(), 3);
    }

    #[test]
    fn source_independent_policy_passes() {
        let d = Distribution::new(vec![0.3, 0.7]).unwrap();
        let stages = (0..3)
            .map(|i| StochasticKernel::constant(2usize.pow(i) * 2usize.pow(i + 1), &d))
            .collect();
        let policy = CausalPolicy::Exact(ExactPolicy::new(2, 2, stages).unwrap());
        let report = check_causality(&source(), &policy, 2).unwrap();
        assert!(report.max_violation < 1e-15);
    }

    #[test]
    fn sequence_kernel_rows_sum_to_one() {
        let kernel = StochasticKernel::new(vec![vec![0.9, 0.1], vec![0.2, 0.8]]).unwrap();
        let policy = CausalPolicy::Stationary(StationaryPolicy::new(2, 0, kernel).unwrap());
        let seq = SequenceKernel::from_policy(&policy, 3).unwrap();
        assert!(seq.kernel().max_row_error() < 1e-12);
    }

    #[test]
    fn oversized_horizon_is_rejected() {
        let policy = CausalPolicy::Stationary(
            StationaryPolicy::new(2, 0, StochasticKernel::identity(2)).unwrap(),
        );
        assert!(matches!(
            SequenceKernel::from_policy(&policy, 12),
            Err(Error::HorizonTooLarge { .. })
        ));
    }
}
