//! Finite-alphabet probability primitives.
//!
//! Everything here is measured in bits and follows the conventions
//! `0·log 0 = 0` and `p·log(p/0) = +∞` for `p > 0`.
//!
//! Constructors accept probability vectors whose sum is within `1e-12` of one
//! as-is, renormalize vectors within `1e-9`, and reject anything further off.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Sum tolerance accepted without renormalization.
pub const SUM_TOLERANCE: f64 = 1e-12;
/// Largest sum error that is silently renormalized.
pub const RENORMALIZE_TOLERANCE: f64 = 1e-9;

/// A finite set of symbols `0..size`, optionally with display labels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Alphabet {
    size: usize,
    labels: Option<Vec<String>>,
}

impl Alphabet {
    pub fn new(size: usize) -> Result<Self> {
        if size == 0 {
            return Err(Error::EmptyAlphabet);
        }
        Ok(Self { size, labels: None })
    }

    pub fn with_labels(labels: Vec<String>) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::EmptyAlphabet);
        }
        Ok(Self {
            size: labels.len(),
            labels: Some(labels),
        })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    /// Display label of `symbol`, falling back to its index.
    pub fn label(&self, symbol: usize) -> String {
        match &self.labels {
            Some(labels) => labels[symbol].clone(),
            None => symbol.to_string(),
        }
    }
}

fn validate_probs(mut probs: Vec<f64>) -> Result<Vec<f64>> {
    for (index, &value) in probs.iter().enumerate() {
        if !value.is_finite() || value < 0.0 {
            return Err(Error::NegativeProbability { index, value });
        }
    }
    let sum: f64 = probs.iter().sum();
    let err = (sum - 1.0).abs();
    if err <= SUM_TOLERANCE {
        Ok(probs)
    } else if err <= RENORMALIZE_TOLERANCE {
        probs.iter_mut().for_each(|p| *p /= sum);
        Ok(probs)
    } else {
        Err(Error::NotNormalized { sum })
    }
}

/// A probability vector over a finite alphabet.
#[derive(Debug, Clone, PartialEq)]
pub struct Distribution {
    probs: Vec<f64>,
}

impl Distribution {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::EmptyAlphabet);
        }
        Ok(Self {
            probs: validate_probs(probs)?,
        })
    }

    /// Normalizes nonnegative weights. Fails when all weights are zero.
    pub fn from_weights(weights: &[f64]) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) || !total.is_finite() {
            return Err(Error::NotNormalized { sum: total });
        }
        Self::new(weights.iter().map(|w| w / total).collect())
    }

    pub fn uniform(size: usize) -> Result<Self> {
        if size == 0 {
            return Err(Error::EmptyAlphabet);
        }
        Ok(Self {
            probs: vec![1.0 / size as f64; size],
        })
    }

    pub fn point(size: usize, symbol: usize) -> Result<Self> {
        if symbol >= size {
            return Err(Error::InvalidArgument(format!(
                "symbol {symbol} outside alphabet of size {size}"
            )));
        }
        let mut probs = vec![0.0; size];
        probs[symbol] = 1.0;
        Ok(Self { probs })
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn entropy(&self) -> f64 {
        entropy(&self.probs)
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.probs
    }
}

impl std::ops::Index<usize> for Distribution {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.probs[i]
    }
}

/// Shannon entropy in bits of a probability vector.
pub fn entropy(probs: &[f64]) -> f64 {
    -probs
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| p * p.log2())
        .sum::<f64>()
}

/// Binary entropy function `H(p)` in bits.
pub fn binary_entropy(p: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::ProbabilityOutOfRange(p));
    }
    Ok(entropy(&[p, 1.0 - p]))
}

/// `D(p || q)` in bits. Returns `f64::INFINITY` when `p` is not absolutely
/// continuous with respect to `q`.
pub fn kl_divergence(p: &Distribution, q: &Distribution) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::LengthMismatch {
            expected: p.len(),
            found: q.len(),
        });
    }
    let mut total = 0.0;
    for (&pi, &qi) in p.probs.iter().zip(&q.probs) {
        if pi > 0.0 {
            if qi <= 0.0 {
                return Ok(f64::INFINITY);
            }
            total += pi * (pi.log2() - qi.log2());
        }
    }
    Ok(total.max(0.0))
}

/// A row-stochastic matrix: one output distribution per conditioning index.
#[derive(Debug, Clone, PartialEq)]
pub struct StochasticKernel {
    inputs: usize,
    outputs: usize,
    data: Vec<f64>,
}

impl StochasticKernel {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let inputs = rows.len();
        if inputs == 0 {
            return Err(Error::EmptyAlphabet);
        }
        let outputs = rows[0].len();
        let mut data = Vec::with_capacity(inputs * outputs);
        for row in rows {
            if row.len() != outputs {
                return Err(Error::LengthMismatch {
                    expected: outputs,
                    found: row.len(),
                });
            }
            data.extend(Distribution::new(row)?.into_vec());
        }
        Ok(Self {
            inputs,
            outputs,
            data,
        })
    }

    /// Builds a kernel from a row-major buffer, validating every row.
    pub fn from_flat(inputs: usize, outputs: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != inputs * outputs {
            return Err(Error::LengthMismatch {
                expected: inputs * outputs,
                found: data.len(),
            });
        }
        if inputs == 0 || outputs == 0 {
            return Err(Error::EmptyAlphabet);
        }
        let mut checked = Vec::with_capacity(data.len());
        for row in data.chunks(outputs) {
            checked.extend(Distribution::new(row.to_vec())?.into_vec());
        }
        Ok(Self {
            inputs,
            outputs,
            data: checked,
        })
    }

    /// Trusted constructor for rows that were normalized by construction.
    pub(crate) fn from_normalized(inputs: usize, outputs: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), inputs * outputs);
        Self {
            inputs,
            outputs,
            data,
        }
    }

    pub fn identity(size: usize) -> Self {
        let mut data = vec![0.0; size * size];
        for i in 0..size {
            data[i * size + i] = 1.0;
        }
        Self::from_normalized(size, size, data)
    }

    /// Kernel whose every row is `dist`.
    pub fn constant(inputs: usize, dist: &Distribution) -> Self {
        let data = (0..inputs).flat_map(|_| dist.probs().iter().copied()).collect();
        Self::from_normalized(inputs, dist.len(), data)
    }

    pub fn num_inputs(&self) -> usize {
        self.inputs
    }

    pub fn num_outputs(&self) -> usize {
        self.outputs
    }

    pub fn row(&self, index: usize) -> &[f64] {
        &self.data[index * self.outputs..(index + 1) * self.outputs]
    }

    pub fn get(&self, input: usize, output: usize) -> f64 {
        self.data[input * self.outputs + output]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks(self.outputs)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Largest `|Σ row − 1|` over all rows.
    pub fn max_row_error(&self) -> f64 {
        self.rows()
            .map(|r| (r.iter().sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max)
    }
}

/// A dense joint probability table, row-major with the last axis fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct JointTable {
    dims: Vec<usize>,
    probs: Vec<f64>,
}

impl JointTable {
    pub fn new(dims: Vec<usize>, probs: Vec<f64>) -> Result<Self> {
        let size: usize = dims.iter().product();
        if dims.is_empty() || size == 0 {
            return Err(Error::EmptyAlphabet);
        }
        if probs.len() != size {
            return Err(Error::LengthMismatch {
                expected: size,
                found: probs.len(),
            });
        }
        Ok(Self {
            dims,
            probs: validate_probs(probs)?,
        })
    }

    pub fn from_matrix(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::InvalidArgument("ragged joint matrix".into()));
        }
        Self::new(vec![rows.len(), cols], rows.concat())
    }

    /// Outer product `P_X ⊗ P_Y`.
    pub fn product(x: &Distribution, y: &Distribution) -> Self {
        let probs = x
            .probs()
            .iter()
            .flat_map(|&px| y.probs().iter().map(move |&py| px * py))
            .collect();
        Self {
            dims: vec![x.len(), y.len()],
            probs,
        }
    }

    pub(crate) fn from_unchecked(dims: Vec<usize>, probs: Vec<f64>) -> Self {
        debug_assert_eq!(dims.iter().product::<usize>(), probs.len());
        Self { dims, probs }
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn total_mass(&self) -> f64 {
        self.probs.iter().sum()
    }

    pub fn entropy(&self) -> f64 {
        entropy(&self.probs)
    }

    /// Marginal over the axes in `keep` (in the given order).
    pub fn marginal(&self, keep: &[usize]) -> JointTable {
        let out_dims: Vec<usize> = keep.iter().map(|&a| self.dims[a]).collect();
        let mut out = vec![0.0; out_dims.iter().product()];
        let mut coords = vec![0usize; self.dims.len()];
        for &p in &self.probs {
            let mut idx = 0;
            for &a in keep {
                idx = idx * self.dims[a] + coords[a];
            }
            out[idx] += p;
            for axis in (0..coords.len()).rev() {
                coords[axis] += 1;
                if coords[axis] < self.dims[axis] {
                    break;
                }
                coords[axis] = 0;
            }
        }
        JointTable::from_unchecked(out_dims, out)
    }
}

/// `I(X;Y)` in bits for a two-axis joint table over `X × Y`.
pub fn mutual_information(joint: &JointTable) -> Result<f64> {
    if joint.dims.len() != 2 {
        return Err(Error::InvalidArgument(format!(
            "mutual information needs a 2-axis table, got {} axes",
            joint.dims.len()
        )));
    }
    let (nx, ny) = (joint.dims[0], joint.dims[1]);
    let mut px = vec![0.0; nx];
    let mut py = vec![0.0; ny];
    for i in 0..nx {
        for j in 0..ny {
            let p = joint.probs[i * ny + j];
            px[i] += p;
            py[j] += p;
        }
    }
    let mut total = 0.0;
    for i in 0..nx {
        for j in 0..ny {
            let p = joint.probs[i * ny + j];
            if p > 0.0 {
                total += p * (p.log2() - px[i].log2() - py[j].log2());
            }
        }
    }
    Ok(total.max(0.0))
}

/// `I(A;B|C)` in bits for a three-axis joint table over `A × B × C`.
pub fn conditional_mutual_information(joint: &JointTable) -> Result<f64> {
    if joint.dims.len() != 3 {
        return Err(Error::InvalidArgument(format!(
            "conditional mutual information needs a 3-axis table, got {} axes",
            joint.dims.len()
        )));
    }
    let (na, nb, nc) = (joint.dims[0], joint.dims[1], joint.dims[2]);
    let mut pac = vec![0.0; na * nc];
    let mut pbc = vec![0.0; nb * nc];
    let mut pc = vec![0.0; nc];
    for a in 0..na {
        for b in 0..nb {
            for c in 0..nc {
                let p = joint.probs[(a * nb + b) * nc + c];
                pac[a * nc + c] += p;
                pbc[b * nc + c] += p;
                pc[c] += p;
            }
        }
    }
    let mut total = 0.0;
    for a in 0..na {
        for b in 0..nb {
            for c in 0..nc {
                let p = joint.probs[(a * nb + b) * nc + c];
                if p > 0.0 {
                    total += p * (p.log2() + pc[c].log2() - pac[a * nc + c].log2() - pbc[b * nc + c].log2());
                }
            }
        }
    }
    Ok(total.max(0.0))
}

/// A time-homogeneous Markov chain on a finite alphabet.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkovSource {
    alphabet: Alphabet,
    initial: Distribution,
    transition: StochasticKernel,
}

impl MarkovSource {
    pub fn new(
        alphabet: Alphabet,
        initial: Distribution,
        transition: StochasticKernel,
    ) -> Result<Self> {
        let n = alphabet.size();
        if initial.len() != n {
            return Err(Error::LengthMismatch {
                expected: n,
                found: initial.len(),
            });
        }
        if transition.num_inputs() != n || transition.num_outputs() != n {
            return Err(Error::InvalidArgument(format!(
                "transition must be {n}x{n}, got {}x{}",
                transition.num_inputs(),
                transition.num_outputs()
            )));
        }
        Ok(Self {
            alphabet,
            initial,
            transition,
        })
    }

    /// Binary chain with `P(1|0) = p` and `P(0|1) = q`, started in steady state.
    pub fn binary(p: f64, q: f64) -> Result<Self> {
        for v in [p, q] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::ProbabilityOutOfRange(v));
            }
        }
        if p + q <= 0.0 {
            return Err(Error::NotErgodic("p + q = 0".into()));
        }
        let transition = StochasticKernel::new(vec![vec![1.0 - p, p], vec![q, 1.0 - q]])?;
        let initial = Distribution::new(vec![q / (p + q), p / (p + q)])?;
        Self::new(Alphabet::new(2)?, initial, transition)
    }

    /// Replaces the initial distribution.
    pub fn with_initial(mut self, initial: Distribution) -> Result<Self> {
        if initial.len() != self.alphabet.size() {
            return Err(Error::LengthMismatch {
                expected: self.alphabet.size(),
                found: initial.len(),
            });
        }
        self.initial = initial;
        Ok(self)
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    pub fn size(&self) -> usize {
        self.alphabet.size()
    }

    pub fn initial(&self) -> &Distribution {
        &self.initial
    }

    pub fn transition(&self) -> &StochasticKernel {
        &self.transition
    }

    /// Probability of the first symbol, or of `next` given `prev`.
    pub fn step_prob(&self, prev: Option<usize>, next: usize) -> f64 {
        match prev {
            None => self.initial[next],
            Some(p) => self.transition.get(p, next),
        }
    }

    /// Irreducible and aperiodic, i.e. some power of the transition matrix is
    /// entrywise positive (Wielandt bound `(n-1)^2 + 1`).
    pub fn is_ergodic(&self) -> bool {
        let n = self.size();
        let support: Vec<bool> = self.transition.as_slice().iter().map(|&p| p > 0.0).collect();
        let mut power = support.clone();
        let bound = (n - 1) * (n - 1) + 1;
        for _ in 0..bound {
            if power.iter().all(|&b| b) {
                return true;
            }
            let mut next = vec![false; n * n];
            for i in 0..n {
                for k in 0..n {
                    if power[i * n + k] {
                        for j in 0..n {
                            next[i * n + j] |= support[k * n + j];
                        }
                    }
                }
            }
            power = next;
        }
        power.iter().all(|&b| b)
    }

    pub fn check_ergodic(&self) -> Result<()> {
        if self.is_ergodic() {
            Ok(())
        } else {
            Err(Error::NotErgodic(
                "transition matrix is reducible or periodic".into(),
            ))
        }
    }
}

/// Stationary distribution `π` with `π T = π` of an ergodic source.
pub fn stationary_distribution(source: &MarkovSource) -> Result<Distribution> {
    source.check_ergodic()?;
    let n = source.size();
    let t = source.transition();
    // (Tᵀ − I) π = 0 with the last equation replaced by Σπ = 1.
    let mut a = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            a[(i, j)] = t.get(j, i) - if i == j { 1.0 } else { 0.0 };
        }
    }
    for j in 0..n {
        a[(n - 1, j)] = 1.0;
    }
    let mut b = DVector::<f64>::zeros(n);
    b[n - 1] = 1.0;
    let solved = a
        .lu()
        .solve(&b)
        .ok_or_else(|| Error::NotErgodic("singular stationary system".into()))?;
    let mut pi: Vec<f64> = solved.iter().map(|&v| v.max(0.0)).collect();
    // A few power steps polish the residual down to rounding level.
    for _ in 0..4 {
        let mut next = vec![0.0; n];
        for i in 0..n {
            for j in 0..n {
                next[j] += pi[i] * t.get(i, j);
            }
        }
        let s: f64 = next.iter().sum();
        pi = next.into_iter().map(|v| v / s).collect();
    }
    Distribution::new(pi)
}

/// Steady-state joint of `(X_i, X_{i-1})`, axis 0 is the current symbol.
pub fn steady_pair_joint(source: &MarkovSource) -> Result<JointTable> {
    let pi = stationary_distribution(source)?;
    let n = source.size();
    let mut probs = vec![0.0; n * n];
    for cur in 0..n {
        for prev in 0..n {
            probs[cur * n + prev] = pi[prev] * source.transition().get(prev, cur);
        }
    }
    JointTable::new(vec![n, n], probs)
}

/// Steady-state probabilities of source windows `(x_i, x_{i-1}, …, x_{i-m})`.
///
/// The index puts the most recent symbol in the most significant position, so
/// for binary windows of length two the order is `00, 01, 10, 11` read as
/// `(x_i, x_{i-1})`.
pub fn steady_window_probs(source: &MarkovSource, memory: usize) -> Result<Vec<f64>> {
    let pi = stationary_distribution(source)?;
    let n = source.size();
    let len = memory + 1;
    let count = n.pow(len as u32);
    let mut out = vec![0.0; count];
    let mut symbols = vec![0usize; len];
    for (idx, slot) in out.iter_mut().enumerate() {
        crate::history::decode_window(idx, n, &mut symbols);
        // symbols[0] = x_i, symbols[m] = x_{i-m}
        let mut p = pi[symbols[memory]];
        for k in (0..memory).rev() {
            p *= source.transition().get(symbols[k + 1], symbols[k]);
        }
        *slot = p;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn information_survives_subnormal_marginals() {
        let tiny = 5e-324;
        let joint = JointTable::new(vec![2, 2], vec![0.5, tiny, 0.0, 0.5]).unwrap();
        let mi = mutual_information(&joint).unwrap();
        assert!((mi - 1.0).abs() < 1e-12, "{mi}");
        let three = JointTable::new(vec![2, 2, 1], vec![0.5, tiny, 0.0, 0.5]).unwrap();
        assert!((conditional_mutual_information(&three).unwrap() - 1.0).abs() < 1e-12);
    }
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn binary_entropy_values() {
        assert_eq!(binary_entropy(0.5).unwrap(), 1.0);
        assert_eq!(binary_entropy(0.0).unwrap(), 0.0);
        assert_eq!(binary_entropy(1.0).unwrap(), 0.0);
        assert_abs_diff_eq!(binary_entropy(0.2).unwrap(), 0.721928094887362, epsilon = 1e-12);
        assert!(matches!(
            binary_entropy(1.5),
            Err(Error::ProbabilityOutOfRange(_))
        ));
        assert!(binary_entropy(-0.1).is_err());
    }

    #[test]
    fn kl_examples() {
        let p = Distribution::new(vec![0.3, 0.7]).unwrap();
        assert_eq!(kl_divergence(&p, &p).unwrap(), 0.0);
        let a = Distribution::new(vec![1.0, 0.0]).unwrap();
        let u = Distribution::uniform(2).unwrap();
        assert_abs_diff_eq!(kl_divergence(&a, &u).unwrap(), 1.0, epsilon = 1e-15);
        assert_eq!(kl_divergence(&u, &a).unwrap(), f64::INFINITY);
        let three = Distribution::uniform(3).unwrap();
        assert!(matches!(
            kl_divergence(&u, &three),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn mutual_information_examples() {
        let x = Distribution::new(vec![0.3, 0.7]).unwrap();
        let y = Distribution::new(vec![0.6, 0.4]).unwrap();
        let prod = JointTable::product(&x, &y);
        assert_abs_diff_eq!(mutual_information(&prod).unwrap(), 0.0, epsilon = 1e-15);

        let ident = JointTable::from_matrix(&[vec![0.5, 0.0], vec![0.0, 0.5]]).unwrap();
        assert_abs_diff_eq!(mutual_information(&ident).unwrap(), 1.0, epsilon = 1e-15);

        let j = JointTable::from_matrix(&[vec![0.4, 0.1], vec![0.1, 0.4]]).unwrap();
        assert_abs_diff_eq!(mutual_information(&j).unwrap(), 0.278071905112638, epsilon = 1e-12);
    }

    #[test]
    fn distribution_tolerances() {
        assert!(Distribution::new(vec![0.5, 0.5 + 1e-13]).is_ok());
        let renorm = Distribution::new(vec![0.5, 0.5 + 1e-10]).unwrap();
        assert_abs_diff_eq!(renorm.probs().iter().sum::<f64>(), 1.0, epsilon = 1e-15);
        assert!(matches!(
            Distribution::new(vec![0.5, 0.6]),
            Err(Error::NotNormalized { .. })
        ));
        assert!(matches!(
            Distribution::new(vec![-0.1, 1.1]),
            Err(Error::NegativeProbability { index: 0, .. })
        ));
        assert!(Distribution::new(vec![f64::NAN, 1.0]).is_err());
    }

    #[test]
    fn stationary_examples() {
        let sym = MarkovSource::binary(0.5, 0.5).unwrap();
        let pi = stationary_distribution(&sym).unwrap();
        assert_abs_diff_eq!(pi[0], 0.5, epsilon = 1e-15);

        let fig = MarkovSource::binary(0.55, 0.45).unwrap();
        let pi = stationary_distribution(&fig).unwrap();
        assert_abs_diff_eq!(pi[0], 0.45, epsilon = 1e-14);
        assert_abs_diff_eq!(pi[1], 0.55, epsilon = 1e-14);

        let ident = MarkovSource::new(
            Alphabet::new(2).unwrap(),
            Distribution::uniform(2).unwrap(),
            StochasticKernel::identity(2),
        )
        .unwrap();
        assert!(matches!(
            stationary_distribution(&ident),
            Err(Error::NotErgodic(_))
        ));

        let periodic = MarkovSource::binary(1.0, 1.0).unwrap();
        assert!(!periodic.is_ergodic());
    }

    #[test]
    fn steady_pair_matches_closed_forms() {
        let (p, q) = (0.55, 0.45);
        let src = MarkovSource::binary(p, q).unwrap();
        let j = steady_pair_joint(&src).unwrap();
        // index = cur * 2 + prev
        assert_abs_diff_eq!(j.probs()[0], 0.2025, epsilon = 1e-14);
        assert_abs_diff_eq!(j.probs()[1], 0.2475, epsilon = 1e-14);
        assert_abs_diff_eq!(j.probs()[2], 0.2475, epsilon = 1e-14);
        assert_abs_diff_eq!(j.probs()[3], 0.3025, epsilon = 1e-14);
        assert_abs_diff_eq!(j.probs()[0], (1.0 - p) * q / (p + q), epsilon = 1e-14);
        assert_abs_diff_eq!(j.probs()[3], p * (1.0 - q) / (p + q), epsilon = 1e-14);

        let uni = steady_pair_joint(&MarkovSource::binary(0.5, 0.5).unwrap()).unwrap();
        for &v in uni.probs() {
            assert_abs_diff_eq!(v, 0.25, epsilon = 1e-15);
        }
    }

    #[test]
    fn window_probs_agree_with_pair_joint() {
        let src = MarkovSource::binary(0.3, 0.6).unwrap();
        let pair = steady_pair_joint(&src).unwrap();
        let win = steady_window_probs(&src, 1).unwrap();
        for (a, b) in pair.probs().iter().zip(&win) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-15);
        }
        let w2 = steady_window_probs(&src, 2).unwrap();
        assert_abs_diff_eq!(w2.iter().sum::<f64>(), 1.0, epsilon = 1e-14);
    }

    #[test]
    fn marginal_and_cmi() {
        // A ⟂ B | C when the table factorizes as P(c) P(a|c) P(b|c).
        let pc = [0.3, 0.7];
        let pa = [[0.2, 0.8], [0.6, 0.4]];
        let pb = [[0.5, 0.5], [0.9, 0.1]];
        let mut probs = vec![0.0; 8];
        for a in 0..2 {
            for b in 0..2 {
                for c in 0..2 {
                    probs[(a * 2 + b) * 2 + c] = pc[c] * pa[c][a] * pb[c][b];
                }
            }
        }
        let t = JointTable::new(vec![2, 2, 2], probs).unwrap();
        assert!(conditional_mutual_information(&t).unwrap() < 1e-15);
        let m = t.marginal(&[2]);
        assert_abs_diff_eq!(m.probs()[0], 0.3, epsilon = 1e-15);
        assert!(mutual_information(&t).is_err());
    }

    fn arb_dist(n: usize) -> impl Strategy<Value = Distribution> {
        prop::collection::vec(0.01f64..1.0, n).prop_map(|w| Distribution::from_weights(&w).unwrap())
    }

    fn arb_joint() -> impl Strategy<Value = JointTable> {
        (1usize..5, 1usize..5).prop_flat_map(|(nx, ny)| {
            prop::collection::vec(0.0f64..1.0, nx * ny).prop_filter_map("zero mass", move |w| {
                let s: f64 = w.iter().sum();
                (s > 0.0).then(|| {
                    JointTable::new(vec![nx, ny], w.iter().map(|v| v / s).collect()).unwrap()
                })
            })
        })
    }

    proptest! {
        #[test]
        fn kl_is_nonnegative((p, q) in (2usize..6).prop_flat_map(|n| (arb_dist(n), arb_dist(n)))) {
            prop_assert!(kl_divergence(&p, &q).unwrap() >= 0.0);
        }

        #[test]
        fn mi_matches_entropy_identity(j in arb_joint()) {
            let hx = j.marginal(&[0]).entropy();
            let hy = j.marginal(&[1]).entropy();
            let mi = mutual_information(&j).unwrap();
            prop_assert!((mi - (hx + hy - j.entropy())).abs() < 1e-10);
        }

        #[test]
        fn stationary_residual_is_tiny(rows in prop::collection::vec(arb_dist(3), 3)) {
            let t = StochasticKernel::new(rows.into_iter().map(Distribution::into_vec).collect()).unwrap();
            let src = MarkovSource::new(Alphabet::new(3).unwrap(), Distribution::uniform(3).unwrap(), t).unwrap();
            let pi = stationary_distribution(&src).unwrap();
            for j in 0..3 {
                let v: f64 = (0..3).map(|i| pi[i] * src.transition().get(i, j)).sum();
                prop_assert!((v - pi[j]).abs() < 1e-12);
            }
            prop_assert!((pi.probs().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }

        #[test]
        fn kernels_are_row_stochastic(rows in prop::collection::vec(arb_dist(4), 1..6)) {
            let k = StochasticKernel::new(rows.into_iter().map(Distribution::into_vec).collect()).unwrap();
            prop_assert!(k.max_row_error() < 1e-12);
            prop_assert!(k.as_slice().iter().all(|&p| p >= 0.0));
        }
    }
}
