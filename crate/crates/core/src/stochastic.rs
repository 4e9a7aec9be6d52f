//! Seeded random primitives and stick-breaking constructions.
//!
//! Gamma variates are drawn in log space so that Dirichlet and Beta draws
//! with very small parameters (routine when a parent node puts almost no
//! mass on a component) stay normalisable instead of collapsing to `0/0`.
//! Zero parameters are point masses: `Beta(a, 0) = 1`, `Beta(0, b) = 0`, and a
//! Dirichlet coordinate with parameter zero is exactly zero.

use alloc::vec::Vec;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};

use crate::math::{exp, ln, sqrt};
use crate::{Error, Result};

/// Tolerance used for simplex checks throughout the crate.
pub const SIMPLEX_TOLERANCE: f64 = 1e-12;

/// Splittable, seeded generator. One chain owns one `Rng`.
///
/// Streams are ChaCha8 stream ids, so `Rng::with_stream(seed, i)` is fully
/// determined by `(seed, i)` and independent of how many draws any other
/// stream has made.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Rng {
    seed: u64,
    stream: u64,
    inner: ChaCha8Rng,
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        Self::with_stream(seed, 0)
    }

    pub fn with_stream(seed: u64, stream: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream);
        Rng { seed, stream, inner }
    }

    /// Independent generator for `stream`, derived from this one's seed.
    pub fn split(&self, stream: u64) -> Self {
        Self::with_stream(self.seed, stream)
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    /// Uniform in `[0, 1)` with 53 bits of precision.
    pub fn uniform(&mut self) -> f64 {
        (self.inner.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in `(0, 1]`.
    pub fn uniform_open_low(&mut self) -> f64 {
        1.0 - self.uniform()
    }

    pub fn standard_normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.inner)
    }

    /// Uniform index in `0..n`. `n` must be positive.
    pub fn index(&mut self, n: usize) -> usize {
        debug_assert!(n > 0);
        ((self.uniform() * n as f64) as usize).min(n - 1)
    }

    /// Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.index(i + 1);
            items.swap(i, j);
        }
    }
}

impl RngCore for Rng {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}

/// Mixing proportions over the `K` global components plus the remainder
/// `β*` reserved for components not yet instantiated.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct StickWeights {
    weights: Vec<f64>,
    remainder: f64,
}

impl StickWeights {
    /// No components: all mass in the remainder.
    pub fn empty() -> Self {
        StickWeights { weights: Vec::new(), remainder: 1.0 }
    }

    pub fn new(weights: Vec<f64>, remainder: f64) -> Result<Self> {
        let sw = StickWeights { weights, remainder };
        sw.validate()?;
        Ok(sw)
    }

    pub(crate) fn from_parts(weights: Vec<f64>, remainder: f64) -> Self {
        StickWeights { weights, remainder }
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn remainder(&self) -> f64 {
        self.remainder
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn weight(&self, k: usize) -> f64 {
        self.weights[k]
    }

    /// `Σ weights + remainder`.
    pub fn total(&self) -> f64 {
        self.weights.iter().sum::<f64>() + self.remainder
    }

    pub fn validate(&self) -> Result<()> {
        for &w in self.weights.iter().chain(core::iter::once(&self.remainder)) {
            if !(w >= 0.0 && w.is_finite()) {
                return Err(Error::InvalidParameter { name: "stick weight", value: w });
            }
        }
        let total = self.total();
        if (total - 1.0).abs() > SIMPLEX_TOLERANCE {
            return Err(Error::InvalidParameter { name: "stick total", value: total });
        }
        Ok(())
    }

    /// Break fraction `u` off the remainder and append it as a new weight.
    pub fn break_remainder(&mut self, u: f64) -> f64 {
        let piece = self.remainder * u;
        self.remainder -= piece;
        if self.remainder < 0.0 {
            self.remainder = 0.0;
        }
        self.weights.push(piece);
        piece
    }

    /// Remove component `k`, folding its mass into the remainder.
    pub fn fold_into_remainder(&mut self, k: usize) {
        let w = self.weights.remove(k);
        self.remainder += w;
    }
}

/// `ln G` for `G ~ Gamma(shape, 1)`, `shape > 0`.
///
/// For `shape < 1` this uses `G = G' U^(1/shape)` with `G' ~ Gamma(shape + 1)`,
/// which keeps the log finite even when `G` itself underflows.
pub fn ln_gamma_variate(shape: f64, rng: &mut Rng) -> f64 {
    debug_assert!(shape > 0.0);
    if shape >= 1.0 {
        let g: f64 = Gamma::new(shape, 1.0).expect("shape > 0").sample(rng);
        ln(g)
    } else {
        let g: f64 = Gamma::new(shape + 1.0, 1.0).expect("shape > 0").sample(rng);
        ln(g) + ln(rng.uniform_open_low()) / shape
    }
}

/// Draw from `Dir(params)`. Zero parameters give exactly zero coordinates.
pub fn sample_dirichlet(params: &[f64], rng: &mut Rng) -> Result<Vec<f64>> {
    for &p in params {
        if !(p >= 0.0 && p.is_finite()) {
            return Err(Error::InvalidParameter { name: "dirichlet parameter", value: p });
        }
    }
    if !params.iter().any(|&p| p > 0.0) {
        return Err(Error::Degenerate("dirichlet with all-zero parameters"));
    }
    let logs: Vec<f64> = params
        .iter()
        .map(|&p| if p > 0.0 { ln_gamma_variate(p, rng) } else { f64::NEG_INFINITY })
        .collect();
    Ok(normalize_logs(&logs))
}

fn normalize_logs(logs: &[f64]) -> Vec<f64> {
    let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = logs.iter().map(|&l| exp(l - max)).collect();
    let total: f64 = out.iter().sum();
    for v in &mut out {
        *v /= total;
    }
    out
}

/// Draw from `Beta(a, b)` with the point-mass conventions for zero arguments.
pub fn sample_beta(a: f64, b: f64, rng: &mut Rng) -> Result<f64> {
    if !(a >= 0.0 && a.is_finite()) {
        return Err(Error::InvalidParameter { name: "beta a", value: a });
    }
    if !(b >= 0.0 && b.is_finite()) {
        return Err(Error::InvalidParameter { name: "beta b", value: b });
    }
    match (a > 0.0, b > 0.0) {
        (false, false) => Err(Error::Degenerate("beta with a = b = 0")),
        (true, false) => Ok(1.0),
        (false, true) => Ok(0.0),
        (true, true) => {
            let la = ln_gamma_variate(a, rng);
            let lb = ln_gamma_variate(b, rng);
            Ok(1.0 / (1.0 + exp(lb - la)))
        }
    }
}

/// GEM(`gamma0`) stick breaking, stopped as soon as the remainder reaches
/// `epsilon`.
pub fn gem_stick_breaking(gamma0: f64, epsilon: f64, rng: &mut Rng) -> Result<StickWeights> {
    if !(gamma0 > 0.0 && gamma0.is_finite()) {
        return Err(Error::InvalidParameter { name: "gamma0", value: gamma0 });
    }
    gem_from_fractions(epsilon, || sample_beta(1.0, gamma0, rng))
}

/// Stick breaking with caller-supplied break fractions.
pub fn gem_from_fractions(
    epsilon: f64,
    mut next_fraction: impl FnMut() -> Result<f64>,
) -> Result<StickWeights> {
    if !(epsilon > 0.0 && epsilon <= 1.0) {
        return Err(Error::InvalidParameter { name: "epsilon", value: epsilon });
    }
    let mut sticks = StickWeights::empty();
    // Stops once the remainder is no longer above epsilon, so epsilon = 1
    // yields the empty stick.
    while sticks.remainder > epsilon {
        let u = next_fraction()?;
        sticks.break_remainder(u);
    }
    Ok(sticks)
}

/// Child weights `β' ~ DP(gamma, parent)` by the finite stick construction
/// `u_k ~ Beta(γβ_k, γ(1 - Σ_{l≤k} β_l))`.
pub fn dp_child_weights(parent: &StickWeights, gamma: f64, rng: &mut Rng) -> Result<StickWeights> {
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::InvalidParameter { name: "gamma", value: gamma });
    }
    let k = parent.len();
    // tails[i] = parent mass strictly after component i (including remainder),
    // accumulated from the end so small tails are not lost to cancellation.
    let mut tails = alloc::vec![0.0; k];
    let mut acc = parent.remainder;
    for i in (0..k).rev() {
        tails[i] = acc;
        acc += parent.weights[i];
    }
    let mut child = StickWeights { weights: Vec::with_capacity(k), remainder: 1.0 };
    for (&w, &tail) in parent.weights.iter().zip(&tails) {
        let a = gamma * w;
        let b = gamma * tail;
        // Both zero only after the child stick is already exhausted.
        let u = if a == 0.0 && b == 0.0 { 0.0 } else { sample_beta(a, b, rng)? };
        child.break_remainder(u);
    }
    Ok(child)
}

/// Independent Gaussian draws per coordinate.
pub fn sample_gaussian_diag(mean: &[f64], variances: &[f64], rng: &mut Rng) -> Result<Vec<f64>> {
    if mean.len() != variances.len() {
        return Err(Error::DimensionMismatch { expected: mean.len(), got: variances.len() });
    }
    mean.iter()
        .zip(variances)
        .map(|(&m, &v)| {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter { name: "variance", value: v });
            }
            Ok(m + sqrt(v) * rng.standard_normal())
        })
        .collect()
}

/// Index `i` with probability `weights[i] / Σ weights`.
pub fn sample_categorical(weights: &[f64], rng: &mut Rng) -> Result<usize> {
    let mut total = 0.0;
    let mut last_positive = None;
    for (i, &w) in weights.iter().enumerate() {
        if !(w >= 0.0 && w.is_finite()) {
            return Err(Error::InvalidParameter { name: "categorical weight", value: w });
        }
        if w > 0.0 {
            last_positive = Some(i);
        }
        total += w;
    }
    let last = last_positive.ok_or(Error::Degenerate("categorical with zero total weight"))?;
    let target = rng.uniform() * total;
    let mut cum = 0.0;
    for (i, &w) in weights.iter().enumerate() {
        cum += w;
        if w > 0.0 && target < cum {
            return Ok(i);
        }
    }
    Ok(last)
}

/// Categorical draw from unnormalised log weights.
pub fn sample_log_categorical(log_weights: &[f64], rng: &mut Rng) -> Result<usize> {
    let max = log_weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY || max.is_nan() {
        return Err(Error::Degenerate("categorical with zero total weight"));
    }
    let weights: Vec<f64> = log_weights.iter().map(|&l| exp(l - max)).collect();
    sample_categorical(&weights, rng)
}
