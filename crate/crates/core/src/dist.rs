//! Vocabularies and probability vectors over token ids.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::UniformSource;

/// Token id in `0..V`.
pub type Token = u32;

/// Slack allowed on the total mass of user-supplied distributions.
pub const INPUT_TOLERANCE: f64 = 1e-9;

/// Slack allowed on the total mass of distributions produced by [`normalize`].
pub const NORMALIZED_TOLERANCE: f64 = 1e-12;

/// Number of token ids, `V >= 2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "usize", into = "usize")]
pub struct Vocab(usize);

impl Vocab {
    pub fn new(size: usize) -> Result<Self> {
        if size < 2 {
            return Err(Error::VocabTooSmall(size));
        }
        Ok(Vocab(size))
    }

    pub fn size(self) -> usize {
        self.0
    }

    pub fn contains(self, token: Token) -> bool {
        (token as usize) < self.0
    }

    pub fn check(self, token: Token) -> Result<()> {
        if self.contains(token) {
            Ok(())
        } else {
            Err(Error::TokenOutOfRange { token, vocab: self.0 })
        }
    }

    pub fn check_all(self, tokens: &[Token]) -> Result<()> {
        tokens.iter().try_for_each(|&t| self.check(t))
    }
}

impl TryFrom<usize> for Vocab {
    type Error = Error;

    fn try_from(size: usize) -> Result<Self> {
        Vocab::new(size)
    }
}

impl From<Vocab> for usize {
    fn from(v: Vocab) -> usize {
        v.0
    }
}

/// A probability vector indexed by token id.
///
/// Entries are non-negative and sum to one. Serialises as a bare JSON array.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Distribution(Vec<f64>);

impl Distribution {
    /// Validates a user-supplied probability vector (mass within
    /// [`INPUT_TOLERANCE`] of one, at least two entries).
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        Self::validated(probs, INPUT_TOLERANCE)
    }

    fn validated(probs: Vec<f64>, tol: f64) -> Result<Self> {
        if probs.len() < 2 {
            return Err(Error::VocabTooSmall(probs.len()));
        }
        check_weights(&probs)?;
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > tol {
            return Err(Error::InvalidDistribution(format!(
                "entries sum to {total}, not 1"
            )));
        }
        Ok(Distribution(probs))
    }

    /// Uniform distribution over `vocab`.
    pub fn uniform(vocab: Vocab) -> Self {
        let v = vocab.size();
        Distribution(vec![1.0 / v as f64; v])
    }

    /// All mass on `token`.
    pub fn one_hot(vocab: Vocab, token: Token) -> Result<Self> {
        vocab.check(token)?;
        let mut probs = vec![0.0; vocab.size()];
        probs[token as usize] = 1.0;
        Ok(Distribution(probs))
    }

    /// Wraps a vector the caller has already normalised.
    pub(crate) fn from_normalized(probs: Vec<f64>) -> Self {
        debug_assert!(
            (probs.iter().sum::<f64>() - 1.0).abs() <= 1e-9,
            "unnormalised vector {probs:?}"
        );
        Distribution(probs)
    }

    pub fn probs(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn vocab(&self) -> Vocab {
        Vocab(self.0.len())
    }

    pub fn prob(&self, token: Token) -> f64 {
        self.0.get(token as usize).copied().unwrap_or(0.0)
    }

    /// Token ids with non-zero probability, ascending.
    pub fn support(&self) -> impl Iterator<Item = Token> + '_ {
        self.0
            .iter()
            .enumerate()
            .filter(|(_, &p)| p > 0.0)
            .map(|(i, _)| i as Token)
    }

    /// Lowest token id attaining the maximum probability.
    pub fn argmax(&self) -> Token {
        let mut best = 0;
        for (i, &p) in self.0.iter().enumerate() {
            if p > self.0[best] {
                best = i;
            }
        }
        best as Token
    }
}

impl TryFrom<Vec<f64>> for Distribution {
    type Error = Error;

    fn try_from(probs: Vec<f64>) -> Result<Self> {
        Distribution::new(probs)
    }
}

impl From<Distribution> for Vec<f64> {
    fn from(d: Distribution) -> Vec<f64> {
        d.0
    }
}

impl AsRef<[f64]> for Distribution {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

fn check_weights(weights: &[f64]) -> Result<()> {
    for (index, &value) in weights.iter().enumerate() {
        if !(value >= 0.0) || !value.is_finite() {
            return Err(Error::NegativeWeight { index, value });
        }
    }
    Ok(())
}

/// Scales non-negative weights to sum to one.
pub fn normalize(weights: &[f64]) -> Result<Distribution> {
    check_weights(weights)?;
    let total = kahan_sum(weights.iter().copied());
    if total <= 0.0 {
        return Err(Error::AllZero);
    }
    let probs: Vec<f64> = weights.iter().map(|w| w / total).collect();
    Distribution::validated(probs, NORMALIZED_TOLERANCE)
}

/// Inverse-CDF lookup: the smallest token whose cumulative mass exceeds `u`.
///
/// Never returns a zero-probability token, even when rounding leaves the
/// final cumulative sum a hair below `u`.
pub fn inverse_cdf(dist: &Distribution, u: f64) -> Token {
    let mut cumulative = 0.0;
    let mut last_positive = 0;
    for (i, &p) in dist.probs().iter().enumerate() {
        if p > 0.0 {
            cumulative += p;
            last_positive = i;
            if cumulative > u {
                return i as Token;
            }
        }
    }
    last_positive as Token
}

/// Draws one token, consuming exactly one uniform variate.
pub fn sample_categorical<U: UniformSource + ?Sized>(dist: &Distribution, rng: &mut U) -> Token {
    inverse_cdf(dist, rng.next_uniform())
}

/// Half the L1 distance between two distributions.
pub fn total_variation(a: &Distribution, b: &Distribution) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch { left: a.len(), right: b.len() });
    }
    let l1 = kahan_sum(a.probs().iter().zip(b.probs()).map(|(x, y)| (x - y).abs()));
    Ok((0.5 * l1).min(1.0))
}

/// Compensated (Kahan–Babuška) running sum.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct KahanSum {
    sum: f64,
    compensation: f64,
}

impl KahanSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.compensation += (self.sum - t) + x;
        } else {
            self.compensation += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}

pub fn kahan_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut acc = KahanSum::new();
    values.into_iter().for_each(|v| acc.add(v));
    acc.value()
}
