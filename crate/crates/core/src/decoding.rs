//! Decoding transforms and the plain autoregressive sampler.
//!
//! Transforms act on probabilities rather than logits. Temperature raises
//! every probability to `1/τ` and renormalises, which is the same as dividing
//! logits by `τ`. When a method combines temperature with a truncation
//! (`temp:0.8+nucleus:0.95`), temperature is always applied first.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dist::{normalize, sample_categorical, Distribution, Token};
use crate::error::{Error, Result};
use crate::models::LanguageModel;
use crate::rng::UniformSource;
use crate::sequence::Sequence;

/// Slack on the nucleus mass comparison, so a prefix whose mass equals `p`
/// up to rounding counts as reaching it.
const NUCLEUS_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum Truncation {
    #[default]
    None,
    /// One-hot at the most probable token (lowest id on ties).
    Greedy,
    /// Keep the `k` most probable tokens.
    TopK(usize),
    /// Keep the smallest most-probable prefix whose mass reaches `p`.
    Nucleus(f64),
}

/// A probability transform applied to both target and draft outputs before
/// sampling or acceptance tests.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct DecodingMethod {
    pub temperature: Option<f64>,
    pub truncation: Truncation,
}

impl DecodingMethod {
    pub const PLAIN: DecodingMethod = DecodingMethod { temperature: None, truncation: Truncation::None };
    pub const GREEDY: DecodingMethod = DecodingMethod { temperature: None, truncation: Truncation::Greedy };

    pub fn temperature(tau: f64) -> Self {
        DecodingMethod { temperature: Some(tau), truncation: Truncation::None }
    }

    pub fn top_k(k: usize) -> Self {
        DecodingMethod { temperature: None, truncation: Truncation::TopK(k) }
    }

    pub fn nucleus(p: f64) -> Self {
        DecodingMethod { temperature: None, truncation: Truncation::Nucleus(p) }
    }

    pub fn with_temperature(mut self, tau: f64) -> Self {
        self.temperature = Some(tau);
        self
    }

    pub fn is_greedy(&self) -> bool {
        self.truncation == Truncation::Greedy
    }

    /// Checks parameter ranges that do not depend on the vocabulary.
    pub fn validate(&self) -> Result<()> {
        if let Some(tau) = self.temperature {
            if !(tau > 0.0 && tau.is_finite()) {
                return Err(Error::BadParam(format!("temperature must be > 0, got {tau}")));
            }
        }
        match self.truncation {
            Truncation::TopK(0) => Err(Error::BadParam("top-k needs k >= 1".into())),
            Truncation::Nucleus(p) if !(p > 0.0 && p <= 1.0) => {
                Err(Error::BadParam(format!("nucleus p must be in (0, 1], got {p}")))
            }
            _ => Ok(()),
        }
    }
}

impl fmt::Display for DecodingMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let trunc = match self.truncation {
            Truncation::None => None,
            Truncation::Greedy => Some("greedy".to_string()),
            Truncation::TopK(k) => Some(format!("topk:{k}")),
            Truncation::Nucleus(p) => Some(format!("nucleus:{p}")),
        };
        match (self.temperature, trunc) {
            (None, None) => write!(f, "plain"),
            (Some(t), None) => write!(f, "temp:{t}"),
            (None, Some(s)) => write!(f, "{s}"),
            (Some(t), Some(s)) => write!(f, "temp:{t}+{s}"),
        }
    }
}

impl FromStr for DecodingMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut method = DecodingMethod::PLAIN;
        let mut seen_truncation = false;
        for part in s.split('+').map(str::trim) {
            let (name, arg) = match part.split_once(':') {
                Some((n, a)) => (n.trim(), Some(a.trim())),
                None => (part, None),
            };
            let num = |what: &str| -> Result<f64> {
                arg.ok_or_else(|| Error::Parse(format!("{what} needs a value in {s:?}")))?
                    .parse::<f64>()
                    .map_err(|e| Error::Parse(format!("{part:?}: {e}")))
            };
            let truncation = match name {
                "plain" if arg.is_none() => None,
                "greedy" if arg.is_none() => Some(Truncation::Greedy),
                "temp" | "temperature" => {
                    if method.temperature.is_some() {
                        return Err(Error::Parse(format!("temperature given twice in {s:?}")));
                    }
                    method.temperature = Some(num("temp")?);
                    None
                }
                "topk" => {
                    let k = arg
                        .ok_or_else(|| Error::Parse(format!("topk needs a value in {s:?}")))?
                        .parse::<usize>()
                        .map_err(|e| Error::Parse(format!("{part:?}: {e}")))?;
                    Some(Truncation::TopK(k))
                }
                "nucleus" | "top_p" => Some(Truncation::Nucleus(num("nucleus")?)),
                _ => return Err(Error::Parse(format!("unknown decoding method {part:?}"))),
            };
            if let Some(t) = truncation {
                if seen_truncation {
                    return Err(Error::Parse(format!("more than one truncation in {s:?}")));
                }
                seen_truncation = true;
                method.truncation = t;
            }
        }
        method.validate()?;
        Ok(method)
    }
}

impl TryFrom<String> for DecodingMethod {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<DecodingMethod> for String {
    fn from(m: DecodingMethod) -> String {
        m.to_string()
    }
}

/// Token ids with positive probability, most probable first, ties by id.
fn ranked_support(dist: &Distribution) -> Vec<usize> {
    let probs = dist.probs();
    let mut idx: Vec<usize> = (0..probs.len()).filter(|&i| probs[i] > 0.0).collect();
    idx.sort_by(|&a, &b| probs[b].partial_cmp(&probs[a]).unwrap_or(Ordering::Equal).then(a.cmp(&b)));
    idx
}

fn keep_only(dist: &Distribution, keep: &[usize]) -> Result<Distribution> {
    let support = dist.support().count();
    if keep.len() >= support {
        return Ok(dist.clone());
    }
    let mut weights = vec![0.0; dist.len()];
    for &i in keep {
        weights[i] = dist.probs()[i];
    }
    normalize(&weights)
}

fn apply_temperature(dist: &Distribution, tau: f64) -> Result<Distribution> {
    if tau == 1.0 {
        return Ok(dist.clone());
    }
    // Work relative to the largest entry in log space so that tiny τ does
    // not underflow every entry to zero.
    let max = dist.probs()[dist.argmax() as usize];
    let log_max = max.ln();
    let weights: Vec<f64> = dist
        .probs()
        .iter()
        .map(|&p| if p > 0.0 { ((p.ln() - log_max) / tau).exp() } else { 0.0 })
        .collect();
    normalize(&weights)
}

/// Applies `method` to `dist`. The result's support is a subset of the
/// input's.
pub fn apply_method(dist: &Distribution, method: &DecodingMethod) -> Result<Distribution> {
    method.validate()?;
    let tempered = match method.temperature {
        Some(tau) => apply_temperature(dist, tau)?,
        None => dist.clone(),
    };
    match method.truncation {
        Truncation::None => Ok(tempered),
        Truncation::Greedy => Distribution::one_hot(tempered.vocab(), tempered.argmax()),
        Truncation::TopK(k) => {
            if k > dist.len() {
                return Err(Error::BadParam(format!("top-k {k} exceeds vocabulary size {}", dist.len())));
            }
            let ranked = ranked_support(&tempered);
            keep_only(&tempered, &ranked[..k.min(ranked.len())])
        }
        Truncation::Nucleus(p) => {
            let ranked = ranked_support(&tempered);
            let mut mass = 0.0;
            let mut cut = ranked.len();
            for (n, &i) in ranked.iter().enumerate() {
                mass += tempered.probs()[i];
                if mass >= p - NUCLEUS_SLACK {
                    cut = n + 1;
                    break;
                }
            }
            keep_only(&tempered, &ranked[..cut])
        }
    }
}

/// Samples one token from the decoded next-token distribution.
pub fn autoregressive_step<M, U>(model: &M, context: &[Token], method: &DecodingMethod, rng: &mut U) -> Result<Token>
where
    M: LanguageModel + ?Sized,
    U: UniformSource + ?Sized,
{
    let decoded = apply_method(&model.next_distribution(context)?, method)?;
    Ok(sample_categorical(&decoded, rng))
}

/// Extends `prompt` one token at a time until it holds `target_len` tokens.
///
/// Consumes exactly `target_len − prompt.len()` variates.
pub fn autoregressive_sample<M, U>(
    model: &M,
    prompt: &Sequence,
    target_len: usize,
    method: &DecodingMethod,
    rng: &mut U,
) -> Result<Sequence>
where
    M: LanguageModel + ?Sized,
    U: UniformSource + ?Sized,
{
    if target_len <= prompt.len() {
        return Err(Error::BadParam(format!(
            "target length {target_len} must exceed prompt length {}",
            prompt.len()
        )));
    }
    model.vocab().check_all(prompt.tokens())?;
    let mut seq = prompt.clone();
    while seq.len() < target_len {
        let token = autoregressive_step(model, seq.tokens(), method, rng)?;
        seq.push(token);
    }
    Ok(seq)
}
