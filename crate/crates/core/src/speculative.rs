//! Draft-then-verify speculative sampling.
//!
//! One loop drafts `K` tokens from the draft model, scores all `K + 1`
//! prefixes with a single target call, then walks the draft left to right:
//! token `x̃ₜ` is kept with probability `min(1, qₜ(x̃ₜ) / pₜ(x̃ₜ))`. The first
//! rejection is replaced by a sample from the residual `(qₜ − pₜ)₊` and ends
//! the loop; if every draft survives, one bonus token is drawn from the last
//! target distribution. The decoding method is applied to both `q` and `p`
//! before any of this, so the output follows the *decoded* target exactly.
//!
//! Uniform variates are consumed in a fixed order per loop: `K` draft draws,
//! then one acceptance variate per tested position, then exactly one draw
//! for the resample or bonus token.

use serde::{Deserialize, Serialize};

use crate::decoding::{apply_method, DecodingMethod};
use crate::dist::{inverse_cdf, kahan_sum, normalize, sample_categorical, Distribution, Token};
use crate::error::{Error, Result};
use crate::models::LanguageModel;
use crate::rng::UniformSource;
use crate::sequence::Sequence;

/// Residual mass below which resampling falls back to `q`.
pub const RESIDUAL_EPSILON: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpsConfig {
    /// Draft tokens per loop, `K >= 1`.
    pub lookahead: usize,
    /// Sampling stops once the sequence holds at least this many tokens.
    pub target_len: usize,
    pub method: DecodingMethod,
}

impl SpsConfig {
    pub fn new(lookahead: usize, target_len: usize, method: DecodingMethod) -> Self {
        SpsConfig { lookahead, target_len, method }
    }

    pub fn validate(&self) -> Result<()> {
        if self.lookahead == 0 {
            return Err(Error::BadParam("lookahead K must be >= 1".into()));
        }
        self.method.validate()
    }
}

/// What happened in one speculative loop.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoopTrace {
    pub drafted: usize,
    pub accepted: usize,
    pub resampled: bool,
    pub bonus: bool,
    pub emitted: usize,
}

impl LoopTrace {
    fn rejected_at(drafted: usize, accepted: usize) -> Self {
        LoopTrace { drafted, accepted, resampled: true, bonus: false, emitted: accepted + 1 }
    }

    fn all_accepted(drafted: usize) -> Self {
        LoopTrace { drafted, accepted: drafted, resampled: false, bonus: true, emitted: drafted + 1 }
    }

    /// Checks `emitted = accepted + 1`, exactly one of resample/bonus, and
    /// that a bonus only follows full acceptance.
    pub fn is_consistent(&self) -> bool {
        self.emitted == self.accepted + 1
            && self.resampled != self.bonus
            && self.accepted <= self.drafted
            && (self.bonus == (self.accepted == self.drafted))
            && (1..=self.drafted + 1).contains(&self.emitted)
    }
}

/// `min(1, q / p)` for a drafted token.
pub fn accept_probability(q_val: f64, p_val: f64) -> Result<f64> {
    if !(p_val > 0.0) {
        return Err(Error::DraftZeroProb { token: u32::MAX, prob: p_val });
    }
    if !(q_val >= 0.0) {
        return Err(Error::BadParam(format!("target probability {q_val} is negative")));
    }
    Ok((q_val / p_val).min(1.0))
}

/// The renormalised positive part of `q − p`.
pub fn residual_distribution(q: &Distribution, p: &Distribution) -> Result<Distribution> {
    if q.len() != p.len() {
        return Err(Error::LengthMismatch { left: q.len(), right: p.len() });
    }
    let positive: Vec<f64> = q.probs().iter().zip(p.probs()).map(|(a, b)| (a - b).max(0.0)).collect();
    let mass = kahan_sum(positive.iter().copied());
    if mass < RESIDUAL_EPSILON {
        return Err(Error::ZeroResidual(mass));
    }
    normalize(&positive)
}

/// Distribution used after a rejection: the residual, or `q` itself when the
/// residual mass vanishes (rejection then has probability ≈ 0 anyway).
pub fn resample_distribution(q: &Distribution, p: &Distribution) -> Result<Distribution> {
    match residual_distribution(q, p) {
        Err(Error::ZeroResidual(_)) => Ok(q.clone()),
        other => other,
    }
}

fn check_pair<T, D>(target: &T, draft: &D) -> Result<()>
where
    T: LanguageModel + ?Sized,
    D: LanguageModel + ?Sized,
{
    let (t, d) = (target.vocab().size(), draft.vocab().size());
    if t != d {
        return Err(Error::LengthMismatch { left: t, right: d });
    }
    Ok(())
}

/// One draft / score / accept loop. Returns the `accepted + 1` emitted tokens.
pub fn speculative_step<T, D, U>(
    target: &T,
    draft: &D,
    context: &[Token],
    config: &SpsConfig,
    rng: &mut U,
) -> Result<(Vec<Token>, LoopTrace)>
where
    T: LanguageModel + ?Sized,
    D: LanguageModel + ?Sized,
    U: UniformSource + ?Sized,
{
    config.validate()?;
    check_pair(target, draft)?;
    let k = config.lookahead;
    let method = &config.method;

    let mut extended = Vec::with_capacity(context.len() + k);
    extended.extend_from_slice(context);
    let mut drafted = Vec::with_capacity(k);
    let mut draft_dists = Vec::with_capacity(k);
    for _ in 0..k {
        let p = apply_method(&draft.next_distribution(&extended)?, method)?;
        let token = sample_categorical(&p, rng);
        extended.push(token);
        drafted.push(token);
        draft_dists.push(p);
    }

    let target_dists = target
        .score_parallel(context, &drafted)?
        .iter()
        .map(|q| apply_method(q, method))
        .collect::<Result<Vec<_>>>()?;

    let mut emitted = Vec::with_capacity(k + 1);
    for (t, (&token, p)) in drafted.iter().zip(&draft_dists).enumerate() {
        let q = &target_dists[t];
        let p_val = p.prob(token);
        let accept = accept_probability(q.prob(token), p_val)
            .map_err(|_| Error::DraftZeroProb { token, prob: p_val })?;
        if rng.next_uniform() < accept {
            emitted.push(token);
        } else {
            let residual = resample_distribution(q, p)?;
            emitted.push(sample_categorical(&residual, rng));
            return Ok((emitted, LoopTrace::rejected_at(k, t)));
        }
    }
    emitted.push(sample_categorical(&target_dists[k], rng));
    Ok((emitted, LoopTrace::all_accepted(k)))
}

/// Runs loops until the sequence reaches `config.target_len` tokens. The
/// final loop may overshoot by up to `K` tokens.
pub fn speculative_sample<T, D, U>(
    target: &T,
    draft: &D,
    prompt: &Sequence,
    config: &SpsConfig,
    rng: &mut U,
) -> Result<(Sequence, Vec<LoopTrace>)>
where
    T: LanguageModel + ?Sized,
    D: LanguageModel + ?Sized,
    U: UniformSource + ?Sized,
{
    config.validate()?;
    check_pair(target, draft)?;
    if config.target_len <= prompt.len() {
        return Err(Error::BadParam(format!(
            "target length {} must exceed prompt length {}",
            config.target_len,
            prompt.len()
        )));
    }
    target.vocab().check_all(prompt.tokens())?;
    let mut seq = prompt.clone();
    let mut traces = Vec::new();
    while seq.len() < config.target_len {
        let (tokens, trace) = speculative_step(target, draft, seq.tokens(), config, rng)?;
        seq.extend_from_slice(&tokens);
        traces.push(trace);
    }
    Ok((seq, traces))
}

/// Draws the token that follows a rejection given the variate `u`; exposed
/// so replay tools can reconstruct a loop from recorded uniforms.
pub fn resample_with_uniform(q: &Distribution, p: &Distribution, u: f64) -> Result<Token> {
    Ok(inverse_cdf(&resample_distribution(q, p)?, u))
}

#[derive(Serialize)]
struct TraceLine {
    #[serde(rename = "loop")]
    index: usize,
    accepted: usize,
    resampled: bool,
    bonus: bool,
}

/// One JSON object per loop: `{"loop":i,"accepted":a,"resampled":b,"bonus":b}`.
pub fn traces_to_jsonl(traces: &[LoopTrace]) -> String {
    let mut out = String::new();
    for (index, t) in traces.iter().enumerate() {
        let line = TraceLine { index, accepted: t.accepted, resampled: t.resampled, bonus: t.bonus };
        out.push_str(&serde_json::to_string(&line).expect("trace serialises"));
        out.push('\n');
    }
    out
}
