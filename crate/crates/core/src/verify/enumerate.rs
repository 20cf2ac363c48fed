//! Exact joint distributions of both samplers by exhaustive enumeration.
//!
//! Acceptance events are integrated analytically with probability
//! `min(1, q/p)` instead of being enumerated over uniform draws, so every
//! branch probability is a finite product. Speculative runs emit a variable
//! number of tokens per loop; joints are compared at a fixed horizon `L`
//! and tokens past `L` from the final loop are summed out.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::decoding::{apply_method, DecodingMethod};
use crate::dist::{kahan_sum, KahanSum, Token};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::models::LanguageModel;
use crate::speculative::{accept_probability, resample_distribution};

pub const MAX_VOCAB: usize = 8;
pub const MAX_HORIZON: usize = 5;
pub const MAX_LOOKAHEAD: usize = 4;

/// Exact probability of every reachable completion.
pub type Joint = BTreeMap<Vec<Token>, f64>;

/// One terminal outcome of a single speculative loop.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Branch {
    /// Draft tokens that were examined: the accepted prefix plus, on
    /// rejection, the rejected token. Later drafts are summed out.
    pub drafted: Vec<Token>,
    pub accepted: usize,
    pub resampled: bool,
    /// The resampled or bonus token.
    pub final_token: Token,
    pub probability: f64,
}

impl Branch {
    pub fn emitted(&self) -> Vec<Token> {
        let mut out = self.drafted[..self.accepted].to_vec();
        out.push(self.final_token);
        out
    }
}

/// All outcomes of one loop from a fixed context.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OutcomeTree {
    pub lookahead: usize,
    pub branches: Vec<Branch>,
}

impl OutcomeTree {
    pub fn total_probability(&self) -> f64 {
        kahan_sum(self.branches.iter().map(|b| b.probability))
    }

    /// Probability of emitting exactly `n` tokens, for `n` in `1..=K+1`.
    pub fn emitted_count_distribution(&self) -> Vec<f64> {
        let mut acc = vec![KahanSum::new(); self.lookahead + 2];
        for b in &self.branches {
            acc[b.accepted + 1].add(b.probability);
        }
        acc.iter().skip(1).map(KahanSum::value).collect()
    }
}

fn guard(vocab: usize, horizon: usize, lookahead: usize) -> Result<()> {
    if vocab > MAX_VOCAB || horizon > MAX_HORIZON || lookahead > MAX_LOOKAHEAD {
        return Err(Error::InstanceTooLarge(format!(
            "V={vocab}, L={horizon}, K={lookahead} (limits V<={MAX_VOCAB}, L<={MAX_HORIZON}, K<={MAX_LOOKAHEAD})"
        )));
    }
    if horizon == 0 {
        return Err(Error::BadParam("horizon L must be >= 1".into()));
    }
    Ok(())
}

/// Joint of `L` autoregressive tokens: the product of decoded conditionals.
pub fn enumerate_ars_joint<M>(target: &M, context: &[Token], horizon: usize, method: &DecodingMethod) -> Result<Joint>
where
    M: LanguageModel + ?Sized,
{
    guard(target.vocab().size(), horizon, 0)?;
    let mut joint = Joint::new();
    let mut ctx = context.to_vec();
    ars_walk(target, &mut ctx, context.len(), context.len() + horizon, 1.0, method, &mut joint)?;
    Ok(joint)
}

fn ars_walk<M: LanguageModel + ?Sized>(
    model: &M,
    ctx: &mut Vec<Token>,
    start: usize,
    end: usize,
    prob: f64,
    method: &DecodingMethod,
    joint: &mut Joint,
) -> Result<()> {
    if ctx.len() == end {
        *joint.entry(ctx[start..].to_vec()).or_insert(0.0) += prob;
        return Ok(());
    }
    let dist = apply_method(&model.next_distribution(ctx)?, method)?;
    for token in dist.support().collect::<Vec<_>>() {
        ctx.push(token);
        ars_walk(model, ctx, start, end, prob * dist.prob(token), method, joint)?;
        ctx.pop();
    }
    Ok(())
}

/// Every outcome of one speculative loop from `context`.
pub fn enumerate_loop<T, D>(
    target: &T,
    draft: &D,
    context: &[Token],
    lookahead: usize,
    method: &DecodingMethod,
) -> Result<OutcomeTree>
where
    T: LanguageModel + ?Sized,
    D: LanguageModel + ?Sized,
{
    if lookahead == 0 {
        return Err(Error::BadParam("lookahead K must be >= 1".into()));
    }
    guard(target.vocab().size(), 1, lookahead)?;
    let mut branches = Vec::new();
    let mut ctx = context.to_vec();
    loop_walk(target, draft, &mut ctx, context.len(), lookahead, 1.0, method, &mut branches)?;
    Ok(OutcomeTree { lookahead, branches })
}

#[allow(clippy::too_many_arguments)]
fn loop_walk<T, D>(
    target: &T,
    draft: &D,
    ctx: &mut Vec<Token>,
    base: usize,
    lookahead: usize,
    prob: f64,
    method: &DecodingMethod,
    out: &mut Vec<Branch>,
) -> Result<()>
where
    T: LanguageModel + ?Sized,
    D: LanguageModel + ?Sized,
{
    let position = ctx.len() - base;
    let q = apply_method(&target.next_distribution(ctx)?, method)?;
    if position == lookahead {
        for token in q.support() {
            out.push(Branch {
                drafted: ctx[base..].to_vec(),
                accepted: lookahead,
                resampled: false,
                final_token: token,
                probability: prob * q.prob(token),
            });
        }
        return Ok(());
    }
    let p = apply_method(&draft.next_distribution(ctx)?, method)?;
    let residual = resample_distribution(&q, &p)?;
    for token in p.support().collect::<Vec<_>>() {
        let p_val = p.prob(token);
        let accept = accept_probability(q.prob(token), p_val)?;
        if accept > 0.0 {
            ctx.push(token);
            loop_walk(target, draft, ctx, base, lookahead, prob * p_val * accept, method, out)?;
            ctx.pop();
        }
        if accept < 1.0 {
            let reject = prob * p_val * (1.0 - accept);
            let mut drafted = ctx[base..].to_vec();
            drafted.push(token);
            for y in residual.support() {
                out.push(Branch {
                    drafted: drafted.clone(),
                    accepted: position,
                    resampled: true,
                    final_token: y,
                    probability: reject * residual.prob(y),
                });
            }
        }
    }
    Ok(())
}

/// Bookkeeping gathered while enumerating a speculative joint.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnumerationStats {
    /// Loop trees expanded (one per reachable partial completion per round).
    pub trees: usize,
    pub branches: usize,
    /// Largest `|Σ branch probability − 1|` over all expanded trees.
    pub max_tree_mass_error: f64,
    pub min_emitted: usize,
    pub max_emitted: usize,
}

/// Exact joint of the first `L` tokens produced by speculative sampling.
pub fn enumerate_sps_joint<T, D>(
    target: &T,
    draft: &D,
    context: &[Token],
    lookahead: usize,
    horizon: usize,
    method: &DecodingMethod,
) -> Result<Joint>
where
    T: LanguageModel + ?Sized,
    D: LanguageModel + ?Sized,
{
    enumerate_sps_joint_with_stats(target, draft, context, lookahead, horizon, method, Exec::Sequential).map(|(j, _)| j)
}

/// As [`enumerate_sps_joint`], also reporting tree statistics. Partial
/// completions of one round are expanded under `exec`; contributions are
/// merged in a fixed order so the result does not depend on it.
pub fn enumerate_sps_joint_with_stats<T, D>(
    target: &T,
    draft: &D,
    context: &[Token],
    lookahead: usize,
    horizon: usize,
    method: &DecodingMethod,
    exec: Exec,
) -> Result<(Joint, EnumerationStats)>
where
    T: LanguageModel + ?Sized,
    D: LanguageModel + ?Sized,
{
    if target.vocab() != draft.vocab() {
        return Err(Error::LengthMismatch { left: target.vocab().size(), right: draft.vocab().size() });
    }
    if lookahead == 0 {
        return Err(Error::BadParam("lookahead K must be >= 1".into()));
    }
    guard(target.vocab().size(), horizon, lookahead)?;

    let mut stats = EnumerationStats {
        trees: 0,
        branches: 0,
        max_tree_mass_error: 0.0,
        min_emitted: usize::MAX,
        max_emitted: 0,
    };
    let mut finished: BTreeMap<Vec<Token>, KahanSum> = BTreeMap::new();
    let mut frontier: Vec<(Vec<Token>, f64)> = vec![(Vec::new(), 1.0)];

    while !frontier.is_empty() {
        let expanded = exec.map_slice(&frontier, |(completion, _)| {
            let mut ctx = context.to_vec();
            ctx.extend_from_slice(completion);
            enumerate_loop(target, draft, &ctx, lookahead, method)
        });
        let mut next: BTreeMap<Vec<Token>, KahanSum> = BTreeMap::new();
        for ((completion, mass), tree) in frontier.iter().zip(expanded) {
            let tree = tree?;
            stats.trees += 1;
            stats.branches += tree.branches.len();
            stats.max_tree_mass_error = stats.max_tree_mass_error.max((tree.total_probability() - 1.0).abs());
            for branch in &tree.branches {
                let emitted = branch.emitted();
                stats.min_emitted = stats.min_emitted.min(emitted.len());
                stats.max_emitted = stats.max_emitted.max(emitted.len());
                let mut grown = completion.clone();
                grown.extend_from_slice(&emitted);
                let p = mass * branch.probability;
                if grown.len() >= horizon {
                    grown.truncate(horizon);
                    finished.entry(grown).or_default().add(p);
                } else {
                    next.entry(grown).or_default().add(p);
                }
            }
        }
        frontier = next.into_iter().map(|(k, v)| (k, v.value())).collect();
    }

    let joint = finished.into_iter().map(|(k, v)| (k, v.value())).filter(|&(_, p)| p > 0.0).collect();
    Ok((joint, stats))
}

/// Total variation between two joints over the union of their supports.
pub fn joint_tv(a: &Joint, b: &Joint) -> f64 {
    let mut acc = KahanSum::new();
    for (k, &pa) in a {
        acc.add((pa - b.get(k).copied().unwrap_or(0.0)).abs());
    }
    for (k, &pb) in b {
        if !a.contains_key(k) {
            acc.add(pb.abs());
        }
    }
    0.5 * acc.value()
}

/// Marginal of the first token of a joint.
pub fn first_token_marginal(joint: &Joint, vocab: usize) -> Vec<f64> {
    let mut acc = vec![KahanSum::new(); vocab];
    for (k, &p) in joint {
        acc[k[0] as usize].add(p);
    }
    acc.iter().map(KahanSum::value).collect()
}
