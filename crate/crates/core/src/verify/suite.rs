//! Seeded random instances and the suites run by the `verify` command.

use serde::Serialize;

use super::enumerate::{enumerate_ars_joint, enumerate_sps_joint_with_stats, first_token_marginal, joint_tv};
use super::gof::{chi_square_gof, GofResult};
use super::{rejection_identity, IDENTITY_TOLERANCE, JOINT_TV_TOLERANCE};
use crate::decoding::DecodingMethod;
use crate::dist::{normalize, Distribution, Token, Vocab};
use crate::error::Result;
use crate::exec::Exec;
use crate::models::{LanguageModel, TabularModel};
use crate::rng::{RandomSource, UniformSource};
use crate::speculative::{speculative_step, SpsConfig};

const SUITE_VOCABS: [usize; 4] = [2, 3, 4, 6];
const SUITE_LOOKAHEADS: [usize; 3] = [1, 2, 3];
const SUITE_HORIZONS: [usize; 4] = [1, 2, 3, 4];

/// Methods the losslessness suite cycles through.
pub const SUITE_METHODS: [&str; 4] = ["plain", "greedy", "nucleus:0.8", "temp:0.8+nucleus:0.95"];

/// Random probability vector of length `v`; each entry is zero with
/// probability `sparsity`, and at least one entry is positive.
pub fn random_distribution<U: UniformSource + ?Sized>(rng: &mut U, v: usize, sparsity: f64) -> Distribution {
    loop {
        let w: Vec<f64> = (0..v)
            .map(|_| {
                let zero = rng.next_uniform() < sparsity;
                let x = rng.next_uniform();
                if zero { 0.0 } else { x * x }
            })
            .collect();
        if let Ok(d) = normalize(&w) {
            return d;
        }
    }
}

fn all_contexts(v: usize, len: usize) -> Vec<Vec<Token>> {
    let mut out = vec![Vec::new()];
    for _ in 0..len {
        out = out
            .into_iter()
            .flat_map(|c| {
                (0..v as Token).map(move |t| {
                    let mut c = c.clone();
                    c.push(t);
                    c
                })
            })
            .collect();
    }
    out
}

/// A random target table over every context of length `max_context`, and a
/// draft whose rows are random mixtures of the target row and noise, so
/// agreement ranges from none to complete.
pub fn random_tabular_pair<U: UniformSource + ?Sized>(
    rng: &mut U,
    v: usize,
    max_context: usize,
) -> (TabularModel, TabularModel) {
    let vocab = Vocab::new(v).expect("vocab >= 2");
    let draft_row = |rng: &mut U, q: &Distribution| {
        let lam = rng.next_uniform();
        let noise = random_distribution(rng, v, 0.25);
        let w: Vec<f64> = q.probs().iter().zip(noise.probs()).map(|(a, b)| lam * a + (1.0 - lam) * b).collect();
        normalize(&w).expect("mixture has mass")
    };
    let q0 = random_distribution(rng, v, 0.25);
    let p0 = draft_row(rng, &q0);
    let mut target = TabularModel::new(vocab, max_context, q0).expect("valid");
    let mut draft = TabularModel::new(vocab, max_context, p0).expect("valid");
    for ctx in all_contexts(v, max_context) {
        let q = random_distribution(rng, v, 0.25);
        let p = draft_row(rng, &q);
        target.insert(ctx.clone(), q).expect("valid");
        draft.insert(ctx, p).expect("valid");
    }
    (target, draft)
}

/// One losslessness test case.
#[derive(Debug, Clone)]
pub struct Instance {
    pub index: usize,
    pub lookahead: usize,
    pub horizon: usize,
    pub method: DecodingMethod,
    pub context: Vec<Token>,
    pub target: TabularModel,
    pub draft: TabularModel,
}

/// Builds instance `index` of the suite seeded by `seed`. Parameters cycle
/// with co-prime strides so every vocabulary size, lookahead, horizon and
/// method appears.
pub fn build_instance(seed: u64, index: usize) -> Instance {
    let mut rng = RandomSource::with_stream(seed, index as u64);
    let v = SUITE_VOCABS[index % 4];
    let lookahead = SUITE_LOOKAHEADS[index % 3];
    let horizon = SUITE_HORIZONS[(index / 4) % 4];
    let method: DecodingMethod = SUITE_METHODS[(index / 16) % 4].parse().expect("suite method parses");
    let max_context = if v <= 4 { 1 + index % 2 } else { 1 };
    let (target, draft) = random_tabular_pair(&mut rng, v, max_context);
    let context = (0..max_context).map(|_| (rng.next_uniform() * v as f64) as Token).collect();
    Instance { index, lookahead, horizon, method, context, target, draft }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InstanceResult {
    pub index: usize,
    pub vocab: usize,
    pub lookahead: usize,
    pub horizon: usize,
    pub method: String,
    pub tv: f64,
    pub sps_completions: usize,
    pub ars_completions: usize,
    pub max_tree_mass_error: f64,
    pub min_emitted: usize,
    pub max_emitted: usize,
    pub pass: bool,
}

pub fn run_instance(inst: &Instance) -> Result<InstanceResult> {
    let (sps, stats) = enumerate_sps_joint_with_stats(
        &inst.target,
        &inst.draft,
        &inst.context,
        inst.lookahead,
        inst.horizon,
        &inst.method,
        Exec::Sequential,
    )?;
    let ars = enumerate_ars_joint(&inst.target, &inst.context, inst.horizon, &inst.method)?;
    let tv = joint_tv(&sps, &ars);
    let pass = tv < JOINT_TV_TOLERANCE
        && stats.max_tree_mass_error < IDENTITY_TOLERANCE
        && stats.min_emitted >= 1
        && stats.max_emitted <= inst.lookahead + 1;
    Ok(InstanceResult {
        index: inst.index,
        vocab: inst.target.vocab().size(),
        lookahead: inst.lookahead,
        horizon: inst.horizon,
        method: inst.method.to_string(),
        tv,
        sps_completions: sps.len(),
        ars_completions: ars.len(),
        max_tree_mass_error: stats.max_tree_mass_error,
        min_emitted: stats.min_emitted,
        max_emitted: stats.max_emitted,
        pass,
    })
}

/// Runs `count` instances; instances are independent and spread under `exec`.
pub fn losslessness_suite(seed: u64, count: usize, exec: Exec) -> Result<Vec<InstanceResult>> {
    exec.map_range(count, |i| run_instance(&build_instance(seed, i))).into_iter().collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IdentitySummary {
    pub pairs: usize,
    pub max_pointwise_deviation: f64,
    pub max_rejection_mass_gap: f64,
    pub pass: bool,
}

/// Identity check over `pairs` random `(q, p)` with `2 <= V <= max_vocab`.
pub fn identity_suite(seed: u64, pairs: usize, max_vocab: usize, exec: Exec) -> Result<IdentitySummary> {
    let checks = exec.map_range(pairs, |i| {
        let mut rng = RandomSource::with_stream(seed, i as u64);
        let v = 2 + (rng.next_uniform() * (max_vocab - 1) as f64) as usize;
        let q = random_distribution(&mut rng, v, 0.3);
        let p = random_distribution(&mut rng, v, 0.3);
        rejection_identity(&q, &p)
    });
    let mut summary = IdentitySummary { pairs, max_pointwise_deviation: 0.0, max_rejection_mass_gap: 0.0, pass: true };
    for c in checks {
        let c = c?;
        summary.max_pointwise_deviation = summary.max_pointwise_deviation.max(c.pointwise_deviation);
        summary.max_rejection_mass_gap = summary.max_rejection_mass_gap.max(c.rejection_mass_gap);
    }
    summary.pass = summary.max_pointwise_deviation < IDENTITY_TOLERANCE && summary.max_rejection_mass_gap < IDENTITY_TOLERANCE;
    Ok(summary)
}

/// Runs `samples` independent speculative loops from `context` and tests the
/// first emitted token against the exact decoded target marginal.
pub fn sps_first_token_gof<T, D>(
    target: &T,
    draft: &D,
    context: &[Token],
    lookahead: usize,
    method: &DecodingMethod,
    samples: usize,
    seed: u64,
) -> Result<GofResult>
where
    T: LanguageModel + ?Sized,
    D: LanguageModel + ?Sized,
{
    let v = target.vocab().size();
    let exact = enumerate_ars_joint(target, context, 1, method)?;
    let expected = Distribution::new(first_token_marginal(&exact, v))?;
    let config = SpsConfig::new(lookahead, usize::MAX, *method);
    let mut rng = RandomSource::new(seed);
    let mut counts = vec![0u64; v];
    for _ in 0..samples {
        let (tokens, _) = speculative_step(target, draft, context, &config, &mut rng)?;
        counts[tokens[0] as usize] += 1;
    }
    chi_square_gof(&counts, &expected)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VerifyOptions {
    pub seed: u64,
    pub instances: usize,
    pub identity_pairs: usize,
    pub identity_max_vocab: usize,
    pub gof_samples: usize,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions { seed: 0, instances: 100, identity_pairs: 10_000, identity_max_vocab: 64, gof_samples: 100_000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub options: VerifyOptions,
    pub max_tv: f64,
    pub instances: Vec<InstanceResult>,
    pub identity: IdentitySummary,
    pub chi_square: GofResult,
    pub pass: bool,
}

/// Everything the `verify` command runs, in one report.
pub fn run_verify(options: VerifyOptions, exec: Exec) -> Result<VerifyReport> {
    let instances = losslessness_suite(options.seed, options.instances, exec)?;
    let identity = identity_suite(options.seed, options.identity_pairs, options.identity_max_vocab, exec)?;
    let mut rng = RandomSource::with_stream(options.seed, u64::MAX);
    let (target, draft) = random_tabular_pair(&mut rng, 4, 1);
    let chi_square = sps_first_token_gof(&target, &draft, &[1], 3, &DecodingMethod::PLAIN, options.gof_samples, options.seed)?;
    let max_tv = instances.iter().map(|r| r.tv).fold(0.0, f64::max);
    let pass = instances.iter().all(|r| r.pass) && identity.pass && chi_square.pass;
    Ok(VerifyReport { options, max_tv, instances, identity, chi_square, pass })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn instances_are_reproducible() {
        let a = build_instance(5, 7);
        let b = build_instance(5, 7);
        assert_eq!(a.target, b.target);
        assert_eq!(a.draft, b.draft);
        assert_eq!(a.context, b.context);
    }

    #[test]
    fn suite_covers_every_parameter() {
        let insts: Vec<_> = (0..100).map(|i| build_instance(1, i)).collect();
        for v in SUITE_VOCABS {
            assert!(insts.iter().any(|x| x.target.vocab().size() == v));
        }
        for k in SUITE_LOOKAHEADS {
            assert!(insts.iter().any(|x| x.lookahead == k));
        }
        for l in SUITE_HORIZONS {
            assert!(insts.iter().any(|x| x.horizon == l));
        }
        for m in SUITE_METHODS {
            assert!(insts.iter().any(|x| x.method.to_string() == m));
        }
    }

    #[test]
    fn small_suite_passes() {
        let results = losslessness_suite(99, 24, Exec::default()).unwrap();
        for r in &results {
            assert!(r.pass, "{r:?}");
        }
    }
}
