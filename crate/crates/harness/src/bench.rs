//! Autoregressive vs speculative runs over prompts from a held-out corpus tail.

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use specsamp::decoding::autoregressive_step;
use specsamp::models::train_ngram;
use specsamp::perf::{speedup, AcceptanceStats, Simulation, SpeedupEstimate};
use specsamp::{speculative_step, Exec, LanguageModel, LoopTrace, NGramModel, RandomSource, SpsConfig, Token, UniformSource};

use crate::config::{BenchConfig, ModelSpec};
use crate::emulate::BandwidthBound;
use crate::error::{io_err, Error, Result};
use crate::tokenize::{byte_tokenize, byte_vocab, BOS};

/// Loops at the start of each sequence left out of wall-clock totals.
pub const WARMUP_LOOPS: usize = 5;
/// Sequences simulated for the modeled time spread.
pub const MODEL_SIMULATIONS: usize = 10_000;
const PROMPT_STREAM: u64 = u64::MAX;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodReport {
    /// `ars` or `sps`.
    pub method: String,
    /// Lookahead; 0 for autoregressive sampling.
    pub k: usize,
    pub loops: u64,
    pub tokens: u64,
    pub mean_tokens_per_loop: f64,
    pub std_tokens_per_loop: f64,
    /// Accepted drafts over tested drafts.
    pub acceptance_rate: Option<f64>,
    /// Entry `t` is the acceptance rate of draft `t + 1` among loops that
    /// tested it; `None` if no loop got that far.
    pub acceptance_rate_per_position: Vec<Option<f64>>,
    pub modeled_ms_per_token: f64,
    pub modeled_speedup: f64,
    /// Mean per-token log-likelihood of the completion under the target.
    pub mean_log_likelihood: f64,
    pub log_likelihood_se: f64,
    /// Tokens per second after warm-up; machine-dependent.
    pub wallclock_tokens_per_sec: Option<f64>,
}

/// Two-sample comparison of mean per-token log-likelihood.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParityTest {
    pub difference: f64,
    pub standard_error: f64,
    /// `|difference| <= 2 · standard_error`.
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub config: BenchConfig,
    pub ars: MethodReport,
    pub sps: MethodReport,
    pub parity: ParityTest,
    pub modeled: SpeedupEstimate,
}

impl Report {
    pub fn rows(&self) -> [&MethodReport; 2] {
        [&self.ars, &self.sps]
    }

    /// Copy with the machine-dependent fields cleared.
    pub fn without_wallclock(&self) -> Report {
        let mut r = self.clone();
        r.ars.wallclock_tokens_per_sec = None;
        r.sps.wallclock_tokens_per_sec = None;
        r
    }
}

#[derive(Default)]
struct Timing {
    tokens: u64,
    elapsed: Duration,
}

impl Timing {
    fn record(&mut self, loop_index: usize, tokens: usize, elapsed: Duration) {
        if loop_index >= WARMUP_LOOPS {
            self.tokens += tokens as u64;
            self.elapsed += elapsed;
        }
    }
}

struct SequenceRun {
    ars_log_likelihood: f64,
    sps_log_likelihood: f64,
    traces: Vec<LoopTrace>,
    ars_timing: Timing,
    sps_timing: Timing,
}

/// Loads and tokenizes the corpus; the first 90% trains, the rest supplies
/// prompts.
pub fn load_corpus(config: &BenchConfig) -> Result<(Vec<Token>, Vec<Token>)> {
    let bytes = std::fs::read(&config.corpus).map_err(io_err(&config.corpus))?;
    let tokens = byte_tokenize(&bytes).tokens().to_vec();
    let split = tokens.len() * 9 / 10;
    let mut tail = tokens;
    let train: Vec<Token> = tail.drain(..split).collect();
    Ok((train, tail))
}

pub fn train(corpus: &[Token], spec: ModelSpec) -> Result<NGramModel> {
    if corpus.len() < spec.order {
        return Err(Error::CorpusTooShort { what: "training split", len: corpus.len(), needed: spec.order });
    }
    Ok(train_ngram(corpus, byte_vocab(), spec.order, spec.alpha, Some(BOS))?)
}

fn prompts(config: &BenchConfig, tail: &[Token]) -> Result<Vec<Vec<Token>>> {
    if tail.len() < config.prompt_len.max(1) {
        return Err(Error::CorpusTooShort { what: "held-out tail", len: tail.len(), needed: config.prompt_len.max(1) });
    }
    let mut rng = RandomSource::with_stream(config.seed, PROMPT_STREAM);
    let starts = tail.len() - config.prompt_len + 1;
    Ok((0..config.num_sequences)
        .map(|_| {
            let at = ((rng.next_uniform() * starts as f64) as usize).min(starts - 1);
            tail[at..at + config.prompt_len].to_vec()
        })
        .collect())
}

fn log_likelihood(target: &NGramModel, prompt: &[Token], completion: &[Token]) -> Result<f64> {
    let dists = target.score_parallel(prompt, completion)?;
    let total: f64 = completion.iter().zip(&dists).map(|(&t, q)| q.prob(t).ln()).sum();
    Ok(total / completion.len() as f64)
}

struct Models<'a> {
    target: &'a NGramModel,
    timed_target: BandwidthBound<&'a NGramModel>,
    timed_draft: BandwidthBound<&'a NGramModel>,
}

fn run_sequence(config: &BenchConfig, models: &Models<'_>, index: usize, prompt: &[Token]) -> Result<SequenceRun> {
    let end = prompt.len() + config.completion_len;
    let method = &config.method;

    let mut rng = RandomSource::with_stream(config.seed, 2 * index as u64);
    let mut ars = prompt.to_vec();
    let mut ars_timing = Timing::default();
    let mut step = 0;
    while ars.len() < end {
        let start = Instant::now();
        let token = autoregressive_step(&models.timed_target, &ars, method, &mut rng)?;
        ars_timing.record(step, 1, start.elapsed());
        ars.push(token);
        step += 1;
    }

    let mut rng = RandomSource::with_stream(config.seed, 2 * index as u64 + 1);
    let sps_config = SpsConfig::new(config.k, end, *method);
    let mut sps = prompt.to_vec();
    let mut sps_timing = Timing::default();
    let mut traces = Vec::new();
    while sps.len() < end {
        let start = Instant::now();
        let (tokens, trace) = speculative_step(&models.timed_target, &models.timed_draft, &sps, &sps_config, &mut rng)?;
        sps_timing.record(traces.len(), tokens.len(), start.elapsed());
        sps.extend_from_slice(&tokens);
        traces.push(trace);
    }
    sps.truncate(end);

    Ok(SequenceRun {
        ars_log_likelihood: log_likelihood(models.target, prompt, &ars[prompt.len()..])?,
        sps_log_likelihood: log_likelihood(models.target, prompt, &sps[prompt.len()..])?,
        traces,
        ars_timing,
        sps_timing,
    })
}

fn mean_std(xs: impl ExactSizeIterator<Item = f64> + Clone) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.clone().sum::<f64>() / n;
    let var = if n > 1.0 { xs.map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
    (mean, var.sqrt())
}

fn tokens_per_sec(timings: impl Iterator<Item = (u64, Duration)>) -> Option<f64> {
    let (tokens, elapsed) = timings.fold((0, Duration::ZERO), |(t, e), (dt, de)| (t + dt, e + de));
    (tokens > 0 && !elapsed.is_zero()).then(|| tokens as f64 / elapsed.as_secs_f64())
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

/// Trains both models, runs every prompt through both samplers and
/// aggregates the result.
pub fn run_benchmark(config: &BenchConfig) -> Result<Report> {
    config.validate()?;
    let (train_tokens, tail) = load_corpus(config)?;
    let target = train(&train_tokens, config.target)?;
    let draft = if config.draft == config.target { target.clone() } else { train(&train_tokens, config.draft)? };
    let prompts = prompts(config, &tail)?;
    let models = Models {
        target: &target,
        timed_target: BandwidthBound::new(&target, config.weight_bytes.target),
        timed_draft: BandwidthBound::new(&draft, config.weight_bytes.draft),
    };
    let exec = if config.wallclock { Exec::Sequential } else { Exec::default() };
    let runs = exec
        .map_slice(&prompts.iter().enumerate().collect::<Vec<_>>(), |&(i, prompt)| run_sequence(config, &models, i, prompt))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    aggregate(config, &runs, exec)
}

fn aggregate(config: &BenchConfig, runs: &[SequenceRun], exec: Exec) -> Result<Report> {
    let k = config.k;
    let traces: Vec<LoopTrace> = runs.iter().flat_map(|r| r.traces.iter().copied()).collect();

    let mut tested = vec![0u64; k];
    let mut accepted = vec![0u64; k];
    for t in &traces {
        for pos in 0..t.accepted {
            tested[pos] += 1;
            accepted[pos] += 1;
        }
        if t.resampled {
            tested[t.accepted] += 1;
        }
    }

    let sim = Simulation { sequences: MODEL_SIMULATIONS, tokens: 128, seed: config.seed, exec };
    let modeled = speedup(&config.cost, k, &AcceptanceStats::from_traces(&traces), &sim)?;

    let (ars_ll, ars_sd) = mean_std(runs.iter().map(|r| r.ars_log_likelihood));
    let (sps_ll, sps_sd) = mean_std(runs.iter().map(|r| r.sps_log_likelihood));
    let n = (runs.len() as f64).sqrt();
    let (ars_se, sps_se) = (ars_sd / n, sps_sd / n);
    let difference = sps_ll - ars_ll;
    let standard_error = ars_se.hypot(sps_se);

    let ars_tokens = (runs.len() * config.completion_len) as u64;
    let ars = MethodReport {
        method: "ars".into(),
        k: 0,
        loops: ars_tokens,
        tokens: ars_tokens,
        mean_tokens_per_loop: 1.0,
        std_tokens_per_loop: 0.0,
        acceptance_rate: None,
        acceptance_rate_per_position: Vec::new(),
        modeled_ms_per_token: config.cost.target_ms,
        modeled_speedup: 1.0,
        mean_log_likelihood: ars_ll,
        log_likelihood_se: ars_se,
        wallclock_tokens_per_sec: tokens_per_sec(runs.iter().map(|r| (r.ars_timing.tokens, r.ars_timing.elapsed))),
    };
    let (mean_tokens, std_tokens) = mean_std(traces.iter().map(|t| t.emitted as f64));
    let sps = MethodReport {
        method: "sps".into(),
        k,
        loops: traces.len() as u64,
        tokens: traces.iter().map(|t| t.emitted as u64).sum(),
        mean_tokens_per_loop: mean_tokens,
        std_tokens_per_loop: std_tokens,
        acceptance_rate: ratio(accepted.iter().sum(), tested.iter().sum()),
        acceptance_rate_per_position: accepted.iter().zip(&tested).map(|(&a, &t)| ratio(a, t)).collect(),
        modeled_ms_per_token: modeled.ms_per_token,
        modeled_speedup: modeled.speedup,
        mean_log_likelihood: sps_ll,
        log_likelihood_se: sps_se,
        wallclock_tokens_per_sec: tokens_per_sec(runs.iter().map(|r| (r.sps_timing.tokens, r.sps_timing.elapsed))),
    };
    Ok(Report {
        config: config.clone(),
        ars,
        sps,
        parity: ParityTest { difference, standard_error, pass: difference.abs() <= 2.0 * standard_error },
        modeled,
    })
}
