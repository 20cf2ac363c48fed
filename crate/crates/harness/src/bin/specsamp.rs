use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};
use specsamp::perf::{k_sweep, sweep_csv, CostModel, Simulation, SweepSource};
use specsamp::verify::{run_verify, VerifyOptions};
use specsamp::{autoregressive_sample, speculative_sample, DecodingMethod, Exec, NGramModel, RandomSource, SpsConfig};
use specsamp_harness::{
    bundled_corpus, byte_tokenize, detokenize, emit_report, render, run_benchmark, BenchConfig, Format, ModelSpec,
    BOS,
};

#[derive(Parser)]
#[command(name = "specsamp", version, about = "Speculative sampling benchmarks and checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a byte-level n-gram model and write it as JSON.
    Train {
        #[arg(long)]
        corpus: Option<PathBuf>,
        #[arg(long)]
        order: usize,
        #[arg(long, default_value_t = 0.01)]
        alpha: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Continue a prompt with a trained model, speculatively if a draft is given.
    Sample {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        draft: Option<PathBuf>,
        #[arg(long, default_value = "")]
        prompt: String,
        /// Tokens to generate.
        #[arg(long, default_value_t = 256)]
        length: usize,
        #[arg(long, default_value_t = 4)]
        k: usize,
        #[arg(long, default_value = "plain")]
        method: DecodingMethod,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Run the autoregressive vs speculative benchmark.
    Bench {
        /// JSON config; flags below override its keys.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        corpus: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        method: Option<DecodingMethod>,
        #[arg(long)]
        sequences: Option<usize>,
        /// Single-threaded run for clean timings.
        #[arg(long)]
        wallclock: bool,
        #[arg(long, default_value = "csv")]
        format: Format,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Exact-enumeration, identity and goodness-of-fit checks; prints JSON.
    Verify {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 100)]
        instances: usize,
        #[arg(long, default_value_t = 10_000)]
        pairs: usize,
        #[arg(long, default_value_t = 100_000)]
        samples: usize,
        #[arg(long)]
        sequential: bool,
    },
    /// Modeled time and speedup across lookaheads 1..=k as CSV.
    Sweep {
        /// JSON cost model; defaults to 14.1 ms target, 1.8 ms draft.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        alpha: f64,
        #[arg(long, default_value_t = 8)]
        k: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 10_000)]
        sequences: usize,
    },
}

fn load_model(path: &PathBuf) -> anyhow::Result<NGramModel> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    NGramModel::from_json(&text).with_context(|| format!("parsing {}", path.display()))
}

fn run(cli: Cli) -> anyhow::Result<bool> {
    match cli.command {
        Command::Train { corpus, order, alpha, out } => {
            let corpus = corpus.unwrap_or_else(bundled_corpus);
            let bytes = std::fs::read(&corpus).with_context(|| format!("reading {}", corpus.display()))?;
            let model = specsamp_harness::train(byte_tokenize(&bytes).tokens(), ModelSpec::new(order, alpha))?;
            std::fs::write(&out, model.to_json()).with_context(|| format!("writing {}", out.display()))?;
            eprintln!("order {order}: {} contexts, {} windows", model.num_contexts(), model.total_count());
        }
        Command::Sample { model, draft, prompt, length, k, method, seed } => {
            let target = load_model(&model)?;
            let prompt_seq = byte_tokenize(&prompt);
            let end = prompt_seq.len() + length;
            let mut rng = RandomSource::new(seed);
            let seq = match draft {
                Some(path) => {
                    let draft = load_model(&path)?;
                    let (seq, traces) = speculative_sample(&target, &draft, &prompt_seq, &SpsConfig::new(k, end, method), &mut rng)?;
                    let emitted: usize = traces.iter().map(|t| t.emitted).sum();
                    eprintln!("{} loops, {:.3} tokens/loop", traces.len(), emitted as f64 / traces.len() as f64);
                    seq
                }
                None => autoregressive_sample(&target, &prompt_seq, end, &method, &mut rng)?,
            };
            let tokens = &seq.tokens()[..end.min(seq.len())];
            println!("{}", detokenize(tokens));
            if tokens.contains(&BOS) {
                eprintln!("note: begin-of-sequence tokens were dropped from the output");
            }
        }
        Command::Bench { config, corpus, seed, k, method, sequences, wallclock, format, out } => {
            let mut cfg = match config {
                Some(path) => BenchConfig::load(&path)?,
                None => BenchConfig::default(),
            };
            if let Some(c) = corpus {
                cfg.corpus = c;
            }
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(k) = k {
                cfg.k = k;
            }
            if let Some(m) = method {
                cfg.method = m;
            }
            if let Some(n) = sequences {
                cfg.num_sequences = n;
            }
            cfg.wallclock |= wallclock;
            let report = run_benchmark(&cfg)?;
            match out {
                Some(path) => emit_report(&report, format, &path)?,
                None => print!("{}", render(&report, format)?),
            }
        }
        Command::Verify { seed, instances, pairs, samples, sequential } => {
            let options = VerifyOptions { seed, instances, identity_pairs: pairs, gof_samples: samples, ..Default::default() };
            let exec = if sequential { Exec::Sequential } else { Exec::default() };
            let report = run_verify(options, exec)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
            return Ok(report.pass);
        }
        Command::Sweep { config, alpha, k, seed, sequences } => {
            let cost = match config {
                Some(path) => {
                    let text = std::fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
                    serde_json::from_str::<CostModel>(&text).with_context(|| format!("parsing {}", path.display()))?
                }
                None => CostModel::published(),
            };
            if k == 0 {
                bail!("--k must be >= 1");
            }
            let ks: Vec<usize> = (1..=k).collect();
            let sim = Simulation { sequences, seed, ..Default::default() };
            print!("{}", sweep_csv(&k_sweep(&cost, &SweepSource::Rate(alpha), &ks, &sim)?));
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
