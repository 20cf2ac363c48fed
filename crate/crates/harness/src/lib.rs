//! Desk-scale benchmark runner for speculative sampling.
//!
//! Trains byte-level n-gram target and draft models on a text corpus, runs
//! autoregressive and speculative sampling over prompts from a held-out
//! tail, and reports loop statistics, acceptance rates, modeled speedups and
//! measured throughput.

mod bench;
mod config;
mod emulate;
mod error;
mod report;
mod tokenize;

pub use bench::{load_corpus, run_benchmark, train, MethodReport, ParityTest, Report, MODEL_SIMULATIONS, WARMUP_LOOPS};
pub use config::{bundled_corpus, BenchConfig, ModelSpec, WeightBytes};
pub use emulate::BandwidthBound;
pub use error::{Error, Result};
pub use report::{csv_header, emit_report, render, Format};
pub use tokenize::{byte_tokenize, byte_vocab, detokenize, BOS, BYTE_VOCAB_SIZE};
