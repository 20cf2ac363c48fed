//! Speculative sampling for autoregressive language models.
//!
//! A cheap draft model proposes `K` tokens, the target model scores all of
//! them in one parallel call, and a modified rejection scheme accepts a
//! prefix of the draft so that the emitted tokens are distributed exactly as
//! if they had been sampled from the target alone.
//!
//! The crate is organised bottom-up:
//!
//! * [`dist`], [`rng`], [`sequence`]: vocabularies, probability vectors, the
//!   seeded uniform stream and token sequences.
//! * [`models`]: the [`LanguageModel`] contract with exact tabular and
//!   add-α n-gram implementations.
//! * [`decoding`]: temperature / top-k / nucleus / greedy transforms and the
//!   plain autoregressive sampler.
//! * [`speculative`]: the draft-then-verify loop.
//! * [`verify`]: brute-force enumeration oracles and goodness-of-fit tests.
//! * [`perf`]: the analytical loop-latency and speedup model.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod decoding;
pub mod dist;
pub mod error;
pub mod exec;
pub mod models;
pub mod perf;
pub mod rng;
pub mod sequence;
pub mod speculative;
pub mod verify;

pub use decoding::{apply_method, autoregressive_sample, DecodingMethod};
pub use dist::{normalize, sample_categorical, total_variation, Distribution, Token, Vocab};
pub use error::{Error, Result};
pub use exec::Exec;
pub use models::{LanguageModel, NGramModel, TabularModel};
pub use rng::{RandomSource, ScriptedUniforms, UniformSource};
pub use sequence::Sequence;
pub use speculative::{speculative_sample, speculative_step, LoopTrace, SpsConfig};
