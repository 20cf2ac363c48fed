//! Next-token models shared by the target and draft roles.

mod ngram;
mod tabular;

pub use ngram::{train_ngram, NGramModel};
pub use tabular::TabularModel;

use crate::dist::{Distribution, Token, Vocab};
use crate::error::Result;

/// An autoregressive model over a fixed vocabulary.
///
/// `next_distribution` must be a pure function of the context. Element `t`
/// of `score_parallel(ctx, draft)` must equal
/// `next_distribution(ctx ++ draft[..t])` bit for bit; implementations that
/// batch the scoring call may only change how it is computed.
pub trait LanguageModel: Send + Sync {
    fn vocab(&self) -> Vocab;

    fn next_distribution(&self, context: &[Token]) -> Result<Distribution>;

    /// Scores `draft.len() + 1` positions in one call.
    fn score_parallel(&self, context: &[Token], draft: &[Token]) -> Result<Vec<Distribution>> {
        self.vocab().check_all(draft)?;
        let mut extended = Vec::with_capacity(context.len() + draft.len());
        extended.extend_from_slice(context);
        let mut out = Vec::with_capacity(draft.len() + 1);
        out.push(self.next_distribution(&extended)?);
        for &token in draft {
            extended.push(token);
            out.push(self.next_distribution(&extended)?);
        }
        Ok(out)
    }
}

impl<M: LanguageModel + ?Sized> LanguageModel for &M {
    fn vocab(&self) -> Vocab {
        (**self).vocab()
    }

    fn next_distribution(&self, context: &[Token]) -> Result<Distribution> {
        (**self).next_distribution(context)
    }

    fn score_parallel(&self, context: &[Token], draft: &[Token]) -> Result<Vec<Distribution>> {
        (**self).score_parallel(context, draft)
    }
}

impl<M: LanguageModel + ?Sized> LanguageModel for Box<M> {
    fn vocab(&self) -> Vocab {
        (**self).vocab()
    }

    fn next_distribution(&self, context: &[Token]) -> Result<Distribution> {
        (**self).next_distribution(context)
    }

    fn score_parallel(&self, context: &[Token], draft: &[Token]) -> Result<Vec<Distribution>> {
        (**self).score_parallel(context, draft)
    }
}

impl<M: LanguageModel + ?Sized> LanguageModel for std::sync::Arc<M> {
    fn vocab(&self) -> Vocab {
        (**self).vocab()
    }

    fn next_distribution(&self, context: &[Token]) -> Result<Distribution> {
        (**self).next_distribution(context)
    }

    fn score_parallel(&self, context: &[Token], draft: &[Token]) -> Result<Vec<Distribution>> {
        (**self).score_parallel(context, draft)
    }
}

/// Formats a context as the comma-separated key used in model JSON files.
pub(crate) fn context_key(context: &[Token]) -> String {
    context.iter().map(|t| t.to_string()).collect::<Vec<_>>().join(",")
}

pub(crate) fn parse_context_key(key: &str) -> Result<Vec<Token>> {
    if key.trim().is_empty() {
        return Ok(Vec::new());
    }
    key.split(',')
        .map(|s| {
            s.trim()
                .parse::<Token>()
                .map_err(|e| crate::Error::Parse(format!("context key {key:?}: {e}")))
        })
        .collect()
}
