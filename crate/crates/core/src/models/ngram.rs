use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use super::{context_key, parse_context_key, LanguageModel};
use crate::dist::{Distribution, Token, Vocab};
use crate::error::{Error, Result};

/// Counts following one context: `(token, count)` pairs sorted by token.
#[derive(Debug, Clone, PartialEq, Eq)]
struct Followers {
    total: u64,
    next: Vec<(Token, u32)>,
}

/// Add-α smoothed n-gram model.
///
/// `P(x | ctx) = (count(ctx, x) + α) / (count(ctx) + α·V)` where `ctx` is the
/// last `order − 1` tokens. With a begin-of-sequence id configured, training
/// left-pads the corpus with `order − 1` copies of it and short contexts are
/// padded the same way at lookup time. Every token keeps probability > 0.
#[derive(Debug, Clone, PartialEq)]
pub struct NGramModel {
    vocab: Vocab,
    order: usize,
    alpha: f64,
    bos: Option<Token>,
    counts: HashMap<Vec<Token>, Followers>,
}

#[derive(Serialize, Deserialize)]
struct NGramDoc {
    vocab: usize,
    order: usize,
    alpha: f64,
    bos: Option<Token>,
    counts: BTreeMap<String, Vec<(Token, u32)>>,
}

/// Counts every length-`order` window of `corpus`.
pub fn train_ngram(
    corpus: &[Token],
    vocab: Vocab,
    order: usize,
    alpha: f64,
    bos: Option<Token>,
) -> Result<NGramModel> {
    if order == 0 {
        return Err(Error::BadOrder(order));
    }
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::BadParam(format!("smoothing alpha must be > 0, got {alpha}")));
    }
    if corpus.len() < order {
        return Err(Error::CorpusTooShort { len: corpus.len(), order });
    }
    vocab.check_all(corpus)?;
    if let Some(b) = bos {
        vocab.check(b)?;
    }

    let padded: Vec<Token>;
    let stream = match bos {
        Some(b) => {
            padded = std::iter::repeat_n(b, order - 1).chain(corpus.iter().copied()).collect();
            &padded[..]
        }
        None => corpus,
    };

    let v = vocab.size();
    let mut dense: HashMap<&[Token], Vec<u32>> = HashMap::new();
    for window in stream.windows(order) {
        let (ctx, next) = window.split_at(order - 1);
        dense.entry(ctx).or_insert_with(|| vec![0; v])[next[0] as usize] += 1;
    }

    let counts = dense
        .into_iter()
        .map(|(ctx, row)| {
            let next: Vec<(Token, u32)> = row
                .iter()
                .enumerate()
                .filter(|(_, &c)| c > 0)
                .map(|(t, &c)| (t as Token, c))
                .collect();
            let total = next.iter().map(|&(_, c)| c as u64).sum();
            (ctx.to_vec(), Followers { total, next })
        })
        .collect();

    Ok(NGramModel { vocab, order, alpha, bos, counts })
}

impl NGramModel {
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn bos(&self) -> Option<Token> {
        self.bos
    }

    pub fn num_contexts(&self) -> usize {
        self.counts.len()
    }

    /// Raw count of `next` following `context` (which must have length
    /// `order − 1`).
    pub fn count(&self, context: &[Token], next: Token) -> u32 {
        self.counts
            .get(context)
            .and_then(|f| f.next.binary_search_by_key(&next, |&(t, _)| t).ok().map(|i| f.next[i].1))
            .unwrap_or(0)
    }

    /// Sum of all counts, i.e. the number of training windows.
    pub fn total_count(&self) -> u64 {
        self.counts.values().map(|f| f.total).sum()
    }

    fn key_for(&self, context: &[Token]) -> Vec<Token> {
        let need = self.order - 1;
        if context.len() >= need {
            return context[context.len() - need..].to_vec();
        }
        match self.bos {
            Some(b) => {
                let mut key = vec![b; need - context.len()];
                key.extend_from_slice(context);
                key
            }
            // Never a trained key, so it falls through to pure smoothing.
            None => context.to_vec(),
        }
    }

    pub fn to_json(&self) -> String {
        let doc = NGramDoc {
            vocab: self.vocab.size(),
            order: self.order,
            alpha: self.alpha,
            bos: self.bos,
            counts: self.counts.iter().map(|(k, f)| (context_key(k), f.next.clone())).collect(),
        };
        serde_json::to_string(&doc).expect("n-gram model serialises")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: NGramDoc = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        let vocab = Vocab::new(doc.vocab)?;
        if doc.order == 0 {
            return Err(Error::BadOrder(0));
        }
        if !(doc.alpha > 0.0 && doc.alpha.is_finite()) {
            return Err(Error::BadParam(format!("smoothing alpha must be > 0, got {}", doc.alpha)));
        }
        if let Some(b) = doc.bos {
            vocab.check(b)?;
        }
        let mut counts = HashMap::with_capacity(doc.counts.len());
        for (key, mut next) in doc.counts {
            let ctx = parse_context_key(&key)?;
            if ctx.len() != doc.order - 1 {
                return Err(Error::Parse(format!("context {key:?} does not have length {}", doc.order - 1)));
            }
            vocab.check_all(&ctx)?;
            for &(t, _) in &next {
                vocab.check(t)?;
            }
            next.sort_unstable_by_key(|&(t, _)| t);
            next.retain(|&(_, c)| c > 0);
            let total = next.iter().map(|&(_, c)| c as u64).sum();
            counts.insert(ctx, Followers { total, next });
        }
        Ok(NGramModel { vocab, order: doc.order, alpha: doc.alpha, bos: doc.bos, counts })
    }
}

impl LanguageModel for NGramModel {
    fn vocab(&self) -> Vocab {
        self.vocab
    }

    fn next_distribution(&self, context: &[Token]) -> Result<Distribution> {
        self.vocab.check_all(context)?;
        let v = self.vocab.size();
        let key = self.key_for(context);
        let (total, next) = match self.counts.get(&key) {
            Some(f) => (f.total as f64, f.next.as_slice()),
            None => (0.0, &[][..]),
        };
        let denom = total + self.alpha * v as f64;
        let mut probs = vec![self.alpha / denom; v];
        for &(t, c) in next {
            probs[t as usize] = (c as f64 + self.alpha) / denom;
        }
        Ok(Distribution::from_normalized(probs))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const A: Token = 0;
    const B: Token = 1;

    fn ababab() -> Vec<Token> {
        vec![A, B, A, B, A, B]
    }

    #[test]
    fn bigram_hand_counts() {
        let v = Vocab::new(2).unwrap();
        let m = train_ngram(&ababab(), v, 2, 0.01, None).unwrap();
        assert_eq!(m.count(&[A], B), 3);
        assert_eq!(m.count(&[A], A), 0);
        assert_eq!(m.count(&[B], A), 2);
        assert_eq!(m.total_count(), 5);
        let dist = m.next_distribution(&[A]).unwrap();
        assert!((dist.prob(A) - 0.01 / 3.02).abs() < 1e-15);
        assert!((dist.prob(B) - 3.01 / 3.02).abs() < 1e-15);
        assert!((dist.prob(A) - 0.00331).abs() < 1e-5);
    }

    #[test]
    fn vanishing_alpha_approaches_counts() {
        let v = Vocab::new(2).unwrap();
        let m = train_ngram(&ababab(), v, 2, 1e-12, None).unwrap();
        let dist = m.next_distribution(&[A]).unwrap();
        assert!(dist.prob(A) < 1e-12);
        assert!((dist.prob(B) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn unigram_ignores_context() {
        let v = Vocab::new(3).unwrap();
        let m = train_ngram(&[0, 1, 1, 2, 1, 0], v, 1, 0.5, None).unwrap();
        let base = m.next_distribution(&[]).unwrap();
        assert_eq!(m.next_distribution(&[2, 2, 0]).unwrap(), base);
        assert!((base.prob(1) - 3.5 / 7.5).abs() < 1e-15);
    }

    #[test]
    fn unseen_context_is_pure_smoothing() {
        let v = Vocab::new(2).unwrap();
        let m = train_ngram(&[A, A, A], v, 2, 1.0, None).unwrap();
        assert_eq!(m.next_distribution(&[B]).unwrap().probs(), &[0.5, 0.5]);
        // too-short context without a padding id
        assert_eq!(m.next_distribution(&[]).unwrap().probs(), &[0.5, 0.5]);
    }

    #[test]
    fn bos_padding_is_counted() {
        let v = Vocab::new(3).unwrap();
        let bos = 2;
        let m = train_ngram(&[A, B, A], v, 3, 1.0, Some(bos)).unwrap();
        assert_eq!(m.total_count(), 3);
        assert_eq!(m.count(&[bos, bos], A), 1);
        assert_eq!(m.count(&[bos, A], B), 1);
        assert_eq!(m.next_distribution(&[]).unwrap(), m.next_distribution(&[bos, bos]).unwrap());
        assert_eq!(m.next_distribution(&[A]).unwrap(), m.next_distribution(&[bos, A]).unwrap());
    }

    #[test]
    fn training_errors() {
        let v = Vocab::new(2).unwrap();
        assert_eq!(train_ngram(&[A], v, 0, 1.0, None), Err(Error::BadOrder(0)));
        assert!(matches!(train_ngram(&[A], v, 2, 1.0, None), Err(Error::CorpusTooShort { len: 1, order: 2 })));
        assert!(matches!(train_ngram(&[A, B], v, 2, 0.0, None), Err(Error::BadParam(_))));
        assert!(matches!(train_ngram(&[A, 5], v, 2, 1.0, None), Err(Error::TokenOutOfRange { .. })));
    }

    #[test]
    fn json_round_trip_is_bit_exact() {
        let v = Vocab::new(4).unwrap();
        let corpus: Vec<Token> = (0..500u32).map(|i| (i * i + 3 * i) % 4).collect();
        let m = train_ngram(&corpus, v, 3, 0.1 + 0.2, Some(3)).unwrap();
        let text = m.to_json();
        let back = NGramModel::from_json(&text).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.alpha().to_bits(), m.alpha().to_bits());
        assert_eq!(back.to_json(), text);
        for ctx in [&[][..], &[1], &[2, 0], &[3, 3, 1]] {
            assert_eq!(back.next_distribution(ctx).unwrap(), m.next_distribution(ctx).unwrap());
        }
    }

    proptest! {
        #[test]
        fn counts_cover_every_window(corpus in prop::collection::vec(0u32..5, 4..200), order in 1usize..4) {
            let v = Vocab::new(5).unwrap();
            let m = train_ngram(&corpus, v, order, 0.5, None).unwrap();
            prop_assert_eq!(m.total_count(), (corpus.len() - order + 1) as u64);
        }

        #[test]
        fn full_support_and_formula(corpus in prop::collection::vec(0u32..4, 3..100),
                                    ctx in prop::collection::vec(0u32..4, 0..5),
                                    alpha in 1e-3f64..3.0) {
            let v = Vocab::new(4).unwrap();
            let m = train_ngram(&corpus, v, 2, alpha, None).unwrap();
            let dist = m.next_distribution(&ctx).unwrap();
            prop_assert!(dist.probs().iter().all(|&p| p > 0.0));
            prop_assert!((dist.probs().iter().sum::<f64>() - 1.0).abs() < 1e-12);
            if let Some(&last) = ctx.last() {
                let total: u64 = (0..4).map(|t| m.count(&[last], t) as u64).sum();
                for t in 0..4u32 {
                    let expect = (m.count(&[last], t) as f64 + alpha) / (total as f64 + 4.0 * alpha);
                    prop_assert_eq!(dist.prob(t), expect);
                }
            }
        }

        #[test]
        fn score_parallel_matches_repeated_calls(corpus in prop::collection::vec(0u32..4, 6..80),
                                                 ctx in prop::collection::vec(0u32..4, 0..4),
                                                 draft in prop::collection::vec(0u32..4, 0..5)) {
            let v = Vocab::new(4).unwrap();
            let m = train_ngram(&corpus, v, 3, 0.2, None).unwrap();
            let scored = m.score_parallel(&ctx, &draft).unwrap();
            prop_assert_eq!(scored.len(), draft.len() + 1);
            for t in 0..=draft.len() {
                let mut full = ctx.clone();
                full.extend_from_slice(&draft[..t]);
                prop_assert_eq!(&scored[t], &m.next_distribution(&full).unwrap());
            }
        }
    }
}
