//! Memory-bound cost emulation for small models.
//!
//! A large model's per-call latency is dominated by reading its weights
//! once, whether it scores one position or several. [`BandwidthBound`] gives
//! an n-gram model the same cost shape: every call streams a private buffer
//! of the configured size, and a [`LanguageModel::score_parallel`] call
//! streams it exactly once for all positions.

use std::hint::black_box;

use specsamp::{Distribution, LanguageModel, Token, Vocab};

pub struct BandwidthBound<M> {
    model: M,
    weights: Vec<u64>,
}

impl<M: LanguageModel> BandwidthBound<M> {
    pub fn new(model: M, weight_bytes: usize) -> Self {
        let words = weight_bytes.div_ceil(8);
        BandwidthBound { model, weights: (0..words as u64).map(|i| i.wrapping_mul(0x9e37_79b9_7f4a_7c15)).collect() }
    }

    pub fn weight_bytes(&self) -> usize {
        self.weights.len() * 8
    }

    pub fn inner(&self) -> &M {
        &self.model
    }

    fn stream(&self) {
        let sum = black_box(&self.weights).iter().fold(0u64, |acc, &w| acc ^ w);
        black_box(sum);
    }
}

impl<M: LanguageModel> LanguageModel for BandwidthBound<M> {
    fn vocab(&self) -> Vocab {
        self.model.vocab()
    }

    fn next_distribution(&self, context: &[Token]) -> specsamp::Result<Distribution> {
        self.stream();
        self.model.next_distribution(context)
    }

    fn score_parallel(&self, context: &[Token], draft: &[Token]) -> specsamp::Result<Vec<Distribution>> {
        self.stream();
        self.model.score_parallel(context, draft)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use specsamp::TabularModel;

    #[test]
    fn outputs_are_untouched() {
        let v = Vocab::new(3).unwrap();
        let m = TabularModel::context_free(Distribution::new(vec![0.2, 0.3, 0.5]).unwrap());
        let b = BandwidthBound::new(m.clone(), 1 << 12);
        assert_eq!(b.weight_bytes(), 4096);
        assert_eq!(b.vocab(), v);
        assert_eq!(b.next_distribution(&[1]).unwrap(), m.next_distribution(&[1]).unwrap());
        assert_eq!(b.score_parallel(&[0], &[1, 2]).unwrap(), m.score_parallel(&[0], &[1, 2]).unwrap());
        assert_eq!(BandwidthBound::new(m, 0).weight_bytes(), 0);
    }
}
