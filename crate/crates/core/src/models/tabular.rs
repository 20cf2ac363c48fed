use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use super::{context_key, parse_context_key, LanguageModel};
use crate::dist::{Distribution, Token, Vocab};
use crate::error::{Error, Result};

/// A model given explicitly as a table keyed by context suffix.
///
/// The lookup key for a context is its last `min(max_context, len)` tokens;
/// contexts with no entry get `default`.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularModel {
    vocab: Vocab,
    max_context: usize,
    table: HashMap<Vec<Token>, Distribution>,
    default: Distribution,
}

#[derive(Serialize, Deserialize)]
struct TabularDoc {
    vocab: usize,
    max_context: usize,
    default: Distribution,
    table: BTreeMap<String, Distribution>,
}

impl TabularModel {
    pub fn new(vocab: Vocab, max_context: usize, default: Distribution) -> Result<Self> {
        check_len(vocab, &default)?;
        Ok(TabularModel { vocab, max_context, table: HashMap::new(), default })
    }

    /// A model that ignores context.
    pub fn context_free(dist: Distribution) -> Self {
        TabularModel { vocab: dist.vocab(), max_context: 0, table: HashMap::new(), default: dist }
    }

    pub fn insert(&mut self, context: Vec<Token>, dist: Distribution) -> Result<()> {
        check_len(self.vocab, &dist)?;
        self.vocab.check_all(&context)?;
        if context.len() > self.max_context {
            return Err(Error::BadParam(format!(
                "table key of length {} exceeds max_context {}",
                context.len(),
                self.max_context
            )));
        }
        self.table.insert(context, dist);
        Ok(())
    }

    pub fn with_entry(mut self, context: Vec<Token>, dist: Distribution) -> Result<Self> {
        self.insert(context, dist)?;
        Ok(self)
    }

    pub fn max_context(&self) -> usize {
        self.max_context
    }

    pub fn default_distribution(&self) -> &Distribution {
        &self.default
    }

    pub fn entries(&self) -> impl Iterator<Item = (&[Token], &Distribution)> {
        self.table.iter().map(|(k, v)| (k.as_slice(), v))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: TabularDoc = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        let mut model = TabularModel::new(Vocab::new(doc.vocab)?, doc.max_context, doc.default)?;
        for (key, dist) in doc.table {
            model.insert(parse_context_key(&key)?, dist)?;
        }
        Ok(model)
    }

    /// JSON document with keys sorted, so equal models serialise identically.
    pub fn to_json(&self) -> String {
        let doc = TabularDoc {
            vocab: self.vocab.size(),
            max_context: self.max_context,
            default: self.default.clone(),
            table: self.table.iter().map(|(k, v)| (context_key(k), v.clone())).collect(),
        };
        serde_json::to_string_pretty(&doc).expect("tabular model serialises")
    }
}

fn check_len(vocab: Vocab, dist: &Distribution) -> Result<()> {
    if dist.len() != vocab.size() {
        return Err(Error::LengthMismatch { left: dist.len(), right: vocab.size() });
    }
    Ok(())
}

impl LanguageModel for TabularModel {
    fn vocab(&self) -> Vocab {
        self.vocab
    }

    fn next_distribution(&self, context: &[Token]) -> Result<Distribution> {
        self.vocab.check_all(context)?;
        let keep = self.max_context.min(context.len());
        let key = &context[context.len() - keep..];
        Ok(self.table.get(key).unwrap_or(&self.default).clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(p: &[f64]) -> Distribution {
        Distribution::new(p.to_vec()).unwrap()
    }

    #[test]
    fn direct_lookup_and_fallback() {
        let v = Vocab::new(2).unwrap();
        let m = TabularModel::new(v, 1, d(&[0.5, 0.5]))
            .unwrap()
            .with_entry(vec![], d(&[0.7, 0.3]))
            .unwrap()
            .with_entry(vec![1], d(&[0.1, 0.9]))
            .unwrap();
        assert_eq!(m.next_distribution(&[]).unwrap(), d(&[0.7, 0.3]));
        assert_eq!(m.next_distribution(&[0, 0, 1]).unwrap(), d(&[0.1, 0.9]));
        assert_eq!(m.next_distribution(&[1, 0]).unwrap(), d(&[0.5, 0.5]));
        assert!(matches!(m.next_distribution(&[2]), Err(Error::TokenOutOfRange { .. })));
    }

    #[test]
    fn score_parallel_two_lookups() {
        let v = Vocab::new(2).unwrap();
        let m = TabularModel::new(v, 1, d(&[0.5, 0.5]))
            .unwrap()
            .with_entry(vec![], d(&[1.0, 0.0]))
            .unwrap()
            .with_entry(vec![0], d(&[0.0, 1.0]))
            .unwrap();
        assert_eq!(m.score_parallel(&[], &[0]).unwrap(), vec![d(&[1.0, 0.0]), d(&[0.0, 1.0])]);
        assert_eq!(m.score_parallel(&[], &[]).unwrap(), vec![m.next_distribution(&[]).unwrap()]);
    }

    #[test]
    fn rejects_bad_entries() {
        let v = Vocab::new(2).unwrap();
        let mut m = TabularModel::new(v, 1, d(&[0.5, 0.5])).unwrap();
        assert!(m.insert(vec![0, 1], d(&[0.5, 0.5])).is_err());
        assert!(m.insert(vec![0], d(&[0.2, 0.3, 0.5])).is_err());
        assert!(m.insert(vec![5], d(&[0.5, 0.5])).is_err());
    }

    #[test]
    fn json_round_trip() {
        let text = r#"{"vocab": 3, "max_context": 2, "default": [0.2, 0.3, 0.5],
                       "table": {"": [1, 0, 0], "0,2": [0, 0.5, 0.5]}}"#;
        let m = TabularModel::from_json(text).unwrap();
        assert_eq!(m.next_distribution(&[1, 0, 2]).unwrap(), d(&[0.0, 0.5, 0.5]));
        assert_eq!(m.next_distribution(&[]).unwrap(), d(&[1.0, 0.0, 0.0]));
        assert_eq!(m.next_distribution(&[1]).unwrap(), d(&[0.2, 0.3, 0.5]));
        let again = TabularModel::from_json(&m.to_json()).unwrap();
        assert_eq!(again, m);
        assert_eq!(again.to_json(), m.to_json());
        assert!(TabularModel::from_json(r#"{"vocab": 2, "max_context": 0, "default": [0.9, 0.3], "table": {}}"#).is_err());
    }
}
