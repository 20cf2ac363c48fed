use serde::{Deserialize, Serialize};

use crate::dist::{Token, Vocab};
use crate::error::{Error, Result};

/// A prompt followed by generated tokens.
///
/// JSON form is the bare token array; the prompt length is not part of it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "Vec<Token>", into = "Vec<Token>")]
pub struct Sequence {
    tokens: Vec<Token>,
    prompt_len: usize,
}

impl Sequence {
    /// A sequence consisting only of a prompt.
    pub fn prompt(tokens: Vec<Token>, vocab: Vocab) -> Result<Self> {
        vocab.check_all(&tokens)?;
        let prompt_len = tokens.len();
        Ok(Sequence { tokens, prompt_len })
    }

    pub fn with_prompt_len(tokens: Vec<Token>, prompt_len: usize, vocab: Vocab) -> Result<Self> {
        vocab.check_all(&tokens)?;
        if prompt_len > tokens.len() {
            return Err(Error::BadParam(format!(
                "prompt length {prompt_len} exceeds sequence length {}",
                tokens.len()
            )));
        }
        Ok(Sequence { tokens, prompt_len })
    }

    pub fn tokens(&self) -> &[Token] {
        &self.tokens
    }

    pub fn prompt_len(&self) -> usize {
        self.prompt_len
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Tokens after the prompt.
    pub fn completion(&self) -> &[Token] {
        &self.tokens[self.prompt_len..]
    }

    pub(crate) fn extend_from_slice(&mut self, tokens: &[Token]) {
        self.tokens.extend_from_slice(tokens);
    }

    pub(crate) fn push(&mut self, token: Token) {
        self.tokens.push(token);
    }
}

impl From<Vec<Token>> for Sequence {
    fn from(tokens: Vec<Token>) -> Self {
        let prompt_len = tokens.len();
        Sequence { tokens, prompt_len }
    }
}

impl From<Sequence> for Vec<Token> {
    fn from(s: Sequence) -> Self {
        s.tokens
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validates_tokens_and_prompt() {
        let v = Vocab::new(3).unwrap();
        assert!(Sequence::prompt(vec![0, 1, 2], v).is_ok());
        assert!(matches!(
            Sequence::prompt(vec![0, 3], v),
            Err(Error::TokenOutOfRange { token: 3, .. })
        ));
        assert!(Sequence::with_prompt_len(vec![0], 2, v).is_err());
        let s = Sequence::with_prompt_len(vec![0, 1, 2], 1, v).unwrap();
        assert_eq!(s.completion(), &[1, 2]);
    }

    #[test]
    fn json_is_a_token_array() {
        let s: Sequence = vec![97, 98].into();
        assert_eq!(serde_json::to_string(&s).unwrap(), "[97,98]");
    }
}
