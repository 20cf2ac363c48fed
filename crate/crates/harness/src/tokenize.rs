//! Byte-level tokenizer: one token per byte plus a begin-of-sequence id.

use specsamp::{Sequence, Token, Vocab};

/// Id reserved for begin-of-sequence padding.
pub const BOS: Token = 256;
pub const BYTE_VOCAB_SIZE: usize = 257;

pub fn byte_vocab() -> Vocab {
    Vocab::new(BYTE_VOCAB_SIZE).expect("257 > 1")
}

pub fn byte_tokenize(text: impl AsRef<[u8]>) -> Sequence {
    Sequence::from(text.as_ref().iter().map(|&b| b as Token).collect::<Vec<_>>())
}

/// Inverse of [`byte_tokenize`]. BOS is dropped; invalid UTF-8 is replaced.
pub fn detokenize(tokens: &[Token]) -> String {
    let bytes: Vec<u8> = tokens.iter().filter(|&&t| t < BOS).map(|&t| t as u8).collect();
    String::from_utf8_lossy(&bytes).into_owned()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bytes_map_to_ids() {
        assert_eq!(byte_tokenize("ab").tokens(), &[97, 98]);
        assert!(byte_tokenize("").is_empty());
        assert_eq!(byte_tokenize([0u8, 255]).tokens(), &[0, 255]);
    }

    #[test]
    fn ascii_round_trip() {
        let s = "In the beginning God created the heaven and the earth.\n";
        assert_eq!(detokenize(byte_tokenize(s).tokens()), s);
        assert_eq!(detokenize(&[BOS, BOS, 104, 105]), "hi");
        let utf8 = "naïve → ok";
        assert_eq!(detokenize(byte_tokenize(utf8).tokens()), utf8);
    }

    #[test]
    fn every_token_fits_the_vocab() {
        let v = byte_vocab();
        let all: Vec<u8> = (0..=255).collect();
        assert!(v.check_all(byte_tokenize(&all).tokens()).is_ok());
        assert!(v.contains(BOS));
    }
}
