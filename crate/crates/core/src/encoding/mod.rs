//! Text normalization, the 6-bit character codec and contiguous-bit
//! affinity.

mod affinity;
mod bits;
mod codebook;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub(crate) use affinity::reaches;
pub use affinity::{affinity, matches, WindowIndex};
pub use bits::BitSequence;
pub use codebook::{Codebook, CODEBOOK_SIZE, CODE_WIDTH, MAX_CONFUSABLE_DISTANCE};

/// Tokens are cut to this many symbols.
pub const MAX_TOKEN_SYMBOLS: usize = 20;

#[derive(Debug, Error)]
pub enum EncodingError {
    #[error("symbol {symbol:?} is not in the codebook")]
    UnencodableSymbol { symbol: char },
    #[error("cannot measure affinity of an empty sequence")]
    EmptySequence,
    #[error("bit sequence of length {0} is not a whole number of codes")]
    RaggedSequence(usize),
    #[error("invalid codebook (line {line}): {reason}")]
    InvalidCodebook { line: usize, reason: String },
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// A normalized word: lowercase, non-empty, every symbol in the codebook.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Token(String);

impl Token {
    /// Wraps already-normalized text. Callers outside the tokenizer should
    /// prefer [`tokenize`]; `encode` still rejects foreign symbols.
    pub fn new(text: impl Into<String>) -> Self {
        Token(text.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn symbol_count(&self) -> usize {
        self.0.chars().count()
    }
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Debug for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.0)
    }
}

/// Splits text into maximal runs of codebook symbols after ASCII
/// lowercasing. Everything outside the codebook separates tokens.
pub fn tokenize(text: &str, codebook: &Codebook) -> Vec<Token> {
    let mut tokens = Vec::new();
    let mut current = String::new();
    let mut symbols = 0;
    for c in text.chars() {
        let c = c.to_ascii_lowercase();
        if codebook.contains(c) {
            if symbols < MAX_TOKEN_SYMBOLS {
                current.push(c);
            }
            symbols += 1;
        } else if !current.is_empty() {
            tokens.push(Token(std::mem::take(&mut current)));
            symbols = 0;
        }
    }
    if !current.is_empty() {
        tokens.push(Token(current));
    }
    tokens
}

/// Normalizes a sender address: lowercase, codebook symbols only. Not
/// truncated.
pub fn normalize_sender(sender: &str, codebook: &Codebook) -> String {
    sender
        .chars()
        .map(|c| c.to_ascii_lowercase())
        .filter(|&c| codebook.contains(c))
        .collect()
}

/// Concatenates the 6-bit codes of each symbol, most significant bit first.
pub fn encode(token: &Token, codebook: &Codebook) -> Result<BitSequence, EncodingError> {
    encode_str(token.as_str(), codebook)
}

pub(crate) fn encode_str(text: &str, codebook: &Codebook) -> Result<BitSequence, EncodingError> {
    let mut bits = BitSequence::with_capacity(text.len() * CODE_WIDTH);
    for symbol in text.chars() {
        let code = codebook
            .code(symbol)
            .ok_or(EncodingError::UnencodableSymbol { symbol })?;
        bits.push_code(code as u64, CODE_WIDTH);
    }
    Ok(bits)
}

/// Inverse of [`encode`].
pub fn decode(bits: &BitSequence, codebook: &Codebook) -> Result<Token, EncodingError> {
    if !bits.len().is_multiple_of(CODE_WIDTH) {
        return Err(EncodingError::RaggedSequence(bits.len()));
    }
    let mut text = String::with_capacity(bits.len() / CODE_WIDTH);
    for chunk in 0..bits.len() / CODE_WIDTH {
        let code = (0..CODE_WIDTH).fold(0u8, |acc, i| {
            (acc << 1) | bits.get(chunk * CODE_WIDTH + i) as u8
        });
        text.push(codebook.symbol(code).expect("every 6-bit code is assigned"));
    }
    Ok(Token(text))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn words(tokens: &[Token]) -> Vec<&str> {
        tokens.iter().map(Token::as_str).collect()
    }

    #[test]
    fn tokenize_examples() {
        let cb = Codebook::builtin();
        assert!(tokenize("", &cb).is_empty());
        assert_eq!(words(&tokenize("Buy NOW!!", &cb)), ["buy", "now"]);
        assert_eq!(words(&tokenize("win-win", &cb)), ["win", "win"]);
        assert_eq!(
            words(&tokenize("  free, cash. free ", &cb)),
            ["free", "cash", "free"]
        );
        assert_eq!(words(&tokenize("ads@x $$$", &cb)), ["ads@x", "$$$"]);
    }

    #[test]
    fn long_tokens_are_truncated() {
        let cb = Codebook::builtin();
        let long = "a".repeat(35);
        let tokens = tokenize(&format!("{long} b"), &cb);
        assert_eq!(tokens[0].symbol_count(), MAX_TOKEN_SYMBOLS);
        assert_eq!(tokens[1].as_str(), "b");
    }

    #[test]
    fn encode_length_and_determinism() {
        let cb = Codebook::builtin();
        let t = Token::new("ab");
        let bits = encode(&t, &cb).unwrap();
        assert_eq!(bits.len(), 12);
        assert_eq!(bits.to_string(), "000001000101");
        assert_eq!(encode(&t, &cb).unwrap(), bits);
    }

    #[test]
    fn encode_rejects_foreign_symbols() {
        let cb = Codebook::builtin();
        let err = encode(&Token::new("a-b"), &cb).unwrap_err();
        assert!(matches!(
            err,
            EncodingError::UnencodableSymbol { symbol: '-' }
        ));
    }

    #[test]
    fn zero_and_o_differ_in_at_most_two_bits() {
        let cb = Codebook::builtin();
        let zero = encode(&Token::new("0"), &cb).unwrap();
        let oh = encode(&Token::new("o"), &cb).unwrap();
        let diff = zero.iter().zip(oh.iter()).filter(|(a, b)| a != b).count();
        assert!(diff <= 2);
    }

    #[test]
    fn sender_normalization() {
        let cb = Codebook::builtin();
        assert_eq!(normalize_sender(" Ads@X.com ", &cb), "ads@xcom");
        assert_eq!(normalize_sender(" -.- ", &cb), "");
    }

    #[test]
    fn ragged_decode_fails() {
        let cb = Codebook::builtin();
        assert!(decode(&BitSequence::parse("0101").unwrap(), &cb).is_err());
    }

    /// Brute-force longest agreeing run at the single alignment of two equal
    /// length sequences.
    fn run_at_zero(a: &BitSequence, b: &BitSequence) -> usize {
        let (mut best, mut run) = (0, 0);
        for (x, y) in a.iter().zip(b.iter()) {
            run = if x == y { run + 1 } else { 0 };
            best = best.max(run);
        }
        best
    }

    fn symbol_strategy() -> impl Strategy<Value = char> {
        let cb = Codebook::builtin();
        (0u8..64).prop_map(move |c| cb.symbol(c).unwrap())
    }

    proptest! {
        #[test]
        fn codec_round_trip(text in prop::collection::vec(symbol_strategy(), 1..=MAX_TOKEN_SYMBOLS)) {
            let cb = Codebook::builtin();
            let token = Token::new(text.into_iter().collect::<String>());
            prop_assert_eq!(decode(&encode(&token, &cb).unwrap(), &cb).unwrap(), token);
        }

        /// One confusable substitution at either end of a token keeps the
        /// rest intact, so affinity stays at least 6(n-1) - 2. Interior
        /// substitutions split the token; the longer untouched side plus the
        /// agreeing leading bits of the swapped code survive.
        #[test]
        fn confusable_substitution_tolerance(
            text in prop::collection::vec(prop::sample::select(vec!['a','e','i','o','s','t','b','g','z','c','u','k','m','r']), 2..=12),
            pos_seed in any::<usize>(),
            pick in any::<usize>(),
        ) {
            let cb = Codebook::builtin();
            let original: String = text.iter().collect();
            let n = text.len();
            let pos = pos_seed % n;
            let partners = cb.confusable_with(text[pos]);
            prop_assume!(!partners.is_empty());
            let mut swapped = text.clone();
            swapped[pos] = partners[pick % partners.len()];
            let swapped: String = swapped.into_iter().collect();

            let a = encode(&Token::new(original), &cb).unwrap();
            let b = encode(&Token::new(swapped), &cb).unwrap();
            let aff = affinity(&a, &b).unwrap();
            prop_assert_eq!(aff, run_at_zero(&a, &b));

            let left = 6 * pos;
            let right = 6 * (n - 1 - pos);
            // codes of a confusable pair share their first four bits
            prop_assert!(aff >= (left + 4).max(right));
            if pos == 0 || pos == n - 1 || n <= 3 {
                prop_assert!(aff + 2 >= 6 * (n - 1));
            }
        }
    }
}
