use std::fmt;

use serde::{Deserialize, Serialize};

/// An ordered, packed sequence of bits.
///
/// Bit `i` lives in `words[i / 64]` at position `i % 64` (least significant
/// first). Unused high bits of the last word are always zero, so derived
/// equality, hashing and ordering agree with bit-wise equality.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
pub struct BitSequence {
    words: Vec<u64>,
    len: usize,
}

impl BitSequence {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_capacity(bits: usize) -> Self {
        Self {
            words: Vec::with_capacity(bits.div_ceil(64)),
            len: 0,
        }
    }

    pub fn from_bools<I: IntoIterator<Item = bool>>(bits: I) -> Self {
        let mut seq = Self::new();
        for b in bits {
            seq.push(b);
        }
        seq
    }

    /// Parses a string of `0`/`1` characters. Returns `None` on any other
    /// character.
    pub fn parse(text: &str) -> Option<Self> {
        let mut seq = Self::with_capacity(text.len());
        for c in text.chars() {
            match c {
                '0' => seq.push(false),
                '1' => seq.push(true),
                _ => return None,
            }
        }
        Some(seq)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.len
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn push(&mut self, bit: bool) {
        let offset = self.len % 64;
        if offset == 0 {
            self.words.push(0);
        }
        if bit {
            *self.words.last_mut().expect("word pushed above") |= 1 << offset;
        }
        self.len += 1;
    }

    /// Appends the low `width` bits of `value`, most significant first.
    pub fn push_code(&mut self, value: u64, width: usize) {
        for shift in (0..width).rev() {
            self.push((value >> shift) & 1 == 1);
        }
    }

    pub fn extend_from(&mut self, other: &BitSequence) {
        for i in 0..other.len {
            self.push(other.get(i));
        }
    }

    #[inline]
    pub fn get(&self, index: usize) -> bool {
        assert!(
            index < self.len,
            "bit index {index} out of range {}",
            self.len
        );
        (self.words[index / 64] >> (index % 64)) & 1 == 1
    }

    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        (0..self.len).map(move |i| self.get(i))
    }

    pub fn complement(&self) -> Self {
        let mut words: Vec<u64> = self.words.iter().map(|w| !w).collect();
        if let Some(last) = words.last_mut() {
            *last &= low_mask(self.len - (self.words.len() - 1) * 64);
        }
        Self {
            words,
            len: self.len,
        }
    }

    /// Reads up to 64 bits starting at `start`, bit `start` landing in the
    /// least significant position. Bits past the end read as zero.
    #[inline]
    pub(crate) fn window64(&self, start: usize) -> u64 {
        let word = start / 64;
        let shift = start % 64;
        let lo = self.words.get(word).copied().unwrap_or(0);
        if shift == 0 {
            lo
        } else {
            let hi = self.words.get(word + 1).copied().unwrap_or(0);
            (lo >> shift) | (hi << (64 - shift))
        }
    }
}

#[inline]
pub(crate) fn low_mask(width: usize) -> u64 {
    if width >= 64 {
        u64::MAX
    } else {
        (1u64 << width) - 1
    }
}

impl fmt::Display for BitSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for bit in self.iter() {
            f.write_str(if bit { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl fmt::Debug for BitSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BitSequence({self})")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_display() {
        let s = BitSequence::parse("0001110").unwrap();
        assert_eq!(s.len(), 7);
        assert_eq!(s.to_string(), "0001110");
        assert!(BitSequence::parse("01x").is_none());
    }

    #[test]
    fn push_code_is_msb_first() {
        let mut s = BitSequence::new();
        s.push_code(0b000001, 6);
        assert_eq!(s.to_string(), "000001");
    }

    #[test]
    fn complement_keeps_padding_clear() {
        let s = BitSequence::parse(&"01".repeat(40)).unwrap();
        let c = s.complement();
        assert_eq!(c.to_string(), "10".repeat(40));
        assert_eq!(c.complement(), s);
    }

    #[test]
    fn window_crosses_word_boundary() {
        let mut s = BitSequence::new();
        for i in 0..130 {
            s.push(i % 3 == 0);
        }
        for start in [0, 1, 60, 63, 64, 100] {
            let w = s.window64(start);
            for k in 0..64 {
                let expected = start + k < 130 && (start + k) % 3 == 0;
                assert_eq!((w >> k) & 1 == 1, expected, "start {start} bit {k}");
            }
        }
    }
}
