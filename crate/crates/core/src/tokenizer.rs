//! Deterministic hashed-subword tokenizer with BEGIN/END framing.

use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Reserved id opening every framed sequence.
pub const BEGIN: u32 = 0;
/// Reserved id closing every framed sequence.
pub const END: u32 = 1;
/// Ids below this value are reserved.
pub const FIRST_SUBWORD_ID: u32 = 2;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// 64-bit FNV-1a.
#[derive(Debug, Clone, Copy)]
pub struct Fnv1a(u64);

impl Fnv1a {
    pub fn new() -> Self {
        Fnv1a(FNV_OFFSET)
    }

    pub fn write(&mut self, bytes: &[u8]) {
        for &b in bytes {
            self.0 ^= u64::from(b);
            self.0 = self.0.wrapping_mul(FNV_PRIME);
        }
    }

    pub fn finish(&self) -> u64 {
        self.0
    }
}

impl Default for Fnv1a {
    fn default() -> Self {
        Self::new()
    }
}

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h = Fnv1a::new();
    h.write(bytes);
    h.finish()
}

/// Maps a subword into `[2, vocab_size)`.
pub fn subword_id(unit: &str, vocab_size: usize) -> u32 {
    let buckets = (vocab_size - FIRST_SUBWORD_ID as usize) as u64;
    (fnv1a64(unit.as_bytes()) % buckets) as u32 + FIRST_SUBWORD_ID
}

/// Lowercased words: maximal runs of alphanumeric characters.
pub fn words(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .map(|w| w.chars().flat_map(char::to_lowercase).collect())
}

/// Subword units of one word: the word itself, then its character 3-grams
/// when the word is longer than three characters.
pub fn word_units(word: &str) -> impl Iterator<Item = &str> + '_ {
    let bounds: Vec<usize> = word.char_indices().map(|(i, _)| i).chain([word.len()]).collect();
    let chars = bounds.len() - 1;
    let grams = if chars > 3 { chars - 2 } else { 0 };
    core::iter::once(word).chain((0..grams).map(move |i| &word[bounds[i]..bounds[i + 3]]))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenSequence {
    pub ids: Vec<u32>,
    pub framed: bool,
}

impl TokenSequence {
    /// Frames `units` as `BEGIN, u1..ut, END` with `t = min(m, max_len - 2)`.
    pub fn frame(units: impl IntoIterator<Item = u32>, max_len: usize) -> Result<Self> {
        if max_len < 3 {
            return Err(Error::InvalidConfig(alloc::format!(
                "max sequence length must be at least 3, got {max_len}"
            )));
        }
        let mut ids = Vec::new();
        ids.push(BEGIN);
        ids.extend(units.into_iter().take(max_len - 2));
        ids.push(END);
        Ok(TokenSequence { ids, framed: true })
    }

    /// Ids between the frame markers.
    pub fn interior(&self) -> &[u32] {
        if self.framed && self.ids.len() >= 2 {
            &self.ids[1..self.ids.len() - 1]
        } else {
            &self.ids
        }
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Tokenizer {
    vocab_size: usize,
}

impl Tokenizer {
    pub fn new(vocab_size: usize) -> Result<Self> {
        if vocab_size <= FIRST_SUBWORD_ID as usize || vocab_size > u32::MAX as usize {
            return Err(Error::InvalidConfig(alloc::format!(
                "hash vocabulary size {vocab_size} must lie in (2, 2^32)"
            )));
        }
        Ok(Tokenizer { vocab_size })
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    /// Number of subword units before truncation.
    pub fn count_units(&self, text: &str) -> usize {
        words(text).map(|w| word_units(&w).count()).sum()
    }

    pub fn tokenize(&self, text: &str, max_len: usize) -> Result<TokenSequence> {
        let budget = max_len.saturating_sub(2);
        let mut units = Vec::new();
        'outer: for word in words(text) {
            for unit in word_units(&word) {
                if units.len() == budget {
                    break 'outer;
                }
                units.push(subword_id(unit, self.vocab_size));
            }
        }
        TokenSequence::frame(units, max_len)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn repeated(word: &str, n: usize) -> String {
        let mut s = String::new();
        for _ in 0..n {
            s.push_str(word);
            s.push(' ');
        }
        s
    }

    #[test]
    fn fnv_reference_vectors() {
        assert_eq!(fnv1a64(b""), 0xcbf29ce484222325);
        assert_eq!(fnv1a64(b"a"), 0xaf63dc4c8601ec8c);
        assert_eq!(fnv1a64(b"foobar"), 0x85944171f73967e8);
    }

    #[test]
    fn units_of_words() {
        assert_eq!(word_units("hanoi").collect::<Vec<_>>(), ["hanoi", "han", "ano", "noi"]);
        assert_eq!(word_units("abc").collect::<Vec<_>>(), ["abc"]);
        assert_eq!(word_units("ab").collect::<Vec<_>>(), ["ab"]);
        assert_eq!(word_units("東京都庁").collect::<Vec<_>>(), ["東京都庁", "東京都", "京都庁"]);
        let w: Vec<_> = words("Hanoi, is the CAPITAL!").collect();
        assert_eq!(w, ["hanoi", "is", "the", "capital"]);
    }

    #[test]
    fn truncation_rule() {
        let tok = Tokenizer::new(1 << 18).unwrap();
        let text = repeated("ab", 1000);
        assert_eq!(tok.count_units(&text), 1000);
        let seq = tok.tokenize(&text, 512).unwrap();
        assert_eq!(seq.len(), 512);
        assert_eq!(seq.interior().len(), 510);
        assert_eq!(tok.tokenize(&repeated("ab", 3), 512).unwrap().len(), 5);
    }

    #[test]
    fn empty_text_is_just_frame() {
        let tok = Tokenizer::new(64).unwrap();
        let seq = tok.tokenize("", 512).unwrap();
        assert_eq!(seq.ids, vec![BEGIN, END]);
        assert!(seq.interior().is_empty());
    }

    #[test]
    fn ids_in_hash_range_and_stable() {
        let tok = Tokenizer::new(100).unwrap();
        let a = tok.tokenize("Hanoi is the capital of Vietnam", 64).unwrap();
        let b = tok.tokenize("Hanoi is the capital of Vietnam", 64).unwrap();
        assert_eq!(a, b);
        assert!(a.interior().iter().all(|&id| (2..100).contains(&id)));
        assert_eq!(a.ids[1], subword_id("hanoi", 100));
    }

    #[test]
    fn rejects_short_max_len() {
        let tok = Tokenizer::new(64).unwrap();
        assert!(tok.tokenize("x", 2).is_err());
        assert!(Tokenizer::new(2).is_err());
        assert_eq!(tok.tokenize("x", 3).unwrap().len(), 3);
    }

    proptest::proptest! {
        #[test]
        fn length_bounded(text in "\\PC{0,200}", max_len in 3usize..40) {
            let tok = Tokenizer::new(1 << 10).unwrap();
            let m = tok.count_units(&text);
            let seq = tok.tokenize(&text, max_len).unwrap();
            proptest::prop_assert!(seq.len() <= max_len);
            proptest::prop_assert_eq!(seq.len() == max_len, m >= max_len - 2);
            proptest::prop_assert_eq!(seq.interior().len(), m.min(max_len - 2));
        }
    }
}
