use std::collections::HashMap;

use crate::error::{Error, Result};

use super::rules::{FOLDED_DIGIT, UPPER_MARKER};

/// Characters rarer than this fraction of the corpus are discarded.
pub const DEFAULT_THRESHOLD: f64 = 1e-4;

/// Ordered symbol table mapping canonical characters to dense indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Alphabet {
    symbols: Vec<char>,
    index: HashMap<char, usize>,
}

impl Alphabet {
    pub fn from_symbols(symbols: Vec<char>) -> Result<Alphabet> {
        let mut index = HashMap::with_capacity(symbols.len());
        for (i, &c) in symbols.iter().enumerate() {
            if index.insert(c, i).is_some() {
                return Err(Error::Config(format!(
                    "duplicate symbol U+{:04X} in alphabet",
                    c as u32
                )));
            }
        }
        Ok(Alphabet { symbols, index })
    }

    pub fn symbols(&self) -> &[char] {
        &self.symbols
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn index_of(&self, c: char) -> Option<usize> {
        self.index.get(&c).copied()
    }

    pub fn symbol(&self, index: usize) -> Option<char> {
        self.symbols.get(index).copied()
    }

    /// One symbol per line as an uppercase hex code point.
    pub fn to_text(&self) -> String {
        self.symbols.iter().map(|c| format!("{:04X}\n", *c as u32)).collect()
    }

    pub fn from_text(text: &str) -> Result<Alphabet> {
        let symbols = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .enumerate()
            .map(|(i, l)| {
                u32::from_str_radix(l, 16)
                    .ok()
                    .and_then(char::from_u32)
                    .ok_or_else(|| Error::Config(format!("alphabet line {}: bad code point {l:?}", i + 1)))
            })
            .collect::<Result<Vec<_>>>()?;
        Alphabet::from_symbols(symbols)
    }

    /// 64-bit FNV-1a over the ordered code points; stored in model headers.
    pub fn hash(&self) -> u64 {
        const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
        const PRIME: u64 = 0x0000_0100_0000_01b3;
        let mut h = OFFSET;
        for c in &self.symbols {
            for b in (*c as u32).to_le_bytes() {
                h ^= u64::from(b);
                h = h.wrapping_mul(PRIME);
            }
        }
        h
    }

    /// Render indices back to canonical text.
    pub fn decode(&self, indices: &[usize]) -> String {
        indices.iter().filter_map(|&i| self.symbol(i)).collect()
    }
}

/// Induce an alphabet from canonical text.
///
/// A character is kept when `count / total >= threshold`; the uppercase
/// marker and the folded digit are kept whenever they occur at all. Symbols
/// are ordered by descending count, ties broken by code point.
pub fn build_alphabet(corpus: &[Vec<char>], threshold: f64) -> Result<Alphabet> {
    let mut counts: HashMap<char, u64> = HashMap::new();
    let mut total: u64 = 0;
    for text in corpus {
        for &c in text {
            *counts.entry(c).or_default() += 1;
            total += 1;
        }
    }
    if total == 0 {
        return Err(Error::EmptyCorpus);
    }
    let mut kept: Vec<(char, u64)> = counts
        .into_iter()
        .filter(|&(c, n)| {
            c == UPPER_MARKER || c == FOLDED_DIGIT || n as f64 >= threshold * total as f64
        })
        .collect();
    kept.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    Alphabet::from_symbols(kept.into_iter().map(|(c, _)| c).collect())
}
