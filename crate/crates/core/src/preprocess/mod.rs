//! Text preprocessing: decomposition, canonical mapping, alphabet induction
//! and encoding into dense symbol indices.
//!
//! The pipeline order is fixed: decompose, merge and fold, collapse
//! whitespace, then (for encoding) drop characters outside the alphabet and
//! truncate long runs.

mod alphabet;
mod rules;

use unicode_normalization::UnicodeNormalization;

use crate::error::{Error, Result};

pub use alphabet::{build_alphabet, Alphabet, DEFAULT_THRESHOLD};
pub use rules::{
    canonicalize, is_latin_letter, parse_merge_table, CanonicalRules, Language, FOLDED_DIGIT,
    FOLDED_LATIN, UPPER_MARKER,
};

/// Longest run of one symbol kept by [`encode`].
pub const MAX_RUN: usize = 5;

/// An encoded document.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SymbolSequence {
    pub doc_id: String,
    pub indices: Vec<usize>,
}

impl SymbolSequence {
    pub fn new(doc_id: impl Into<String>, indices: Vec<usize>) -> Self {
        SymbolSequence { doc_id: doc_id.into(), indices }
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn reversed(&self) -> SymbolSequence {
        let mut indices = self.indices.clone();
        indices.reverse();
        SymbolSequence { doc_id: self.doc_id.clone(), indices }
    }
}

/// Validate raw bytes as UTF-8, reporting the offset of the first bad byte.
pub fn decode_utf8(bytes: &[u8]) -> Result<&str> {
    std::str::from_utf8(bytes).map_err(|e| Error::InvalidUtf8 { offset: e.valid_up_to() })
}

/// NFKD-decompose `text` and split every capital into marker + lowercase.
pub fn decompose(text: &str) -> Vec<char> {
    let mut out = Vec::with_capacity(text.len());
    for c in text.nfkd() {
        if c.is_uppercase() {
            let mut lower = c.to_lowercase().peekable();
            if lower.peek() != Some(&c) {
                out.push(UPPER_MARKER);
                out.extend(lower);
                continue;
            }
        }
        out.push(c);
    }
    out
}

/// [`decompose`] for raw bytes.
pub fn decompose_bytes(bytes: &[u8]) -> Result<Vec<char>> {
    Ok(decompose(decode_utf8(bytes)?))
}

/// Decompose and canonicalize raw text.
pub fn canonical_text(text: &str, rules: &CanonicalRules) -> Vec<char> {
    canonicalize(&decompose(text), rules)
}

/// Encode canonical text: unknown characters are dropped, then runs longer
/// than [`MAX_RUN`] are cut to exactly [`MAX_RUN`].
pub fn encode(doc_id: &str, text: &[char], alphabet: &Alphabet) -> SymbolSequence {
    let mut indices: Vec<usize> = Vec::with_capacity(text.len());
    let mut run = 0;
    for idx in text.iter().filter_map(|c| alphabet.index_of(*c)) {
        if indices.last() == Some(&idx) {
            run += 1;
        } else {
            run = 1;
        }
        if run <= MAX_RUN {
            indices.push(idx);
        }
    }
    SymbolSequence::new(doc_id, indices)
}

/// Full pipeline for one raw document.
pub fn preprocess_document(
    doc_id: &str,
    raw: &[u8],
    rules: &CanonicalRules,
    alphabet: &Alphabet,
) -> Result<SymbolSequence> {
    let decomposed = decompose_bytes(raw)?;
    let canonical = canonicalize(&decomposed, rules);
    Ok(encode(doc_id, &canonical, alphabet))
}
