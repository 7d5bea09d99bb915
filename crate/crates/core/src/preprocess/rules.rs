use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Marker emitted before the lowercase form of every capital letter.
///
/// U+00B9 cannot survive NFKD decomposition (it becomes "1"), so it never
/// collides with a character of the source text.
pub const UPPER_MARKER: char = '\u{00B9}';

/// Replacement for every decimal digit.
pub const FOLDED_DIGIT: char = '7';

/// Replacement for every Latin letter when `latin_fold` is set.
pub const FOLDED_LATIN: char = 's';

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Language {
    Dutch,
    English,
    Greek,
    Spanish,
    Other,
}

impl Language {
    /// Guess the language from a problem id prefix ("EN001", "GR012").
    pub fn from_problem_id(id: &str) -> Language {
        let prefix: String = id
            .chars()
            .take_while(|c| c.is_ascii_alphabetic())
            .collect::<String>()
            .to_ascii_uppercase();
        match prefix.as_str() {
            "EN" => Language::English,
            "DU" | "NL" => Language::Dutch,
            "GR" | "EL" => Language::Greek,
            "SP" | "ES" => Language::Spanish,
            _ => Language::Other,
        }
    }

    /// Default uncertainty radius used when aligning scores to the median.
    pub fn default_uncertainty_radius(self) -> f64 {
        match self {
            Language::Dutch => 0.0,
            Language::English | Language::Greek | Language::Spanish => 0.02,
            Language::Other => 0.0,
        }
    }

    fn table_source(self) -> &'static str {
        match self {
            Language::Dutch => include_str!("../../data/rules/dutch.map"),
            Language::English => include_str!("../../data/rules/english.map"),
            Language::Greek => include_str!("../../data/rules/greek.map"),
            Language::Spanish => include_str!("../../data/rules/spanish.map"),
            Language::Other => include_str!("../../data/rules/other.map"),
        }
    }
}

impl FromStr for Language {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "dutch" | "du" | "nl" => Ok(Language::Dutch),
            "english" | "en" => Ok(Language::English),
            "greek" | "gr" | "el" => Ok(Language::Greek),
            "spanish" | "sp" | "es" => Ok(Language::Spanish),
            "other" => Ok(Language::Other),
            _ => Err(Error::Config(format!("unknown language {s:?}"))),
        }
    }
}

impl fmt::Display for Language {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Language::Dutch => "dutch",
            Language::English => "english",
            Language::Greek => "greek",
            Language::Spanish => "spanish",
            Language::Other => "other",
        };
        f.write_str(name)
    }
}

/// Per-language canonical character mapping.
#[derive(Debug, Clone)]
pub struct CanonicalRules {
    pub language: Language,
    pub merge_table: HashMap<char, Vec<char>>,
    /// Map every Latin letter to "s" (Greek).
    pub latin_fold: bool,
    /// Map every decimal digit to "7".
    pub digit_fold: bool,
}

impl CanonicalRules {
    /// The shipped rules for `language`: common merges plus the language table.
    pub fn for_language(language: Language) -> CanonicalRules {
        let mut merge_table = HashMap::new();
        for source in [include_str!("../../data/rules/common.map"), language.table_source()] {
            // shipped tables are checked by the unit tests below
            merge_table.extend(parse_merge_table(source).expect("shipped merge table is valid"));
        }
        CanonicalRules {
            language,
            merge_table,
            latin_fold: language == Language::Greek,
            digit_fold: true,
        }
    }

    /// Map one decomposed character to its canonical replacement(s).
    fn map_char(&self, c: char, out: &mut Vec<char>) {
        if let Some(replacement) = self.merge_table.get(&c) {
            out.extend(replacement.iter().copied());
        } else if self.digit_fold && c != UPPER_MARKER && c.is_numeric() {
            out.push(FOLDED_DIGIT);
        } else if self.latin_fold && is_latin_letter(c) {
            out.push(FOLDED_LATIN);
        } else {
            out.push(c);
        }
    }
}

/// Parse a merge table: one `<source> [<replacement>...]` line of hex code
/// points per entry, `#` starting a comment.
pub fn parse_merge_table(source: &str) -> Result<HashMap<char, Vec<char>>> {
    let mut table = HashMap::new();
    for (lineno, line) in source.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let mut fields = line.split_whitespace().map(|f| parse_hex_char(f, lineno + 1));
        let from = fields.next().expect("non-empty line has a field")?;
        let to = fields.collect::<Result<Vec<char>>>()?;
        if table.insert(from, to).is_some() {
            return Err(Error::Config(format!(
                "merge table line {}: duplicate source U+{:04X}",
                lineno + 1,
                from as u32
            )));
        }
    }
    for (from, to) in &table {
        if let Some(c) = to.iter().find(|c| table.contains_key(c)) {
            return Err(Error::Config(format!(
                "merge table maps U+{:04X} to U+{:04X}, which is itself remapped",
                *from as u32, *c as u32
            )));
        }
    }
    Ok(table)
}

fn parse_hex_char(field: &str, lineno: usize) -> Result<char> {
    u32::from_str_radix(field, 16)
        .ok()
        .and_then(char::from_u32)
        .ok_or_else(|| Error::Config(format!("merge table line {lineno}: bad code point {field:?}")))
}

/// Letters of the Latin script, in the blocks that survive decomposition.
pub fn is_latin_letter(c: char) -> bool {
    c.is_ascii_alphabetic()
        || (c.is_alphabetic()
            && matches!(c as u32,
                0x00C0..=0x024F   // Latin-1 supplement, Extended-A/B
                | 0x1E00..=0x1EFF // Latin Extended Additional
                | 0x2C60..=0x2C7F // Latin Extended-C
                | 0xA720..=0xA7FF // Latin Extended-D
                | 0xAB30..=0xAB6F) // Latin Extended-E
            && c != '\u{00D7}'
            && c != '\u{00F7}')
}

/// Apply merges and folds, then collapse runs of whitespace into one space.
pub fn canonicalize(codepoints: &[char], rules: &CanonicalRules) -> Vec<char> {
    let mut mapped = Vec::with_capacity(codepoints.len());
    for &c in codepoints {
        rules.map_char(c, &mut mapped);
    }
    let mut out = Vec::with_capacity(mapped.len());
    let mut in_space = false;
    for c in mapped {
        if c.is_whitespace() {
            if !in_space {
                out.push(' ');
            }
            in_space = true;
        } else {
            out.push(c);
            in_space = false;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chars(s: &str) -> Vec<char> {
        s.chars().collect()
    }

    #[test]
    fn shipped_tables_parse() {
        for lang in [
            Language::Dutch,
            Language::English,
            Language::Greek,
            Language::Spanish,
            Language::Other,
        ] {
            let rules = CanonicalRules::for_language(lang);
            for (from, to) in &rules.merge_table {
                assert!(!to.contains(from));
                assert_ne!(*from, UPPER_MARKER);
            }
        }
    }

    #[test]
    fn digits_fold_to_seven() {
        let rules = CanonicalRules::for_language(Language::English);
        assert_eq!(canonicalize(&chars("1984"), &rules), chars("7777"));
    }

    #[test]
    fn marker_is_not_a_digit() {
        let rules = CanonicalRules::for_language(Language::English);
        let input = vec![UPPER_MARKER, 'a'];
        assert_eq!(canonicalize(&input, &rules), input);
    }

    #[test]
    fn greek_folds_latin_letters() {
        let rules = CanonicalRules::for_language(Language::Greek);
        let input = vec![UPPER_MARKER, 't', 'h', 'i', 's'];
        assert_eq!(canonicalize(&input, &rules), vec![UPPER_MARKER, 's', 's', 's', 's']);
        // Greek letters untouched
        assert_eq!(canonicalize(&chars("τος"), &rules), chars("τος"));
    }

    #[test]
    fn english_keeps_latin_letters() {
        let rules = CanonicalRules::for_language(Language::English);
        assert_eq!(canonicalize(&chars("this"), &rules), chars("this"));
    }

    #[test]
    fn whitespace_runs_collapse() {
        let rules = CanonicalRules::for_language(Language::English);
        assert_eq!(canonicalize(&chars("a \t\n b"), &rules), chars("a b"));
        assert_eq!(canonicalize(&chars("a\u{200B} \u{00AD} b"), &rules), chars("a b"));
    }

    #[test]
    fn dashes_and_quotes_merge() {
        let rules = CanonicalRules::for_language(Language::English);
        assert_eq!(canonicalize(&chars("a—b–c"), &rules), chars("a–b–c"));
        assert_eq!(canonicalize(&chars("‘x’ “y”"), &rules), chars("'x' \"y\""));
    }

    #[test]
    fn rejects_chained_merges() {
        assert!(parse_merge_table("2014 2013\n2013 002D\n").is_err());
        assert!(parse_merge_table("2014 2013\n2014 002D\n").is_err());
        assert!(parse_merge_table("zz 2013\n").is_err());
    }

    #[test]
    fn language_from_id() {
        assert_eq!(Language::from_problem_id("EN001"), Language::English);
        assert_eq!(Language::from_problem_id("GR012"), Language::Greek);
        assert_eq!(Language::from_problem_id("DU010"), Language::Dutch);
        assert_eq!(Language::from_problem_id("SP003"), Language::Spanish);
        assert_eq!(Language::from_problem_id("X1"), Language::Other);
    }
}
