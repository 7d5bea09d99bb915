//! Verification problem corpora on disk.
//!
//! A corpus directory holds one subdirectory per problem, each with
//! `known01.txt` .. `knownNN.txt` and `unknown.txt`, plus an optional
//! `truth.txt` (`<id> <Y|N>` per line) and `contents.json` naming the
//! language.

use std::collections::HashSet;
use std::fs;
use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::metrics::TruthSet;
use crate::preprocess::{decode_utf8, Language};

/// One verification question.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Problem {
    pub id: String,
    pub language: Language,
    pub known: Vec<String>,
    pub unknown: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub language: Language,
    pub problems: Vec<Problem>,
    pub control: Option<String>,
    pub truth: Option<TruthSet>,
}

impl Corpus {
    pub fn validate(&self) -> Result<()> {
        let mut seen = HashSet::new();
        for p in &self.problems {
            if !seen.insert(p.id.as_str()) {
                return Err(Error::Corpus(format!("duplicate problem id {}", p.id)));
            }
            if p.known.is_empty() {
                return Err(Error::Corpus(format!("problem {} has no known texts", p.id)));
            }
        }
        Ok(())
    }

    pub fn ids(&self) -> Vec<String> {
        self.problems.iter().map(|p| p.id.clone()).collect()
    }

    /// Write the corpus as one directory per problem.
    pub fn write_dir(&self, root: &Path) -> Result<()> {
        fs::create_dir_all(root).map_err(|e| Error::io(root, e))?;
        for p in &self.problems {
            let dir = root.join(&p.id);
            fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
            for (i, text) in p.known.iter().enumerate() {
                let path = dir.join(format!("known{:02}.txt", i + 1));
                fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
            }
            let path = dir.join("unknown.txt");
            fs::write(&path, &p.unknown).map_err(|e| Error::io(&path, e))?;
        }
        let contents = root.join("contents.json");
        let json = serde_json::json!({
            "language": self.language.to_string(),
            "problems": self.ids(),
        });
        fs::write(&contents, format!("{json:#}\n")).map_err(|e| Error::io(&contents, e))?;
        if let Some(truth) = &self.truth {
            let path = root.join("truth.txt");
            fs::write(&path, truth.to_text()).map_err(|e| Error::io(&path, e))?;
        }
        Ok(())
    }
}

#[derive(Deserialize)]
struct Contents {
    language: Option<String>,
}

fn read_text(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let text = decode_utf8(&bytes).map_err(|e| Error::Format { path: path.into(), message: e.to_string() })?;
    Ok(text.trim_start_matches('\u{feff}').to_string())
}

/// Load a corpus directory. `language` overrides `contents.json` and the
/// problem-id prefix.
pub fn load_corpus(root: &Path, language: Option<Language>) -> Result<Corpus> {
    let entries = fs::read_dir(root).map_err(|e| Error::io(root, e))?;
    let mut dirs: Vec<_> = entries
        .filter_map(|e| e.ok())
        .filter(|e| e.path().is_dir())
        .collect();
    dirs.sort_by_key(|e| e.file_name());

    let contents_lang = match fs::read_to_string(root.join("contents.json")) {
        Ok(text) => serde_json::from_str::<Contents>(&text)
            .ok()
            .and_then(|c| c.language)
            .and_then(|l| l.parse().ok()),
        Err(_) => None,
    };

    let mut problems = Vec::new();
    for entry in dirs {
        let dir = entry.path();
        let id = entry.file_name().to_string_lossy().into_owned();
        let unknown_path = dir.join("unknown.txt");
        if !unknown_path.is_file() {
            return Err(Error::Corpus(format!("{}: missing unknown.txt", dir.display())));
        }
        let mut known_paths: Vec<_> = fs::read_dir(&dir)
            .map_err(|e| Error::io(&dir, e))?
            .filter_map(|e| e.ok())
            .map(|e| e.path())
            .filter(|p| {
                p.is_file()
                    && p.extension().is_some_and(|x| x == "txt")
                    && p.file_name().is_some_and(|n| n.to_string_lossy().starts_with("known"))
            })
            .collect();
        known_paths.sort();
        if known_paths.is_empty() {
            return Err(Error::Corpus(format!("{}: no known*.txt files", dir.display())));
        }
        let known = known_paths.iter().map(|p| read_text(p)).collect::<Result<Vec<_>>>()?;
        let unknown = read_text(&unknown_path)?;
        let lang = language.or(contents_lang).unwrap_or_else(|| Language::from_problem_id(&id));
        problems.push(Problem { id, language: lang, known, unknown });
    }
    if problems.is_empty() {
        return Err(Error::Corpus(format!("{}: no problem directories", root.display())));
    }

    let language = language
        .or(contents_lang)
        .unwrap_or_else(|| problems[0].language);
    let truth_path = root.join("truth.txt");
    let truth = if truth_path.is_file() { Some(TruthSet::load(&truth_path)?) } else { None };
    let corpus = Corpus { language, problems, control: None, truth };
    corpus.validate()?;
    Ok(corpus)
}

/// Read a plain-text control corpus.
pub fn load_control(path: &Path) -> Result<String> {
    read_text(path)
}
