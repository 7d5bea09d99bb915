//! Sub-epoch composition, leakage and the known/unknown swap.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::Problem;
use crate::error::{Error, Result};

/// Exponentially decaying leakage rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LeakSchedule {
    pub leak0: f64,
    pub decay: f64,
}

impl LeakSchedule {
    pub fn rate(&self, sub_epoch: usize) -> f64 {
        leak_rate(self, sub_epoch)
    }
}

pub fn leak_rate(schedule: &LeakSchedule, sub_epoch: usize) -> f64 {
    schedule.leak0 * schedule.decay.powi(sub_epoch as i32)
}

/// Heads other than `owner` that receive this step's error; each is
/// included independently with probability `rate`.
pub fn leak_assignment<R: Rng + ?Sized>(owner: usize, heads: usize, rate: f64, rng: &mut R) -> Vec<usize> {
    if rate <= 0.0 {
        return Vec::new();
    }
    (0..heads)
        .filter(|&j| j != owner && rng.random::<f64>() < rate)
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TextMode {
    /// One text per author per sub-epoch, cycling through the author's texts.
    #[default]
    Sequential,
    /// All of an author's texts joined; every sub-epoch is a full epoch.
    Concatenated,
    /// Texts drawn cyclically until every author matches the largest corpus.
    Balanced,
}

/// One text in a sub-epoch, tagged with the head that owns it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StreamText {
    pub head: usize,
    pub symbols: Vec<usize>,
}

/// Compose the training stream for sub-epoch `sub_epoch`.
///
/// `authors[a]` holds the encoded texts of head `a`; the control corpus, if
/// given, is trained through head `authors.len()`. Author order is shuffled.
pub fn make_sub_epoch<R: Rng + ?Sized>(
    authors: &[Vec<Vec<usize>>],
    mode: TextMode,
    control: Option<&[usize]>,
    sub_epoch: usize,
    rng: &mut R,
) -> Result<Vec<StreamText>> {
    if let Some(a) = authors.iter().position(|texts| texts.is_empty()) {
        return Err(Error::Corpus(format!("author {a} has no training text")));
    }
    let longest = authors
        .iter()
        .map(|texts| texts.iter().map(Vec::len).sum::<usize>())
        .max()
        .unwrap_or(0);

    let mut stream: Vec<StreamText> = Vec::new();
    for (head, texts) in authors.iter().enumerate() {
        let k = texts.len();
        match mode {
            TextMode::Sequential => stream.push(StreamText { head, symbols: texts[sub_epoch % k].clone() }),
            TextMode::Concatenated => stream.push(StreamText { head, symbols: texts.concat() }),
            TextMode::Balanced => {
                let mut total = 0;
                let mut i = sub_epoch % k;
                while total < longest.max(1) {
                    let text = &texts[i % k];
                    if text.is_empty() && texts.iter().all(Vec::is_empty) {
                        break;
                    }
                    total += text.len();
                    stream.push(StreamText { head, symbols: text.clone() });
                    i += 1;
                }
            }
        }
    }
    stream.shuffle(rng);

    if let Some(control) = control.filter(|c| !c.is_empty()) {
        let texts: Vec<usize> = authors.iter().flatten().map(Vec::len).collect();
        let chunk = (texts.iter().sum::<usize>() / texts.len().max(1)).max(2);
        let start = (sub_epoch * chunk) % control.len();
        let symbols = control.iter().cycle().skip(start).take(chunk).copied().collect();
        let pos = rng.random_range(0..=stream.len());
        stream.insert(pos, StreamText { head: authors.len(), symbols });
    }
    Ok(stream)
}

/// Exchange known and unknown when the single known text is shorter than
/// `swap_ratio` times the unknown one. Returns whether a swap happened.
pub fn maybe_swap(problem: &Problem, swap_ratio: f64) -> (Problem, bool) {
    if problem.known.len() == 1 {
        let known = problem.known[0].chars().count() as f64;
        let unknown = problem.unknown.chars().count() as f64;
        if known < swap_ratio * unknown {
            let mut swapped = problem.clone();
            swapped.known = vec![problem.unknown.clone()];
            swapped.unknown = problem.known[0].clone();
            return (swapped, true);
        }
    }
    (problem.clone(), false)
}
