//! Evaluation against known answers: AUC, C@1 and their product.

use std::collections::BTreeMap;
use std::path::Path;

use log::warn;

use crate::error::{Error, Result};
use crate::scoring::VerdictSet;

/// Known answers keyed by problem id; `true` means same author.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TruthSet {
    pub labels: BTreeMap<String, bool>,
}

impl TruthSet {
    /// Parse `<problem-id> <Y|N>` lines, separated by spaces or tabs.
    pub fn parse(text: &str) -> Result<TruthSet> {
        let mut labels = BTreeMap::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim_start_matches('\u{feff}').trim();
            if line.is_empty() {
                continue;
            }
            let mut fields = line.split_whitespace();
            let (Some(id), Some(label), None) = (fields.next(), fields.next(), fields.next()) else {
                return Err(Error::Corpus(format!("truth line {}: expected `<id> <Y|N>`", n + 1)));
            };
            let label = match label {
                "Y" | "y" => true,
                "N" | "n" => false,
                other => {
                    return Err(Error::Corpus(format!("truth line {}: label {other:?} is not Y or N", n + 1)))
                }
            };
            if labels.insert(id.to_string(), label).is_some() {
                return Err(Error::Corpus(format!("truth line {}: duplicate id {id}", n + 1)));
            }
        }
        let truth = TruthSet { labels };
        let positives = truth.positives();
        if 2 * positives != truth.labels.len() {
            warn!("truth has {positives} positives out of {} problems", truth.labels.len());
        }
        Ok(truth)
    }

    pub fn load(path: &Path) -> Result<TruthSet> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        TruthSet::parse(&text).map_err(|e| Error::Format { path: path.into(), message: e.to_string() })
    }

    pub fn to_text(&self) -> String {
        self.labels
            .iter()
            .map(|(id, &y)| format!("{id} {}\n", if y { 'Y' } else { 'N' }))
            .collect()
    }

    pub fn positives(&self) -> usize {
        self.labels.values().filter(|&&y| y).count()
    }
}

/// Probability that a random positive outscores a random negative, ties
/// counting one half, computed from midranks.
pub fn auc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    assert_eq!(scores.len(), labels.len(), "one label per score");
    let n_pos = labels.iter().filter(|&&y| y).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::UndefinedAuc);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // 1-based ranks i+1 ..= j+1 share their mean
        let midrank = (i + j + 2) as f64 / 2.0;
        rank_sum_pos += midrank * order[i..=j].iter().filter(|&&k| labels[k]).count() as f64;
        i = j + 1;
    }
    let u = rank_sum_pos - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Ok(u / (n_pos * n_neg) as f64)
}

/// Counts behind a C@1 value.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AnswerCounts {
    pub n: usize,
    pub correct: usize,
    pub unanswered: usize,
}

impl AnswerCounts {
    /// Read each score as yes (> 0.5), no (< 0.5) or unanswered (exactly 0.5).
    pub fn tally(scores: &[f64], labels: &[bool]) -> AnswerCounts {
        assert_eq!(scores.len(), labels.len(), "one label per score");
        let mut counts = AnswerCounts { n: scores.len(), correct: 0, unanswered: 0 };
        for (&s, &y) in scores.iter().zip(labels) {
            if s == 0.5 {
                counts.unanswered += 1;
            } else if (s > 0.5) == y {
                counts.correct += 1;
            }
        }
        counts
    }

    /// `(n_c + n_u * n_c / n) / n`
    pub fn c_at_1(&self) -> f64 {
        let n = self.n as f64;
        let nc = self.correct as f64;
        let nu = self.unanswered as f64;
        (nc + nu * nc / n) / n
    }
}

pub fn c_at_1(scores: &[f64], labels: &[bool]) -> f64 {
    AnswerCounts::tally(scores, labels).c_at_1()
}

/// AUC times C@1.
pub fn final_score(scores: &[f64], labels: &[bool]) -> Result<f64> {
    Ok(auc(scores, labels)? * c_at_1(scores, labels))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub auc: f64,
    pub c_at_1: f64,
    pub score: f64,
}

impl Evaluation {
    pub fn to_tsv(&self) -> String {
        format!("{:.4}\t{:.4}\t{:.4}", self.auc, self.c_at_1, self.score)
    }
}

/// Evaluate answers against truth; every truth problem must be answered.
pub fn evaluate(answers: &VerdictSet, truth: &TruthSet) -> Result<Evaluation> {
    let mut scores = Vec::with_capacity(truth.labels.len());
    let mut labels = Vec::with_capacity(truth.labels.len());
    for (id, &y) in &truth.labels {
        let s = answers
            .scores
            .get(id)
            .ok_or_else(|| Error::ProblemMismatch(format!("no answer for problem {id}")))?;
        scores.push(*s);
        labels.push(y);
    }
    if answers.len() != truth.labels.len() {
        warn!("{} answers for {} truth labels", answers.len(), truth.labels.len());
    }
    let auc = auc(&scores, &labels)?;
    let c = c_at_1(&scores, &labels);
    Ok(Evaluation { auc, c_at_1: c, score: auc * c })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Exhaustive pair counting, ties worth one half.
    fn auc_pairs(scores: &[f64], labels: &[bool]) -> f64 {
        let mut credit = 0.0;
        let mut pairs = 0.0;
        for (i, &yi) in labels.iter().enumerate() {
            for (j, &yj) in labels.iter().enumerate() {
                if yi && !yj {
                    pairs += 1.0;
                    if scores[i] > scores[j] {
                        credit += 1.0;
                    } else if scores[i] == scores[j] {
                        credit += 0.5;
                    }
                }
            }
        }
        credit / pairs
    }

    #[test]
    fn auc_examples() {
        assert_eq!(auc(&[0.9, 0.8, 0.3], &[true, true, false]).unwrap(), 1.0);
        assert_eq!(auc(&[0.9, 0.6, 0.7, 0.2], &[true, true, false, false]).unwrap(), 0.75);
        assert_eq!(auc(&[0.4; 6], &[true, false, true, false, true, false]).unwrap(), 0.5);
    }

    #[test]
    fn auc_one_class_is_undefined() {
        assert!(matches!(auc(&[0.1, 0.2], &[true, true]), Err(Error::UndefinedAuc)));
        assert!(matches!(auc(&[0.1, 0.2], &[false, false]), Err(Error::UndefinedAuc)));
    }

    fn answers(n: usize, correct: usize, unanswered: usize) -> (Vec<f64>, Vec<bool>) {
        let mut scores = Vec::new();
        for i in 0..n {
            scores.push(if i < correct {
                0.9
            } else if i < correct + unanswered {
                0.5
            } else {
                0.1
            });
        }
        (scores, vec![true; n])
    }

    #[test]
    fn c_at_1_examples() {
        let (s, y) = answers(100, 70, 0);
        assert_eq!(c_at_1(&s, &y), 0.70);
        let (s, y) = answers(100, 70, 10);
        // (70 + 10 * 70 / 100) / 100
        assert_eq!(c_at_1(&s, &y), 0.77);
        assert_eq!(c_at_1(&[0.5; 8], &[true, false, true, false, true, false, true, false]), 0.0);
    }

    #[test]
    fn final_score_examples() {
        assert!((0.81f64 * 0.76 - 0.6156).abs() < 1e-12);
        assert_eq!(final_score(&[0.9, 0.1], &[true, false]).unwrap(), 1.0);
    }

    #[test]
    fn random_scores_score_about_a_quarter() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let labels: Vec<bool> = (0..2000).map(|i| i % 2 == 0).collect();
        let mut total = 0.0;
        for _ in 0..20 {
            let scores: Vec<f64> = (0..labels.len()).map(|_| rng.random()).collect();
            total += final_score(&scores, &labels).unwrap();
        }
        assert!((total / 20.0 - 0.25).abs() < 0.02);
    }

    #[test]
    fn truth_parsing() {
        let t = TruthSet::parse("EN001 Y\nEN002\tN\n\n").unwrap();
        assert_eq!(t.labels.len(), 2);
        assert!(t.labels["EN001"]);
        assert!(!t.labels["EN002"]);
        assert!(TruthSet::parse("EN001 maybe\n").is_err());
        assert!(TruthSet::parse("EN001 Y\nEN001 N\n").is_err());
        assert_eq!(TruthSet::parse(&t.to_text()).unwrap(), t);
    }

    #[test]
    fn evaluate_requires_every_answer() {
        let truth = TruthSet::parse("A Y\nB N\n").unwrap();
        let answers = VerdictSet::from_answers("A 0.9\n").unwrap();
        assert!(evaluate(&answers, &truth).is_err());
        let answers = VerdictSet::from_answers("A 0.9\nB 0.5\n").unwrap();
        let e = evaluate(&answers, &truth).unwrap();
        assert_eq!(e.auc, 1.0);
        assert_eq!(e.c_at_1, 0.75);
    }

    proptest! {
        #[test]
        fn midrank_matches_pair_counting(
            data in prop::collection::vec((0u8..6, any::<bool>()), 2..=12)
        ) {
            let scores: Vec<f64> = data.iter().map(|(s, _)| *s as f64 / 5.0).collect();
            let labels: Vec<bool> = data.iter().map(|(_, y)| *y).collect();
            match auc(&scores, &labels) {
                Ok(a) => prop_assert_eq!(a, auc_pairs(&scores, &labels)),
                Err(_) => prop_assert!(labels.iter().all(|&y| y) || labels.iter().all(|&y| !y)),
            }
        }

        #[test]
        fn auc_invariant_under_increasing_maps(
            data in prop::collection::vec((0.0f64..1.0, any::<bool>()), 2..30)
        ) {
            let scores: Vec<f64> = data.iter().map(|(s, _)| *s).collect();
            let labels: Vec<bool> = data.iter().map(|(_, y)| *y).collect();
            if let Ok(a) = auc(&scores, &labels) {
                let mapped: Vec<f64> = scores.iter().map(|s| (3.0 * s).exp()).collect();
                prop_assert_eq!(a, auc(&mapped, &labels).unwrap());
            }
        }

        #[test]
        fn c_at_1_bounds(data in prop::collection::vec((0u8..3, any::<bool>()), 1..50)) {
            let scores: Vec<f64> = data.iter().map(|(s, _)| [0.2, 0.5, 0.8][*s as usize]).collect();
            let labels: Vec<bool> = data.iter().map(|(_, y)| *y).collect();
            let counts = AnswerCounts::tally(&scores, &labels);
            let c = counts.c_at_1();
            prop_assert!(c <= (counts.correct + counts.unanswered) as f64 / counts.n as f64 + 1e-12);
            if counts.unanswered == 0 {
                prop_assert_eq!(c, counts.correct as f64 / counts.n as f64);
            }
        }
    }
}
