//! From cross entropies to per-problem probabilities.
//!
//! Scores are made comparable by subtracting each document's mean entropy
//! and scaling each head to unit spread. Each problem's own document is then
//! ranked within its head's row, and percentiles are mapped linearly so the
//! median lands on 0.5.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use log::warn;

use crate::error::{Error, Result};
use crate::rnn::{all_heads_cross_entropy, ModelParams};

/// Smallest spread used when mapping percentiles onto scores.
const MIN_SPREAD: f64 = 1e-12;

/// Row standard deviations below this are treated as zero.
const MIN_STD: f64 = 1e-12;

/// Heads x documents, bits/char; `None` marks a document too short to score.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreMatrix {
    pub entries: Vec<Vec<Option<f64>>>,
    pub head_ids: Vec<String>,
    pub doc_ids: Vec<String>,
}

impl ScoreMatrix {
    pub fn rows(&self) -> usize {
        self.entries.len()
    }

    pub fn cols(&self) -> usize {
        self.doc_ids.len()
    }

    pub fn get(&self, head: usize, doc: usize) -> Option<f64> {
        self.entries[head][doc]
    }

    /// Tab-separated dump with a header row of document ids.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("head");
        for d in &self.doc_ids {
            let _ = write!(out, "\t{d}");
        }
        out.push('\n');
        for (id, row) in self.head_ids.iter().zip(&self.entries) {
            out.push_str(id);
            for v in row {
                match v {
                    Some(v) => {
                        let _ = write!(out, "\t{v:.6}");
                    }
                    None => out.push_str("\tNA"),
                }
            }
            out.push('\n');
        }
        out
    }
}

/// Cross entropy of every unknown document under every author head.
///
/// Documents too short to score are recorded as missing.
pub fn entropy_matrix(
    params: &ModelParams,
    head_ids: &[String],
    docs: &[(String, Vec<usize>)],
    skip: usize,
) -> Result<ScoreMatrix> {
    let heads = params.num_author_heads();
    if head_ids.len() != heads {
        return Err(Error::ProblemMismatch(format!(
            "{} head ids for {heads} author heads",
            head_ids.len()
        )));
    }
    let mut entries = vec![vec![None; docs.len()]; heads];
    for (j, (id, doc)) in docs.iter().enumerate() {
        match all_heads_cross_entropy(doc, params, skip) {
            Ok(bits) => {
                for (row, b) in entries.iter_mut().zip(bits) {
                    row[j] = Some(b);
                }
            }
            Err(Error::InsufficientText { len, .. }) => {
                warn!("document {id} has only {len} symbols; scored as worst rank");
            }
            Err(e) => return Err(e),
        }
    }
    Ok(ScoreMatrix {
        entries,
        head_ids: head_ids.to_vec(),
        doc_ids: docs.iter().map(|(id, _)| id.clone()).collect(),
    })
}

/// Subtract each column's mean, then divide each row by its population
/// standard deviation. Missing entries are ignored and stay missing.
pub fn normalize(matrix: &ScoreMatrix) -> Result<ScoreMatrix> {
    let cols = matrix.cols();
    if cols < 2 {
        return Err(Error::TooFewDocuments(cols));
    }
    let mut entries = matrix.entries.clone();
    for j in 0..cols {
        let present: Vec<f64> = entries.iter().filter_map(|r| r[j]).collect();
        if present.is_empty() {
            continue;
        }
        let mean = present.iter().sum::<f64>() / present.len() as f64;
        for row in entries.iter_mut() {
            if let Some(v) = row[j].as_mut() {
                *v -= mean;
            }
        }
    }
    for row in entries.iter_mut() {
        let present: Vec<f64> = row.iter().flatten().copied().collect();
        if present.is_empty() {
            continue;
        }
        let n = present.len() as f64;
        let mean = present.iter().sum::<f64>() / n;
        let std = (present.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
        for v in row.iter_mut().flatten() {
            *v = if std < MIN_STD { 0.0 } else { *v / std };
        }
    }
    Ok(ScoreMatrix { entries, head_ids: matrix.head_ids.clone(), doc_ids: matrix.doc_ids.clone() })
}

/// Percentile of each problem's own document within its head's row.
///
/// Rank 1 is the lowest entropy; ties share their mean rank and missing
/// entries rank after every present one. A missing own entry gets rank `M`.
/// The percentile is `1 - (rank - 0.5) / M`.
pub fn rank_unknowns(matrix: &ScoreMatrix) -> Result<Vec<f64>> {
    let m = matrix.cols();
    if matrix.rows() != m {
        return Err(Error::ProblemMismatch(format!(
            "rank pairing needs a square matrix, got {} x {m}",
            matrix.rows()
        )));
    }
    let mf = m as f64;
    Ok((0..m)
        .map(|i| {
            let row = &matrix.entries[i];
            let rank = match row[i] {
                None => mf,
                Some(own) => {
                    let (mut less, mut equal) = (0usize, 0usize);
                    for v in row.iter().flatten() {
                        if *v < own {
                            less += 1;
                        } else if *v == own {
                            equal += 1;
                        }
                    }
                    // midrank of the tie group containing `own`
                    less as f64 + (equal as f64 + 1.0) / 2.0
                }
            };
            1.0 - (rank - 0.5) / mf
        })
        .collect())
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Map percentiles linearly so their median sits at 0.5 and the farthest
/// one reaches 0 or 1. Values within `radius` of the median become 0.5.
pub fn align_scores(percentiles: &[f64], radius: f64) -> Vec<f64> {
    if percentiles.is_empty() {
        return Vec::new();
    }
    let m = median(percentiles);
    let spread = percentiles
        .iter()
        .map(|p| (p - m).abs())
        .fold(MIN_SPREAD, f64::max);
    percentiles
        .iter()
        .map(|&p| {
            if (p - m).abs() <= radius {
                0.5
            } else {
                (0.5 + 0.5 * (p - m) / spread).clamp(0.0, 1.0)
            }
        })
        .collect()
}

/// Final scores keyed by problem id.
#[derive(Debug, Clone, PartialEq)]
pub struct VerdictSet {
    pub scores: BTreeMap<String, f64>,
}

impl VerdictSet {
    pub fn new(ids: &[String], scores: &[f64]) -> VerdictSet {
        VerdictSet { scores: ids.iter().cloned().zip(scores.iter().copied()).collect() }
    }

    /// Align `percentiles` and attach problem ids.
    pub fn aligned(ids: &[String], percentiles: &[f64], radius: f64) -> VerdictSet {
        VerdictSet::new(ids, &align_scores(percentiles, radius))
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    /// At most `ceil(M/2)` scores on either side of 0.5.
    pub fn is_balanced(&self) -> bool {
        let limit = self.len().div_ceil(2);
        let above = self.scores.values().filter(|&&s| s > 0.5).count();
        let below = self.scores.values().filter(|&&s| s < 0.5).count();
        above <= limit && below <= limit
    }

    /// `<problem-id> <score>` lines, scores to three decimals.
    pub fn to_answers(&self) -> String {
        self.scores.iter().map(|(id, s)| format!("{id} {s:.3}\n")).collect()
    }

    pub fn from_answers(text: &str) -> Result<VerdictSet> {
        let mut scores = BTreeMap::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let mut fields = line.split_whitespace();
            let (Some(id), Some(score), None) = (fields.next(), fields.next(), fields.next()) else {
                return Err(Error::Corpus(format!("answers line {}: expected `<id> <score>`", n + 1)));
            };
            let score: f64 = score
                .parse()
                .map_err(|_| Error::Corpus(format!("answers line {}: bad score {score:?}", n + 1)))?;
            if scores.insert(id.to_string(), score).is_some() {
                return Err(Error::Corpus(format!("answers line {}: duplicate id {id}", n + 1)));
            }
        }
        Ok(VerdictSet { scores })
    }
}

/// Mean score per problem across runs, re-aligned to the median.
pub fn ensemble_average(sets: &[VerdictSet], radius: f64) -> Result<VerdictSet> {
    let first = sets.first().ok_or_else(|| Error::ProblemMismatch("no verdict sets".into()))?;
    for (k, set) in sets.iter().enumerate().skip(1) {
        if set.scores.keys().ne(first.scores.keys()) {
            return Err(Error::ProblemMismatch(format!("verdict set {k} covers different problems")));
        }
    }
    let ids: Vec<String> = first.scores.keys().cloned().collect();
    let means: Vec<f64> = ids
        .iter()
        .map(|id| sets.iter().map(|s| s.scores[id]).sum::<f64>() / sets.len() as f64)
        .collect();
    Ok(VerdictSet::aligned(&ids, &means, radius))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn matrix(rows: &[&[f64]]) -> ScoreMatrix {
        let m = rows[0].len();
        ScoreMatrix {
            entries: rows.iter().map(|r| r.iter().map(|&v| Some(v)).collect()).collect(),
            head_ids: (0..rows.len()).map(|i| format!("h{i}")).collect(),
            doc_ids: (0..m).map(|j| format!("d{j}")).collect(),
        }
    }

    fn values(m: &ScoreMatrix) -> Vec<Vec<f64>> {
        m.entries.iter().map(|r| r.iter().map(|v| v.unwrap()).collect()).collect()
    }

    #[test]
    fn normalize_hand_example() {
        let n = normalize(&matrix(&[&[2.0, 4.0], &[4.0, 2.0]])).unwrap();
        assert_eq!(values(&n), vec![vec![-1.0, 1.0], vec![1.0, -1.0]]);
    }

    #[test]
    fn normalize_constant_matrix() {
        let n = normalize(&matrix(&[&[3.0, 3.0, 3.0], &[3.0, 3.0, 3.0]])).unwrap();
        assert!(values(&n).iter().flatten().all(|&v| v == 0.0));
    }

    #[test]
    fn normalize_needs_two_documents() {
        assert!(matches!(normalize(&matrix(&[&[1.0]])), Err(Error::TooFewDocuments(1))));
    }

    #[test]
    fn rank_examples() {
        let best = matrix(&[&[1.0, 2.0, 3.0, 4.0], &[0.0; 4], &[0.0; 4], &[0.0; 4]]);
        assert_eq!(rank_unknowns(&best).unwrap()[0], 0.875);
        let worst = matrix(&[&[9.0, 2.0, 3.0, 4.0], &[0.0; 4], &[0.0; 4], &[0.0; 4]]);
        assert_eq!(rank_unknowns(&worst).unwrap()[0], 0.125);
        let tied = matrix(&[&[1.0; 4], &[1.0; 4], &[1.0; 4], &[1.0; 4]]);
        assert_eq!(rank_unknowns(&tied).unwrap(), vec![0.5; 4]);
    }

    #[test]
    fn missing_own_entry_ranks_last() {
        let mut m = matrix(&[&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]]);
        m.entries[0][0] = None;
        m.entries[1][0] = None;
        let p = rank_unknowns(&m).unwrap();
        assert_abs_diff_eq!(p[0], 1.0 - 2.5 / 3.0, epsilon = 1e-15);
        // a missing competitor ranks after the present entries
        assert_abs_diff_eq!(p[1], 1.0 - 0.5 / 3.0, epsilon = 1e-15);
    }

    #[test]
    fn align_example() {
        let s = align_scores(&[0.875, 0.625, 0.375, 0.125], 0.0);
        let expected = [1.0, 2.0 / 3.0, 1.0 / 3.0, 0.0];
        for (a, b) in s.iter().zip(expected) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-15);
        }
    }

    #[test]
    fn align_equal_percentiles() {
        assert_eq!(align_scores(&[0.3; 5], 0.0), vec![0.5; 5]);
    }

    #[test]
    fn align_radius() {
        let s = align_scores(&[0.9, 0.51, 0.5, 0.49, 0.1], 0.02);
        assert_eq!(&s[1..4], &[0.5, 0.5, 0.5]);
        assert_eq!(s[0], 1.0);
        assert_eq!(s[4], 0.0);
    }

    #[test]
    fn ensemble_identities() {
        let ids: Vec<String> = ["a", "b", "c", "d"].iter().map(|s| s.to_string()).collect();
        let set = VerdictSet::aligned(&ids, &[0.875, 0.625, 0.375, 0.125], 0.0);
        for k in 1..=3 {
            let avg = ensemble_average(&vec![set.clone(); k], 0.0).unwrap();
            for id in &ids {
                assert_abs_diff_eq!(avg.scores[id], set.scores[id], epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn ensemble_mean_before_alignment() {
        let ids = vec!["a".to_string(), "b".to_string()];
        let x = VerdictSet::new(&ids, &[0.2, 0.8]);
        let y = VerdictSet::new(&ids, &[0.8, 0.2]);
        let avg = ensemble_average(&[x, y], 0.0).unwrap();
        assert_eq!(avg.scores["a"], 0.5);
        assert_eq!(avg.scores["b"], 0.5);
    }

    #[test]
    fn ensemble_rejects_mismatched_sets() {
        let x = VerdictSet::new(&["a".to_string()], &[0.2]);
        let y = VerdictSet::new(&["b".to_string()], &[0.2]);
        assert!(matches!(ensemble_average(&[x, y], 0.0), Err(Error::ProblemMismatch(_))));
    }

    #[test]
    fn answers_format() {
        let set = VerdictSet::new(&["EN002".to_string(), "EN001".to_string()], &[0.25, 2.0 / 3.0]);
        let text = set.to_answers();
        assert_eq!(text, "EN001 0.667\nEN002 0.250\n");
        let back = VerdictSet::from_answers(&text).unwrap();
        assert_eq!(back.scores["EN001"], 0.667);
        assert!(VerdictSet::from_answers("EN001\n").is_err());
        assert!(VerdictSet::from_answers("EN001 x\n").is_err());
    }

    #[test]
    fn matrix_tsv() {
        let mut m = matrix(&[&[1.0, 2.0]]);
        m.entries[0][1] = None;
        assert_eq!(m.to_tsv(), "head\td0\td1\nh0\t1.000000\tNA\n");
    }

    proptest! {
        #[test]
        fn column_offsets_do_not_change_percentiles(
            raw in prop::collection::vec(0.0f64..5.0, 25),
            col in 0usize..5,
            offset in -3.0f64..3.0,
        ) {
            let rows: Vec<Vec<f64>> = raw.chunks(5).map(|c| c.to_vec()).collect();
            let refs: Vec<&[f64]> = rows.iter().map(|r| r.as_slice()).collect();
            let base = matrix(&refs);
            let mut shifted = base.clone();
            for row in shifted.entries.iter_mut() {
                *row[col].as_mut().unwrap() += offset;
            }
            let a = normalize(&base).unwrap();
            let b = normalize(&shifted).unwrap();
            for (ra, rb) in values(&a).iter().zip(values(&b).iter()) {
                for (x, y) in ra.iter().zip(rb) {
                    prop_assert!((x - y).abs() < 1e-9);
                }
            }
        }

        #[test]
        fn alignment_is_monotone_and_balanced(p in prop::collection::vec(0.0f64..1.0, 1..40), radius in 0.0f64..0.1) {
            let s = align_scores(&p, radius);
            for i in 0..p.len() {
                prop_assert!((0.0..=1.0).contains(&s[i]));
                for j in 0..p.len() {
                    if p[i] > p[j] {
                        prop_assert!(s[i] >= s[j]);
                    }
                }
            }
            let ids: Vec<String> = (0..p.len()).map(|i| format!("{i:03}")).collect();
            prop_assert!(VerdictSet::new(&ids, &s).is_balanced());
        }

        #[test]
        fn monotone_transform_keeps_order(p in prop::collection::vec(0.01f64..1.0, 2..30)) {
            let a = align_scores(&p, 0.0);
            let q: Vec<f64> = p.iter().map(|x| x.powi(3) + 2.0 * x).collect();
            let b = align_scores(&q, 0.0);
            for i in 0..p.len() {
                for j in 0..p.len() {
                    if a[i] > a[j] + 1e-12 {
                        prop_assert!(b[i] >= b[j]);
                    }
                }
            }
        }
    }
}
