//! Synthetic verification corpora.
//!
//! Every synthetic author is a first-order Markov chain over a small
//! alphabet. All chains share a random base transition matrix; each author
//! adds its own Gaussian perturbation to the logits, scaled by
//! `separation`. With `separation = 0` all authors are indistinguishable.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::corpus::{Corpus, Problem};
use crate::error::{Error, Result};
use crate::metrics::TruthSet;
use crate::preprocess::Language;

/// Characters the synthetic chains emit.
pub const SYNTH_SYMBOLS: &[char] = &['e', 't', 'a', 'o', 'i', 'n', 's', 'h', 'r', 'd', 'l', ' '];

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub authors: usize,
    pub problems: usize,
    pub chars_per_doc: usize,
    /// Scale of each author's deviation from the shared chain.
    pub separation: f64,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec { authors: 2, problems: 20, chars_per_doc: 3000, separation: 1.0, seed: 1 }
    }
}

/// Row-stochastic transition matrix of one author.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkovChain {
    pub transitions: Vec<Vec<f64>>,
}

impl MarkovChain {
    pub fn generate<R: Rng + ?Sized>(&self, len: usize, rng: &mut R) -> String {
        let k = self.transitions.len();
        let mut state = rng.random_range(0..k);
        let mut out = String::with_capacity(len);
        for _ in 0..len {
            out.push(SYNTH_SYMBOLS[state]);
            let u: f64 = rng.random();
            let row = &self.transitions[state];
            let mut acc = 0.0;
            state = row
                .iter()
                .position(|p| {
                    acc += p;
                    u < acc
                })
                .unwrap_or(k - 1);
        }
        out
    }
}

fn softmax_row(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Author chains for `spec`.
pub fn author_chains(spec: &SynthSpec, rng: &mut ChaCha8Rng) -> Vec<MarkovChain> {
    let k = SYNTH_SYMBOLS.len();
    let base_dist = Normal::new(0.0, 1.5).expect("valid sigma");
    let base: Vec<Vec<f64>> = (0..k).map(|_| (0..k).map(|_| base_dist.sample(rng)).collect()).collect();
    (0..spec.authors)
        .map(|_| {
            let transitions = base
                .iter()
                .map(|row| {
                    let logits: Vec<f64> = row
                        .iter()
                        .map(|&b| {
                            let z: f64 = StandardNormal.sample(rng);
                            b + spec.separation * z
                        })
                        .collect();
                    softmax_row(&logits)
                })
                .collect();
            MarkovChain { transitions }
        })
        .collect()
}

/// Build a corpus with exactly half same-author problems.
///
/// Problem `i` has one known text from author `i mod authors`. Positive
/// problems draw the unknown text from the same chain, negative ones from a
/// different author.
pub fn generate_synthetic(spec: &SynthSpec) -> Result<Corpus> {
    if spec.authors < 2 {
        return Err(Error::Config(format!("synthetic corpus needs at least 2 authors, got {}", spec.authors)));
    }
    if spec.problems < 2 || !spec.problems.is_multiple_of(2) {
        return Err(Error::Config(format!("problem count must be even and >= 2, got {}", spec.problems)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let chains = author_chains(spec, &mut rng);

    let mut labels: Vec<bool> = (0..spec.problems).map(|i| i < spec.problems / 2).collect();
    labels.shuffle(&mut rng);

    let mut problems = Vec::with_capacity(spec.problems);
    let mut truth = TruthSet::default();
    for (i, &same) in labels.iter().enumerate() {
        let id = format!("SY{:03}", i + 1);
        let author = i % spec.authors;
        let other = if same { author } else { (author + rng.random_range(1..spec.authors)) % spec.authors };
        let known = chains[author].generate(spec.chars_per_doc, &mut rng);
        let unknown = chains[other].generate(spec.chars_per_doc, &mut rng);
        problems.push(Problem { id: id.clone(), language: Language::Other, known: vec![known], unknown });
        truth.labels.insert(id, same);
    }
    Ok(Corpus { language: Language::Other, problems, control: None, truth: Some(truth) })
}
