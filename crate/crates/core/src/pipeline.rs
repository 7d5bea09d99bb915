//! End-to-end runs: preprocess a corpus, train and score each ensemble
//! member, and average the members' verdicts.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use log::info;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, Problem};
use crate::error::{Error, Result};
use crate::metrics::{evaluate, Evaluation};
use crate::preprocess::{
    build_alphabet, canonical_text, encode, Alphabet, CanonicalRules, DEFAULT_THRESHOLD,
};
use crate::rnn::ModelParams;
use crate::scoring::{
    ensemble_average, entropy_matrix, normalize, rank_unknowns, ScoreMatrix, VerdictSet,
};
use crate::trainer::{maybe_swap, train_run, Direction, TrainConfig, TrainingLog, TrainingSet};

/// A set of training runs whose verdicts are averaged.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleSpec {
    pub members: Vec<TrainConfig>,
    /// Radius around the median mapped to exactly 0.5; defaults per language.
    #[serde(default)]
    pub uncertainty_radius: Option<f64>,
    #[serde(default)]
    pub corpus: Option<PathBuf>,
    #[serde(default)]
    pub output: Option<PathBuf>,
}

impl EnsembleSpec {
    pub fn validate(&self) -> Result<()> {
        if self.members.is_empty() {
            return Err(Error::Config("ensemble has no members".into()));
        }
        let mut seeds = HashSet::new();
        for (i, m) in self.members.iter().enumerate() {
            m.validate().map_err(|e| Error::Config(format!("member {i}: {e}")))?;
            if !seeds.insert(m.seed) {
                return Err(Error::Config(format!("member {i} repeats seed {}", m.seed)));
            }
        }
        if let Some(r) = self.uncertainty_radius {
            if !(r >= 0.0) {
                return Err(Error::Config(format!("uncertainty_radius must be >= 0, got {r}")));
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<EnsembleSpec> {
        let spec: EnsembleSpec = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<EnsembleSpec> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        EnsembleSpec::from_json(&text).map_err(|e| Error::Format { path: path.into(), message: e.to_string() })
    }
}

/// A corpus after canonicalization, with its induced alphabet.
#[derive(Debug, Clone)]
pub struct PreparedCorpus {
    pub corpus: Corpus,
    pub rules: CanonicalRules,
    pub alphabet: Alphabet,
}

impl PreparedCorpus {
    /// Induce one alphabet from every known, unknown and control text.
    pub fn new(corpus: Corpus) -> Result<PreparedCorpus> {
        corpus.validate()?;
        let rules = CanonicalRules::for_language(corpus.language);
        let mut texts: Vec<Vec<char>> = Vec::new();
        for p in &corpus.problems {
            texts.extend(p.known.iter().map(|k| canonical_text(k, &rules)));
            texts.push(canonical_text(&p.unknown, &rules));
        }
        if let Some(control) = &corpus.control {
            texts.push(canonical_text(control, &rules));
        }
        let alphabet = build_alphabet(&texts, DEFAULT_THRESHOLD)?;
        Ok(PreparedCorpus { corpus, rules, alphabet })
    }

    /// Reuse an existing alphabet (for scoring with a saved model).
    pub fn with_alphabet(corpus: Corpus, alphabet: Alphabet) -> Result<PreparedCorpus> {
        corpus.validate()?;
        let rules = CanonicalRules::for_language(corpus.language);
        Ok(PreparedCorpus { corpus, rules, alphabet })
    }

    pub fn encode_text(&self, id: &str, text: &str) -> Vec<usize> {
        encode(id, &canonical_text(text, &self.rules), &self.alphabet).indices
    }

    /// Problems after the known/unknown swap rule of `config`.
    pub fn swapped_problems(&self, config: &TrainConfig) -> Vec<Problem> {
        self.corpus
            .problems
            .iter()
            .map(|p| {
                let (q, swapped) = maybe_swap(p, config.swap_ratio);
                if swapped {
                    info!("problem {}: training on the unknown text", p.id);
                }
                q
            })
            .collect()
    }

    pub fn training_set(&self, config: &TrainConfig) -> TrainingSet {
        let problems = self.swapped_problems(config);
        TrainingSet {
            vocab_size: self.alphabet.len(),
            authors: problems
                .iter()
                .map(|p| p.known.iter().map(|k| self.encode_text(&p.id, k)).collect())
                .collect(),
            control: self.corpus.control.as_ref().map(|c| self.encode_text("control", c)),
        }
    }

    /// Encoded documents to score, one per problem, in problem order.
    pub fn scoring_docs(&self, config: &TrainConfig) -> Vec<(String, Vec<usize>)> {
        self.swapped_problems(config)
            .iter()
            .map(|p| {
                let mut doc = self.encode_text(&p.id, &p.unknown);
                if config.direction == Direction::Backward {
                    doc.reverse();
                }
                (p.id.clone(), doc)
            })
            .collect()
    }

    pub fn uncertainty_radius(&self, explicit: Option<f64>) -> f64 {
        explicit.unwrap_or_else(|| self.corpus.language.default_uncertainty_radius())
    }
}

/// Everything one member produces.
#[derive(Debug, Clone)]
pub struct MemberResult {
    pub config: TrainConfig,
    pub params: ModelParams,
    pub log: TrainingLog,
    pub raw: ScoreMatrix,
    pub normalized: ScoreMatrix,
    pub percentiles: Vec<f64>,
    pub verdicts: VerdictSet,
}

/// Score a trained model against the prepared corpus.
pub fn score_model(
    prepared: &PreparedCorpus,
    params: &ModelParams,
    config: &TrainConfig,
    radius: f64,
) -> Result<(ScoreMatrix, ScoreMatrix, Vec<f64>, VerdictSet)> {
    let ids = prepared.corpus.ids();
    let docs = prepared.scoring_docs(config);
    let raw = entropy_matrix(params, &ids, &docs, config.skip_chars)?;
    let normalized = normalize(&raw)?;
    let percentiles = rank_unknowns(&normalized)?;
    let verdicts = VerdictSet::aligned(&ids, &percentiles, radius);
    check_balanced(&verdicts)?;
    Ok((raw, normalized, percentiles, verdicts))
}

pub fn run_member(prepared: &PreparedCorpus, config: &TrainConfig, radius: f64) -> Result<MemberResult> {
    let set = prepared.training_set(config);
    let trained = train_run(&set, config)?;
    let (raw, normalized, percentiles, verdicts) = score_model(prepared, &trained.params, config, radius)?;
    Ok(MemberResult {
        config: config.clone(),
        params: trained.params,
        log: trained.log,
        raw,
        normalized,
        percentiles,
        verdicts,
    })
}

fn check_balanced(set: &VerdictSet) -> Result<()> {
    if set.is_balanced() {
        Ok(())
    } else {
        Err(Error::Invariant(format!(
            "more than half of {} scores fall on one side of 0.5",
            set.len()
        )))
    }
}

#[derive(Debug, Clone)]
pub struct PipelineResult {
    pub members: Vec<MemberResult>,
    pub ensemble: VerdictSet,
    pub evaluation: Option<Evaluation>,
    pub member_evaluations: Vec<Evaluation>,
}

/// Train and score every member (in parallel), then average.
pub fn run_pipeline(prepared: &PreparedCorpus, members: &[TrainConfig], radius: Option<f64>) -> Result<PipelineResult> {
    if members.is_empty() {
        return Err(Error::Config("ensemble has no members".into()));
    }
    let radius = prepared.uncertainty_radius(radius);
    let results: Vec<MemberResult> = members
        .par_iter()
        .enumerate()
        .map(|(i, config)| {
            run_member(prepared, config, radius)
                .map_err(|e| Error::Member { member: i, seed: config.seed, source: Box::new(e) })
        })
        .collect::<Result<_>>()?;
    let sets: Vec<VerdictSet> = results.iter().map(|m| m.verdicts.clone()).collect();
    let ensemble = ensemble_average(&sets, radius)?;
    check_balanced(&ensemble)?;

    let (evaluation, member_evaluations) = match &prepared.corpus.truth {
        Some(truth) => (
            Some(evaluate(&ensemble, truth)?),
            sets.iter().map(|s| evaluate(s, truth)).collect::<Result<Vec<_>>>()?,
        ),
        None => (None, Vec::new()),
    };
    Ok(PipelineResult { members: results, ensemble, evaluation, member_evaluations })
}

pub fn write_answers(path: &Path, verdicts: &VerdictSet) -> Result<()> {
    std::fs::write(path, verdicts.to_answers()).map_err(|e| Error::io(path, e))
}
