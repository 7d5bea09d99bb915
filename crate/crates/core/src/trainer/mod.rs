//! Training of the multi-headed network.
//!
//! Training proceeds in sub-epochs. In each one every author head receives
//! one or more of its texts (see [`TextMode`]); each character's error is
//! back-propagated through the owner head and, with a probability that decays
//! per sub-epoch, through other heads as well ("leakage").

mod adagrad;
mod bptt;
mod schedule;

use std::fmt::Write as _;
use std::path::Path;

use log::debug;
use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rnn::ModelParams;

pub use adagrad::{AdagradMode, AdagradState, ADAGRAD_EPSILON};
pub use bptt::{batch_gradient, train_step_batch, BatchStats, BpttSettings, SequenceState, TrainStep};
pub use schedule::{
    leak_assignment, leak_rate, make_sub_epoch, maybe_swap, LeakSchedule, StreamText, TextMode,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    #[default]
    Forward,
    Backward,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitMode {
    /// Every weight Gaussian with standard deviation `1/sqrt(fan_in)`.
    #[default]
    Gaussian,
    /// Output heads zero, recurrent and input weights Gaussian.
    Zero,
}

/// Every training meta-parameter of one run.
///
/// Deserializes from JSON; absent fields take the [`Default`] values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    /// Adagrad initial learning scale.
    pub learn_scale: f64,
    /// Initial leakage rate; `None` means `1/N` for `N` heads.
    pub leak0: Option<f64>,
    /// Leakage multiplier per sub-epoch.
    pub leak_decay: f64,
    pub hidden: usize,
    /// Standard deviation of the pre-activation noise during training.
    pub noise_sigma: f64,
    pub sub_epochs: usize,
    pub direction: Direction,
    pub text_mode: TextMode,
    pub init_mode: InitMode,
    pub use_control: bool,
    pub batch_size: usize,
    pub bptt_depth: usize,
    /// Relative error norm below which unrolling stops early.
    pub bptt_cutoff: f64,
    /// Predictions at the start of each text that receive no gradient.
    pub skip_chars: usize,
    /// A single known text shorter than this fraction of the unknown text is
    /// swapped with it.
    pub swap_ratio: f64,
    pub adagrad_mode: AdagradMode,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learn_scale: 0.1,
            leak0: None,
            leak_decay: 0.8,
            hidden: 79,
            noise_sigma: 0.0,
            sub_epochs: 12,
            direction: Direction::Forward,
            text_mode: TextMode::Sequential,
            init_mode: InitMode::Gaussian,
            use_control: false,
            batch_size: 40,
            bptt_depth: 70,
            bptt_cutoff: 1e-3,
            skip_chars: 10,
            swap_ratio: 0.5,
            adagrad_mode: AdagradMode::Gradients,
            seed: 1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if let Some(leak0) = self.leak0 {
            if !(leak0 >= 0.0 && leak0.is_finite()) {
                return fail(format!("leak0 must be >= 0, got {leak0}"));
            }
        }
        if !(self.leak_decay > 0.0 && self.leak_decay < 1.0) {
            return fail(format!("leak_decay must be in (0, 1), got {}", self.leak_decay));
        }
        if self.sub_epochs < 1 {
            return fail("sub_epochs must be >= 1".into());
        }
        if self.batch_size < 1 {
            return fail("batch_size must be >= 1".into());
        }
        if self.bptt_depth < self.batch_size {
            return fail(format!(
                "bptt_depth ({}) must be at least batch_size ({})",
                self.bptt_depth, self.batch_size
            ));
        }
        if !(self.learn_scale > 0.0 && self.learn_scale.is_finite()) {
            return fail(format!("learn_scale must be positive, got {}", self.learn_scale));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return fail(format!("noise_sigma must be >= 0, got {}", self.noise_sigma));
        }
        if !(self.bptt_cutoff >= 0.0) {
            return fail(format!("bptt_cutoff must be >= 0, got {}", self.bptt_cutoff));
        }
        if !(self.swap_ratio >= 0.0) {
            return fail(format!("swap_ratio must be >= 0, got {}", self.swap_ratio));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<TrainConfig> {
        let config: TrainConfig =
            serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<TrainConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        TrainConfig::from_json(&text).map_err(|e| Error::Format { path: path.into(), message: e.to_string() })
    }

    pub fn leak_schedule(&self, heads: usize) -> LeakSchedule {
        LeakSchedule {
            leak0: self.leak0.unwrap_or(1.0 / heads.max(1) as f64),
            decay: self.leak_decay,
        }
    }

    pub fn bptt_settings(&self) -> BpttSettings {
        BpttSettings { depth: self.bptt_depth, cutoff: self.bptt_cutoff, noise_sigma: self.noise_sigma }
    }
}

fn gaussian_matrix<R: Rng + ?Sized>(rows: usize, cols: usize, fan_in: usize, rng: &mut R) -> Array2<f64> {
    if rows == 0 || cols == 0 {
        return Array2::zeros((rows, cols));
    }
    let normal = Normal::new(0.0, 1.0 / (fan_in as f64).sqrt()).expect("finite positive sigma");
    Array2::from_shape_simple_fn((rows, cols), || normal.sample(rng))
}

/// Fresh parameters for `n` heads over an alphabet of `v` symbols.
///
/// Fan-in is `V` for input weights and `H` for recurrent and output weights.
/// Biases start at zero.
pub fn init_params(config: &TrainConfig, v: usize, n: usize) -> ModelParams {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    init_params_with(config, v, n, &mut rng)
}

fn init_params_with<R: Rng + ?Sized>(config: &TrainConfig, v: usize, n: usize, rng: &mut R) -> ModelParams {
    let h = config.hidden;
    let mut params = ModelParams::zeros(v, h, n);
    params.w_xh = gaussian_matrix(v, h, v, rng);
    params.w_hh = gaussian_matrix(h, h, h, rng);
    if config.init_mode == InitMode::Gaussian {
        for head in &mut params.heads {
            head.w_hy = gaussian_matrix(h, v, h, rng);
            head.b_y = Array1::zeros(v);
        }
    }
    params
}

/// Encoded training material: texts per author head plus an optional control
/// corpus.
#[derive(Debug, Clone)]
pub struct TrainingSet {
    pub vocab_size: usize,
    pub authors: Vec<Vec<Vec<usize>>>,
    pub control: Option<Vec<usize>>,
}

/// Per-sub-epoch training record.
#[derive(Debug, Clone, PartialEq)]
pub struct LogRow {
    pub sub_epoch: usize,
    pub leak_rate: f64,
    /// Mean owner-head bits/char per head; `None` for a head with no counted step.
    pub head_bits: Vec<Option<f64>>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainingLog {
    pub rows: Vec<LogRow>,
}

impl TrainingLog {
    /// Tab-separated rows: sub-epoch, leak rate, then one column per head.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        if let Some(first) = self.rows.first() {
            out.push_str("sub_epoch\tleak_rate");
            for h in 0..first.head_bits.len() {
                let _ = write!(out, "\thead{h}");
            }
            out.push('\n');
        }
        for row in &self.rows {
            let _ = write!(out, "{}\t{:.6}", row.sub_epoch, row.leak_rate);
            for b in &row.head_bits {
                match b {
                    Some(b) => {
                        let _ = write!(out, "\t{b:.6}");
                    }
                    None => out.push_str("\tNA"),
                }
            }
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct TrainedModel {
    pub params: ModelParams,
    pub log: TrainingLog,
}

/// Train one model from scratch.
pub fn train_run(set: &TrainingSet, config: &TrainConfig) -> Result<TrainedModel> {
    config.validate()?;
    if set.vocab_size < 1 {
        return Err(Error::Config("alphabet is empty".into()));
    }
    if set.authors.is_empty() {
        return Err(Error::Corpus("no authors to train".into()));
    }
    let control = if config.use_control { set.control.as_deref().filter(|c| c.len() > 1) } else { None };
    let heads = set.authors.len() + usize::from(control.is_some());

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut params = init_params_with(config, set.vocab_size, heads, &mut rng);
    params.set_control_head(control.is_some());

    let reversed;
    let (authors, control): (&[Vec<Vec<usize>>], Option<Vec<usize>>) = match config.direction {
        Direction::Forward => (&set.authors, control.map(<[usize]>::to_vec)),
        Direction::Backward => {
            reversed = set
                .authors
                .iter()
                .map(|texts| texts.iter().map(|t| t.iter().rev().copied().collect()).collect())
                .collect::<Vec<Vec<Vec<usize>>>>();
            (&reversed, control.map(|c| c.iter().rev().copied().collect()))
        }
    };

    let schedule = config.leak_schedule(heads);
    let settings = config.bptt_settings();
    let mut adagrad = AdagradState::new(&params, config.learn_scale, config.adagrad_mode);
    let mut grads = params.zeros_like();
    let mut state = SequenceState::new(config.hidden);
    let mut log = TrainingLog::default();

    for sub_epoch in 0..config.sub_epochs {
        let rate = schedule.rate(sub_epoch);
        let stream = make_sub_epoch(authors, config.text_mode, control.as_deref(), sub_epoch, &mut rng)?;
        let mut bits = vec![0.0; heads];
        let mut counts = vec![0usize; heads];
        for text in &stream {
            if text.symbols.len() < 2 {
                continue;
            }
            state.reset();
            let steps: Vec<TrainStep> = text
                .symbols
                .windows(2)
                .enumerate()
                .map(|(i, w)| {
                    let counted = i >= config.skip_chars;
                    let leaked = if counted { leak_assignment(text.head, heads, rate, &mut rng) } else { Vec::new() };
                    TrainStep { input: w[0], target: w[1], owner: text.head, leaked, counted }
                })
                .collect();
            for batch in steps.chunks(config.batch_size) {
                let stats = train_step_batch(
                    &mut params,
                    &mut adagrad,
                    &mut state,
                    batch,
                    &settings,
                    &mut grads,
                    &mut rng,
                )?;
                bits[text.head] += stats.owner_bits;
                counts[text.head] += stats.owner_steps;
            }
        }
        let head_bits: Vec<Option<f64>> = bits
            .iter()
            .zip(&counts)
            .map(|(&b, &n)| (n > 0).then(|| b / n as f64))
            .collect();
        debug!("sub-epoch {sub_epoch} leak {rate:.5} bits {head_bits:?}");
        log.rows.push(LogRow { sub_epoch, leak_rate: rate, head_bits });
    }
    Ok(TrainedModel { params, log })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        let c = TrainConfig::default();
        c.validate().unwrap();
        assert_eq!((c.batch_size, c.bptt_depth, c.skip_chars), (40, 70, 10));
    }

    #[test]
    fn invariants_are_enforced() {
        let bad = [
            TrainConfig { sub_epochs: 0, ..Default::default() },
            TrainConfig { leak0: Some(-0.1), ..Default::default() },
            TrainConfig { leak_decay: 1.0, ..Default::default() },
            TrainConfig { leak_decay: 0.0, ..Default::default() },
            TrainConfig { batch_size: 0, ..Default::default() },
            TrainConfig { batch_size: 80, ..Default::default() },
        ];
        for c in bad {
            assert!(matches!(c.validate(), Err(Error::Config(_))), "{c:?}");
        }
    }

    #[test]
    fn json_defaults_fill_missing_fields() {
        let c = TrainConfig::from_json(r#"{"hidden": 99, "text_mode": "balanced", "seed": 5}"#).unwrap();
        assert_eq!(c.hidden, 99);
        assert_eq!(c.text_mode, TextMode::Balanced);
        assert_eq!(c.batch_size, 40);
        assert!(TrainConfig::from_json(r#"{"hidden_size": 3}"#).is_err());
        assert!(TrainConfig::from_json(r#"{"sub_epochs": 0}"#).is_err());
    }

    #[test]
    fn init_is_deterministic() {
        let c = TrainConfig { hidden: 7, ..Default::default() };
        assert_eq!(init_params(&c, 5, 3), init_params(&c, 5, 3));
        let other = TrainConfig { seed: 2, ..c.clone() };
        assert_ne!(init_params(&c, 5, 3), init_params(&other, 5, 3));
    }

    #[test]
    fn gaussian_recurrent_scale() {
        let c = TrainConfig { hidden: 100, ..Default::default() };
        let p = init_params(&c, 10, 2);
        let w = p.w_hh();
        let n = w.len() as f64;
        let mean = w.sum() / n;
        let sd = (w.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt();
        assert!((sd - 0.1).abs() <= 0.02, "sd {sd}");
        assert!(p.b_h().iter().all(|&b| b == 0.0));
    }

    #[test]
    fn zero_init_clears_heads_only() {
        let c = TrainConfig { hidden: 6, init_mode: InitMode::Zero, ..Default::default() };
        let p = init_params(&c, 4, 2);
        assert!(p.heads().iter().all(|h| h.w_hy().iter().all(|&w| w == 0.0)));
        assert!(p.w_hh().iter().any(|&w| w != 0.0));
        assert!(p.w_xh().iter().any(|&w| w != 0.0));
    }

    #[test]
    fn no_hidden_units_leaves_bias_only_heads() {
        let c = TrainConfig { hidden: 0, ..Default::default() };
        let p = init_params(&c, 4, 2);
        assert_eq!(p.w_hh().len(), 0);
        assert_eq!(p.w_xh().len(), 0);
        assert_eq!(p.heads()[0].w_hy().len(), 0);
        assert_eq!(p.heads()[0].b_y().len(), 4);
    }

    fn tiny_set() -> TrainingSet {
        let a: Vec<usize> = (0..300).map(|i| [0, 1, 2, 1][i % 4]).collect();
        let b: Vec<usize> = (0..300).map(|i| [2, 0, 0, 1, 2][i % 5]).collect();
        TrainingSet { vocab_size: 3, authors: vec![vec![a], vec![b]], control: Some(vec![0, 1, 2, 2, 1, 0, 0]) }
    }

    #[test]
    fn training_is_deterministic() {
        let c = TrainConfig { hidden: 6, sub_epochs: 3, noise_sigma: 0.1, use_control: true, ..Default::default() };
        let a = train_run(&tiny_set(), &c).unwrap();
        let b = train_run(&tiny_set(), &c).unwrap();
        assert_eq!(a.params, b.params);
        assert_eq!(a.log, b.log);
        assert_eq!(a.params.num_heads(), 3);
        assert_eq!(a.params.num_author_heads(), 2);
    }

    #[test]
    fn zero_leak_keeps_other_heads_fixed() {
        let mut set = tiny_set();
        set.authors[1] = vec![vec![]];
        let c = TrainConfig { hidden: 5, sub_epochs: 2, leak0: Some(0.0), ..Default::default() };
        let trained = train_run(&set, &c).unwrap();
        let initial = init_params(&c, 3, 2);
        assert_eq!(trained.params.heads()[1], initial.heads()[1]);
        assert_ne!(trained.params.heads()[0], initial.heads()[0]);
        assert_ne!(trained.params.w_hh(), initial.w_hh());
    }

    #[test]
    fn backward_direction_trains() {
        let c = TrainConfig { hidden: 4, sub_epochs: 2, direction: Direction::Backward, ..Default::default() };
        let fwd = train_run(&tiny_set(), &TrainConfig { direction: Direction::Forward, ..c.clone() }).unwrap();
        let bwd = train_run(&tiny_set(), &c).unwrap();
        assert_ne!(fwd.params, bwd.params);
    }

    #[test]
    fn log_has_one_row_per_sub_epoch() {
        let c = TrainConfig { hidden: 4, sub_epochs: 4, ..Default::default() };
        let trained = train_run(&tiny_set(), &c).unwrap();
        assert_eq!(trained.log.rows.len(), 4);
        let tsv = trained.log.to_tsv();
        assert_eq!(tsv.lines().count(), 5);
        assert!(tsv.starts_with("sub_epoch\tleak_rate\thead0\thead1\n"));
        let rates: Vec<f64> = trained.log.rows.iter().map(|r| r.leak_rate).collect();
        assert!(rates.windows(2).all(|w| w[1] < w[0]));
        assert_eq!(rates[0], 0.5);
    }
}
