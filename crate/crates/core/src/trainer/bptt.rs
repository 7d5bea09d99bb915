//! Truncated back-propagation through time over mini-batches.
//!
//! A batch is a run of consecutive steps within one text. The forward pass
//! stores each step in a history window of at most `bptt_depth` steps; at the
//! end of the batch the accumulated output errors are carried backwards
//! through that window. Unrolling stops early once the carried error has
//! decayed below `bptt_cutoff` times the largest norm seen while the batch's
//! own errors were still being injected.

use std::collections::VecDeque;

use ndarray::{Array1, ArrayView1};
use rand::Rng;

use crate::error::{Error, Result};
use crate::rnn::{activation_deriv, add_noise, resqrt, softmax, ModelParams};

use super::adagrad::AdagradState;

/// One training character.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainStep {
    pub input: usize,
    pub target: usize,
    /// Head that owns the text this step comes from.
    pub owner: usize,
    /// Other heads that also receive this step's error.
    pub leaked: Vec<usize>,
    /// False for the first `skip_chars` predictions of a text.
    pub counted: bool,
}

/// Settings the gradient engine needs.
#[derive(Debug, Clone, Copy)]
pub struct BpttSettings {
    pub depth: usize,
    pub cutoff: f64,
    pub noise_sigma: f64,
}

#[derive(Debug, Clone)]
struct StepRecord {
    symbol: usize,
    h_prev: Array1<f64>,
    deriv: Array1<f64>,
    inject: Option<Array1<f64>>,
}

/// Running state of one text: hidden vector plus the BPTT window.
#[derive(Debug, Clone)]
pub struct SequenceState {
    h: Array1<f64>,
    history: VecDeque<StepRecord>,
}

impl SequenceState {
    pub fn new(hidden: usize) -> Self {
        SequenceState { h: Array1::zeros(hidden), history: VecDeque::new() }
    }

    pub fn hidden(&self) -> ArrayView1<'_, f64> {
        self.h.view()
    }

    pub fn reset(&mut self) {
        self.h.fill(0.0);
        self.history.clear();
    }
}

/// Loss bookkeeping for one batch.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct BatchStats {
    /// Sum of `-log2 p` of the owner head over counted steps.
    pub owner_bits: f64,
    pub owner_steps: usize,
    /// Natural-log loss summed over every head that received error.
    pub loss_nats: f64,
}

/// Run the batch forward and back, adding its gradient into `grads`.
pub fn batch_gradient<R: Rng + ?Sized>(
    params: &ModelParams,
    state: &mut SequenceState,
    batch: &[TrainStep],
    settings: &BpttSettings,
    grads: &mut ModelParams,
    rng: &mut R,
) -> Result<BatchStats> {
    let hidden = params.hidden_size();
    let mut stats = BatchStats::default();

    for step in batch {
        params.check_symbol(step.input)?;
        params.check_symbol(step.target)?;
        let mut a = params.pre_activation(state.h.view(), step.input);
        add_noise(&mut a, settings.noise_sigma, rng);
        let h = a.mapv(resqrt);
        let deriv = activation_deriv(&a, &h);

        let mut inject: Option<Array1<f64>> = None;
        if step.counted {
            let mut inj = Array1::zeros(hidden);
            let heads = std::iter::once(step.owner).chain(step.leaked.iter().copied());
            for k in heads {
                let head = params.head(k)?;
                let mut dz = softmax(head.logits(h.view()).view());
                let p = dz[step.target];
                stats.loss_nats -= p.ln();
                if k == step.owner {
                    stats.owner_bits -= p.log2();
                    stats.owner_steps += 1;
                }
                dz[step.target] -= 1.0;

                let g = &mut grads.heads[k];
                g.b_y += &dz;
                for (j, &hj) in h.iter().enumerate() {
                    if hj != 0.0 {
                        g.w_hy.row_mut(j).scaled_add(hj, &dz);
                    }
                }
                if hidden > 0 {
                    ndarray::linalg::general_mat_vec_mul(1.0, &head.w_hy, &dz, 1.0, &mut inj);
                }
            }
            inject = Some(inj);
        }

        let h_prev = std::mem::replace(&mut state.h, h);
        state.history.push_back(StepRecord { symbol: step.input, h_prev, deriv, inject });
        if state.history.len() > settings.depth {
            state.history.pop_front();
        }
    }

    if hidden > 0 {
        backward(params, state, batch.len(), settings.cutoff, grads);
    } else {
        for rec in state.history.iter_mut() {
            rec.inject = None;
        }
    }
    Ok(stats)
}

fn backward(
    params: &ModelParams,
    state: &mut SequenceState,
    batch_len: usize,
    cutoff: f64,
    grads: &mut ModelParams,
) {
    let hidden = params.hidden_size();
    let first_batch_pos = state.history.len().saturating_sub(batch_len);
    let mut carry = Array1::<f64>::zeros(hidden);
    let mut reference = 0.0f64;

    for (pos, rec) in state.history.iter_mut().enumerate().rev() {
        if let Some(inj) = rec.inject.take() {
            carry += &inj;
        }
        let norm = carry.dot(&carry).sqrt();
        if pos >= first_batch_pos {
            reference = reference.max(norm);
        } else if norm <= cutoff * reference {
            break;
        }
        let da = &carry * &rec.deriv;
        grads.w_xh.row_mut(rec.symbol).scaled_add(1.0, &da);
        grads.b_h += &da;
        for (i, &d) in da.iter().enumerate() {
            if d != 0.0 {
                grads.w_hh.row_mut(i).scaled_add(d, &rec.h_prev);
            }
        }
        carry = da.dot(&params.w_hh);
    }
}

/// One mini-batch: gradient, finiteness check, adagrad update.
pub fn train_step_batch<R: Rng + ?Sized>(
    params: &mut ModelParams,
    adagrad: &mut AdagradState,
    state: &mut SequenceState,
    batch: &[TrainStep],
    settings: &BpttSettings,
    grads: &mut ModelParams,
    rng: &mut R,
) -> Result<BatchStats> {
    grads.fill(0.0);
    let stats = batch_gradient(params, state, batch, settings, grads, rng)?;
    if let Some(bad) = first_non_finite(grads) {
        return Err(Error::NonFinite(bad));
    }
    adagrad.apply(params, grads);
    if let Some(bad) = first_non_finite(params) {
        return Err(Error::NonFinite(format!("after update: {bad}")));
    }
    Ok(stats)
}

fn first_non_finite(params: &ModelParams) -> Option<String> {
    const NAMES: [&str; 3] = ["w_xh", "w_hh", "b_h"];
    for (b, block) in params.blocks().iter().enumerate() {
        if let Some(i) = block.iter().position(|v| !v.is_finite()) {
            let name = match b {
                0..=2 => NAMES[b].to_string(),
                _ => {
                    let head = (b - 3) / 2;
                    let part = if (b - 3) % 2 == 0 { "w_hy" } else { "b_y" };
                    format!("head {head} {part}")
                }
            };
            return Some(format!("{name}[{i}] = {}", block[i]));
        }
    }
    None
}
