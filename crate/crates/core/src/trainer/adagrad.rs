use serde::{Deserialize, Serialize};

use crate::rnn::ModelParams;

/// Added to the root of the accumulator before dividing.
pub const ADAGRAD_EPSILON: f64 = 1e-8;

/// What the per-weight accumulator sums.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AdagradMode {
    /// Squared gradients: `w -= scale * g / (sqrt(G) + eps)` after `G += g^2`.
    #[default]
    Gradients,
    /// Squared applied updates: `d = scale * g / (1 + sqrt(D))`, `w -= d`,
    /// then `D += d^2`.
    Deltas,
}

/// Per-weight accumulators, shaped like the model.
#[derive(Debug, Clone)]
pub struct AdagradState {
    accum: ModelParams,
    learn_scale: f64,
    mode: AdagradMode,
}

impl AdagradState {
    pub fn new(params: &ModelParams, learn_scale: f64, mode: AdagradMode) -> Self {
        AdagradState { accum: params.zeros_like(), learn_scale, mode }
    }

    pub fn accumulators(&self) -> &ModelParams {
        &self.accum
    }

    /// Current step multiplier for weight `index` of parameter block `block`.
    pub fn step_size(&self, block: usize, index: usize) -> f64 {
        let acc = self.accum.blocks()[block][index];
        match self.mode {
            AdagradMode::Gradients => self.learn_scale / (acc.sqrt() + ADAGRAD_EPSILON),
            AdagradMode::Deltas => self.learn_scale / (1.0 + acc.sqrt()),
        }
    }

    /// Apply one update with gradients `grads` (same shape as `params`).
    pub fn apply(&mut self, params: &mut ModelParams, grads: &ModelParams) {
        let scale = self.learn_scale;
        let mode = self.mode;
        for ((w, g), acc) in params
            .blocks_mut()
            .into_iter()
            .zip(grads.blocks())
            .zip(self.accum.blocks_mut())
        {
            for ((w, &g), acc) in w.iter_mut().zip(g).zip(acc.iter_mut()) {
                if g == 0.0 {
                    continue;
                }
                match mode {
                    AdagradMode::Gradients => {
                        *acc += g * g;
                        *w -= scale * g / (acc.sqrt() + ADAGRAD_EPSILON);
                    }
                    AdagradMode::Deltas => {
                        let delta = scale * g / (1.0 + acc.sqrt());
                        *w -= delta;
                        *acc += delta * delta;
                    }
                }
            }
        }
    }
}
