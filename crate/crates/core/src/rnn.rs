//! Multi-headed simple recurrent network.
//!
//! One recurrent layer with ReSQRT activation is shared by `N` softmax
//! heads. Inputs are one-hot symbols, so the input projection is a row
//! lookup into `w_xh`.

use ndarray::{Array1, Array2, ArrayView1, Zip};
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};

/// Rectified shifted square root: `sqrt(x + 1) - 1` for `x >= 0`, else 0.
#[inline]
pub fn resqrt(x: f64) -> f64 {
    if x >= 0.0 {
        (x + 1.0).sqrt() - 1.0
    } else {
        0.0
    }
}

/// Derivative of [`resqrt`] expressed through its output `y`.
///
/// `x_positive` is whether the forward input was `>= 0`; at exactly zero the
/// right-hand limit 0.5 is used.
#[inline]
pub fn resqrt_deriv_from_output(y: f64, x_positive: bool) -> f64 {
    if x_positive {
        0.5 / (y + 1.0)
    } else {
        0.0
    }
}

/// Numerically stable softmax.
pub fn softmax(z: ArrayView1<f64>) -> Array1<f64> {
    let max = z.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
    let mut out = z.mapv(|v| (v - max).exp());
    let sum = out.sum();
    out /= sum;
    out
}

/// `ln(sum(exp(z)))` computed with max subtraction.
pub fn log_sum_exp(z: ArrayView1<f64>) -> f64 {
    let max = z.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
    max + z.iter().map(|&v| (v - max).exp()).sum::<f64>().ln()
}

/// Mean of `-log2 p` over the given probabilities.
pub fn mean_bits<I: IntoIterator<Item = f64>>(probs: I) -> f64 {
    let (sum, n) = probs
        .into_iter()
        .fold((0.0, 0usize), |(s, n), p| (s - p.log2(), n + 1));
    sum / n as f64
}

/// One softmax output group.
#[derive(Debug, Clone, PartialEq)]
pub struct Head {
    /// `H x V`
    pub(crate) w_hy: Array2<f64>,
    /// `V`
    pub(crate) b_y: Array1<f64>,
}

impl Head {
    pub fn w_hy(&self) -> &Array2<f64> {
        &self.w_hy
    }

    pub fn b_y(&self) -> &Array1<f64> {
        &self.b_y
    }

    /// Output logits for hidden state `h`.
    pub fn logits(&self, h: ArrayView1<f64>) -> Array1<f64> {
        if h.is_empty() {
            return self.b_y.clone();
        }
        h.dot(&self.w_hy) + &self.b_y
    }
}

/// All weights of the shared recurrent layer and the output heads.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    /// `V x H`
    pub(crate) w_xh: Array2<f64>,
    /// `H x H`; pre-activation is `w_hh . h`.
    pub(crate) w_hh: Array2<f64>,
    pub(crate) b_h: Array1<f64>,
    pub(crate) heads: Vec<Head>,
    /// The last head models a control corpus and is never scored.
    pub(crate) control_head: bool,
}

impl ModelParams {
    /// All-zero parameters.
    pub fn zeros(v: usize, h: usize, n: usize) -> ModelParams {
        ModelParams {
            w_xh: Array2::zeros((v, h)),
            w_hh: Array2::zeros((h, h)),
            b_h: Array1::zeros(h),
            heads: (0..n)
                .map(|_| Head { w_hy: Array2::zeros((h, v)), b_y: Array1::zeros(v) })
                .collect(),
            control_head: false,
        }
    }

    pub fn zeros_like(&self) -> ModelParams {
        let mut z = ModelParams::zeros(self.vocab_size(), self.hidden_size(), self.num_heads());
        z.control_head = self.control_head;
        z
    }

    pub fn vocab_size(&self) -> usize {
        self.w_xh.nrows()
    }

    pub fn hidden_size(&self) -> usize {
        self.b_h.len()
    }

    /// Total head count, including a control head if present.
    pub fn num_heads(&self) -> usize {
        self.heads.len()
    }

    /// Heads that model authors (excludes the control head).
    pub fn num_author_heads(&self) -> usize {
        self.heads.len() - usize::from(self.control_head)
    }

    pub fn has_control_head(&self) -> bool {
        self.control_head
    }

    pub(crate) fn set_control_head(&mut self, control: bool) {
        self.control_head = control;
    }

    pub fn w_xh(&self) -> &Array2<f64> {
        &self.w_xh
    }

    pub fn w_hh(&self) -> &Array2<f64> {
        &self.w_hh
    }

    pub fn b_h(&self) -> &Array1<f64> {
        &self.b_h
    }

    pub fn heads(&self) -> &[Head] {
        &self.heads
    }

    pub fn head(&self, i: usize) -> Result<&Head> {
        self.heads.get(i).ok_or(Error::HeadOutOfRange { index: i, heads: self.heads.len() })
    }

    /// Every parameter block as a flat slice, in serialization order:
    /// `w_xh`, `w_hh`, `b_h`, then `w_hy`, `b_y` for each head.
    pub fn blocks(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = vec![
            self.w_xh.as_slice().expect("standard layout"),
            self.w_hh.as_slice().expect("standard layout"),
            self.b_h.as_slice().expect("standard layout"),
        ];
        for head in &self.heads {
            out.push(head.w_hy.as_slice().expect("standard layout"));
            out.push(head.b_y.as_slice().expect("standard layout"));
        }
        out
    }

    /// Mutable view of [`ModelParams::blocks`]. Shapes cannot change through it.
    pub fn blocks_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = vec![
            self.w_xh.as_slice_mut().expect("standard layout"),
            self.w_hh.as_slice_mut().expect("standard layout"),
            self.b_h.as_slice_mut().expect("standard layout"),
        ];
        for head in &mut self.heads {
            out.push(head.w_hy.as_slice_mut().expect("standard layout"));
            out.push(head.b_y.as_slice_mut().expect("standard layout"));
        }
        out
    }

    pub fn num_params(&self) -> usize {
        self.blocks().iter().map(|b| b.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.blocks().iter().all(|b| b.iter().all(|v| v.is_finite()))
    }

    pub fn fill(&mut self, value: f64) {
        for block in self.blocks_mut() {
            block.fill(value);
        }
    }

    pub(crate) fn check_symbol(&self, symbol: usize) -> Result<()> {
        if symbol >= self.vocab_size() {
            return Err(Error::SymbolOutOfRange { index: symbol, size: self.vocab_size() });
        }
        Ok(())
    }

    /// Hidden pre-activation for `symbol` given the previous state, without noise.
    pub(crate) fn pre_activation(&self, h_prev: ArrayView1<f64>, symbol: usize) -> Array1<f64> {
        let mut a = self.w_xh.row(symbol).to_owned();
        if !a.is_empty() {
            ndarray::linalg::general_mat_vec_mul(1.0, &self.w_hh, &h_prev, 1.0, &mut a);
            a += &self.b_h;
        }
        a
    }
}

/// Recurrent state; every component is non-negative.
#[derive(Debug, Clone, PartialEq)]
pub struct HiddenState {
    pub h: Array1<f64>,
}

impl HiddenState {
    pub fn zeros(hidden: usize) -> Self {
        HiddenState { h: Array1::zeros(hidden) }
    }
}

/// Next-symbol distributions, one per head.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutput {
    pub distributions: Vec<Array1<f64>>,
}

/// Advance the network by one input symbol.
///
/// `noise_sigma > 0` adds Gaussian noise to each hidden pre-activation; it is
/// meant for training only.
pub fn forward_step<R: Rng + ?Sized>(
    state: &HiddenState,
    symbol: usize,
    params: &ModelParams,
    noise_sigma: f64,
    rng: &mut R,
) -> Result<(HiddenState, StepOutput)> {
    params.check_symbol(symbol)?;
    let mut a = params.pre_activation(state.h.view(), symbol);
    add_noise(&mut a, noise_sigma, rng);
    let h = a.mapv(resqrt);
    let distributions = params.heads.iter().map(|head| softmax(head.logits(h.view()).view())).collect();
    Ok((HiddenState { h }, StepOutput { distributions }))
}

pub(crate) fn add_noise<R: Rng + ?Sized>(a: &mut Array1<f64>, sigma: f64, rng: &mut R) {
    if sigma > 0.0 {
        let normal = Normal::new(0.0, sigma).expect("sigma is positive and finite");
        a.mapv_inplace(|v| v + normal.sample(rng));
    }
}

/// Anything that predicts the next symbol from the ones it has seen.
pub trait NextSymbolModel {
    /// Return to the start-of-document state.
    fn reset(&mut self);
    /// Feed one symbol; returns the probability assigned to `next`.
    fn observe(&mut self, symbol: usize, next: usize) -> Result<f64>;
}

/// One head of a [`ModelParams`], evaluated without noise.
pub struct HeadPredictor<'a> {
    params: &'a ModelParams,
    head: &'a Head,
    h: Array1<f64>,
}

impl<'a> HeadPredictor<'a> {
    pub fn new(params: &'a ModelParams, head: usize) -> Result<Self> {
        Ok(HeadPredictor { params, head: params.head(head)?, h: Array1::zeros(params.hidden_size()) })
    }
}

impl NextSymbolModel for HeadPredictor<'_> {
    fn reset(&mut self) {
        self.h.fill(0.0);
    }

    fn observe(&mut self, symbol: usize, next: usize) -> Result<f64> {
        self.params.check_symbol(symbol)?;
        self.params.check_symbol(next)?;
        let a = self.params.pre_activation(self.h.view(), symbol);
        self.h = a.mapv(resqrt);
        let z = self.head.logits(self.h.view());
        Ok((z[next] - log_sum_exp(z.view())).exp())
    }
}

/// Mean bits per character a model spends on `doc`, ignoring the first
/// `skip` predictions.
pub fn model_cross_entropy<M: NextSymbolModel + ?Sized>(
    doc: &[usize],
    model: &mut M,
    skip: usize,
) -> Result<f64> {
    if doc.len() < skip + 2 {
        return Err(Error::InsufficientText { len: doc.len(), skip });
    }
    model.reset();
    let mut probs = Vec::with_capacity(doc.len() - 1 - skip);
    for (i, pair) in doc.windows(2).enumerate() {
        let p = model.observe(pair[0], pair[1])?;
        if i >= skip {
            probs.push(p);
        }
    }
    Ok(mean_bits(probs))
}

/// Cross entropy (bits/char) of `doc` under one head, state starting at zero.
pub fn sequence_cross_entropy(
    doc: &[usize],
    params: &ModelParams,
    head: usize,
    skip: usize,
) -> Result<f64> {
    let mut predictor = HeadPredictor::new(params, head)?;
    model_cross_entropy(doc, &mut predictor, skip)
}

/// Cross entropy of `doc` under every head at once; the hidden pass is shared.
pub fn all_heads_cross_entropy(doc: &[usize], params: &ModelParams, skip: usize) -> Result<Vec<f64>> {
    if doc.len() < skip + 2 {
        return Err(Error::InsufficientText { len: doc.len(), skip });
    }
    for &s in doc {
        params.check_symbol(s)?;
    }
    let mut h = Array1::zeros(params.hidden_size());
    let mut bits = vec![0.0; params.num_heads()];
    let mut counted = 0usize;
    for (i, pair) in doc.windows(2).enumerate() {
        h = params.pre_activation(h.view(), pair[0]).mapv(resqrt);
        if i < skip {
            continue;
        }
        counted += 1;
        for (acc, head) in bits.iter_mut().zip(&params.heads) {
            let z = head.logits(h.view());
            *acc += (log_sum_exp(z.view()) - z[pair[1]]) / std::f64::consts::LN_2;
        }
    }
    Ok(bits.into_iter().map(|b| b / counted as f64).collect())
}

/// Elementwise derivative of the hidden activation for one step.
pub(crate) fn activation_deriv(a: &Array1<f64>, h: &Array1<f64>) -> Array1<f64> {
    let mut d = Array1::zeros(a.len());
    Zip::from(&mut d)
        .and(a)
        .and(h)
        .for_each(|d, &a, &h| *d = resqrt_deriv_from_output(h, a >= 0.0));
    d
}
