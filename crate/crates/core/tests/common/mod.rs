#![allow(dead_code)]

use mhrnn::trainer::{batch_gradient, BpttSettings, SequenceState, TrainStep};
use mhrnn::ModelParams;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Plain loop implementation of the training loss: natural-log cross entropy
/// summed over every counted step and every head receiving that step.
pub fn naive_loss(params: &ModelParams, steps: &[TrainStep]) -> f64 {
    let (v, hs) = (params.vocab_size(), params.hidden_size());
    let (w_xh, w_hh, b_h) = (params.w_xh(), params.w_hh(), params.b_h());
    let mut h = vec![0.0; hs];
    let mut loss = 0.0;
    for s in steps {
        let mut next = vec![0.0; hs];
        for i in 0..hs {
            let mut a = b_h[i] + w_xh[[s.input, i]];
            for j in 0..hs {
                a += w_hh[[i, j]] * h[j];
            }
            next[i] = if a >= 0.0 { (a + 1.0).sqrt() - 1.0 } else { 0.0 };
        }
        h = next;
        if !s.counted {
            continue;
        }
        for &k in std::iter::once(&s.owner).chain(&s.leaked) {
            let head = &params.heads()[k];
            let z: Vec<f64> = (0..v)
                .map(|c| head.b_y()[c] + (0..hs).map(|j| h[j] * head.w_hy()[[j, c]]).sum::<f64>())
                .collect();
            let max = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + z.iter().map(|x| (x - max).exp()).sum::<f64>().ln();
            loss += lse - z[s.target];
        }
    }
    loss
}

/// Smallest |pre-activation| met along `steps`; the loss is smooth only
/// when this is clear of zero.
pub fn min_abs_preactivation(params: &ModelParams, steps: &[TrainStep]) -> f64 {
    let hs = params.hidden_size();
    let mut h = vec![0.0; hs];
    let mut min = f64::INFINITY;
    for s in steps {
        let mut next = vec![0.0; hs];
        for i in 0..hs {
            let mut a = params.b_h()[i] + params.w_xh()[[s.input, i]];
            for j in 0..hs {
                a += params.w_hh()[[i, j]] * h[j];
            }
            min = min.min(a.abs());
            next[i] = if a >= 0.0 { (a + 1.0).sqrt() - 1.0 } else { 0.0 };
        }
        h = next;
    }
    min
}

pub struct GradCheck {
    pub max_rel_err: f64,
    pub compared: usize,
    pub min_preactivation: f64,
}

/// Compare BPTT gradients with central differences on a V=5, H=4, N=2
/// model driven by a 20-symbol sequence.
pub fn gradient_check(seed: u64, step: f64) -> GradCheck {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut params = ModelParams::zeros(5, 4, 2);
    for block in params.blocks_mut() {
        for x in block.iter_mut() {
            *x = rng.random_range(-1.0..1.0);
        }
    }
    let seq: Vec<usize> = (0..20).map(|_| rng.random_range(0..5)).collect();
    let steps: Vec<TrainStep> = seq
        .windows(2)
        .enumerate()
        .map(|(i, w)| TrainStep {
            input: w[0],
            target: w[1],
            owner: 0,
            leaked: if i % 3 == 1 { vec![1] } else { vec![] },
            counted: i >= 2,
        })
        .collect();

    let settings = BpttSettings { depth: steps.len(), cutoff: 0.0, noise_sigma: 0.0 };
    let mut grads = params.zeros_like();
    let mut state = SequenceState::new(4);
    batch_gradient(&params, &mut state, &steps, &settings, &mut grads, &mut rng).unwrap();

    let mut max_rel_err = 0.0f64;
    let mut compared = 0;
    let analytic: Vec<Vec<f64>> = grads.blocks().iter().map(|b| b.to_vec()).collect();
    for (b, block) in analytic.iter().enumerate() {
        for (i, &g) in block.iter().enumerate() {
            let orig = params.blocks()[b][i];
            params.blocks_mut()[b][i] = orig + step;
            let plus = naive_loss(&params, &steps);
            params.blocks_mut()[b][i] = orig - step;
            let minus = naive_loss(&params, &steps);
            params.blocks_mut()[b][i] = orig;
            let numeric = (plus - minus) / (2.0 * step);
            let scale = g.abs().max(numeric.abs());
            if scale == 0.0 {
                continue;
            }
            compared += 1;
            max_rel_err = max_rel_err.max((g - numeric).abs() / scale);
        }
    }
    GradCheck { max_rel_err, compared, min_preactivation: min_abs_preactivation(&params, &steps) }
}
