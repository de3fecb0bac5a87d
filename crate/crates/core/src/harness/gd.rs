//! Full-batch gradient-descent baseline on the standard layerwise network.
//!
//! A diagnostic contrast, not an acceptance gate: the constructed minimizers
//! need no descent at all. Descends on the squared weighted cost with manual
//! backpropagation (subgradient 0 at the kink), fixed step size, and a hard
//! iteration cap; non-convergence is reported, never raised.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::readout::WeightedNorm;
use crate::types::ClusteredDataset;

/// Gradient-descent settings.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GdConfig {
    pub inits: usize,
    pub steps: usize,
    pub learning_rate: f64,
    pub init_scale: f64,
    pub seed: u64,
}

impl Default for GdConfig {
    fn default() -> Self {
        GdConfig {
            inits: 20,
            steps: 100_000,
            learning_rate: 1e-2,
            init_scale: 0.5,
            seed: 0,
        }
    }
}

/// Outcome of one descent run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GdRun {
    pub init_index: usize,
    pub initial_cost: f64,
    pub terminal_cost: f64,
    pub steps_taken: usize,
    /// Index of the nearest reference cost level, when levels are supplied.
    pub nearest_level: Option<usize>,
}

struct Net {
    weights: Vec<DMatrix<f64>>,
    biases: Vec<DVector<f64>>,
}

impl Net {
    fn random(q: usize, l: usize, scale: f64, rng: &mut ChaCha8Rng) -> Net {
        let layers = l + 1;
        let weights = (0..layers)
            .map(|_| DMatrix::from_fn(q, q, |_, _| scale * rng.sample::<f64, _>(StandardNormal)))
            .collect();
        let biases = (0..layers)
            .map(|_| DVector::from_fn(q, |_, _| scale * rng.sample::<f64, _>(StandardNormal)))
            .collect();
        Net { weights, biases }
    }

    /// Forward states; hidden layers apply the ramp, the last layer is affine.
    fn forward(&self, x0: &DMatrix<f64>) -> Vec<DMatrix<f64>> {
        let mut states = vec![x0.clone()];
        let last = self.weights.len() - 1;
        for (l, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let mut pre = w * states.last().unwrap();
            for mut col in pre.column_iter_mut() {
                col += b;
            }
            states.push(if l < last { pre.map(|a| a.max(0.0)) } else { pre });
        }
        states
    }

    /// One descent step on the squared weighted cost; returns the cost before
    /// the step and the squared gradient norm.
    fn step(&mut self, x0: &DMatrix<f64>, y_ext: &DMatrix<f64>, n: &WeightedNorm, lr: f64) -> (f64, f64) {
        let states = self.forward(x0);
        let residual = states.last().unwrap() - y_ext;
        let cost = n.norm(&residual);
        let w_cols = n.partition().column_weights();
        // delta = dC^2/dX^(l+1), starting from 2 R N^{-1}
        let mut delta = residual.clone();
        for (i, mut col) in delta.column_iter_mut().enumerate() {
            col *= 2.0 * w_cols[i];
        }
        let last = self.weights.len() - 1;
        let mut grad_sq = 0.0;
        for l in (0..=last).rev() {
            if l < last {
                // gate through the ramp: zero where the preactivation was
                // non-positive (states[l+1] stores the post-activation)
                let state = &states[l + 1];
                delta.zip_apply(state, |d, s| {
                    if s <= 0.0 {
                        *d = 0.0;
                    }
                });
            }
            let grad_w = &delta * states[l].transpose();
            let grad_b = delta.column_sum();
            grad_sq += grad_w.norm_squared() + grad_b.norm_squared();
            let prev_delta = self.weights[l].transpose() * &delta;
            self.weights[l] -= grad_w * lr;
            self.biases[l] -= grad_b * lr;
            delta = prev_delta;
        }
        (cost, grad_sq)
    }
}

/// Runs seeded random-initialization descent and reports terminal costs,
/// classifying each against the supplied reference levels (typically the
/// per-pattern constructed costs, with level 0 the global minimum).
pub fn gd_baseline(
    d: &ClusteredDataset,
    l: usize,
    cfg: &GdConfig,
    levels: &[f64],
) -> Result<Vec<GdRun>> {
    let n = WeightedNorm::for_dataset(d);
    let y_ext = d.extended_outputs();
    let mut runs = Vec::with_capacity(cfg.inits);
    for init_index in 0..cfg.inits {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(init_index as u64));
        let mut net = Net::random(d.dim_q(), l, cfg.init_scale, &mut rng);
        let initial_cost = {
            let states = net.forward(d.inputs());
            n.norm(&(states.last().unwrap() - &y_ext))
        };
        let mut steps_taken = cfg.steps;
        for step in 0..cfg.steps {
            let (cost, grad_sq) = net.step(d.inputs(), &y_ext, &n, cfg.learning_rate);
            if cost * cost < 1e-20 || grad_sq < 1e-24 {
                steps_taken = step + 1;
                break;
            }
        }
        let terminal_cost = {
            let states = net.forward(d.inputs());
            n.norm(&(states.last().unwrap() - &y_ext))
        };
        let nearest_level = if levels.is_empty() {
            None
        } else {
            let mut best = (0usize, f64::INFINITY);
            for (i, &lv) in levels.iter().enumerate() {
                let gap = (terminal_cost - lv).abs();
                if gap < best.1 {
                    best = (i, gap);
                }
            }
            Some(best.0)
        };
        runs.push(GdRun { init_index, initial_cost, terminal_cost, steps_taken, nearest_level });
    }
    Ok(runs)
}
