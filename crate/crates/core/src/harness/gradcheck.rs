//! Finite-difference criticality checks of the joint cost.
//!
//! The cost is differentiated in the coordinates the construction lives in:
//! the cumulative hidden parameters `(W^(l), b^(l))` plus the terminal weight
//! acting on the truncated data (the terminal offset vanishes at the optimum
//! in this frame and is not a parameter). The terminal layer is NOT
//! re-optimized under perturbation; the full joint cost is differentiated.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg;
use crate::readout::WeightedNorm;
use crate::types::{ClusteredDataset, CumulativeStack};

/// Finite-difference step.
pub const FD_STEP: f64 = 1e-6;

/// Outcome of one criticality check.
#[derive(Debug, Clone)]
pub struct CriticalityCheck {
    /// Largest central finite-difference derivative over all parameters.
    pub max_grad: f64,
    /// Parameter label attaining `max_grad`.
    pub worst_param: String,
    /// Smallest preactivation magnitude at the base point.
    pub min_preactivation: f64,
    /// Cost at the base point.
    pub base_cost: f64,
    /// Largest cost decrease over the random perturbations (positive = drop).
    pub max_perturbation_drop: f64,
}

struct JointPoint {
    hidden_w: Vec<DMatrix<f64>>,
    hidden_b: Vec<DVector<f64>>,
    terminal_w: DMatrix<f64>,
}

impl JointPoint {
    fn cost(&self, x0: &DMatrix<f64>, y_ext: &DMatrix<f64>, n: &WeightedNorm) -> Result<f64> {
        let mut z = x0.clone();
        for (w, b) in self.hidden_w.iter().zip(&self.hidden_b) {
            let mut pre = w * &z;
            for mut col in pre.column_iter_mut() {
                col += b;
            }
            let mut post = pre.map(|a| a.max(0.0));
            for mut col in post.column_iter_mut() {
                col -= b;
            }
            z = linalg::checked_solve(w, &post)?;
        }
        let residual = &self.terminal_w * z - y_ext;
        Ok(n.norm(&residual))
    }

    /// Smallest |entry| over all hidden preactivations at this point.
    fn min_preactivation(&self, x0: &DMatrix<f64>) -> Result<f64> {
        let mut z = x0.clone();
        let mut margin = f64::INFINITY;
        for (w, b) in self.hidden_w.iter().zip(&self.hidden_b) {
            let mut pre = w * &z;
            for mut col in pre.column_iter_mut() {
                col += b;
            }
            for &v in pre.iter() {
                margin = margin.min(v.abs());
            }
            let mut post = pre.map(|a| a.max(0.0));
            for mut col in post.column_iter_mut() {
                col -= b;
            }
            z = linalg::checked_solve(w, &post)?;
        }
        Ok(margin)
    }

    fn num_params(&self) -> usize {
        let q = self.terminal_w.nrows();
        self.hidden_w.len() * (q * q + q) + q * q
    }

    fn param_mut(&mut self, idx: usize) -> (&mut f64, String) {
        let q = self.terminal_w.nrows();
        let per_layer = q * q + q;
        let layer = idx / per_layer;
        if layer < self.hidden_w.len() {
            let off = idx % per_layer;
            if off < q * q {
                (&mut self.hidden_w[layer][off], format!("W^({}) entry {}", layer + 1, off))
            } else {
                let k = off - q * q;
                (&mut self.hidden_b[layer][k], format!("b^({}) entry {}", layer + 1, k))
            }
        } else {
            let off = idx - self.hidden_w.len() * per_layer;
            (&mut self.terminal_w[off], format!("terminal W entry {off}"))
        }
    }
}

/// Central finite differences of the joint cost at a constructed point, plus
/// random-perturbation descent probes.
///
/// Fails with `NonSmoothPoint` when any preactivation magnitude is below
/// `10 * h`; constructed points keep margins on the order of the noise
/// radius, far above that.
pub fn grad_check(
    d: &ClusteredDataset,
    hidden: &CumulativeStack,
    terminal_w: &DMatrix<f64>,
    h: f64,
    n_perturbations: usize,
    seed: u64,
) -> Result<CriticalityCheck> {
    let n = WeightedNorm::for_dataset(d);
    let y_ext = d.extended_outputs();
    let x0 = d.inputs();
    let mut point = JointPoint {
        hidden_w: hidden.weights().to_vec(),
        hidden_b: hidden.biases().to_vec(),
        terminal_w: terminal_w.clone(),
    };

    let margin = point.min_preactivation(x0)?;
    if margin <= 10.0 * h {
        return Err(Error::NonSmoothPoint { margin, required: 10.0 * h });
    }
    let base_cost = point.cost(x0, &y_ext, &n)?;

    let mut max_grad = 0.0f64;
    let mut worst_param = String::new();
    for idx in 0..point.num_params() {
        let old = {
            let (p, _) = point.param_mut(idx);
            *p
        };
        {
            let (p, _) = point.param_mut(idx);
            *p = old + h;
        }
        let up = point.cost(x0, &y_ext, &n)?;
        {
            let (p, _) = point.param_mut(idx);
            *p = old - h;
        }
        let down = point.cost(x0, &y_ext, &n)?;
        let (p, label) = point.param_mut(idx);
        *p = old;
        let g = (up - down).abs() / (2.0 * h);
        if g > max_grad {
            max_grad = g;
            worst_param = label;
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut max_drop = 0.0f64;
    let count = point.num_params();
    for _ in 0..n_perturbations {
        let mut dir: Vec<f64> =
            (0..count).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let norm: f64 = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
        for v in &mut dir {
            *v *= 1e-3 / norm;
        }
        let mut old = Vec::with_capacity(count);
        for (idx, &delta) in dir.iter().enumerate() {
            let (p, _) = point.param_mut(idx);
            old.push(*p);
            *p += delta;
        }
        let perturbed = point.cost(x0, &y_ext, &n)?;
        for (idx, &saved) in old.iter().enumerate() {
            let (p, _) = point.param_mut(idx);
            *p = saved;
        }
        max_drop = max_drop.max(base_cost - perturbed);
    }

    Ok(CriticalityCheck {
        max_grad,
        worst_param,
        min_preactivation: margin,
        base_cost,
        max_perturbation_drop: max_drop,
    })
}
