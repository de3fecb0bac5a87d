//! Network evaluation: the ramp activation, the layer recursion, the
//! truncation map and its nested form, conversions between layerwise and
//! cumulative parameters, and the rank-preservation check.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg;
use crate::types::{ClusteredDataset, CumulativeStack, LayerStack};

/// Entrywise ramp `max(0, a)`. Idempotent, identity on the positive sector.
pub fn relu(x: &DMatrix<f64>) -> DMatrix<f64> {
    x.map(|a| a.max(0.0))
}

/// The activation used by every hidden layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Activation {
    /// The standard ramp `a -> max(0, a)`.
    #[default]
    Ramp,
}

impl Activation {
    pub fn apply(self, x: &DMatrix<f64>) -> DMatrix<f64> {
        match self {
            Activation::Ramp => relu(x),
        }
    }
}

/// Hidden and terminal states of one forward pass: `states[l]` is `X^(l)`,
/// l = 0..=L+1, all of shape Q x N.
#[derive(Debug, Clone)]
pub struct LayerTrace {
    states: Vec<DMatrix<f64>>,
}

impl LayerTrace {
    pub fn state(&self, l: usize) -> &DMatrix<f64> {
        &self.states[l]
    }

    /// Terminal state `X^(L+1)`.
    pub fn output(&self) -> &DMatrix<f64> {
        self.states.last().unwrap()
    }

    pub fn num_states(&self) -> usize {
        self.states.len()
    }
}

fn affine(w: &DMatrix<f64>, x: &DMatrix<f64>, b: &DVector<f64>) -> DMatrix<f64> {
    let mut y = w * x;
    for mut col in y.column_iter_mut() {
        col += b;
    }
    y
}

/// Forward pass: `X^(l) = relu(W_l X^(l-1) + b_l u^T)` for l <= L and the
/// affine terminal layer without activation.
pub fn forward(d: &ClusteredDataset, p: &LayerStack) -> Result<LayerTrace> {
    forward_matrix(d.inputs(), p)
}

/// Forward pass on a raw Q x K matrix.
pub fn forward_matrix(x0: &DMatrix<f64>, p: &LayerStack) -> Result<LayerTrace> {
    if x0.nrows() != p.dim_q() {
        return Err(Error::ShapeMismatch(format!(
            "input rows {} != stack dimension {}",
            x0.nrows(),
            p.dim_q()
        )));
    }
    let total = p.num_layers();
    let mut states = Vec::with_capacity(total + 1);
    states.push(x0.clone());
    for l in 0..total {
        let pre = affine(p.weight(l), states.last().unwrap(), p.bias(l));
        if l + 1 < total {
            states.push(relu(&pre));
        } else {
            states.push(pre);
        }
    }
    Ok(LayerTrace { states })
}

/// Truncation map `tau_{W,b}(X) = W^{-1}(relu(W X + b u^T) - b u^T)`,
/// the conjugation of the ramp by the affine map of the layer.
pub fn truncate(x: &DMatrix<f64>, w: &DMatrix<f64>, b: &DVector<f64>) -> Result<DMatrix<f64>> {
    if w.nrows() != x.nrows() || w.ncols() != x.nrows() || b.len() != x.nrows() {
        return Err(Error::ShapeMismatch("truncate needs W QxQ, b in R^Q, X QxK".into()));
    }
    let mut post = relu(&affine(w, x, b));
    for mut col in post.column_iter_mut() {
        col -= b;
    }
    linalg::checked_solve(w, &post)
}

/// Nested truncations `tau_{W^(l),b^(l)} ∘ ... ∘ tau_{W^(1),b^(1)}` applied
/// to `x0`, one per entry of the cumulative stack.
pub fn truncate_composed(x0: &DMatrix<f64>, c: &CumulativeStack) -> Result<DMatrix<f64>> {
    let mut z = x0.clone();
    for l in 0..c.num_layers() {
        z = truncate(&z, c.weight(l), c.bias(l))?;
    }
    Ok(z)
}

/// Recovers layerwise parameters from cumulative ones:
/// `W_l = W^(l) (W^(l-1))^{-1}`, `b_l = b^(l) - W_l b^(l-1)`,
/// with `W^(0) = I`, `b^(0) = 0`.
pub fn cumulative_to_layerwise(c: &CumulativeStack) -> Result<LayerStack> {
    let q = c.dim_q();
    let mut weights = Vec::with_capacity(c.num_layers());
    let mut biases = Vec::with_capacity(c.num_layers());
    let mut prev_w = DMatrix::identity(q, q);
    let mut prev_b = DVector::zeros(q);
    for l in 0..c.num_layers() {
        let w = c.weight(l) * linalg::checked_inverse(&prev_w)?;
        let b = c.bias(l) - &w * &prev_b;
        prev_w = c.weight(l).clone();
        prev_b = c.bias(l).clone();
        weights.push(w);
        biases.push(b);
    }
    LayerStack::new(weights, biases)
}

/// Accumulates layerwise parameters: `W^(l) = W_l ... W_1` and the matching
/// bias recursion `b^(l) = W_l b^(l-1) + b_l`.
pub fn layerwise_to_cumulative(p: &LayerStack) -> Result<CumulativeStack> {
    let q = p.dim_q();
    let mut cum_w = Vec::with_capacity(p.num_layers());
    let mut cum_b = Vec::with_capacity(p.num_layers());
    let mut acc_w = DMatrix::identity(q, q);
    let mut acc_b = DVector::zeros(q);
    for l in 0..p.num_layers() {
        acc_w = p.weight(l) * acc_w;
        acc_b = p.weight(l) * acc_b + p.bias(l);
        cum_w.push(acc_w.clone());
        cum_b.push(acc_b.clone());
    }
    CumulativeStack::new(cum_w, cum_b)
}

/// True iff the nested truncation of the stack preserves both the rank of the
/// data matrix and the rank of its blockwise-mean matrix.
pub fn is_rank_preserving(d: &ClusteredDataset, c: &CumulativeStack) -> bool {
    let tau = match truncate_composed(d.inputs(), c) {
        Ok(t) => t,
        Err(_) => return false,
    };
    let p = d.partition();
    let rank_x = linalg::rank(d.inputs());
    let rank_tau = linalg::rank(&tau);
    if rank_tau != rank_x {
        return false;
    }
    let means_x = p.block_means(d.inputs());
    let means_tau = p.block_means(&tau);
    linalg::rank(&means_tau) == linalg::rank(&means_x)
}
