//! Weighted-L2 readout machinery: the block-weighted inner product, the
//! projector onto the row space of the hidden state, the optimal terminal
//! layer, the deviation diagnostics Delta_1 / Delta_2 / delta_P, and the
//! closed-form cost expressions.
//!
//! The three cost routes computed here agree to round-off on any
//! rank-preserving stack:
//!   * direct: residual of the optimal terminal map on the truncated data,
//!   * projector: `|| Y_ext P_perp ||` with P built from the same data,
//!   * closed form: `|| Y |D2|^(1/2) (1 + D2)^(-1/2) ||` from the data's
//!     own mean/deviation diagnostics.
//!
//! The terminal offset vanishes at the optimum in the truncation frame, which
//! is what makes the projector and closed-form routes exact.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::blocks::Partition;
use crate::error::{Error, Result};
use crate::linalg;
use crate::network;
use crate::types::{ClusteredDataset, CumulativeStack};

/// Largest N for which the N x N projector is materialized; beyond this the
/// factored Q x Q route is used.
pub const PROJECTOR_MATERIALIZE_LIMIT: usize = 2000;

/// The block norm weights: `N = diag(N_j 1_{N_j x N_j})` defined by the class
/// sizes, inducing `(A, B) = tr(A N^{-1} B^T)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WeightedNorm {
    partition: Partition,
}

impl WeightedNorm {
    pub fn from_class_sizes(class_sizes: Vec<usize>) -> Self {
        WeightedNorm { partition: Partition::new(class_sizes) }
    }

    pub fn for_dataset(d: &ClusteredDataset) -> Self {
        WeightedNorm::from_class_sizes(d.class_sizes().to_vec())
    }

    pub fn partition(&self) -> &Partition {
        &self.partition
    }

    pub fn total(&self) -> usize {
        self.partition.total()
    }

    /// Weighted inner product `tr(A N^{-1} B^T)`.
    pub fn inner(&self, a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
        assert_eq!(a.ncols(), self.total());
        assert_eq!(b.ncols(), self.total());
        let w = self.partition.column_weights();
        let mut acc = 0.0;
        for (i, &wi) in w.iter().enumerate() {
            acc += wi * a.column(i).dot(&b.column(i));
        }
        acc
    }

    /// Weighted norm `sqrt((A, A))`.
    pub fn norm(&self, a: &DMatrix<f64>) -> f64 {
        self.inner(a, a).sqrt()
    }

    /// Scales columns by `1/sqrt(N_j)`, turning the weighted norm into the
    /// plain Frobenius norm.
    pub fn scale_columns(&self, a: &DMatrix<f64>) -> DMatrix<f64> {
        let w = self.partition.column_weights();
        let mut out = a.clone();
        for (i, mut col) in out.column_iter_mut().enumerate() {
            col *= w[i].sqrt();
        }
        out
    }
}

/// Weighted cost `sqrt(sum_j (1/N_j) sum_i |x_{j,i} - y_j|^2)` between a
/// terminal state and the extended outputs.
pub fn weighted_cost(xl1: &DMatrix<f64>, y_ext: &DMatrix<f64>, n: &WeightedNorm) -> Result<f64> {
    if xl1.shape() != y_ext.shape() || xl1.ncols() != n.total() {
        return Err(Error::ShapeMismatch(format!(
            "cost needs matching {}-column matrices, got {:?} and {:?}",
            n.total(),
            xl1.shape(),
            y_ext.shape()
        )));
    }
    Ok(n.norm(&(xl1 - y_ext)))
}

/// Orthonormal basis (N x rank) of the row space of the column-scaled state,
/// via the right singular vectors.
fn scaled_row_basis(xl: &DMatrix<f64>, n: &WeightedNorm) -> Result<DMatrix<f64>> {
    let q = xl.nrows();
    let scaled = n.scale_columns(xl);
    let svd = scaled.svd(false, true);
    let v_t = svd.v_t.as_ref().unwrap();
    let smax = svd.singular_values.max();
    let rank = svd
        .singular_values
        .iter()
        .filter(|&&s| s > linalg::RANK_RTOL * smax)
        .count();
    if rank < q {
        return Err(Error::RankDeficient { rank, expected: q });
    }
    Ok(v_t.rows(0, rank).transpose())
}

/// Materialized projector `P = N^{-1} X^T (X N^{-1} X^T)^{-1} X` onto the row
/// space of `xl`, self-adjoint for the weighted inner product. Built through
/// the scaled orthonormal basis `P = N^{-1/2} V V^T N^{1/2}` so no Gram
/// inverse is formed.
pub fn build_projector(xl: &DMatrix<f64>, n: &WeightedNorm) -> Result<DMatrix<f64>> {
    let cols = xl.ncols();
    if cols != n.total() {
        return Err(Error::ShapeMismatch("projector input column count".into()));
    }
    if cols > PROJECTOR_MATERIALIZE_LIMIT {
        return Err(Error::InvalidInput(format!(
            "projector materialization is limited to N <= {PROJECTOR_MATERIALIZE_LIMIT}"
        )));
    }
    let v = scaled_row_basis(xl, n)?;
    let w = n.partition.column_weights();
    let mut p = &v * v.transpose();
    // conjugate by N^{+-1/2}: row i scaled by sqrt(w_i), column k by 1/sqrt(w_k)
    for i in 0..cols {
        for k in 0..cols {
            p[(i, k)] *= (w[i] / w[k]).sqrt();
        }
    }
    Ok(p)
}

/// `|| Y_ext P_perp ||` for the projector of `xl`, computed in the scaled
/// frame `|| Y~ (1 - V V^T) ||_F` without materializing P.
pub fn projector_cost(xl: &DMatrix<f64>, d: &ClusteredDataset, n: &WeightedNorm) -> Result<f64> {
    let v = scaled_row_basis(xl, n)?;
    let y_scaled = n.scale_columns(&d.extended_outputs());
    let reduced = &y_scaled * &v;
    let residual = y_scaled - reduced * v.transpose();
    Ok(residual.norm())
}

/// Optimal terminal map and its cost.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReadoutSolution {
    /// Terminal weight in the truncation frame.
    pub weight: DMatrix<f64>,
    /// Terminal offset in the truncation frame; zero at every optimum here.
    pub bias: DVector<f64>,
    /// Weighted residual cost of the solution.
    pub cost: f64,
}

/// Solves the terminal least squares `min_W || W xl - Y_ext ||` over the
/// weighted norm by pseudoinverse, with the terminal offset pinned at zero in
/// the truncation frame (where it vanishes at the optimum). Nonunique
/// solutions resolve to the minimum-norm one.
pub fn optimal_readout(
    xl: &DMatrix<f64>,
    d: &ClusteredDataset,
    n: &WeightedNorm,
) -> Result<ReadoutSolution> {
    let q = xl.nrows();
    if xl.ncols() != n.total() || d.dim_q() != q {
        return Err(Error::ShapeMismatch("readout input shapes".into()));
    }
    let y_ext = d.extended_outputs();
    let scaled_x = n.scale_columns(xl);
    let scaled_y = n.scale_columns(&y_ext);
    // W = Y~ X~^+ via SVD of the scaled data
    let svd = scaled_x.clone().svd(true, true);
    let u = svd.u.as_ref().unwrap();
    let vt = svd.v_t.as_ref().unwrap();
    let smax = svd.singular_values.max();
    let tol = 1e-12 * smax.max(1.0);
    let mut inv_s = DMatrix::zeros(svd.singular_values.len(), svd.singular_values.len());
    for (i, &s) in svd.singular_values.iter().enumerate() {
        if s > tol {
            inv_s[(i, i)] = 1.0 / s;
        }
    }
    let weight = &scaled_y * vt.transpose() * inv_s * u.transpose();
    let residual = &weight * &scaled_x - scaled_y;
    let cost = residual.norm();
    Ok(ReadoutSolution { weight, bias: DVector::zeros(q), cost })
}

/// Deviation diagnostics of a hidden state: `D1 = A^{-1} dX` with A the block
/// means and dX the deviations, `D2 = D1 N^{-1} D1^T`, and `delta_P` the
/// largest column norm of `D1`.
pub fn delta_diagnostics(
    xl: &DMatrix<f64>,
    n: &WeightedNorm,
) -> Result<(DMatrix<f64>, DMatrix<f64>, f64)> {
    if xl.ncols() != n.total() {
        return Err(Error::ShapeMismatch("diagnostics input column count".into()));
    }
    let a = n.partition.block_means(xl);
    if linalg::cond_2(&a) > linalg::COND_LIMIT {
        return Err(Error::SingularReducedMeans);
    }
    let dx = n.partition.deviations(xl);
    let d1 = linalg::checked_solve(&a, &dx).map_err(|_| Error::SingularReducedMeans)?;
    let w = n.partition.column_weights();
    let mut wd1t = d1.transpose();
    for (i, mut row) in wd1t.row_iter_mut().enumerate() {
        row *= w[i];
    }
    let d2_raw = &d1 * wd1t;
    // symmetrize against round-off drift
    let d2 = (&d2_raw + d2_raw.transpose()) * 0.5;
    let delta_p = (0..d1.ncols()).map(|i| d1.column(i).norm()).fold(0.0, f64::max);
    Ok((d1, d2, delta_p))
}

/// Closed-form cost `|| Y |D2|^(1/2) (1 + D2)^(-1/2) ||_F` via the symmetric
/// eigendecomposition of `D2`. Eigenvalues below `-1e-10` are rejected;
/// magnitudes below `1e-14` are clamped to zero.
pub fn cost_closed_form(y: &DMatrix<f64>, delta2: &DMatrix<f64>) -> Result<f64> {
    if delta2.nrows() != delta2.ncols() || y.ncols() != delta2.nrows() {
        return Err(Error::ShapeMismatch("closed form needs Y QxQ and D2 QxQ".into()));
    }
    let sym = (delta2 + delta2.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();
    let mut scale = DVector::zeros(eig.eigenvalues.len());
    for (i, &lam) in eig.eigenvalues.iter().enumerate() {
        if lam < -1e-10 {
            return Err(Error::NotPSD { eigenvalue: lam });
        }
        let lam = if lam.abs() < 1e-14 { 0.0 } else { lam.max(0.0) };
        scale[i] = (lam / (1.0 + lam)).sqrt();
    }
    let m = &eig.eigenvectors * DMatrix::from_diagonal(&scale) * eig.eigenvectors.transpose();
    Ok((y * m).norm())
}

/// The relaxed upper bound with the front constant dropped: true iff the
/// closed-form cost does not exceed `|| Y D1 ||` in the weighted norm.
pub fn upper_bound_check(
    y: &DMatrix<f64>,
    delta1: &DMatrix<f64>,
    delta2: &DMatrix<f64>,
    n: &WeightedNorm,
) -> Result<bool> {
    let closed = cost_closed_form(y, delta2)?;
    let bound = n.norm(&(y * delta1));
    Ok(closed <= bound + 1e-12 * (1.0 + bound))
}

/// Cost evaluation of one hidden stack over a dataset: forward, projector and
/// closed-form routes plus the deviation diagnostics.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CostReport {
    pub cost_forward: f64,
    pub cost_projector: f64,
    pub cost_closed: f64,
    pub delta1: DMatrix<f64>,
    pub delta2: DMatrix<f64>,
    pub delta_p: f64,
    pub readout_w: DMatrix<f64>,
    pub readout_b: DVector<f64>,
}

/// Evaluates a hidden cumulative stack end to end: truncates the data, solves
/// the terminal layer, runs the full network forward, and computes all three
/// cost routes with diagnostics.
pub fn cost_report(d: &ClusteredDataset, hidden: &CumulativeStack) -> Result<CostReport> {
    let n = WeightedNorm::for_dataset(d);
    let tau = network::truncate_composed(d.inputs(), hidden)?;
    let sol = optimal_readout(&tau, d, &n)?;
    let full = hidden.with_terminal(sol.weight.clone(), sol.bias.clone())?;
    let layers = network::cumulative_to_layerwise(&full)?;
    let trace = network::forward(d, &layers)?;
    let cost_forward = weighted_cost(trace.output(), &d.extended_outputs(), &n)?;
    let cost_projector = projector_cost(&tau, d, &n)?;
    let (delta1, delta2, delta_p) = delta_diagnostics(&tau, &n)?;
    let cost_closed = cost_closed_form(d.outputs(), &delta2)?;
    Ok(CostReport {
        cost_forward,
        cost_projector,
        cost_closed,
        delta1,
        delta2,
        delta_p,
        readout_w: sol.weight,
        readout_b: sol.bias,
    })
}
