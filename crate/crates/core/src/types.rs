//! Shared data model: clustered datasets, their derived geometry, parameter
//! stacks in both layerwise and cumulative form, and regime vectors.
//!
//! All values are immutable after construction and safe to share across
//! threads; nothing here has interior mutability.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::blocks::Partition;
use crate::error::{Error, Result};
use crate::geometry;
use crate::linalg;

/// Training data: Q output classes, column-blocked inputs in dimension Q.
///
/// Column block j of `inputs` holds the N_j training vectors of class j, in
/// the canonical order of the columns of `outputs`.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusteredDataset {
    dim_q: usize,
    partition: Partition,
    inputs: DMatrix<f64>,
    outputs: DMatrix<f64>,
}

impl ClusteredDataset {
    /// Builds a dataset, checking shapes: Q >= 2, every N_j >= 1, N >= Q+1,
    /// `inputs` is Q x N and `outputs` is Q x Q.
    pub fn new(
        class_sizes: Vec<usize>,
        inputs: DMatrix<f64>,
        outputs: DMatrix<f64>,
    ) -> Result<Self> {
        let q = class_sizes.len();
        if q < 2 {
            return Err(Error::InvalidInput(format!("Q must be >= 2, got {q}")));
        }
        if class_sizes.contains(&0) {
            return Err(Error::ShapeMismatch("every class size must be >= 1".into()));
        }
        let n: usize = class_sizes.iter().sum();
        if n < q + 1 {
            return Err(Error::ShapeMismatch(format!("need N >= Q+1, got N={n}, Q={q}")));
        }
        if inputs.nrows() != q || inputs.ncols() != n {
            return Err(Error::ShapeMismatch(format!(
                "inputs must be {q}x{n}, got {}x{}",
                inputs.nrows(),
                inputs.ncols()
            )));
        }
        if outputs.nrows() != q || outputs.ncols() != q {
            return Err(Error::ShapeMismatch(format!(
                "outputs must be {q}x{q}, got {}x{}",
                outputs.nrows(),
                outputs.ncols()
            )));
        }
        Ok(ClusteredDataset {
            dim_q: q,
            partition: Partition::new(class_sizes),
            inputs,
            outputs,
        })
    }

    pub fn dim_q(&self) -> usize {
        self.dim_q
    }

    pub fn num_samples(&self) -> usize {
        self.partition.total()
    }

    pub fn class_sizes(&self) -> &[usize] {
        self.partition.sizes()
    }

    pub fn partition(&self) -> &Partition {
        &self.partition
    }

    pub fn inputs(&self) -> &DMatrix<f64> {
        &self.inputs
    }

    pub fn outputs(&self) -> &DMatrix<f64> {
        &self.outputs
    }

    /// Block of inputs belonging to class `j`.
    pub fn class_block(&self, j: usize) -> DMatrix<f64> {
        self.inputs.columns_range(self.partition.range(j)).into_owned()
    }

    /// Outputs repeated over their class blocks (Q x N).
    pub fn extended_outputs(&self) -> DMatrix<f64> {
        self.partition.extend(&self.outputs)
    }
}

/// Derived cluster geometry: means, deviations, noise radius, cone angles and
/// the translation depth bound.
#[derive(Debug, Clone)]
pub struct ClusterGeometry {
    source: ClusteredDataset,
    reduced_means: DMatrix<f64>,
    grand_mean: DVector<f64>,
    deviations: DMatrix<f64>,
    delta: f64,
    directions: DMatrix<f64>,
    theta_star_j: Vec<f64>,
    theta0: f64,
    theta_star: f64,
    d_bound: f64,
    c0: f64,
}

impl ClusterGeometry {
    pub fn source(&self) -> &ClusteredDataset {
        &self.source
    }

    pub fn dim_q(&self) -> usize {
        self.source.dim_q()
    }

    /// Q x Q matrix whose column j is the mean of class j.
    pub fn reduced_means(&self) -> &DMatrix<f64> {
        &self.reduced_means
    }

    pub fn mean(&self, j: usize) -> DVector<f64> {
        self.reduced_means.column(j).into_owned()
    }

    pub fn grand_mean(&self) -> &DVector<f64> {
        &self.grand_mean
    }

    /// Deviation matrix of the inputs from their class means (Q x N).
    pub fn deviations(&self) -> &DMatrix<f64> {
        &self.deviations
    }

    /// Noise radius: largest Euclidean norm of any deviation column.
    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// Unit vector from the mean of class j toward the grand mean.
    pub fn direction(&self, j: usize) -> DVector<f64> {
        self.directions.column(j).into_owned()
    }

    pub fn directions(&self) -> &DMatrix<f64> {
        &self.directions
    }

    /// Smallest opening angle whose cone from mean j along `direction(j)`
    /// contains the 4*delta balls around all other means.
    pub fn theta_star_j(&self, j: usize) -> f64 {
        self.theta_star_j[j]
    }

    pub fn theta_star_all(&self) -> &[f64] {
        &self.theta_star_j
    }

    pub fn theta0(&self) -> f64 {
        self.theta0
    }

    /// Working opening angle `theta0 + max_j theta_star_j`, strictly below pi.
    pub fn theta_star(&self) -> f64 {
        self.theta_star
    }

    /// Maximal apex translation depth D.
    pub fn d_bound(&self) -> f64 {
        self.d_bound
    }

    pub fn c0(&self) -> f64 {
        self.c0
    }

    /// Half width of the transitional band, `2 * delta * sqrt(Q)`.
    pub fn band_halfwidth(&self) -> f64 {
        2.0 * self.delta * (self.dim_q() as f64).sqrt()
    }

    /// Collapse regime interval `I_0 = (-D, -2*delta*sqrt(Q))`.
    pub fn interval_i0(&self) -> (f64, f64) {
        (-self.d_bound, -self.band_halfwidth())
    }

    /// Smallest distance from a class mean to the grand mean.
    pub fn min_mean_separation(&self) -> f64 {
        (0..self.dim_q())
            .map(|j| (self.reduced_means.column(j) - &self.grand_mean).norm())
            .fold(f64::INFINITY, f64::min)
    }

    /// Depth bound up to which collapsed clusters verifiably stay inside the
    /// identity region of every later layer: past the grand mean a collapsed
    /// point can fall behind a later translated cone apex, so sampling is
    /// restricted to `min(D, 0.9 * min_j |mean_j - grand_mean|)`.
    pub fn safe_collapse_depth(&self) -> f64 {
        self.d_bound.min(0.9 * self.min_mean_separation())
    }

    /// Fixed-point regime lower endpoint; `I_1 = (2*delta*sqrt(Q), inf)`.
    pub fn interval_i1_lo(&self) -> f64 {
        self.band_halfwidth()
    }

    /// Collapsed mean of class j at depth `mu_j`: `mean_j - mu_j * f_j`.
    pub fn collapsed_mean(&self, j: usize, mu_j: f64) -> DVector<f64> {
        self.mean(j) - self.direction(j) * mu_j
    }

    /// Reduced means with every class j translated by `-mu_j * f_j`.
    pub fn collapsed_reduced_means(&self, mu: &DVector<f64>) -> DMatrix<f64> {
        let mut m = self.reduced_means.clone();
        for j in 0..self.dim_q() {
            m.set_column(j, &self.collapsed_mean(j, mu[j]));
        }
        m
    }
}

/// Default separation constant; the model only requires a value in (0, 1/4).
pub const DEFAULT_C0: f64 = 0.2;

/// Default angle margin rule: `min(0.1, (pi - max_j theta_star_j) / 4)`.
pub fn default_theta0(max_theta_star_j: f64) -> f64 {
    (0.1f64).min((std::f64::consts::PI - max_theta_star_j) / 4.0)
}

/// Validates a dataset and computes its full geometry with the default
/// `theta0` rule. Fails if the separation or cone conditions are violated.
pub fn validate_dataset(d: &ClusteredDataset, c0: f64) -> Result<ClusterGeometry> {
    validate_dataset_with(d, c0, None)
}

/// As [`validate_dataset`], with an explicit angle margin `theta0`.
pub fn validate_dataset_with(
    d: &ClusteredDataset,
    c0: f64,
    theta0: Option<f64>,
) -> Result<ClusterGeometry> {
    if !(0.0 < c0 && c0 < 0.25) {
        return Err(Error::InvalidInput(format!("c0 must lie in (0, 1/4), got {c0}")));
    }
    let q = d.dim_q();
    let p = d.partition();

    let cond_y = linalg::cond_2(d.outputs());
    if !cond_y.is_finite() || cond_y > linalg::COND_LIMIT {
        return Err(Error::SingularOutputs { cond: cond_y });
    }

    let reduced_means = p.block_means(d.inputs());
    let deviations = p.deviations(d.inputs());
    for j in 0..q {
        let block = deviations.columns_range(p.range(j));
        if block.norm() == 0.0 {
            return Err(Error::DegenerateCluster { class: j });
        }
    }
    let delta = (0..d.num_samples())
        .map(|i| deviations.column(i).norm())
        .fold(0.0, f64::max);

    let grand_mean: DVector<f64> =
        reduced_means.column_sum() / q as f64;
    let min_sep = (0..q)
        .map(|j| (reduced_means.column(j) - &grand_mean).norm())
        .fold(f64::INFINITY, f64::min);
    if delta >= c0 * min_sep {
        return Err(Error::SeparationViolation { delta, c0, min_sep });
    }

    if linalg::cond_2(&reduced_means) > linalg::COND_LIMIT {
        return Err(Error::SingularSimplex);
    }

    let mut directions = DMatrix::zeros(q, q);
    for j in 0..q {
        let v = &grand_mean - reduced_means.column(j);
        directions.set_column(j, &(&v / v.norm()));
    }

    let mut theta_star_j = Vec::with_capacity(q);
    for j in 0..q {
        theta_star_j.push(geometry::theta_star_j_raw(
            &reduced_means,
            &directions,
            delta,
            j,
        )?);
    }
    let max_theta = theta_star_j.iter().cloned().fold(0.0, f64::max);
    let theta0 = match theta0 {
        Some(t) if t > 0.0 => t,
        Some(t) => {
            return Err(Error::InvalidInput(format!("theta0 must be positive, got {t}")));
        }
        None => default_theta0(max_theta),
    };
    let theta_star = theta0 + max_theta;
    if theta_star >= std::f64::consts::PI {
        return Err(Error::ConeViolation { angle: theta_star });
    }

    let d_bound =
        geometry::translation_depth_raw(&reduced_means, &directions, delta, theta_star, q)?;

    Ok(ClusterGeometry {
        source: d.clone(),
        reduced_means,
        grand_mean,
        deviations,
        delta,
        directions,
        theta_star_j,
        theta0,
        theta_star,
        d_bound,
        c0,
    })
}

/// Layerwise network parameters `(W_l, b_l)`, l = 1..=len. When used as a
/// full network the last entry is the linear readout layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerStack {
    weights: Vec<DMatrix<f64>>,
    biases: Vec<DVector<f64>>,
}

/// Cumulative parameters `(W^(l), b^(l))` of the nested truncation form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CumulativeStack {
    cum_weights: Vec<DMatrix<f64>>,
    cum_biases: Vec<DVector<f64>>,
}

fn check_stack(weights: &[DMatrix<f64>], biases: &[DVector<f64>]) -> Result<usize> {
    if weights.is_empty() || weights.len() != biases.len() {
        return Err(Error::ShapeMismatch(format!(
            "stack needs matching nonempty weights/biases, got {} and {}",
            weights.len(),
            biases.len()
        )));
    }
    let q = weights[0].nrows();
    for (w, b) in weights.iter().zip(biases) {
        if w.nrows() != q || w.ncols() != q || b.len() != q {
            return Err(Error::ShapeMismatch("all layers must be QxQ with Q biases".into()));
        }
    }
    Ok(q)
}

impl LayerStack {
    pub fn new(weights: Vec<DMatrix<f64>>, biases: Vec<DVector<f64>>) -> Result<Self> {
        check_stack(&weights, &biases)?;
        Ok(LayerStack { weights, biases })
    }

    pub fn dim_q(&self) -> usize {
        self.weights[0].nrows()
    }

    pub fn num_layers(&self) -> usize {
        self.weights.len()
    }

    /// Hidden depth L of a full network (total layers minus the readout).
    pub fn depth_l(&self) -> usize {
        self.num_layers() - 1
    }

    pub fn weight(&self, l: usize) -> &DMatrix<f64> {
        &self.weights[l]
    }

    pub fn bias(&self, l: usize) -> &DVector<f64> {
        &self.biases[l]
    }

    pub fn weights(&self) -> &[DMatrix<f64>] {
        &self.weights
    }

    pub fn biases(&self) -> &[DVector<f64>] {
        &self.biases
    }
}

impl CumulativeStack {
    pub fn new(cum_weights: Vec<DMatrix<f64>>, cum_biases: Vec<DVector<f64>>) -> Result<Self> {
        check_stack(&cum_weights, &cum_biases)?;
        Ok(CumulativeStack { cum_weights, cum_biases })
    }

    pub fn dim_q(&self) -> usize {
        self.cum_weights[0].nrows()
    }

    pub fn num_layers(&self) -> usize {
        self.cum_weights.len()
    }

    pub fn weight(&self, l: usize) -> &DMatrix<f64> {
        &self.cum_weights[l]
    }

    pub fn bias(&self, l: usize) -> &DVector<f64> {
        &self.cum_biases[l]
    }

    pub fn weights(&self) -> &[DMatrix<f64>] {
        &self.cum_weights
    }

    pub fn biases(&self) -> &[DVector<f64>] {
        &self.cum_biases
    }

    /// Appends a terminal layer `(w, b)` in cumulative coordinates.
    pub fn with_terminal(&self, w: DMatrix<f64>, b: DVector<f64>) -> Result<CumulativeStack> {
        let mut cw = self.cum_weights.clone();
        let mut cb = self.cum_biases.clone();
        cw.push(w);
        cb.push(b);
        CumulativeStack::new(cw, cb)
    }
}

/// Depth parameters mu with their induced sign pattern s.
///
/// `s_j = 0` collapses cluster j (`mu_j` in `I_0`), `s_j = 1` keeps it fixed
/// (`mu_j` in `I_1`); values in the closed transitional band are rejected.
#[derive(Debug, Clone, PartialEq)]
pub struct RegimeVector {
    mu: DVector<f64>,
    pattern: Vec<u8>,
}

impl RegimeVector {
    pub fn new(mu: DVector<f64>, g: &ClusterGeometry) -> Result<Self> {
        if mu.len() != g.dim_q() {
            return Err(Error::ShapeMismatch(format!(
                "mu must have length {}, got {}",
                g.dim_q(),
                mu.len()
            )));
        }
        let (i0_lo, i0_hi) = g.interval_i0();
        let i1_lo = g.interval_i1_lo();
        let mut pattern = Vec::with_capacity(mu.len());
        for (j, &m) in mu.iter().enumerate() {
            if i0_lo < m && m < i0_hi {
                pattern.push(0);
            } else if m > i1_lo {
                pattern.push(1);
            } else {
                return Err(Error::RegimeViolation { index: j, value: m });
            }
        }
        Ok(RegimeVector { mu, pattern })
    }

    pub fn mu(&self) -> &DVector<f64> {
        &self.mu
    }

    pub fn mu_j(&self, j: usize) -> f64 {
        self.mu[j]
    }

    /// Sign pattern bits `s_j`.
    pub fn pattern_s(&self) -> &[u8] {
        &self.pattern
    }

    pub fn is_all_collapse(&self) -> bool {
        self.pattern.iter().all(|&s| s == 0)
    }

    pub fn is_all_fixed(&self) -> bool {
        self.pattern.iter().all(|&s| s == 1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn canonical_geometry_values() {
        let d = fixtures::canonical_q2();
        let g = validate_dataset(&d, 0.2).unwrap();
        assert!((g.delta() - 0.05).abs() < 1e-15);
        let sep = (g.mean(0) - g.grand_mean()).norm();
        assert!((sep - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
        // theta_*j = 2*asin(4*delta/sqrt(2)) for both classes by symmetry
        let expect = 2.0 * (0.2 / 2.0_f64.sqrt()).asin();
        assert!((g.theta_star_j(0) - expect).abs() < 1e-12);
        assert!((g.theta_star_j(1) - expect).abs() < 1e-12);
        assert!((g.theta0() - 0.1).abs() < 1e-15);
        assert!((g.theta_star() - 0.383_794_109_208_327_8).abs() < 1e-12);
    }

    #[test]
    fn separation_violation_with_tight_c0() {
        let d = fixtures::canonical_q2();
        // 0.05 >= 0.05 * 0.7071
        match validate_dataset(&d, 0.05) {
            Err(Error::SeparationViolation { .. }) => {}
            other => panic!("expected SeparationViolation, got {other:?}"),
        }
    }

    #[test]
    fn degenerate_cluster_detected() {
        let inputs = DMatrix::from_column_slice(
            2,
            4,
            &[1.05, 0.0, 0.95, 0.0, 0.0, 1.0, 0.0, 1.0],
        );
        let d = ClusteredDataset::new(vec![2, 2], inputs, DMatrix::identity(2, 2)).unwrap();
        match validate_dataset(&d, 0.2) {
            Err(Error::DegenerateCluster { class: 1 }) => {}
            other => panic!("expected DegenerateCluster, got {other:?}"),
        }
    }

    #[test]
    fn singular_outputs_rejected() {
        let d = fixtures::canonical_q2();
        let y = DMatrix::from_column_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let d2 = ClusteredDataset::new(d.class_sizes().to_vec(), d.inputs().clone(), y).unwrap();
        assert!(matches!(
            validate_dataset(&d2, 0.2),
            Err(Error::SingularOutputs { .. })
        ));
    }

    #[test]
    fn validation_is_idempotent() {
        let d = fixtures::canonical_q2();
        let g1 = validate_dataset(&d, 0.2).unwrap();
        let g2 = validate_dataset(g1.source(), 0.2).unwrap();
        assert_eq!(g1.delta(), g2.delta());
        assert_eq!(g1.theta_star(), g2.theta_star());
        assert_eq!(g1.d_bound(), g2.d_bound());
        assert_eq!(g1.reduced_means(), g2.reduced_means());
    }

    #[test]
    fn regime_vector_classifies_and_rejects() {
        let d = fixtures::canonical_q2();
        let g = validate_dataset(&d, 0.2).unwrap();
        let band = g.band_halfwidth();
        let rv = RegimeVector::new(DVector::from_vec(vec![-0.2, 0.5]), &g).unwrap();
        assert_eq!(rv.pattern_s(), &[0, 1]);
        assert!(!rv.is_all_collapse() && !rv.is_all_fixed());
        // transitional band and beyond -D are both rejected
        assert!(matches!(
            RegimeVector::new(DVector::from_vec(vec![band * 0.5, 0.5]), &g),
            Err(Error::RegimeViolation { index: 0, .. })
        ));
        assert!(matches!(
            RegimeVector::new(DVector::from_vec(vec![-g.d_bound() - 1.0, 0.5]), &g),
            Err(Error::RegimeViolation { index: 0, .. })
        ));
    }

    #[test]
    fn dataset_shape_checks() {
        let ok = DMatrix::zeros(2, 3);
        assert!(ClusteredDataset::new(vec![2, 1], ok, DMatrix::identity(2, 2)).is_ok());
        assert!(ClusteredDataset::new(vec![2], DMatrix::zeros(1, 2), DMatrix::identity(1, 1))
            .is_err());
        assert!(ClusteredDataset::new(vec![1, 1], DMatrix::zeros(2, 2), DMatrix::identity(2, 2))
            .is_err());
    }
}
