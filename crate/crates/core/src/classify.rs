//! The trained classifier induced by a collapse-regime family: the metric
//! `d(x, x') = |Y (reduced collapsed means)^{-1} (x - x')|` and the
//! output-matching rule.

use nalgebra::{DMatrix, DVector};

use crate::construct::MinimizerFamily;
use crate::error::{Error, Result};
use crate::linalg;
use crate::network;
use crate::types::{ClusterGeometry, CumulativeStack, RegimeVector};

/// Result of matching one input vector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchResult {
    /// Matched class index (ties break to the smallest index).
    pub class: usize,
    /// Metric distance from the truncated input to the matched collapsed mean.
    pub distance: f64,
    /// True when another class attains exactly the same distance.
    pub tie: bool,
    /// True when the affine and metric argmin formulations picked the same
    /// index (they agree in exact arithmetic).
    pub forms_agree: bool,
}

/// Classifier built from a collapse-regime minimizer family.
#[derive(Debug, Clone)]
pub struct TrainedClassifier {
    stack: CumulativeStack,
    terminal_w: DMatrix<f64>,
    metric_matrix: DMatrix<f64>,
    collapsed_means: DMatrix<f64>,
    outputs: DMatrix<f64>,
    mu: RegimeVector,
}

impl TrainedClassifier {
    /// Builds the classifier for depth `l` at collapse depths `mu`; requires
    /// the all-collapse pattern, where the exact-fit terminal map exists.
    pub fn new(g: &ClusterGeometry, l: usize, mu: RegimeVector) -> Result<Self> {
        if !mu.is_all_collapse() {
            return Err(Error::InvalidInput(
                "classifier requires all depths in the collapse interval I0".into(),
            ));
        }
        let family = MinimizerFamily::new(g, l)?;
        let stack = family.stack(&mu)?;
        let collapsed_means = g.collapsed_reduced_means(mu.mu());
        let metric_matrix =
            g.source().outputs() * linalg::checked_inverse(&collapsed_means)?;
        Ok(TrainedClassifier {
            stack,
            terminal_w: metric_matrix.clone(),
            metric_matrix,
            collapsed_means,
            outputs: g.source().outputs().clone(),
            mu,
        })
    }

    pub fn mu(&self) -> &RegimeVector {
        &self.mu
    }

    pub fn metric_matrix(&self) -> &DMatrix<f64> {
        &self.metric_matrix
    }

    pub fn collapsed_means(&self) -> &DMatrix<f64> {
        &self.collapsed_means
    }

    pub fn stack(&self) -> &CumulativeStack {
        &self.stack
    }

    /// The induced metric `|Y (collapsed means)^{-1} (x - x')|`.
    pub fn metric_d(&self, x: &DVector<f64>, x2: &DVector<f64>) -> f64 {
        (&self.metric_matrix * (x - x2)).norm()
    }

    /// Truncation of a single input through the hidden stack.
    pub fn truncate_input(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        let m = DMatrix::from_column_slice(x.len(), 1, x.as_slice());
        let t = network::truncate_composed(&m, &self.stack)?;
        Ok(t.column(0).into_owned())
    }

    /// Matches an input to the class whose collapsed mean is metric-nearest
    /// to the truncated input; cross-checks the affine formulation
    /// `argmin_j |W tau(x) - y_j|`.
    pub fn match_output(&self, x: &DVector<f64>) -> Result<MatchResult> {
        let tau = self.truncate_input(x)?;
        let q = self.outputs.ncols();
        let mut best = (0usize, f64::INFINITY);
        let mut tie = false;
        for j in 0..q {
            let d = (&self.metric_matrix * (&tau - self.collapsed_means.column(j))).norm();
            if d < best.1 {
                best = (j, d);
                tie = false;
            } else if d == best.1 {
                tie = true;
            }
        }
        // affine route through the terminal map
        let image = &self.terminal_w * &tau;
        let mut best_affine = (0usize, f64::INFINITY);
        for j in 0..q {
            let d = (&image - self.outputs.column(j)).norm();
            if d < best_affine.1 {
                best_affine = (j, d);
            }
        }
        Ok(MatchResult {
            class: best.0,
            distance: best.1,
            tie,
            forms_agree: best.0 == best_affine.0,
        })
    }
}
