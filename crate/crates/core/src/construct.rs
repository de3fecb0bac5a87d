//! Explicit minimizer construction: the shrink matrix W_*, the per-class
//! rotations R_l aligning cluster directions with the diagonal, the cumulative
//! bias family b^(l)[mu], and the predicted truncation output for any sign
//! pattern.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

use crate::types::{ClusterGeometry, CumulativeStack, RegimeVector};

/// Opening angle of the largest cone around the diagonal `u_Q` contained in
/// the positive sector: `2 * acos(sqrt(q-1) / sqrt(q))`.
pub fn theta_q(q: usize) -> f64 {
    assert!(q >= 2, "theta_q needs q >= 2");
    2.0 * ((q as f64 - 1.0).sqrt() / (q as f64).sqrt()).acos()
}

/// Rotation in SO(Q) mapping the unit vector `f` to the normalized diagonal
/// `u_Q / sqrt(Q)`, acting in the plane spanned by the two and fixing its
/// orthogonal complement. The antipodal case composes two plane rotations.
pub fn rotation_to_diagonal(f: &DVector<f64>) -> DMatrix<f64> {
    let q = f.len();
    let diag = DVector::from_element(q, 1.0 / (q as f64).sqrt());
    rotation_between(f, &diag)
}

/// Rotation taking unit vector `a` to unit vector `b` in their common plane.
fn rotation_between(a: &DVector<f64>, b: &DVector<f64>) -> DMatrix<f64> {
    let q = a.len();
    let c = a.dot(b);
    if c >= 1.0 - 1e-14 {
        return DMatrix::identity(q, q);
    }
    if c <= -1.0 + 1e-14 {
        // antipodal: route through an intermediate direction orthogonal to a
        let mut pick = 0;
        for i in 0..q {
            if a[i].abs() < a[pick].abs() {
                pick = i;
            }
        }
        let mut g = DVector::zeros(q);
        g[pick] = 1.0;
        g -= a * a[pick];
        g /= g.norm();
        return rotation_between(&g, b) * rotation_between(a, &g);
    }
    let s = a + b;
    DMatrix::identity(q, q) - (&s * s.transpose()) / (1.0 + c) + 2.0 * b * a.transpose()
}

/// Shrink factor of W_*: contracts the working cone into the positive-sector
/// cone when the former is wider.
pub fn lambda_shrink(theta_star: f64, theta_q_angle: f64) -> f64 {
    if theta_star > theta_q_angle {
        (theta_q_angle / 2.0).tan() / (theta_star / 2.0).tan()
    } else {
        1.0
    }
}

fn w_star_from_angle(q: usize, theta_star: f64) -> (DMatrix<f64>, f64) {
    let tq = theta_q(q);
    let lambda = lambda_shrink(theta_star, tq);
    let mut e1 = DVector::zeros(q);
    e1[0] = 1.0;
    let diag_dir = DVector::from_element(q, 1.0 / (q as f64).sqrt());
    let r_tilde = rotation_between(&e1, &diag_dir);
    let mut d = DVector::from_element(q, lambda);
    d[0] = 1.0;
    let w = &r_tilde * DMatrix::from_diagonal(&d) * r_tilde.transpose();
    (w, lambda)
}

/// Builds `W_* = R~ diag(1, lambda, ..., lambda) R~^T` for the geometry's
/// working angle. Fixes the diagonal (`W_* u_Q = u_Q`) and has operator
/// norm one.
pub fn build_w_star(g: &ClusterGeometry) -> Result<DMatrix<f64>> {
    if g.theta_star() >= std::f64::consts::PI {
        return Err(Error::ConeViolation { angle: g.theta_star() });
    }
    Ok(w_star_from_angle(g.dim_q(), g.theta_star()).0)
}

/// The constructed minimizer family: shared matrices plus the bias family
/// `b^(l)[mu]`, evaluated per regime vector via [`MinimizerFamily::stack`].
#[derive(Debug, Clone)]
pub struct MinimizerFamily {
    w_star: DMatrix<f64>,
    rotations: Vec<DMatrix<f64>>,
    theta_q: f64,
    lambda_shrink: f64,
    geometry: ClusterGeometry,
    depth_l: usize,
}

impl MinimizerFamily {
    /// Prepares the family for depth `l >= Q` over the given geometry.
    pub fn new(g: &ClusterGeometry, l: usize) -> Result<Self> {
        let q = g.dim_q();
        if l < q {
            return Err(Error::InvalidInput(format!(
                "family depth must satisfy L >= Q, got L={l}, Q={q}"
            )));
        }
        let w_star = build_w_star(g)?;
        let rotations = (0..q)
            .map(|j| rotation_to_diagonal(&g.direction(j)))
            .collect();
        Ok(MinimizerFamily {
            w_star,
            rotations,
            theta_q: theta_q(q),
            lambda_shrink: lambda_shrink(g.theta_star(), theta_q(q)),
            geometry: g.clone(),
            depth_l: l,
        })
    }

    pub fn w_star(&self) -> &DMatrix<f64> {
        &self.w_star
    }

    pub fn rotation(&self, l: usize) -> &DMatrix<f64> {
        &self.rotations[l]
    }

    pub fn theta_q(&self) -> f64 {
        self.theta_q
    }

    pub fn lambda_shrink(&self) -> f64 {
        self.lambda_shrink
    }

    pub fn geometry(&self) -> &ClusterGeometry {
        &self.geometry
    }

    pub fn depth_l(&self) -> usize {
        self.depth_l
    }

    /// Cumulative hidden stack for the given depths: `W^(l) = W_* R_l` and
    /// `b^(l) = -W^(l) mean_l + mu_l R_l f_l` for l <= Q. Layers beyond Q act
    /// as the identity on the truncated data (weight W_*, bias far enough in
    /// the positive sector).
    pub fn stack(&self, mu: &RegimeVector) -> Result<CumulativeStack> {
        let g = &self.geometry;
        let q = g.dim_q();
        let mut cum_w = Vec::with_capacity(self.depth_l);
        let mut cum_b = Vec::with_capacity(self.depth_l);
        for l in 0..q {
            let r = &self.rotations[l];
            let w = &self.w_star * r;
            let b = -&w * g.mean(l) + (r * g.direction(l)) * mu.mu_j(l);
            cum_w.push(w);
            cum_b.push(b);
        }
        if self.depth_l > q {
            let fixed = predict_truncation(g, mu)?;
            let image = &self.w_star * &fixed;
            let low = image.iter().cloned().fold(f64::INFINITY, f64::min);
            let scale = fixed.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
            let margin = g.band_halfwidth().max(0.05 * (1.0 + scale));
            let beta = margin + (-low).max(0.0);
            for _ in q..self.depth_l {
                cum_w.push(self.w_star.clone());
                cum_b.push(DVector::from_element(q, beta));
            }
        }
        CumulativeStack::new(cum_w, cum_b)
    }
}

/// Convenience wrapper building the cumulative stack in one call.
pub fn build_family(g: &ClusterGeometry, l: usize, mu: &RegimeVector) -> Result<CumulativeStack> {
    MinimizerFamily::new(g, l)?.stack(mu)
}

/// Blockwise prediction of the truncated dataset: class j stays `X_{0,j}`
/// when `s_j = 1` and collapses to `mean_j - mu_j f_j` when `s_j = 0`.
pub fn predict_truncation(g: &ClusterGeometry, mu: &RegimeVector) -> Result<DMatrix<f64>> {
    let d = g.source();
    let p = d.partition();
    let mut out = d.inputs().clone();
    for j in 0..g.dim_q() {
        if mu.pattern_s()[j] == 0 {
            let point = g.collapsed_mean(j, mu.mu_j(j));
            for i in p.range(j) {
                out.set_column(i, &point);
            }
        }
    }
    Ok(out)
}
