//! Convex-cone geometry of the clustered means: ball-in-cone angles, the
//! per-class opening angles, the maximal apex translation depth D, and
//! barycentric coordinates on the means simplex.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg;
use crate::types::ClusterGeometry;

/// Absolute tolerance of the bisection for the translation depth D.
pub const D_BISECTION_TOL: f64 = 1e-9;

/// A right circular cone `{x : angle(x - apex, axis) <= half_angle}`.
#[derive(Debug, Clone)]
pub struct Cone {
    pub axis: DVector<f64>,
    pub half_angle: f64,
    pub apex: DVector<f64>,
}

impl Cone {
    pub fn new(apex: DVector<f64>, axis: DVector<f64>, half_angle: f64) -> Self {
        let axis = &axis / axis.norm();
        assert!(half_angle > 0.0);
        Cone { axis, half_angle, apex }
    }

    pub fn contains(&self, x: &DVector<f64>) -> bool {
        let v = x - &self.apex;
        if v.norm() == 0.0 {
            return true;
        }
        linalg::angle_between(&v, &self.axis) <= self.half_angle
    }
}

/// Barycentric coordinates with respect to the means simplex.
#[derive(Debug, Clone)]
pub struct BarycentricCoords {
    pub kappa: DVector<f64>,
}

impl BarycentricCoords {
    /// True when the point lies strictly inside the simplex.
    pub fn is_interior(&self) -> bool {
        self.kappa.iter().all(|&k| k > 0.0) && (self.kappa.sum() - 1.0).abs() < 1e-9
    }
}

/// Minimal half-angle of a cone at `apex` along `axis` containing the closed
/// ball `B_radius(center)`: `angle(center - apex, axis) + asin(radius / dist)`.
pub fn ball_in_cone_angle(
    center: &DVector<f64>,
    radius: f64,
    apex: &DVector<f64>,
    axis: &DVector<f64>,
) -> Result<f64> {
    let v = center - apex;
    let dist = v.norm();
    if dist <= radius {
        return Err(Error::BallSwallowsApex { dist, radius });
    }
    if radius == 0.0 {
        return Ok(linalg::angle_between(&v, axis));
    }
    Ok(linalg::angle_between(&v, axis) + (radius / dist).asin())
}

/// Per-class cone angle from raw parts; used by dataset validation before a
/// `ClusterGeometry` exists.
pub(crate) fn theta_star_j_raw(
    reduced_means: &DMatrix<f64>,
    directions: &DMatrix<f64>,
    delta: f64,
    j: usize,
) -> Result<f64> {
    let q = reduced_means.ncols();
    let apex = reduced_means.column(j).into_owned();
    let axis = directions.column(j).into_owned();
    let mut worst = 0.0f64;
    for jp in 0..q {
        if jp == j {
            continue;
        }
        let center = reduced_means.column(jp).into_owned();
        let half = match ball_in_cone_angle(&center, 4.0 * delta, &apex, &axis) {
            Ok(a) => a,
            Err(Error::BallSwallowsApex { .. }) => {
                return Err(Error::ConeViolation { angle: std::f64::consts::PI });
            }
            Err(e) => return Err(e),
        };
        worst = worst.max(half);
    }
    let theta = 2.0 * worst;
    if theta >= std::f64::consts::PI {
        return Err(Error::ConeViolation { angle: theta });
    }
    Ok(theta)
}

/// Smallest opening angle such that the cone from mean j toward the grand
/// mean contains the 4*delta balls around all other means.
pub fn theta_star_j(g: &ClusterGeometry, j: usize) -> Result<f64> {
    theta_star_j_raw(g.reduced_means(), g.directions(), g.delta(), j)
}

/// True when translating the apex of the class-j cone by `t * f_j` keeps
/// every delta-ball around the other means inside the opening `theta_star`.
fn translated_containment(
    reduced_means: &DMatrix<f64>,
    directions: &DMatrix<f64>,
    delta: f64,
    theta_star: f64,
    j: usize,
    t: f64,
) -> bool {
    let q = reduced_means.ncols();
    let f = directions.column(j).into_owned();
    let apex = &f * t;
    for jp in 0..q {
        if jp == j {
            continue;
        }
        let center = reduced_means.column(jp) - reduced_means.column(j);
        match ball_in_cone_angle(&center.into_owned(), delta, &apex, &f) {
            Ok(half) if half <= theta_star / 2.0 => {}
            _ => return false,
        }
    }
    true
}

pub(crate) fn translation_depth_raw(
    reduced_means: &DMatrix<f64>,
    directions: &DMatrix<f64>,
    delta: f64,
    theta_star: f64,
    q: usize,
) -> Result<f64> {
    let t_lo = 2.0 * delta * (q as f64).sqrt();
    let mut d_bound = f64::INFINITY;
    for j in 0..q {
        if !translated_containment(reduced_means, directions, delta, theta_star, j, t_lo) {
            return Err(Error::NoValidInterval);
        }
        // bracket the first containment failure, then bisect
        let far = (0..q)
            .filter(|&jp| jp != j)
            .map(|jp| (reduced_means.column(jp) - reduced_means.column(j)).norm())
            .fold(0.0, f64::max);
        let mut hi = 2.0 * far + t_lo + 1.0;
        while translated_containment(reduced_means, directions, delta, theta_star, j, hi) {
            hi *= 2.0;
            if hi > 1e12 {
                return Err(Error::NoValidInterval);
            }
        }
        let mut lo = t_lo;
        let steps = 1024;
        let width = (hi - lo) / steps as f64;
        for k in 1..=steps {
            let t = lo + width * k as f64;
            if !translated_containment(reduced_means, directions, delta, theta_star, j, t) {
                hi = t;
                lo = t - width;
                break;
            }
        }
        while hi - lo > D_BISECTION_TOL {
            let mid = 0.5 * (lo + hi);
            if translated_containment(reduced_means, directions, delta, theta_star, j, mid) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        d_bound = d_bound.min(lo);
    }
    if d_bound <= t_lo + D_BISECTION_TOL {
        return Err(Error::NoValidInterval);
    }
    Ok(d_bound)
}

/// Largest D such that for every class j and every depth `t` in
/// `(2*delta*sqrt(Q), D)`, the translated cone contains all other
/// delta-balls. Found by first-failure bisection per class.
pub fn compute_d(g: &ClusterGeometry) -> Result<f64> {
    translation_depth_raw(
        g.reduced_means(),
        g.directions(),
        g.delta(),
        g.theta_star(),
        g.dim_q(),
    )
}

/// Barycentric coordinates `kappa = reduced_means^{-1} x`.
pub fn barycentric(g: &ClusterGeometry, x: &DVector<f64>) -> Result<BarycentricCoords> {
    if linalg::cond_2(g.reduced_means()) > linalg::COND_LIMIT {
        return Err(Error::SingularSimplex);
    }
    let kappa = g
        .reduced_means()
        .clone()
        .lu()
        .solve(x)
        .ok_or(Error::SingularSimplex)?;
    Ok(BarycentricCoords { kappa })
}
