//! Small dense linear algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Relative condition-number threshold above which a matrix counts as singular.
pub const COND_LIMIT: f64 = 1e12;

/// Relative singular-value threshold for numerical rank.
pub const RANK_RTOL: f64 = 1e-8;

/// 2-norm condition number via singular values. Returns infinity for rank-deficient input.
pub fn cond_2(m: &DMatrix<f64>) -> f64 {
    let sv = m.clone().singular_values();
    let max = sv.max();
    let min = sv.min();
    if min <= 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Operator (spectral) norm.
pub fn op_norm(m: &DMatrix<f64>) -> f64 {
    m.clone().singular_values().max()
}

/// Numerical rank with singular values below `RANK_RTOL * sigma_max` counting as zero.
pub fn rank(m: &DMatrix<f64>) -> usize {
    let sv = m.clone().singular_values();
    let max = sv.max();
    if max == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > RANK_RTOL * max).count()
}

/// Inverse of a square matrix, rejecting condition numbers above `COND_LIMIT`.
pub fn checked_inverse(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if cond_2(m) > COND_LIMIT {
        return Err(Error::SingularWeight);
    }
    m.clone().try_inverse().ok_or(Error::SingularWeight)
}

/// Solves `M x = b` by LU with the same conditioning guard as [`checked_inverse`].
pub fn checked_solve(m: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if cond_2(m) > COND_LIMIT {
        return Err(Error::SingularWeight);
    }
    m.clone()
        .lu()
        .solve(b)
        .ok_or(Error::SingularWeight)
}

/// Clamped arc cosine of the angle between two nonzero vectors.
pub fn angle_between(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    let na = a.norm();
    let nb = b.norm();
    assert!(na > 0.0 && nb > 0.0, "angle of zero vector");
    (a.dot(b) / (na * nb)).clamp(-1.0, 1.0).acos()
}
