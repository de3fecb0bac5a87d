//! Small deterministic sample objects used by tests, benches and examples.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::types::{ClusteredDataset, LayerStack};

/// Two clusters of two points each around the coordinate axes: means e1 and
/// e2, deviations of norm 0.05 along the axes, identity outputs.
pub fn canonical_q2() -> ClusteredDataset {
    let inputs = DMatrix::from_column_slice(
        2,
        4,
        &[1.05, 0.0, 0.95, 0.0, 0.0, 1.05, 0.0, 0.95],
    );
    ClusteredDataset::new(vec![2, 2], inputs, DMatrix::identity(2, 2)).unwrap()
}

/// Random orthogonal matrix via QR of a Gaussian sample.
pub fn random_rotation(q: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let m = DMatrix::from_fn(q, q, |_, _| rng.sample::<f64, _>(StandardNormal));
    m.qr().q()
}

/// Seeded random stack of `layers` QxQ layers with bounded condition number:
/// each weight is orthogonal times a diagonal with entries in [0.5, 2].
pub fn well_conditioned_stack(q: usize, layers: usize, seed: u64) -> LayerStack {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut weights = Vec::with_capacity(layers);
    let mut biases = Vec::with_capacity(layers);
    for _ in 0..layers {
        let o = random_rotation(q, &mut rng);
        let d = DMatrix::from_diagonal(&DVector::from_fn(q, |_, _| rng.gen_range(0.5..2.0)));
        weights.push(o * d);
        biases.push(DVector::from_fn(q, |_, _| rng.gen_range(-0.5..0.5)));
    }
    LayerStack::new(weights, biases).unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_shape() {
        let d = canonical_q2();
        assert_eq!(d.dim_q(), 2);
        assert_eq!(d.num_samples(), 4);
    }

    #[test]
    fn rotation_is_orthogonal() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let r = random_rotation(4, &mut rng);
        assert!((r.transpose() * &r - DMatrix::identity(4, 4)).norm() < 1e-12);
    }

    #[test]
    fn stacks_are_reproducible() {
        let a = well_conditioned_stack(3, 2, 9);
        let b = well_conditioned_stack(3, 2, 9);
        assert_eq!(a.weight(0), b.weight(0));
        assert_eq!(a.bias(1), b.bias(1));
    }
}
