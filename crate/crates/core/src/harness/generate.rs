//! Seeded generation of valid clustered datasets.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::fixtures;
use crate::harness::config::ExperimentConfig;
use crate::linalg;
use crate::types::{validate_dataset_with, ClusterGeometry, ClusteredDataset};

/// Rejection rounds before giving up on a configuration.
const MAX_ROUNDS: usize = 100;

/// Cap on the working cone angle; wider geometries are re-drawn to keep the
/// shrink factor of W_* away from zero.
const THETA_STAR_CAP: f64 = 2.4;

/// Uniform sample from the closed ball of the given radius.
pub fn sample_in_ball(q: usize, radius: f64, rng: &mut ChaCha8Rng) -> DVector<f64> {
    let mut v = DVector::from_fn(q, |_, _| rng.sample::<f64, _>(StandardNormal));
    let n = v.norm();
    if n == 0.0 {
        return DVector::zeros(q);
    }
    v /= n;
    let r = radius * rng.gen_range(0.0f64..1.0).powf(1.0 / q as f64);
    v * r
}

/// Draws a dataset passing validation: means near scaled coordinate axes with
/// jitter (rejected when ill-conditioned), outputs with bounded condition
/// number, and per-class deviations uniform in a `cluster_spread` ball.
/// Deterministic for a fixed seed; fails after 100 rejection rounds.
pub fn generate_dataset(
    cfg: &ExperimentConfig,
    seed: u64,
) -> Result<(ClusteredDataset, ClusterGeometry)> {
    cfg.validate()?;
    let q = cfg.q;
    let class_sizes = cfg.resolved_class_sizes();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..MAX_ROUNDS {
        let scale = rng.gen_range(0.8..1.6);
        let mut means = DMatrix::zeros(q, q);
        for j in 0..q {
            let mut col = DVector::from_fn(q, |_, _| rng.gen_range(-0.25..0.25));
            col[j] += 1.0;
            means.set_column(j, &(col * scale));
        }
        if linalg::cond_2(&means) > 1e3 {
            continue;
        }
        let r1 = fixtures::random_rotation(q, &mut rng);
        let r2 = fixtures::random_rotation(q, &mut rng);
        let outputs =
            r1 * DMatrix::from_diagonal(&DVector::from_fn(q, |_, _| rng.gen_range(0.7..1.4)))
                * r2;

        let n_total: usize = class_sizes.iter().sum();
        let mut inputs = DMatrix::zeros(q, n_total);
        let mut col = 0;
        for (j, &nj) in class_sizes.iter().enumerate() {
            let mean = means.column(j).into_owned();
            for _ in 0..nj {
                let dev = sample_in_ball(q, cfg.cluster_spread, &mut rng);
                inputs.set_column(col, &(&mean + dev));
                col += 1;
            }
        }
        let dataset = ClusteredDataset::new(class_sizes.clone(), inputs, outputs)?;
        match validate_dataset_with(&dataset, cfg.c0, cfg.theta0) {
            Ok(g) if g.theta_star() <= THETA_STAR_CAP => return Ok((dataset, g)),
            Ok(_) | Err(_) => continue,
        }
    }
    Err(Error::GenerationFailed { rounds: MAX_ROUNDS })
}
