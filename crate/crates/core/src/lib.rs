//! Construction and verification of explicit weighted-L2 cost minimizers for
//! deep ReLU networks on clustered training data.
//!
//! The crate builds, without any gradient descent, parameter families that
//! attain the global cost minimum (and a set of positive-cost critical
//! families indexed by sign patterns) for networks whose input, hidden and
//! output dimensions all equal the number of classes Q. Each hidden layer is
//! treated as a truncation map acting on the training data; the terminal
//! layer is solved in closed form. The [`harness`] module wraps everything
//! into seeded, reproducible verification experiments.

pub mod blocks;
pub mod classify;
pub mod construct;
pub mod error;
pub mod fixtures;
pub mod geometry;
pub mod harness;
pub mod io;
pub mod linalg;
pub mod network;
pub mod readout;
pub mod types;

pub use classify::{MatchResult, TrainedClassifier};
pub use construct::{build_family, build_w_star, predict_truncation, theta_q, MinimizerFamily};
pub use error::{Error, Result};
pub use geometry::{ball_in_cone_angle, barycentric, compute_d, theta_star_j, Cone};
pub use network::{
    cumulative_to_layerwise, forward, is_rank_preserving, layerwise_to_cumulative, relu,
    truncate, truncate_composed, Activation, LayerTrace,
};
pub use readout::{
    build_projector, cost_closed_form, cost_report, delta_diagnostics, optimal_readout,
    projector_cost, upper_bound_check, weighted_cost, CostReport, ReadoutSolution, WeightedNorm,
};
pub use types::{
    validate_dataset, validate_dataset_with, ClusterGeometry, ClusteredDataset, CumulativeStack,
    LayerStack, RegimeVector, DEFAULT_C0,
};
