//! Experiment configuration shared by the CLI and the verification suites.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerances used by the verification experiments. Defaults follow the
/// acceptance thresholds and are serialized with the config for provenance.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Tolerances {
    /// Zero-cost scale: a cost counts as zero below `cost_zero * (1 + |Y|_F)`.
    pub cost_zero: f64,
    /// Relative agreement between cost routes.
    pub cost_agreement: f64,
    /// Degeneracy: allowed cost standard deviation scale across depth samples.
    pub degeneracy_std: f64,
    /// Finite-difference criticality bound.
    pub grad_max: f64,
    /// Largest admissible cost drop under norm-1e-3 random perturbations.
    pub perturbation_drop: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            cost_zero: 1e-8,
            cost_agreement: 1e-8,
            degeneracy_std: 1e-10,
            grad_max: 1e-4,
            perturbation_drop: 1e-8,
        }
    }
}

fn default_mu_samples() -> usize {
    5
}

fn default_seeds() -> Vec<u64> {
    vec![0]
}

fn default_spread() -> f64 {
    0.05
}

fn default_c0() -> f64 {
    crate::types::DEFAULT_C0
}

/// Configuration of one harness run. Loadable from JSON; every field has a
/// usable default except the problem size.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub q: usize,
    pub l: usize,
    /// Per-class sample counts; empty means 8 samples per class.
    #[serde(default)]
    pub class_sizes: Vec<usize>,
    /// Radius of the per-class deviation draws; controls the noise radius.
    #[serde(default = "default_spread")]
    pub cluster_spread: f64,
    #[serde(default = "default_c0")]
    pub c0: f64,
    /// Angle margin; `None` selects `min(0.1, (pi - max_j theta_*j)/4)`.
    #[serde(default)]
    pub theta0: Option<f64>,
    /// Depth samples drawn per regime when checking degeneracy.
    #[serde(default = "default_mu_samples")]
    pub mu_samples: usize,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub tol: Tolerances,
    /// Report output directory.
    #[serde(default)]
    pub out: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn new(q: usize, l: usize) -> Self {
        ExperimentConfig {
            q,
            l,
            class_sizes: Vec::new(),
            cluster_spread: default_spread(),
            c0: default_c0(),
            theta0: None,
            mu_samples: default_mu_samples(),
            seeds: default_seeds(),
            tol: Tolerances::default(),
            out: None,
        }
    }

    /// Class sizes with the default of 8 per class applied.
    pub fn resolved_class_sizes(&self) -> Vec<usize> {
        if self.class_sizes.is_empty() {
            vec![8; self.q]
        } else {
            self.class_sizes.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.q < 2 {
            return Err(Error::InvalidInput(format!("q must be >= 2, got {}", self.q)));
        }
        if self.l < self.q {
            return Err(Error::InvalidInput(format!(
                "l must be >= q, got l={}, q={}",
                self.l, self.q
            )));
        }
        if !self.class_sizes.is_empty() && self.class_sizes.len() != self.q {
            return Err(Error::InvalidInput(format!(
                "class_sizes must have q={} entries, got {}",
                self.q,
                self.class_sizes.len()
            )));
        }
        if self.cluster_spread <= 0.0 {
            return Err(Error::InvalidInput("cluster_spread must be positive".into()));
        }
        if self.mu_samples < 2 {
            return Err(Error::InvalidInput("mu_samples must be at least 2".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::InvalidInput("at least one seed is required".into()));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Applies the `SEED_OVERRIDE` environment variable, replacing the seed
    /// list with a single value. Intended for CI.
    pub fn apply_seed_override(&mut self) -> Result<()> {
        if let Ok(raw) = std::env::var("SEED_OVERRIDE") {
            let seed: u64 = raw
                .parse()
                .map_err(|_| Error::InvalidInput(format!("bad SEED_OVERRIDE {raw:?}")))?;
            self.seeds = vec![seed];
        }
        Ok(())
    }
}
