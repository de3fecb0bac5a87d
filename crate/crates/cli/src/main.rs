//! Command-line harness: dataset generation, the verification experiments,
//! the gradient-descent baseline, and classification of query vectors.
//!
//! Exit code 0 means every assertion in the run passed; 1 means a failed
//! assertion (the failure rows are in the report); 2 means the run errored.

use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use truncnet_core::harness::{
    emit_report, run_gd_baseline, run_global_min, run_grad_check, run_local_min_enum,
    ExperimentConfig, GdConfig, RunReport,
};
use truncnet_core::io;
use truncnet_core::types::{validate_dataset_with, RegimeVector};
use truncnet_core::TrainedClassifier;

#[derive(Parser)]
#[command(
    name = "truncnet",
    about = "Constructs exact cost minimizers of deep ReLU networks on clustered data and verifies them",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct ProblemArgs {
    /// Number of classes (= every layer dimension).
    #[arg(long)]
    q: Option<usize>,
    /// Hidden depth L >= Q.
    #[arg(long)]
    l: Option<usize>,
    /// Generation seed(s); repeatable.
    #[arg(long)]
    seed: Vec<u64>,
    /// Deviation draw radius controlling the noise level.
    #[arg(long)]
    spread: Option<f64>,
    /// Separation constant in (0, 1/4).
    #[arg(long)]
    c0: Option<f64>,
    /// Angle margin; defaults to min(0.1, (pi - max_j theta_*j)/4).
    #[arg(long)]
    theta0: Option<f64>,
    /// Depth samples per regime.
    #[arg(long)]
    mu_samples: Option<usize>,
    /// Verification tolerance override (zero-cost and agreement scales).
    #[arg(long)]
    tol: Option<f64>,
    /// JSON config file in the ExperimentConfig schema; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Report output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl ProblemArgs {
    fn build(&self, force_l_eq_q: bool) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .with_context(|| format!("reading config {}", path.display()))?;
                ExperimentConfig::from_json(&text)?
            }
            None => {
                let q = self.q.context("--q is required without --config")?;
                let l = self.l.unwrap_or(q);
                ExperimentConfig::new(q, l)
            }
        };
        if let Some(q) = self.q {
            cfg.q = q;
            if cfg.class_sizes.len() != q {
                cfg.class_sizes = Vec::new();
            }
        }
        if let Some(l) = self.l {
            cfg.l = l;
        }
        if force_l_eq_q {
            if self.l.is_some() && cfg.l != cfg.q {
                bail!("pattern enumeration requires L = Q (got L={}, Q={})", cfg.l, cfg.q);
            }
            cfg.l = cfg.q;
        }
        if !self.seed.is_empty() {
            cfg.seeds = self.seed.clone();
        }
        if let Some(s) = self.spread {
            cfg.cluster_spread = s;
        }
        if let Some(c0) = self.c0 {
            cfg.c0 = c0;
        }
        if self.theta0.is_some() {
            cfg.theta0 = self.theta0;
        }
        if let Some(m) = self.mu_samples {
            cfg.mu_samples = m;
        }
        if let Some(t) = self.tol {
            cfg.tol.cost_zero = t;
            cfg.tol.cost_agreement = t;
        }
        if self.out.is_some() {
            cfg.out = self.out.clone();
        }
        cfg.apply_seed_override()?;
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate a valid clustered dataset and write it as JSON.
    Gen {
        #[command(flatten)]
        problem: ProblemArgs,
        /// Output dataset path (default: dataset.json).
        #[arg(long, default_value = "dataset.json")]
        dataset_out: PathBuf,
    },
    /// Verify the zero-cost construction and its depth degeneracy.
    VerifyGlobal {
        #[command(flatten)]
        problem: ProblemArgs,
    },
    /// Enumerate all 2^Q sign patterns at L = Q and verify the cost values.
    VerifyLocal {
        #[command(flatten)]
        problem: ProblemArgs,
    },
    /// Finite-difference criticality checks at the constructed points.
    GradCheck {
        #[command(flatten)]
        problem: ProblemArgs,
    },
    /// Gradient-descent contrast baseline from random initializations.
    GdBaseline {
        #[command(flatten)]
        problem: ProblemArgs,
        /// Number of random initializations.
        #[arg(long, default_value_t = 20)]
        inits: usize,
        /// Iteration cap.
        #[arg(long, default_value_t = 100_000)]
        steps: usize,
        /// Step size.
        #[arg(long, default_value_t = 1e-2)]
        lr: f64,
    },
    /// Classify query vectors with a trained collapse-regime network.
    Classify {
        #[command(flatten)]
        problem: ProblemArgs,
        /// Dataset JSON; generated from the seed when omitted.
        #[arg(long)]
        dataset: Option<PathBuf>,
        /// Query vectors: CSV rows `x1,...,xQ` or a JSON list of vectors.
        #[arg(long)]
        inputs: PathBuf,
        /// Comma-separated collapse depths; defaults to mid-interval values.
        #[arg(long)]
        mu: Option<String>,
        /// Result CSV path; stdout when omitted.
        #[arg(long)]
        results_out: Option<PathBuf>,
    },
}

fn finish(report: RunReport) -> Result<i32> {
    let passed = report.passed;
    for exp in &report.experiments {
        let failed: Vec<_> = exp.assertions.iter().filter(|a| !a.passed).collect();
        println!(
            "{}: {} ({} assertions, {} failed)",
            exp.name,
            if exp.passed { "PASS" } else { "FAIL" },
            exp.assertions.len(),
            failed.len()
        );
        for a in failed {
            println!("  FAIL {} (value {:.6e}, threshold {:.6e})", a.name, a.value, a.threshold);
        }
    }
    if let Some(dir) = report.config.out.clone() {
        emit_report(&report, &dir)?;
        println!("report written to {}", dir.display());
    }
    Ok(if passed { 0 } else { 1 })
}

fn parse_queries(path: &PathBuf, q: usize) -> Result<Vec<Vec<f64>>> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading queries {}", path.display()))?;
    let trimmed = text.trim_start();
    let rows: Vec<Vec<f64>> = if trimmed.starts_with('[') {
        serde_json::from_str(&text).context("parsing JSON query list")?
    } else {
        text.lines()
            .filter(|l| !l.trim().is_empty())
            .map(|l| {
                l.split(',')
                    .map(|v| v.trim().parse::<f64>().context("non-numeric query entry"))
                    .collect::<Result<Vec<f64>>>()
            })
            .collect::<Result<Vec<Vec<f64>>>>()?
    };
    for (i, row) in rows.iter().enumerate() {
        if row.len() != q {
            bail!("query {} has {} entries, expected {}", i, row.len(), q);
        }
    }
    Ok(rows)
}

fn run() -> Result<i32> {
    let cli = Cli::parse();
    match cli.command {
        Command::Gen { problem, dataset_out } => {
            let cfg = problem.build(false)?;
            let (d, g) = truncnet_core::harness::generate_dataset(&cfg, cfg.seeds[0])?;
            io::save_dataset(&d, &dataset_out)?;
            println!(
                "dataset written to {} (Q={}, N={}, delta={:.6}, theta*={:.6}, D={:.6})",
                dataset_out.display(),
                d.dim_q(),
                d.num_samples(),
                g.delta(),
                g.theta_star(),
                g.d_bound()
            );
            Ok(0)
        }
        Command::VerifyGlobal { problem } => finish(run_global_min(&problem.build(false)?)?),
        Command::VerifyLocal { problem } => finish(run_local_min_enum(&problem.build(true)?)?),
        Command::GradCheck { problem } => finish(run_grad_check(&problem.build(false)?)?),
        Command::GdBaseline { problem, inits, steps, lr } => {
            let cfg = problem.build(false)?;
            let gd = GdConfig {
                inits,
                steps,
                learning_rate: lr,
                ..GdConfig::default()
            };
            finish(run_gd_baseline(&cfg, &gd)?)
        }
        Command::Classify { problem, dataset, inputs, mu, results_out } => {
            let cfg = problem.build(false)?;
            let d = match dataset {
                Some(path) => io::load_dataset(&path)?,
                None => truncnet_core::harness::generate_dataset(&cfg, cfg.seeds[0])?.0,
            };
            let g = validate_dataset_with(&d, cfg.c0, cfg.theta0)?;
            let q = g.dim_q();
            let mu_values: Vec<f64> = match mu {
                Some(raw) => raw
                    .split(',')
                    .map(|v| v.trim().parse::<f64>().context("bad --mu entry"))
                    .collect::<Result<Vec<f64>>>()?,
                None => {
                    let mid = -0.5 * (g.band_halfwidth() + g.safe_collapse_depth());
                    vec![mid; q]
                }
            };
            if mu_values.len() != q {
                bail!("--mu needs {} comma-separated values", q);
            }
            let rv = RegimeVector::new(nalgebra_vec(mu_values), &g)?;
            let l = if cfg.l >= q { cfg.l } else { q };
            let clf = TrainedClassifier::new(&g, l, rv)?;
            let queries = parse_queries(&inputs, q)?;
            let mut out = String::from("class,distance,tie\n");
            for row in &queries {
                let x = nalgebra_vec(row.clone());
                let m = clf.match_output(&x)?;
                out.push_str(&format!("{},{},{}\n", m.class, m.distance, u8::from(m.tie)));
            }
            match results_out {
                Some(path) => {
                    std::fs::write(&path, out)?;
                    println!("results written to {} ({} queries)", path.display(), queries.len());
                }
                None => print!("{out}"),
            }
            Ok(0)
        }
    }
}

fn nalgebra_vec(v: Vec<f64>) -> nalgebra::DVector<f64> {
    nalgebra::DVector::from_vec(v)
}

fn main() {
    match run() {
        Ok(code) => std::process::exit(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            std::process::exit(2);
        }
    }
}
