//! `mi`: train the quadratic critic on one or all estimators and report
//! trajectories against the closed-form ground truth.
//!
//! The InfoNCE estimate follows the mean-over-negatives denominator
//! convention, under which the estimate is `-loss` with no additive
//! offset; the record's `convention` note states this.

use super::{CommonArgs, Outcome};
use crate::config::Params;
use crate::output::{self, fmt_f64, OutputPaths, ResultRecord};
use anyhow::{bail, Result};
use ncelab::mi::{compare_estimators, true_mi, GaussianPairConfig, MiEstimator, MiRunConfig};
use std::time::Instant;

#[derive(Debug, clap::Args)]
pub struct Args {
    #[command(flatten)]
    common: CommonArgs,
    /// infonce | tightkl | dv | chi2 | all
    #[arg(long)]
    estimator: Option<String>,
    #[arg(long)]
    dimension: Option<usize>,
    #[arg(long)]
    correlation: Option<f64>,
    #[arg(long)]
    batch: Option<usize>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    step_size: Option<f64>,
    #[arg(long)]
    momentum: Option<f64>,
}

const KEYS: [&str; 8] = [
    "estimator",
    "dimension",
    "correlation",
    "batch",
    "steps",
    "step_size",
    "momentum",
    "seed",
];

fn parse_estimators(raw: &str) -> Result<Vec<MiEstimator>> {
    match raw.to_ascii_lowercase().as_str() {
        "infonce" => Ok(vec![MiEstimator::InfoNce]),
        "tightkl" => Ok(vec![MiEstimator::TightKl]),
        "dv" => Ok(vec![MiEstimator::DonskerVaradhan]),
        "chi2" | "chisquared" => Ok(vec![MiEstimator::ChiSquared]),
        "all" => Ok(MiEstimator::ALL.to_vec()),
        other => bail!("estimator must be infonce, tightkl, dv, chi2 or all (got {other:?})"),
    }
}

pub fn run(args: &Args) -> Result<Outcome> {
    let start = Instant::now();
    let file = args.common.load_file()?;
    file.check_known_keys(&KEYS)?;
    let mut p = Params::new(&file);
    let estimator_raw = p.string("estimator", args.estimator.clone(), "infonce")?;
    let dimension = p.usize("dimension", args.dimension, 1)?;
    let correlation = p.f64("correlation", args.correlation, 0.8)?;
    let batch = p.usize("batch", args.batch, 128)?;
    let steps = p.usize("steps", args.steps, 2000)?;
    let step_size = p.f64("step_size", args.step_size, 0.1)?;
    let momentum = p.f64("momentum", args.momentum, 0.9)?;
    let seed = p.u64("seed", args.common.seed, 0)?;

    let estimators = parse_estimators(&estimator_raw)?;
    let config = GaussianPairConfig {
        dimension,
        correlation,
    };
    let run_cfg = MiRunConfig {
        batch,
        steps,
        step_size,
        momentum,
        seed,
    };
    let results = compare_estimators(&config, &run_cfg, &estimators).map_err(anyhow::Error::new)?;

    let mut rows = Vec::new();
    for est in &results {
        for (step, value) in est.trajectory.iter().enumerate() {
            rows.push(vec![
                est.estimator.name().to_string(),
                step.to_string(),
                fmt_f64(*value),
            ]);
        }
    }
    let paths = OutputPaths::from_prefix(&args.common.out);
    output::write_csv(&paths.csv, &["estimator", "step", "estimate"], &rows)?;

    let truth = true_mi(&config);
    let mut record = ResultRecord::new("mi", p.into_effective(), seed);
    record.metric("true_mi_nats", truth);
    record.metric("ln_batch", (batch as f64).ln());
    for est in &results {
        record.metric(
            &format!("final_{}", est.estimator.name()),
            est.final_estimate,
        );
    }
    record.note("convention", "mean-denominator (estimate = -loss, no offset)");
    record.duration_s = start.elapsed().as_secs_f64();
    output::write_record(&paths, &record)?;
    for est in &results {
        println!(
            "mi[{}]: final {:.5} (true {:.5}, ln batch {:.5})",
            est.estimator.name(),
            est.final_estimate,
            truth,
            (batch as f64).ln()
        );
    }
    Ok(Outcome::clean())
}
