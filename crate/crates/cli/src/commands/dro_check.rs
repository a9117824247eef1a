//! `dro-check`: the equivalence identity, strong duality, radius
//! feasibility, and the projected-ascent oracle comparison, on freshly
//! drawn random score batches.

use super::{CommonArgs, Outcome};
use crate::config::Params;
use crate::output::{self, fmt_f64, OutputPaths, ResultRecord};
use anyhow::Result;
use ncelab::dro::{
    equivalence_gap, optimal_alpha, projected_ascent_kl, worst_case_weights_constrained,
    DroConstraint,
};
use ncelab::scores::ScoreBatch;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::time::Instant;

#[derive(Debug, clap::Args)]
pub struct Args {
    #[command(flatten)]
    common: CommonArgs,
    /// Random batches per eta for the identity check.
    #[arg(long)]
    trials: Option<usize>,
    /// Negatives per batch in the identity check.
    #[arg(long)]
    negatives: Option<usize>,
    /// Comma-separated radii.
    #[arg(long)]
    eta_list: Option<String>,
    /// Identity tolerance.
    #[arg(long)]
    tolerance: Option<f64>,
    /// Instances for the projected-ascent oracle comparison (N = 16).
    #[arg(long)]
    oracle_instances: Option<usize>,
    /// Ascent oracle tolerance.
    #[arg(long)]
    oracle_tolerance: Option<f64>,
}

const KEYS: [&str; 7] = [
    "trials",
    "negatives",
    "eta_list",
    "tolerance",
    "oracle_instances",
    "oracle_tolerance",
    "seed",
];

pub fn run(args: &Args) -> Result<Outcome> {
    let start = Instant::now();
    let file = args.common.load_file()?;
    file.check_known_keys(&KEYS)?;
    let mut p = Params::new(&file);
    let trials = p.usize("trials", args.trials, 100)?;
    let negatives = p.usize("negatives", args.negatives, 64)?;
    let etas = p.f64_list("eta_list", args.eta_list.clone(), "0.1,0.5,1.0")?;
    let tolerance = p.f64("tolerance", args.tolerance, 1e-6)?;
    let oracle_instances = p.usize("oracle_instances", args.oracle_instances, 100)?;
    let oracle_tolerance = p.f64("oracle_tolerance", args.oracle_tolerance, 1e-4)?;
    let seed = p.u64("seed", args.common.seed, 0)?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows: Vec<Vec<String>> = Vec::new();
    let mut failures = 0usize;

    // Identity: constrained objective vs temperature-scaled InfoNCE value.
    for &eta in &etas {
        let mut max_gap = 0.0f64;
        for _ in 0..trials {
            let pos = rng.gen_range(-1.0..1.0);
            let negs: Vec<f64> = (0..negatives).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let batch = ScoreBatch::single(pos, negs)?;
            max_gap = max_gap.max(equivalence_gap(&batch, eta)?);
        }
        let pass = max_gap < tolerance;
        failures += usize::from(!pass);
        rows.push(vec![
            "equivalence_gap".into(),
            fmt_f64(eta),
            trials.to_string(),
            fmt_f64(max_gap),
            fmt_f64(tolerance),
            pass.to_string(),
        ]);
    }

    // Strong duality and radius feasibility on fresh instances.
    for &eta in &etas {
        let mut max_primal_dual = 0.0f64;
        let mut max_radius_excess = 0.0f64;
        for _ in 0..trials {
            let negs: Vec<f64> = (0..negatives).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let primal = worst_case_weights_constrained(&negs, &DroConstraint::kl(eta)?)?;
            if !primal.degenerate {
                let dual = optimal_alpha(&negs, eta)?;
                max_primal_dual = max_primal_dual.max((primal.objective - dual.objective).abs());
            }
            max_radius_excess = max_radius_excess.max(primal.achieved_divergence - eta);
        }
        let pass = max_primal_dual < tolerance && max_radius_excess < 1e-6;
        failures += usize::from(!pass);
        rows.push(vec![
            "strong_duality".into(),
            fmt_f64(eta),
            trials.to_string(),
            fmt_f64(max_primal_dual),
            fmt_f64(tolerance),
            pass.to_string(),
        ]);
    }

    // Independent projected-ascent oracle, small instances.
    let mut max_oracle_gap = 0.0f64;
    for i in 0..oracle_instances {
        let eta = etas[i % etas.len()];
        let negs: Vec<f64> = (0..16).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let sol = worst_case_weights_constrained(&negs, &DroConstraint::kl(eta)?)?;
        let (_, ascent) = projected_ascent_kl(&negs, eta, 60_000, 0.1)?;
        max_oracle_gap = max_oracle_gap.max((sol.objective - ascent).abs());
    }
    let oracle_pass = max_oracle_gap < oracle_tolerance;
    failures += usize::from(!oracle_pass);
    rows.push(vec![
        "projected_ascent_oracle".into(),
        String::new(),
        oracle_instances.to_string(),
        fmt_f64(max_oracle_gap),
        fmt_f64(oracle_tolerance),
        oracle_pass.to_string(),
    ]);

    let paths = OutputPaths::from_prefix(&args.common.out);
    output::write_csv(
        &paths.csv,
        &["check", "eta", "instances", "max_gap", "tolerance", "pass"],
        &rows,
    )?;
    let mut record = ResultRecord::new("dro-check", p.into_effective(), seed);
    record.metric("max_equivalence_gap", {
        rows.iter()
            .filter(|r| r[0] == "equivalence_gap")
            .map(|r| r[3].parse::<f64>().unwrap())
            .fold(0.0, f64::max)
    });
    record.metric("max_oracle_gap", max_oracle_gap);
    record.metric("checks_failed", failures as f64);
    record.duration_s = start.elapsed().as_secs_f64();
    output::write_record(&paths, &record)?;
    println!(
        "dro-check: {} checks, {} failed (details in {})",
        rows.len(),
        failures,
        paths.csv.display()
    );
    Ok(Outcome {
        tolerance_failures: failures,
    })
}
