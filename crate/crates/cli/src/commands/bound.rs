//! `bound`: tabulate the finite-sample deviation bound over N and tau.

use super::{CommonArgs, Outcome};
use crate::config::Params;
use crate::output::{self, fmt_f64, OutputPaths, ResultRecord};
use anyhow::Result;
use ncelab::dro::{generalization_bound, BoundParams};
use std::time::Instant;

#[derive(Debug, clap::Args)]
pub struct Args {
    #[command(flatten)]
    common: CommonArgs,
    /// Comma-separated temperatures.
    #[arg(long)]
    tau_list: Option<String>,
    /// Comma-separated negative-sample counts.
    #[arg(long)]
    n_list: Option<String>,
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long)]
    m1: Option<f64>,
    #[arg(long)]
    m2: Option<f64>,
    /// Hypothesis-space cardinality |F|.
    #[arg(long)]
    hypothesis_count: Option<f64>,
}

const KEYS: [&str; 7] = [
    "tau_list",
    "n_list",
    "rho",
    "m1",
    "m2",
    "hypothesis_count",
    "seed",
];

pub fn run(args: &Args) -> Result<Outcome> {
    let start = Instant::now();
    let file = args.common.load_file()?;
    file.check_known_keys(&KEYS)?;
    let mut p = Params::new(&file);
    let taus = p.f64_list("tau_list", args.tau_list.clone(), "0.5")?;
    let ns = p.u64_list(
        "n_list",
        args.n_list.clone(),
        "16,32,64,128,256,512,1024,2048,4096",
    )?;
    let rho = p.f64("rho", args.rho, 0.05)?;
    let m1 = p.f64("m1", args.m1, -1.0)?;
    let m2 = p.f64("m2", args.m2, 1.0)?;
    let hypothesis_count = p.f64("hypothesis_count", args.hypothesis_count, 1e6)?;
    let seed = p.u64("seed", args.common.seed, 0)?;

    let mut rows = Vec::new();
    for &tau in &taus {
        for &n in &ns {
            let b = generalization_bound(&BoundParams {
                rho,
                n,
                tau,
                m1,
                m2,
                hypothesis_count,
            })
            .map_err(anyhow::Error::new)?;
            rows.push(vec![fmt_f64(tau), n.to_string(), fmt_f64(b)]);
        }
    }
    let paths = OutputPaths::from_prefix(&args.common.out);
    output::write_csv(&paths.csv, &["tau", "n", "bound"], &rows)?;
    let mut record = ResultRecord::new("bound", p.into_effective(), seed);
    record.metric("rows", rows.len() as f64);
    if let Some(last) = rows.last() {
        record.metric("bound_at_last_cell", last[2].parse::<f64>().unwrap());
    }
    record.duration_s = start.elapsed().as_secs_f64();
    output::write_record(&paths, &record)?;
    println!("bound: {} rows -> {}", rows.len(), paths.csv.display());
    Ok(Outcome::clean())
}
