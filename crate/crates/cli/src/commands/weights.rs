//! `weights`: weight-versus-score curves for the exponential tilt and the
//! reweighting kernel families, normalized over a score grid. The data
//! behind the usual weight-allocation plots; rendering stays external.

use super::{CommonArgs, Outcome};
use crate::config::Params;
use crate::output::{self, fmt_f64, OutputPaths, ResultRecord};
use anyhow::Result;
use ncelab::dro::worst_case_weights_kl;
use ncelab::losses::{adnce_weights, alternative_weights, WeightFamily};
use std::time::Instant;

#[derive(Debug, clap::Args)]
pub struct Args {
    #[command(flatten)]
    common: CommonArgs,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    mu: Option<f64>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    m: Option<f64>,
    #[arg(long)]
    n: Option<f64>,
    #[arg(long)]
    score_min: Option<f64>,
    #[arg(long)]
    score_max: Option<f64>,
    #[arg(long)]
    points: Option<usize>,
}

const KEYS: [&str; 9] = [
    "tau", "mu", "sigma", "m", "n", "score_min", "score_max", "points", "seed",
];

pub fn run(args: &Args) -> Result<Outcome> {
    let start = Instant::now();
    let file = args.common.load_file()?;
    file.check_known_keys(&KEYS)?;
    let mut p = Params::new(&file);
    let tau = p.f64("tau", args.tau, 0.5)?;
    let mu = p.f64("mu", args.mu, 0.7)?;
    let sigma = p.f64("sigma", args.sigma, 1.0)?;
    let m = p.f64("m", args.m, 2.0)?;
    let n = p.f64("n", args.n, 0.5)?;
    let score_min = p.f64("score_min", args.score_min, -1.0)?;
    let score_max = p.f64("score_max", args.score_max, 1.0)?;
    let points = p.usize("points", args.points, 201)?.max(2);
    let seed = p.u64("seed", args.common.seed, 0)?;

    let grid: Vec<f64> = (0..points)
        .map(|i| score_min + (score_max - score_min) * i as f64 / (points - 1) as f64)
        .collect();
    let tilt = worst_case_weights_kl(&grid, tau).map_err(anyhow::Error::new)?;
    let gaussian = adnce_weights(&grid, mu, sigma).map_err(anyhow::Error::new)?;
    let gamma =
        alternative_weights(&grid, WeightFamily::Gamma, m, n).map_err(anyhow::Error::new)?;
    let rayleigh =
        alternative_weights(&grid, WeightFamily::Rayleigh, m, n).map_err(anyhow::Error::new)?;
    let chi2 =
        alternative_weights(&grid, WeightFamily::ChiSquared, m, n).map_err(anyhow::Error::new)?;

    let rows: Vec<Vec<String>> = (0..points)
        .map(|i| {
            vec![
                fmt_f64(grid[i]),
                fmt_f64(tilt.as_slice()[i]),
                fmt_f64(gaussian.as_slice()[i]),
                fmt_f64(gamma.as_slice()[i]),
                fmt_f64(rayleigh.as_slice()[i]),
                fmt_f64(chi2.as_slice()[i]),
            ]
        })
        .collect();
    let paths = OutputPaths::from_prefix(&args.common.out);
    output::write_csv(
        &paths.csv,
        &[
            "score",
            "softmax_tilt",
            "gaussian_kernel",
            "gamma_kernel",
            "rayleigh_kernel",
            "chi_squared_kernel",
        ],
        &rows,
    )?;
    let mut record = ResultRecord::new("weights", p.into_effective(), seed);
    record.metric("points", points as f64);
    record.duration_s = start.elapsed().as_secs_f64();
    output::write_record(&paths, &record)?;
    println!("weights: {} grid points -> {}", points, paths.csv.display());
    Ok(Outcome::clean())
}
