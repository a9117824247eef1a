//! `tau-sweep`: linear-eval accuracy over a (false-negative ratio,
//! temperature) grid, with per-ratio argmax temperatures.

use super::toyargs::{self, DataArgs, TrainArgs};
use super::{parallel_default, CommonArgs, Outcome};
use crate::config::Params;
use crate::output::{self, fmt_f64, OutputPaths, ResultRecord};
use anyhow::Result;
use ncelab::losses::LossConfig;
use ncelab::toytrain::{
    argmax_tau_per_ratio, make_clusters, tau_sweep, ClusterDataConfig, NoiseConfig, SweepSettings,
    TrainConfig,
};
use std::time::Instant;

#[derive(Debug, clap::Args)]
pub struct Args {
    #[command(flatten)]
    common: CommonArgs,
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    train: TrainArgs,
    /// Comma-separated temperatures.
    #[arg(long)]
    tau_grid: Option<String>,
    /// Comma-separated false-negative ratios.
    #[arg(long)]
    r_grid: Option<String>,
    #[arg(long)]
    runs_per_cell: Option<usize>,
    /// Run sweep cells across threads (identical numbers either way).
    #[arg(long)]
    parallel: bool,
}

/// Calibrated defaults: cluster data where hard mining amplifies
/// augmentation noise under clean negatives, so the best temperature
/// shifts down as the false-negative ratio rises.
fn default_data() -> ClusterDataConfig {
    ClusterDataConfig {
        num_classes: 4,
        ambient_dim: 12,
        points_per_class: 50,
        class_separation: 0.9,
        within_class_noise: 0.55,
    }
}

fn default_train() -> TrainConfig {
    TrainConfig {
        embed_dim: 6,
        epochs: 60,
        batch_size: 32,
        num_negatives: 16,
        step_size: 1.5,
        augment_noise: 0.4,
    }
}

pub fn run(args: &Args) -> Result<Outcome> {
    let start = Instant::now();
    let file = args.common.load_file()?;
    let mut known: Vec<&str> = vec!["tau_grid", "r_grid", "runs_per_cell", "parallel", "seed"];
    known.extend(toyargs::DATA_KEYS);
    known.extend(toyargs::TRAIN_KEYS);
    file.check_known_keys(&known)?;

    let mut p = Params::new(&file);
    let data_cfg = toyargs::resolve_data(&mut p, &args.data, &default_data())?;
    let train_cfg = toyargs::resolve_train(&mut p, &args.train, &default_train())?;
    let tau_grid = p.f64_list("tau_grid", args.tau_grid.clone(), "0.1,0.2,0.4,0.7,1.0")?;
    let r_grid = p.f64_list("r_grid", args.r_grid.clone(), "0,1")?;
    let runs_per_cell = p.usize("runs_per_cell", args.runs_per_cell, 3)?;
    let parallel = p.bool(
        "parallel",
        if args.parallel { Some(true) } else { None },
        parallel_default(),
    )?;
    let seed = p.u64("seed", args.common.seed, 0)?;

    let dataset = make_clusters(&data_cfg, seed).map_err(anyhow::Error::new)?;
    let settings = SweepSettings {
        train: train_cfg,
        loss: LossConfig::default(),
        noise: NoiseConfig {
            false_negative_ratio: 1.0,
        },
        runs_per_cell,
        parallel,
    };
    let cells =
        tau_sweep(&dataset, &tau_grid, &r_grid, &settings, seed).map_err(anyhow::Error::new)?;

    let mut rows = Vec::new();
    for c in &cells {
        rows.push(vec![
            fmt_f64(c.false_negative_ratio),
            fmt_f64(c.tau),
            fmt_f64(c.mean_accuracy),
            fmt_f64(c.std_accuracy),
        ]);
    }
    let paths = OutputPaths::from_prefix(&args.common.out);
    output::write_csv(&paths.csv, &["r", "tau", "mean_accuracy", "std_accuracy"], &rows)?;

    let mut record = ResultRecord::new("tau-sweep", p.into_effective(), seed);
    for (r, best_tau) in argmax_tau_per_ratio(&cells) {
        record.metric(&format!("argmax_tau_at_r_{r}"), best_tau);
    }
    record.metric("cells", cells.len() as f64);
    record.duration_s = start.elapsed().as_secs_f64();
    output::write_record(&paths, &record)?;
    println!(
        "tau-sweep: {} cells -> {} ({} runs/cell{})",
        cells.len(),
        paths.csv.display(),
        runs_per_cell,
        if parallel { ", parallel" } else { "" }
    );
    Ok(Outcome::clean())
}
