//! `train-toy`: one contrastive training run with the chosen loss,
//! per-step statistics, and a final linear-eval accuracy.

use super::toyargs::{self, DataArgs, LossArgs, TrainArgs};
use super::{CommonArgs, Outcome};
use crate::config::Params;
use crate::output::{self, fmt_f64, OutputPaths, ResultRecord};
use anyhow::Result;
use ncelab::toytrain::{linear_eval, make_clusters, train_encoder, ClusterDataConfig, NoiseConfig, TrainConfig};
use std::time::Instant;

#[derive(Debug, clap::Args)]
pub struct Args {
    #[command(flatten)]
    common: CommonArgs,
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    train: TrainArgs,
    #[command(flatten)]
    loss: LossArgs,
    /// False-negative ratio (1 = uniform sampling).
    #[arg(long)]
    ratio: Option<f64>,
}

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
    let mut known: Vec<&str> = vec!["ratio", "seed"];
    known.extend(toyargs::DATA_KEYS);
    known.extend(toyargs::TRAIN_KEYS);
    known.extend(toyargs::LOSS_KEYS);
    file.check_known_keys(&known)?;

    let mut p = Params::new(&file);
    let data_cfg = toyargs::resolve_data(&mut p, &args.data, &default_data())?;
    let train_cfg = toyargs::resolve_train(&mut p, &args.train, &default_train())?;
    let loss_cfg = toyargs::resolve_loss(&mut p, &args.loss, "infonce")?;
    let ratio = p.f64("ratio", args.ratio, 1.0)?;
    let seed = p.u64("seed", args.common.seed, 0)?;

    let dataset = make_clusters(&data_cfg, seed).map_err(anyhow::Error::new)?;
    let noise = NoiseConfig {
        false_negative_ratio: ratio,
    };
    let log = train_encoder(&dataset, &loss_cfg, &train_cfg, &noise, seed)
        .map_err(anyhow::Error::new)?;
    let accuracy = linear_eval(&log.encoder, &dataset, seed.wrapping_add(1))
        .map_err(anyhow::Error::new)?;

    let rows: Vec<Vec<String>> = log
        .steps
        .iter()
        .enumerate()
        .map(|(i, s)| {
            vec![
                i.to_string(),
                fmt_f64(s.loss),
                fmt_f64(s.pos_mean),
                fmt_f64(s.neg_mean),
                fmt_f64(s.neg_variance),
            ]
        })
        .collect();
    let paths = OutputPaths::from_prefix(&args.common.out);
    output::write_csv(
        &paths.csv,
        &["step", "loss", "pos_mean", "neg_mean", "neg_variance"],
        &rows,
    )?;

    let mut record = ResultRecord::new("train-toy", p.into_effective(), seed);
    record.metric("accuracy", accuracy);
    record.metric("steps", rows.len() as f64);
    record.metric("final_loss", log.last_epoch_mean(|s| s.loss));
    record.metric("final_pos_mean", log.last_epoch_mean(|s| s.pos_mean));
    record.metric("final_neg_variance", log.last_epoch_mean(|s| s.neg_variance));
    record.duration_s = start.elapsed().as_secs_f64();
    output::write_record(&paths, &record)?;
    println!(
        "train-toy[{:?}]: accuracy {:.4} over {} steps -> {}",
        loss_cfg.kind,
        accuracy,
        rows.len(),
        paths.csv.display()
    );
    Ok(Outcome::clean())
}
