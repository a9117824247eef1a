//! Shared dataset/encoder parameter plumbing for the toy-training
//! subcommands. Each subcommand carries its own calibrated defaults, so
//! the flags are resolved against a default bundle passed in by the caller.

use crate::config::Params;
use anyhow::Result;
use ncelab::losses::{LossConfig, LossKind, WeightFamily};
use ncelab::toytrain::{ClusterDataConfig, TrainConfig};

#[derive(Debug, clap::Args)]
pub struct DataArgs {
    #[arg(long)]
    pub classes: Option<usize>,
    #[arg(long)]
    pub ambient_dim: Option<usize>,
    #[arg(long)]
    pub points_per_class: Option<usize>,
    #[arg(long)]
    pub separation: Option<f64>,
    #[arg(long)]
    pub cluster_noise: Option<f64>,
}

#[derive(Debug, clap::Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub embed_dim: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub num_negatives: Option<usize>,
    #[arg(long)]
    pub step_size: Option<f64>,
    #[arg(long)]
    pub augment_noise: Option<f64>,
}

pub const DATA_KEYS: [&str; 5] = [
    "classes",
    "ambient_dim",
    "points_per_class",
    "separation",
    "cluster_noise",
];

pub const TRAIN_KEYS: [&str; 6] = [
    "embed_dim",
    "epochs",
    "batch_size",
    "num_negatives",
    "step_size",
    "augment_noise",
];

pub fn resolve_data(
    p: &mut Params,
    args: &DataArgs,
    default: &ClusterDataConfig,
) -> Result<ClusterDataConfig> {
    Ok(ClusterDataConfig {
        num_classes: p.usize("classes", args.classes, default.num_classes)?,
        ambient_dim: p.usize("ambient_dim", args.ambient_dim, default.ambient_dim)?,
        points_per_class: p.usize(
            "points_per_class",
            args.points_per_class,
            default.points_per_class,
        )?,
        class_separation: p.f64("separation", args.separation, default.class_separation)?,
        within_class_noise: p.f64("cluster_noise", args.cluster_noise, default.within_class_noise)?,
    })
}

pub fn resolve_train(
    p: &mut Params,
    args: &TrainArgs,
    default: &TrainConfig,
) -> Result<TrainConfig> {
    Ok(TrainConfig {
        embed_dim: p.usize("embed_dim", args.embed_dim, default.embed_dim)?,
        epochs: p.usize("epochs", args.epochs, default.epochs)?,
        batch_size: p.usize("batch_size", args.batch_size, default.batch_size)?,
        num_negatives: p.usize("num_negatives", args.num_negatives, default.num_negatives)?,
        step_size: p.f64("step_size", args.step_size, default.step_size)?,
        augment_noise: p.f64("augment_noise", args.augment_noise, default.augment_noise)?,
    })
}

pub fn parse_loss_kind(raw: &str) -> Result<LossKind> {
    match raw.to_ascii_lowercase().as_str() {
        "infonce" => Ok(LossKind::InfoNce),
        "basic" => Ok(LossKind::Basic),
        "meanvar" | "mean-variance" | "meanvariance" => Ok(LossKind::MeanVariance),
        "adnce" => Ok(LossKind::Adnce),
        other => anyhow::bail!("loss must be infonce, basic, meanvar or adnce (got {other:?})"),
    }
}

pub fn parse_weight_family(raw: &str) -> Result<WeightFamily> {
    match raw.to_ascii_lowercase().as_str() {
        "gaussian" => Ok(WeightFamily::Gaussian),
        "gamma" => Ok(WeightFamily::Gamma),
        "rayleigh" => Ok(WeightFamily::Rayleigh),
        "chisquared" | "chi2" => Ok(WeightFamily::ChiSquared),
        other => {
            anyhow::bail!("weight family must be gaussian, gamma, rayleigh or chi2 (got {other:?})")
        }
    }
}

/// Loss parameters shared by the training subcommands.
#[derive(Debug, clap::Args)]
pub struct LossArgs {
    /// infonce | basic | meanvar | adnce
    #[arg(long)]
    pub loss: Option<String>,
    #[arg(long)]
    pub tau: Option<f64>,
    #[arg(long)]
    pub mu: Option<f64>,
    #[arg(long)]
    pub sigma: Option<f64>,
    /// gaussian | gamma | rayleigh | chi2
    #[arg(long)]
    pub weight_family: Option<String>,
    #[arg(long)]
    pub m: Option<f64>,
    #[arg(long)]
    pub n: Option<f64>,
}

pub const LOSS_KEYS: [&str; 7] = ["loss", "tau", "mu", "sigma", "weight_family", "m", "n"];

pub fn resolve_loss(p: &mut Params, args: &LossArgs, default_kind: &str) -> Result<LossConfig> {
    let kind = parse_loss_kind(&p.string("loss", args.loss.clone(), default_kind)?)?;
    let family = parse_weight_family(&p.string(
        "weight_family",
        args.weight_family.clone(),
        "gaussian",
    )?)?;
    Ok(LossConfig {
        kind,
        tau: p.f64("tau", args.tau, 0.5)?,
        mu: p.f64("mu", args.mu, 0.5)?,
        sigma: p.f64("sigma", args.sigma, 1.0)?,
        weight_family: family,
        m: p.f64("m", args.m, 1.0)?,
        n: p.f64("n", args.n, 1.0)?,
        phi_curvature: 1.0,
    })
}
