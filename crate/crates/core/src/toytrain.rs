//! Synthetic contrastive-learning experiments with a linear encoder.
//!
//! The pipeline: Gaussian class clusters on a sphere ([`make_clusters`]),
//! contrastive batches whose negatives mix a uniform pool with a
//! true-negative (other-class) pool under a false-negative ratio
//! ([`sample_contrastive_batch`]), a linear encoder trained by gradient
//! descent through normalization and cosine scoring ([`train_encoder`]),
//! and a closed-form ridge classifier on frozen embeddings
//! ([`linear_eval`]). Two sweep protocols sit on top: accuracy over a
//! `(false-negative ratio, temperature)` grid ([`tau_sweep`]) and the
//! logged negative-score variance / positive-score mean per temperature
//! ([`variance_sweep`]).
//!
//! Positive pairs are two independent Gaussian perturbations of the same
//! datapoint; negatives are perturbed views of other datapoints. All
//! gradients are analytic (chain rule through the normalize/cosine/loss
//! stack), checked against central finite differences in the tests.
//!
//! Every run is bit-deterministic in its seed. Sweep cells draw derived
//! seeds from independent ChaCha streams, so the parallel mode produces
//! exactly the serial results.

use crate::error::{Error, Result};
use crate::losses::{self, LossConfig};
use crate::num;
use crate::scores::ScoreBatch;
use rand::seq::SliceRandom;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

/// Gaussian cluster data: `num_classes` centers with pairwise separation
/// set by `class_separation`, isotropic within-class noise.
#[derive(Debug, Clone, Copy)]
pub struct ClusterDataConfig {
    pub num_classes: usize,
    pub ambient_dim: usize,
    pub points_per_class: usize,
    pub class_separation: f64,
    pub within_class_noise: f64,
}

impl ClusterDataConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_classes < 2 {
            return Err(Error::InvalidParameter {
                name: "num_classes",
                constraint: "at least 2",
                value: self.num_classes as f64,
            });
        }
        for (name, v) in [
            ("ambient_dim", self.ambient_dim as f64),
            ("points_per_class", self.points_per_class as f64),
        ] {
            if v < 1.0 {
                return Err(Error::InvalidParameter {
                    name,
                    constraint: "at least 1",
                    value: v,
                });
            }
        }
        for (name, v) in [
            ("class_separation", self.class_separation),
            ("within_class_noise", self.within_class_noise),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParameter {
                    name,
                    constraint: "positive",
                    value: v,
                });
            }
        }
        Ok(())
    }
}

/// Share of negative draws taken from the uniform pool (which contains
/// same-class points) instead of the other-class pool. `1` is uniform
/// sampling, `0` is ideal (true negatives only).
#[derive(Debug, Clone, Copy)]
pub struct NoiseConfig {
    pub false_negative_ratio: f64,
}

impl NoiseConfig {
    pub fn validate(&self) -> Result<()> {
        let r = self.false_negative_ratio;
        if !(r.is_finite() && (0.0..=1.0).contains(&r)) {
            return Err(Error::InvalidParameter {
                name: "false_negative_ratio",
                constraint: "in [0, 1]",
                value: r,
            });
        }
        Ok(())
    }
}

/// Labeled synthetic dataset.
#[derive(Debug, Clone)]
pub struct Dataset {
    points: Vec<Vec<f64>>,
    labels: Vec<usize>,
    num_classes: usize,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn ambient_dim(&self) -> usize {
        self.points[0].len()
    }
}

fn gaussian_vec(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
}

/// Class centers orthonormalized (when they fit in the ambient dimension)
/// and scaled by the separation; points are centers plus isotropic noise.
pub fn make_clusters(config: &ClusterDataConfig, seed: u64) -> Result<Dataset> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = config.num_classes;
    let d = config.ambient_dim;
    let mut centers: Vec<Vec<f64>> = Vec::with_capacity(k);
    for _ in 0..k {
        let mut c = gaussian_vec(&mut rng, d);
        if centers.len() < d {
            // Gram-Schmidt against the accepted centers; redraw on
            // near-dependence.
            loop {
                for prev in &centers {
                    let proj = num::dot(&c, prev);
                    for (ci, pi) in c.iter_mut().zip(prev) {
                        *ci -= proj * pi;
                    }
                }
                if num::euclidean_norm(&c) > 1e-6 {
                    break;
                }
                c = gaussian_vec(&mut rng, d);
            }
        }
        // Unit centers during orthogonalization; scaling happens below.
        let norm = num::euclidean_norm(&c);
        centers.push(c.iter().map(|x| x / norm).collect());
    }
    for c in &mut centers {
        for x in c.iter_mut() {
            *x *= config.class_separation;
        }
    }
    let mut points = Vec::with_capacity(k * config.points_per_class);
    let mut labels = Vec::with_capacity(k * config.points_per_class);
    for (label, center) in centers.iter().enumerate() {
        for _ in 0..config.points_per_class {
            let noise = gaussian_vec(&mut rng, d);
            points.push(
                center
                    .iter()
                    .zip(&noise)
                    .map(|(&c, &e)| c + config.within_class_noise * e)
                    .collect(),
            );
            labels.push(label);
        }
    }
    Ok(Dataset {
        points,
        labels,
        num_classes: k,
    })
}

/// One anchor with its positive view and negative views (raw ambient
/// vectors, before encoding).
#[derive(Debug, Clone)]
pub struct ContrastiveItem {
    pub anchor: Vec<f64>,
    pub positive: Vec<f64>,
    pub negatives: Vec<Vec<f64>>,
    pub anchor_label: usize,
    pub negative_labels: Vec<usize>,
}

/// Draw a contrastive batch: `batch_size` anchors, each with an
/// independently perturbed positive view of the same point and
/// `batch_size - 1` perturbed negatives sampled under the pool rule.
pub fn sample_contrastive_batch(
    dataset: &Dataset,
    batch_size: usize,
    noise: &NoiseConfig,
    augment_noise: f64,
    seed: u64,
) -> Result<Vec<ContrastiveItem>> {
    if batch_size < 2 {
        return Err(Error::InvalidParameter {
            name: "batch_size",
            constraint: "at least 2",
            value: batch_size as f64,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_batch_with_rng(dataset, batch_size, batch_size - 1, noise, augment_noise, &mut rng)
}

fn sample_batch_with_rng(
    dataset: &Dataset,
    batch_size: usize,
    num_negatives: usize,
    noise: &NoiseConfig,
    augment_noise: f64,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<ContrastiveItem>> {
    noise.validate()?;
    if !(augment_noise.is_finite() && augment_noise >= 0.0) {
        return Err(Error::InvalidParameter {
            name: "augment_noise",
            constraint: "nonnegative",
            value: augment_noise,
        });
    }
    let r = noise.false_negative_ratio;
    if dataset.num_classes < 2 && r < 1.0 {
        return Err(Error::NoTrueNegatives);
    }
    let n = dataset.len();
    let d = dataset.ambient_dim();
    let perturb = |x: &[f64], rng: &mut ChaCha8Rng| -> Vec<f64> {
        x.iter()
            .map(|&xi| xi + augment_noise * rng.sample::<f64, _>(StandardNormal))
            .collect()
    };
    let mut batch = Vec::with_capacity(batch_size);
    for _ in 0..batch_size {
        let anchor_idx = rng.gen_range(0..n);
        let anchor_label = dataset.labels[anchor_idx];
        let anchor = perturb(&dataset.points[anchor_idx], rng);
        let positive = perturb(&dataset.points[anchor_idx], rng);
        let mut negatives = Vec::with_capacity(num_negatives);
        let mut negative_labels = Vec::with_capacity(num_negatives);
        for _ in 0..num_negatives {
            let uniform_pool = r >= 1.0 || (r > 0.0 && rng.gen_range(0.0..1.0) < r);
            let neg_idx = if uniform_pool {
                rng.gen_range(0..n)
            } else {
                // Other-class pool by rejection; cheap for balanced classes.
                loop {
                    let j = rng.gen_range(0..n);
                    if dataset.labels[j] != anchor_label {
                        break j;
                    }
                }
            };
            negative_labels.push(dataset.labels[neg_idx]);
            negatives.push(perturb(&dataset.points[neg_idx], rng));
        }
        batch.push(ContrastiveItem {
            anchor,
            positive,
            negatives,
            anchor_label,
            negative_labels,
        });
        let _ = d;
    }
    Ok(batch)
}

/// Linear encoder: a dense map to the embedding space; outputs are
/// unit-normalized before scoring. Weights are row-major
/// `embed_dim x ambient_dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct Encoder {
    weights: Vec<f64>,
    embed_dim: usize,
    ambient_dim: usize,
}

impl Encoder {
    pub fn random(ambient_dim: usize, embed_dim: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Encoder::random_with_rng(ambient_dim, embed_dim, &mut rng)
    }

    fn random_with_rng(ambient_dim: usize, embed_dim: usize, rng: &mut ChaCha8Rng) -> Self {
        let scale = 1.0 / (ambient_dim as f64).sqrt();
        let weights = (0..embed_dim * ambient_dim)
            .map(|_| scale * rng.sample::<f64, _>(StandardNormal))
            .collect();
        Encoder {
            weights,
            embed_dim,
            ambient_dim,
        }
    }

    pub fn embed_dim(&self) -> usize {
        self.embed_dim
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Raw linear output, before normalization.
    fn forward(&self, x: &[f64]) -> Vec<f64> {
        (0..self.embed_dim)
            .map(|k| num::dot(&self.weights[k * self.ambient_dim..(k + 1) * self.ambient_dim], x))
            .collect()
    }

    /// Normalized embedding of a raw input.
    pub fn embed(&self, x: &[f64]) -> Result<crate::scores::Embedding> {
        crate::scores::normalize(&self.forward(x))
    }
}

/// Hyperparameters of a single training run.
#[derive(Debug, Clone, Copy)]
pub struct TrainConfig {
    pub embed_dim: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub num_negatives: usize,
    pub step_size: f64,
    pub augment_noise: f64,
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("embed_dim", self.embed_dim as f64),
            ("batch_size", self.batch_size as f64),
            ("num_negatives", self.num_negatives as f64),
        ] {
            if v < 1.0 {
                return Err(Error::InvalidParameter {
                    name,
                    constraint: "at least 1",
                    value: v,
                });
            }
        }
        if !(self.step_size.is_finite() && self.step_size > 0.0) {
            return Err(Error::InvalidParameter {
                name: "step_size",
                constraint: "positive",
                value: self.step_size,
            });
        }
        if !(self.augment_noise.is_finite() && self.augment_noise >= 0.0) {
            return Err(Error::InvalidParameter {
                name: "augment_noise",
                constraint: "nonnegative",
                value: self.augment_noise,
            });
        }
        Ok(())
    }
}

/// Per-step training statistics: batch loss, mean positive score, and the
/// per-anchor mean/variance of negative scores averaged over anchors.
#[derive(Debug, Clone, Copy)]
pub struct TrainStepRecord {
    pub loss: f64,
    pub pos_mean: f64,
    pub neg_mean: f64,
    pub neg_variance: f64,
}

/// Full training record plus the final encoder.
#[derive(Debug, Clone)]
pub struct TrainLog {
    pub steps: Vec<TrainStepRecord>,
    pub encoder: Encoder,
    steps_per_epoch: usize,
}

impl TrainLog {
    /// Mean of a statistic over the last epoch's steps.
    pub fn last_epoch_mean<F: Fn(&TrainStepRecord) -> f64>(&self, stat: F) -> f64 {
        let k = self.steps_per_epoch.max(1).min(self.steps.len());
        let tail = &self.steps[self.steps.len() - k..];
        num::mean(&tail.iter().map(stat).collect::<Vec<f64>>())
    }
}

/// Train the linear encoder by gradient descent on the configured loss.
///
/// Gradients flow analytically through cosine scoring and output
/// normalization: for upstream `u = dL/d(normalized z)`,
/// `dL/dz = (u - (u . zh) zh) / |z|`, then `dL/dW` accumulates the outer
/// product with the raw input view.
pub fn train_encoder(
    dataset: &Dataset,
    loss_config: &LossConfig,
    train: &TrainConfig,
    noise: &NoiseConfig,
    seed: u64,
) -> Result<TrainLog> {
    loss_config.validate()?;
    train.validate()?;
    noise.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ambient = dataset.ambient_dim();
    let mut encoder = Encoder::random_with_rng(ambient, train.embed_dim, &mut rng);
    let steps_per_epoch = (dataset.len() / train.batch_size).max(1);
    let total_steps = train.epochs * steps_per_epoch;
    let mut log = Vec::with_capacity(total_steps);

    for step in 0..total_steps {
        let batch = sample_batch_with_rng(
            dataset,
            train.batch_size,
            train.num_negatives,
            noise,
            train.augment_noise,
            &mut rng,
        )?;
        let (record, grad) = batch_loss_and_weight_grad(&encoder, &batch, loss_config)?;
        if !record.loss.is_finite() {
            return Err(Error::DivergentTraining { step });
        }
        log.push(record);
        for (w, g) in encoder.weights.iter_mut().zip(&grad) {
            *w -= train.step_size * g;
        }
    }
    Ok(TrainLog {
        steps: log,
        encoder,
        steps_per_epoch,
    })
}

/// Forward/backward pass over one batch. Returns the step statistics and
/// `d(batch loss)/dW` (the batch loss is the mean of per-anchor losses).
fn batch_loss_and_weight_grad(
    encoder: &Encoder,
    batch: &[ContrastiveItem],
    loss_config: &LossConfig,
) -> Result<(TrainStepRecord, Vec<f64>)> {
    let d = encoder.ambient_dim;
    let e = encoder.embed_dim;
    let b = batch.len() as f64;

    struct View {
        raw_norm: f64,
        unit: Vec<f64>,
    }
    let project = |x: &[f64]| -> Result<View> {
        let z = encoder.forward(x);
        let norm = num::euclidean_norm(&z);
        if norm == 0.0 {
            return Err(Error::DegenerateEmbedding);
        }
        Ok(View {
            raw_norm: norm,
            unit: z.iter().map(|v| v / norm).collect(),
        })
    };

    let mut anchors = Vec::with_capacity(batch.len());
    let mut positives = Vec::with_capacity(batch.len());
    let mut negatives = Vec::with_capacity(batch.len());
    let mut pos_scores = Vec::with_capacity(batch.len());
    let mut neg_rows = Vec::with_capacity(batch.len());
    for item in batch {
        let a = project(&item.anchor)?;
        let p = project(&item.positive)?;
        let ns = item
            .negatives
            .iter()
            .map(|nv| project(nv))
            .collect::<Result<Vec<View>>>()?;
        pos_scores.push(num::dot(&a.unit, &p.unit));
        neg_rows.push(ns.iter().map(|v| num::dot(&a.unit, &v.unit)).collect::<Vec<f64>>());
        anchors.push(a);
        positives.push(p);
        negatives.push(ns);
    }

    let score_batch = ScoreBatch::new(pos_scores.clone(), neg_rows.clone())?;
    let loss = losses::evaluate(loss_config, &score_batch)?;
    let score_grad = losses::loss_gradient(loss_config, &score_batch)?;

    let mut w_grad = vec![0.0f64; e * d];
    // dL/dz = (u - (u . zh) zh)/|z|, then outer product with the raw input.
    let accumulate = |view: &View, upstream: &[f64], raw_input: &[f64], w_grad: &mut [f64]| {
        let proj = num::dot(upstream, &view.unit);
        for k in 0..e {
            let dz = (upstream[k] - proj * view.unit[k]) / view.raw_norm;
            if dz == 0.0 {
                continue;
            }
            let row = &mut w_grad[k * d..(k + 1) * d];
            for (ri, &xi) in row.iter_mut().zip(raw_input) {
                *ri += dz * xi;
            }
        }
    };

    for (i, item) in batch.iter().enumerate() {
        let gp = score_grad.pos[i] / b;
        let gns: Vec<f64> = score_grad.negs[i].iter().map(|g| g / b).collect();
        let a = &anchors[i];
        let p = &positives[i];
        let ns = &negatives[i];

        // Upstream into the anchor embedding: gp * p_unit + sum_k gn_k * n_unit_k.
        let mut ua: Vec<f64> = p.unit.iter().map(|&v| gp * v).collect();
        for (gn, nv) in gns.iter().zip(ns) {
            for (u, &v) in ua.iter_mut().zip(&nv.unit) {
                *u += gn * v;
            }
        }
        accumulate(a, &ua, &item.anchor, &mut w_grad);

        let up: Vec<f64> = a.unit.iter().map(|&v| gp * v).collect();
        accumulate(p, &up, &item.positive, &mut w_grad);

        for ((gn, nv), raw) in gns.iter().zip(ns).zip(&item.negatives) {
            let un: Vec<f64> = a.unit.iter().map(|&v| gn * v).collect();
            accumulate(nv, &un, raw, &mut w_grad);
        }
    }

    let per_anchor_neg_mean: Vec<f64> = neg_rows.iter().map(|r| num::mean(r)).collect();
    let per_anchor_neg_var: Vec<f64> = neg_rows.iter().map(|r| num::population_variance(r)).collect();
    let record = TrainStepRecord {
        loss: loss.value(),
        pos_mean: num::mean(&pos_scores),
        neg_mean: num::mean(&per_anchor_neg_mean),
        neg_variance: num::mean(&per_anchor_neg_var),
    };
    Ok((record, w_grad))
}

/// Ridge regularizer for the linear probe.
const RIDGE_LAMBDA: f64 = 1e-4;

/// Fit a multiclass ridge classifier on frozen embeddings (80/20
/// seed-determined split) and return held-out top-1 accuracy.
pub fn linear_eval(encoder: &Encoder, dataset: &Dataset, seed: u64) -> Result<f64> {
    if dataset.num_classes < 2 {
        return Err(Error::SingleClassDataset);
    }
    let n = dataset.len();
    let mut indices: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    indices.shuffle(&mut rng);
    let fit_count = ((n as f64) * 0.8).floor() as usize;
    let fit_count = fit_count.clamp(1, n - 1);
    let (fit_idx, eval_idx) = indices.split_at(fit_count);

    let feat_dim = encoder.embed_dim() + 1; // bias feature
    let k = dataset.num_classes;
    let features = |i: usize| -> Result<Vec<f64>> {
        let mut f = encoder.embed(&dataset.points[i])?.coords().to_vec();
        f.push(1.0);
        Ok(f)
    };

    // Normal equations: (F^T F + lambda I) X = F^T Y, one column per class.
    let mut gram = vec![0.0f64; feat_dim * feat_dim];
    let mut rhs = vec![vec![0.0f64; feat_dim]; k];
    for &i in fit_idx {
        let f = features(i)?;
        for a in 0..feat_dim {
            for bidx in 0..feat_dim {
                gram[a * feat_dim + bidx] += f[a] * f[bidx];
            }
        }
        let y = dataset.labels[i];
        for (a, &fa) in f.iter().enumerate() {
            rhs[y][a] += fa;
        }
    }
    for a in 0..feat_dim {
        gram[a * feat_dim + a] += RIDGE_LAMBDA;
    }
    let mut coefs = Vec::with_capacity(k);
    for class_rhs in rhs.iter_mut() {
        let mut a = gram.clone();
        num::solve_spd(&mut a, class_rhs, feat_dim);
        coefs.push(class_rhs.clone());
    }

    let mut correct = 0usize;
    for &i in eval_idx {
        let f = features(i)?;
        let mut best = (0usize, f64::NEG_INFINITY);
        for (c, coef) in coefs.iter().enumerate() {
            let score = num::dot(coef, &f);
            if score > best.1 {
                best = (c, score);
            }
        }
        if best.0 == dataset.labels[i] {
            correct += 1;
        }
    }
    Ok(correct as f64 / eval_idx.len() as f64)
}

/// Derive an independent 64-bit seed for sweep cell `index`.
fn derive_seed(base: u64, index: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(base);
    rng.set_stream(index);
    rng.next_u64()
}

/// Shared settings for the sweep protocols.
#[derive(Debug, Clone)]
pub struct SweepSettings {
    pub train: TrainConfig,
    pub loss: LossConfig,
    pub noise: NoiseConfig,
    pub runs_per_cell: usize,
    pub parallel: bool,
}

/// One `(r, tau)` cell of the accuracy sweep.
#[derive(Debug, Clone)]
pub struct TauSweepCell {
    pub false_negative_ratio: f64,
    pub tau: f64,
    pub accuracies: Vec<f64>,
    pub mean_accuracy: f64,
    pub std_accuracy: f64,
}

/// Accuracy over the `(r, tau)` grid. Each cell trains `runs_per_cell`
/// times with derived seeds and reports mean and standard deviation.
pub fn tau_sweep(
    dataset: &Dataset,
    tau_grid: &[f64],
    r_grid: &[f64],
    settings: &SweepSettings,
    seed: u64,
) -> Result<Vec<TauSweepCell>> {
    if tau_grid.is_empty() || r_grid.is_empty() {
        return Err(Error::InvalidParameter {
            name: "grid",
            constraint: "nonempty",
            value: 0.0,
        });
    }
    let runs = settings.runs_per_cell.max(1);
    let mut jobs = Vec::new();
    for (ri, &r) in r_grid.iter().enumerate() {
        for (ti, &tau) in tau_grid.iter().enumerate() {
            for run in 0..runs {
                let idx = (ri * tau_grid.len() + ti) * runs + run;
                jobs.push((ri, ti, r, tau, derive_seed(seed, idx as u64)));
            }
        }
    }
    let run_job = |&(_, _, r, tau, job_seed): &(usize, usize, f64, f64, u64)| -> Result<f64> {
        let mut loss = settings.loss.clone();
        loss.tau = tau;
        let noise = NoiseConfig {
            false_negative_ratio: r,
        };
        let log = train_encoder(dataset, &loss, &settings.train, &noise, job_seed)?;
        linear_eval(&log.encoder, dataset, derive_seed(job_seed, u64::MAX / 2))
    };
    let results: Vec<Result<f64>> = if settings.parallel {
        jobs.par_iter().map(run_job).collect()
    } else {
        jobs.iter().map(run_job).collect()
    };

    let mut cells = Vec::with_capacity(r_grid.len() * tau_grid.len());
    for (ri, &r) in r_grid.iter().enumerate() {
        for (ti, &tau) in tau_grid.iter().enumerate() {
            let base = (ri * tau_grid.len() + ti) * runs;
            let accs = results[base..base + runs]
                .iter()
                .cloned()
                .collect::<Result<Vec<f64>>>()?;
            let mean = num::mean(&accs);
            let std = num::population_variance(&accs).sqrt();
            cells.push(TauSweepCell {
                false_negative_ratio: r,
                tau,
                accuracies: accs,
                mean_accuracy: mean,
                std_accuracy: std,
            });
        }
    }
    Ok(cells)
}

/// The temperature with the highest mean accuracy for each ratio row
/// (first maximum on ties, scanning the grid in order).
pub fn argmax_tau_per_ratio(cells: &[TauSweepCell]) -> Vec<(f64, f64)> {
    let mut rows: Vec<f64> = Vec::new();
    for c in cells {
        if !rows.contains(&c.false_negative_ratio) {
            rows.push(c.false_negative_ratio);
        }
    }
    rows.iter()
        .map(|&r| {
            let best = cells
                .iter()
                .filter(|c| c.false_negative_ratio == r)
                .max_by(|a, b| {
                    a.mean_accuracy
                        .partial_cmp(&b.mean_accuracy)
                        .unwrap()
                        .then(b.tau.partial_cmp(&a.tau).unwrap())
                })
                .unwrap();
            (r, best.tau)
        })
        .collect()
}

/// Final logged statistics per temperature.
#[derive(Debug, Clone, Copy)]
pub struct VarianceSweepRow {
    pub tau: f64,
    pub final_neg_variance: f64,
    pub final_pos_mean: f64,
    pub final_neg_mean: f64,
}

/// Train once per temperature (averaging over `runs_per_cell` derived
/// seeds) and report the last-epoch average of the logged negative-score
/// variance and positive-score mean.
pub fn variance_sweep(
    dataset: &Dataset,
    taus: &[f64],
    settings: &SweepSettings,
    seed: u64,
) -> Result<Vec<VarianceSweepRow>> {
    if taus.is_empty() {
        return Err(Error::InvalidParameter {
            name: "taus",
            constraint: "nonempty",
            value: 0.0,
        });
    }
    let runs = settings.runs_per_cell.max(1);
    let mut jobs = Vec::new();
    for (ti, &tau) in taus.iter().enumerate() {
        for run in 0..runs {
            jobs.push((tau, derive_seed(seed, (ti * runs + run) as u64)));
        }
    }
    let run_job = |&(tau, job_seed): &(f64, u64)| -> Result<(f64, f64, f64)> {
        let mut loss = settings.loss.clone();
        loss.tau = tau;
        let log = train_encoder(dataset, &loss, &settings.train, &settings.noise, job_seed)?;
        Ok((
            log.last_epoch_mean(|s| s.neg_variance),
            log.last_epoch_mean(|s| s.pos_mean),
            log.last_epoch_mean(|s| s.neg_mean),
        ))
    };
    let results: Vec<Result<(f64, f64, f64)>> = if settings.parallel {
        jobs.par_iter().map(run_job).collect()
    } else {
        jobs.iter().map(run_job).collect()
    };
    let mut rows = Vec::with_capacity(taus.len());
    for (ti, &tau) in taus.iter().enumerate() {
        let cell = results[ti * runs..(ti + 1) * runs]
            .iter()
            .cloned()
            .collect::<Result<Vec<(f64, f64, f64)>>>()?;
        rows.push(VarianceSweepRow {
            tau,
            final_neg_variance: num::mean(&cell.iter().map(|c| c.0).collect::<Vec<f64>>()),
            final_pos_mean: num::mean(&cell.iter().map(|c| c.1).collect::<Vec<f64>>()),
            final_neg_mean: num::mean(&cell.iter().map(|c| c.2).collect::<Vec<f64>>()),
        });
    }
    Ok(rows)
}
