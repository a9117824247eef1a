//! Central finite-difference checks of every analytic gradient.
//!
//! The oracle is independent of the gradient code: it re-evaluates the loss
//! at perturbed scores (h = 1e-5) and compares the symmetric difference
//! quotient against the analytic partial derivative, requiring relative
//! error below 1e-4 (absolute below 1e-7 where the derivative vanishes).

use ncelab::losses::{self, LossConfig, LossKind, WeightFamily};
use ncelab::scores::ScoreBatch;
use ncelab::WeightVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const H: f64 = 1e-5;

fn close(analytic: f64, numeric: f64) -> bool {
    let scale = analytic.abs().max(numeric.abs());
    if scale < 1e-5 {
        // the symmetric quotient carries ~eps * |loss| / (2h) of rounding
        // noise, which swamps the relative test for vanishing derivatives
        (analytic - numeric).abs() < 1e-7
    } else {
        (analytic - numeric).abs() / scale < 1e-4
    }
}

fn random_batch(rng: &mut ChaCha8Rng, anchors: usize, negs: usize) -> ScoreBatch {
    let pos: Vec<f64> = (0..anchors).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let rows: Vec<Vec<f64>> = (0..anchors)
        .map(|_| (0..negs).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .collect();
    ScoreBatch::new(pos, rows).unwrap()
}

/// Evaluate the per-anchor loss with one score perturbed. For ADNCE the
/// kernel weights stay frozen at the base batch, matching the analytic
/// gradient's stop-gradient convention.
fn per_anchor_loss(
    config: &LossConfig,
    batch: &ScoreBatch,
    frozen_weights: Option<&[WeightVector]>,
    anchor: usize,
) -> f64 {
    let value = match config.kind {
        LossKind::InfoNce => losses::infonce(batch, config.tau).unwrap(),
        LossKind::Basic => losses::basic_loss(batch),
        LossKind::MeanVariance => {
            losses::mean_variance_loss(batch, config.tau, config.phi_curvature).unwrap()
        }
        LossKind::Adnce => losses::adnce(batch, config.tau, frozen_weights.unwrap()).unwrap(),
    };
    value.per_anchor()[anchor]
}

fn perturbed(batch: &ScoreBatch, anchor: usize, which: Option<usize>, delta: f64) -> ScoreBatch {
    let mut pos = batch.pos_scores().to_vec();
    let mut negs: Vec<Vec<f64>> = batch.neg_rows().to_vec();
    match which {
        None => pos[anchor] += delta,
        Some(i) => negs[anchor][i] += delta,
    }
    ScoreBatch::new(pos, negs).unwrap()
}

fn check_gradients_for(config: &LossConfig, trials: usize, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for trial in 0..trials {
        let anchors = rng.gen_range(1..4);
        let negs = rng.gen_range(2..9);
        let batch = random_batch(&mut rng, anchors, negs);
        let frozen: Option<Vec<WeightVector>> = match config.kind {
            LossKind::Adnce => Some(
                batch
                    .neg_rows()
                    .iter()
                    .map(|row| match config.weight_family {
                        WeightFamily::Gaussian => {
                            losses::adnce_weights(row, config.mu, config.sigma).unwrap()
                        }
                        family => {
                            losses::alternative_weights(row, family, config.m, config.n).unwrap()
                        }
                    })
                    .collect(),
            ),
            _ => None,
        };
        let grad = losses::loss_gradient(config, &batch).unwrap();
        for a in 0..anchors {
            let targets: Vec<Option<usize>> = std::iter::once(None)
                .chain((0..batch.neg_rows()[a].len()).map(Some))
                .collect();
            for which in targets {
                let up = per_anchor_loss(config, &perturbed(&batch, a, which, H), frozen.as_deref(), a);
                let down =
                    per_anchor_loss(config, &perturbed(&batch, a, which, -H), frozen.as_deref(), a);
                let numeric = (up - down) / (2.0 * H);
                let analytic = match which {
                    None => grad.pos[a],
                    Some(i) => grad.negs[a][i],
                };
                assert!(
                    close(analytic, numeric),
                    "{:?} trial {trial} anchor {a} slot {which:?}: analytic {analytic} vs numeric {numeric}",
                    config.kind
                );
            }
        }
    }
}

#[test]
fn infonce_gradient_matches_finite_differences() {
    let config = LossConfig {
        kind: LossKind::InfoNce,
        tau: 0.5,
        ..LossConfig::default()
    };
    check_gradients_for(&config, 100, 101);
    let sharp = LossConfig {
        tau: 0.07,
        ..config
    };
    check_gradients_for(&sharp, 20, 102);
}

#[test]
fn basic_gradient_matches_finite_differences() {
    let config = LossConfig {
        kind: LossKind::Basic,
        ..LossConfig::default()
    };
    check_gradients_for(&config, 50, 103);
}

#[test]
fn mean_variance_gradient_matches_finite_differences() {
    let config = LossConfig {
        kind: LossKind::MeanVariance,
        tau: 0.4,
        phi_curvature: 1.0,
        ..LossConfig::default()
    };
    check_gradients_for(&config, 100, 104);
    let chi2_curvature = LossConfig {
        phi_curvature: 0.707,
        ..config
    };
    check_gradients_for(&chi2_curvature, 20, 105);
}

#[test]
fn adnce_gradient_matches_finite_differences_with_frozen_weights() {
    let gaussian = LossConfig {
        kind: LossKind::Adnce,
        tau: 0.5,
        mu: 0.6,
        sigma: 0.8,
        ..LossConfig::default()
    };
    check_gradients_for(&gaussian, 100, 106);
    for family in [
        WeightFamily::Gamma,
        WeightFamily::Rayleigh,
        WeightFamily::ChiSquared,
    ] {
        let cfg = LossConfig {
            kind: LossKind::Adnce,
            weight_family: family,
            m: 2.0,
            n: 1.0,
            ..LossConfig::default()
        };
        check_gradients_for(&cfg, 25, 107);
    }
}
