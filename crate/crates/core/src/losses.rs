//! The contrastive loss family and its analytic score gradients.
//!
//! Four objectives over a [`ScoreBatch`]:
//!
//! | Loss | Per-anchor form |
//! |------|-----------------|
//! | [`infonce`] | `-pos/tau + log mean_i e^{neg_i/tau}` |
//! | [`basic_loss`] | `-pos + mean_i neg_i` |
//! | [`mean_variance_loss`] | `-pos + mean + var/(2 tau phi''(1))` |
//! | [`adnce`] | `-pos/tau + log sum_i w_i e^{neg_i/tau}` |
//!
//! The denominator of InfoNCE is the *mean* over negatives (the empirical
//! expectation under the uniform negative distribution), so a batch whose
//! scores are all equal has loss exactly zero, and ADNCE with uniform
//! weights reduces to InfoNCE bit for bit. Every exponential aggregation is
//! log-sum-exp stabilized; temperatures down to 0.05 are routine.
//!
//! ADNCE reweights negatives with a Gaussian-shaped kernel in score space
//! (center `mu`, width `sigma`), normalized per anchor by its partition
//! value. The kernel weights are treated as data: gradients do not flow
//! through them.

use crate::dro::WeightVector;
use crate::error::{Error, Result};
use crate::num;
use crate::scores::ScoreBatch;

/// Which objective to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossKind {
    InfoNce,
    Basic,
    MeanVariance,
    Adnce,
}

/// Weight kernels for ADNCE-style reweighting.
///
/// The non-Gaussian families evaluate their density at the shifted score
/// `x = s + 1`, which cosine scores keep inside `[0, 2]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WeightFamily {
    Gaussian,
    Gamma,
    Rayleigh,
    ChiSquared,
}

/// Full loss configuration. `m` and `n` parameterize the non-Gaussian
/// weight families; `phi_curvature` is the divergence curvature phi''(1)
/// used by the mean-variance objective (1 for the KL case).
#[derive(Debug, Clone, PartialEq)]
pub struct LossConfig {
    pub kind: LossKind,
    pub tau: f64,
    pub mu: f64,
    pub sigma: f64,
    pub weight_family: WeightFamily,
    pub m: f64,
    pub n: f64,
    pub phi_curvature: f64,
}

impl Default for LossConfig {
    fn default() -> Self {
        LossConfig {
            kind: LossKind::InfoNce,
            tau: 0.5,
            mu: 0.5,
            sigma: 1.0,
            weight_family: WeightFamily::Gaussian,
            m: 1.0,
            n: 1.0,
            phi_curvature: 1.0,
        }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<()> {
        check_positive("tau", self.tau)?;
        check_positive("sigma", self.sigma)?;
        check_positive("phi_curvature", self.phi_curvature)?;
        if !self.mu.is_finite() {
            return Err(Error::NonFinite { what: "mu" });
        }
        match self.weight_family {
            WeightFamily::Gaussian => {}
            WeightFamily::Gamma => {
                check_positive("m", self.m)?;
                check_positive("n", self.n)?;
            }
            WeightFamily::Rayleigh | WeightFamily::ChiSquared => check_positive("m", self.m)?,
        }
        Ok(())
    }
}

fn check_positive(name: &'static str, value: f64) -> Result<()> {
    if !(value.is_finite() && value > 0.0) {
        return Err(Error::InvalidParameter {
            name,
            constraint: "positive",
            value,
        });
    }
    Ok(())
}

/// A batch loss: the mean over anchors plus the per-anchor values it was
/// averaged from (left-to-right summation, so the mean is reproducible).
#[derive(Debug, Clone, PartialEq)]
pub struct LossValue {
    value: f64,
    per_anchor: Vec<f64>,
}

impl LossValue {
    pub(crate) fn from_per_anchor(per_anchor: Vec<f64>) -> Self {
        let value = num::mean(&per_anchor);
        LossValue { value, per_anchor }
    }

    pub fn value(&self) -> f64 {
        self.value
    }

    pub fn per_anchor(&self) -> &[f64] {
        &self.per_anchor
    }
}

/// Gradient of the *per-anchor* loss with respect to every score.
///
/// The batch loss is the mean over anchors, so the derivative of
/// [`LossValue::value`] with respect to a score in anchor `a` is the entry
/// here divided by the anchor count.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreGradient {
    pub pos: Vec<f64>,
    pub negs: Vec<Vec<f64>>,
}

/// InfoNCE with temperature: per anchor
/// `-(pos/tau - log mean_i e^{neg_i/tau})`.
pub fn infonce(batch: &ScoreBatch, tau: f64) -> Result<LossValue> {
    check_positive("tau", tau)?;
    let per_anchor = batch
        .rows()
        .map(|(pos, negs)| {
            let scaled: Vec<f64> = negs.iter().map(|s| s / tau).collect();
            num::log_mean_exp(&scaled) - pos / tau
        })
        .collect();
    Ok(LossValue::from_per_anchor(per_anchor))
}

/// The un-tempered objective: per anchor `-pos + mean(negs)`.
pub fn basic_loss(batch: &ScoreBatch) -> LossValue {
    let per_anchor = batch
        .rows()
        .map(|(pos, negs)| num::mean(negs) - pos)
        .collect();
    LossValue::from_per_anchor(per_anchor)
}

/// Second-order surrogate: per anchor
/// `-pos + mean(negs) + var(negs) / (2 tau phi''(1))`
/// with the population variance under the uniform negative distribution.
pub fn mean_variance_loss(
    batch: &ScoreBatch,
    tau: f64,
    phi_second_deriv_at_one: f64,
) -> Result<LossValue> {
    check_positive("tau", tau)?;
    check_positive("phi_second_deriv_at_one", phi_second_deriv_at_one)?;
    let per_anchor = batch
        .rows()
        .map(|(pos, negs)| {
            let var = num::population_variance(negs);
            num::mean(negs) - pos + var / (2.0 * tau * phi_second_deriv_at_one)
        })
        .collect();
    Ok(LossValue::from_per_anchor(per_anchor))
}

/// Gaussian-kernel weights over one anchor's negative scores, normalized to
/// sum to 1. The kernel's density prefactor cancels in the normalization.
pub fn adnce_weights(neg_scores: &[f64], mu: f64, sigma: f64) -> Result<WeightVector> {
    check_positive("sigma", sigma)?;
    if !mu.is_finite() {
        return Err(Error::NonFinite { what: "mu" });
    }
    if neg_scores.is_empty() {
        return Err(Error::EmptyNegatives);
    }
    // exp(-z_i/2 + z_min/2) normalized; the shift keeps far-from-mu scores
    // from flushing every weight to zero.
    let z: Vec<f64> = neg_scores
        .iter()
        .map(|&s| ((s - mu) / sigma).powi(2))
        .collect();
    let z_min = z.iter().copied().fold(f64::INFINITY, f64::min);
    let mut w: Vec<f64> = z.iter().map(|&zi| (-(zi - z_min) / 2.0).exp()).collect();
    let sum: f64 = w.iter().sum();
    for wi in &mut w {
        *wi /= sum;
    }
    WeightVector::new(w)
}

/// Alternative kernel families evaluated at the shifted score `x = s + 1`.
///
/// Gamma: `x^{m-1} e^{-x/n}`; Rayleigh: `x e^{-x^2 / 2m^2}`;
/// chi-squared: `x^{m/2-1} e^{-x/2}`. Densities with a diverging power of
/// `x` at zero reject inputs on the support boundary.
pub fn alternative_weights(
    neg_scores: &[f64],
    family: WeightFamily,
    m: f64,
    n: f64,
) -> Result<WeightVector> {
    if neg_scores.is_empty() {
        return Err(Error::EmptyNegatives);
    }
    check_positive("m", m)?;
    if family == WeightFamily::Gamma {
        check_positive("n", n)?;
    }
    let xs: Vec<f64> = neg_scores.iter().map(|&s| s + 1.0).collect();
    let exponent = match family {
        WeightFamily::Gamma => Some(m - 1.0),
        WeightFamily::ChiSquared => Some(m / 2.0 - 1.0),
        _ => None,
    };
    if let Some(e) = exponent {
        if e < 1.0 {
            if let Some(&bad) = xs.iter().find(|&&x| x <= 0.0) {
                return Err(Error::WeightSingularity { value: bad });
            }
        }
    }
    let mut w: Vec<f64> = xs
        .iter()
        .map(|&x| match family {
            WeightFamily::Gaussian => (-0.5 * ((x - 1.0 - m) / n).powi(2)).exp(),
            WeightFamily::Gamma => x.powf(m - 1.0) * (-x / n).exp(),
            WeightFamily::Rayleigh => x * (-x * x / (2.0 * m * m)).exp(),
            WeightFamily::ChiSquared => x.powf(m / 2.0 - 1.0) * (-x / 2.0).exp(),
        })
        .collect();
    if let Some(idx) = w.iter().position(|wi| !wi.is_finite() || *wi < 0.0) {
        return Err(Error::WeightSingularity { value: xs[idx] });
    }
    let sum: f64 = w.iter().sum();
    if !(sum.is_finite() && sum > 0.0) {
        return Err(Error::WeightSingularity { value: sum });
    }
    for wi in &mut w {
        *wi /= sum;
    }
    WeightVector::new(w)
}

/// Adjusted InfoNCE: the kernel-weighted mean replaces the uniform mean in
/// the denominator. `weights[a]` reweights anchor `a`'s negatives and must
/// sum to 1 within 1e-9.
pub fn adnce(batch: &ScoreBatch, tau: f64, weights: &[WeightVector]) -> Result<LossValue> {
    check_positive("tau", tau)?;
    if weights.len() != batch.num_anchors() {
        return Err(Error::LengthMismatch {
            left: weights.len(),
            right: batch.num_anchors(),
        });
    }
    let per_anchor = batch
        .rows()
        .zip(weights)
        .map(|((pos, negs), w)| {
            if w.len() != negs.len() {
                return Err(Error::LengthMismatch {
                    left: w.len(),
                    right: negs.len(),
                });
            }
            let sum: f64 = w.as_slice().iter().sum();
            if (sum - 1.0).abs() > 1e-9 {
                return Err(Error::WeightSumViolation { sum });
            }
            let scaled: Vec<f64> = negs.iter().map(|s| s / tau).collect();
            Ok(num::weighted_log_sum_exp(&scaled, w.as_slice()) - pos / tau)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(LossValue::from_per_anchor(per_anchor))
}

/// Evaluate the configured loss on a batch. ADNCE weights come from the
/// configured kernel family, recomputed per anchor.
pub fn evaluate(config: &LossConfig, batch: &ScoreBatch) -> Result<LossValue> {
    config.validate()?;
    match config.kind {
        LossKind::InfoNce => infonce(batch, config.tau),
        LossKind::Basic => Ok(basic_loss(batch)),
        LossKind::MeanVariance => mean_variance_loss(batch, config.tau, config.phi_curvature),
        LossKind::Adnce => {
            let weights = batch
                .neg_rows()
                .iter()
                .map(|negs| config_weights(config, negs))
                .collect::<Result<Vec<_>>>()?;
            adnce(batch, config.tau, &weights)
        }
    }
}

fn config_weights(config: &LossConfig, negs: &[f64]) -> Result<WeightVector> {
    match config.weight_family {
        WeightFamily::Gaussian => adnce_weights(negs, config.mu, config.sigma),
        family => alternative_weights(negs, family, config.m, config.n),
    }
}

/// Analytic partial derivatives of the per-anchor loss with respect to every
/// score in the batch. ADNCE kernel weights are held fixed (no gradient
/// flows through the reweighting).
pub fn loss_gradient(config: &LossConfig, batch: &ScoreBatch) -> Result<ScoreGradient> {
    config.validate()?;
    let tau = config.tau;
    let mut pos = Vec::with_capacity(batch.num_anchors());
    let mut negs = Vec::with_capacity(batch.num_anchors());
    for (_, row) in batch.rows() {
        let n = row.len() as f64;
        let (gp, gn): (f64, Vec<f64>) = match config.kind {
            LossKind::InfoNce => {
                let soft = num::softmax(row, tau);
                (-1.0 / tau, soft.iter().map(|p| p / tau).collect())
            }
            LossKind::Basic => (-1.0, vec![1.0 / n; row.len()]),
            LossKind::MeanVariance => {
                let mean = num::mean(row);
                let c = 1.0 / config.phi_curvature;
                (
                    -1.0,
                    row.iter()
                        .map(|&s| 1.0 / n + c * (s - mean) / (tau * n))
                        .collect(),
                )
            }
            LossKind::Adnce => {
                let w = config_weights(config, row)?;
                // d/ds_i log sum_j w_j e^{s_j/tau} = w_i e^{s_i/tau} / (tau Z)
                let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let terms: Vec<f64> = row
                    .iter()
                    .zip(w.as_slice())
                    .map(|(&s, &wi)| wi * ((s - max) / tau).exp())
                    .collect();
                let z: f64 = terms.iter().sum();
                (-1.0 / tau, terms.iter().map(|t| t / (z * tau)).collect())
            }
        };
        pos.push(gp);
        negs.push(gn);
    }
    Ok(ScoreGradient { pos, negs })
}


#[cfg(test)]
mod proptests {
    use super::*;
    use crate::scores::ScoreBatch;
    use proptest::prelude::*;

    fn arb_row() -> impl Strategy<Value = (f64, Vec<f64>)> {
        (
            -1.0f64..1.0,
            proptest::collection::vec(-1.0f64..1.0, 1..12),
        )
    }

    proptest! {
        #[test]
        fn infonce_is_shift_invariant((pos, negs) in arb_row(), c in -0.9f64..0.9) {
            let b = ScoreBatch::single(pos, negs).unwrap();
            let base = infonce(&b, 0.3).unwrap().value();
            let shifted = infonce(&b.shifted(c), 0.3).unwrap().value();
            prop_assert!((base - shifted).abs() < 1e-10);
        }

        #[test]
        fn every_weight_family_lands_on_the_simplex((_, negs) in arb_row(), m in 1.0f64..4.0, n in 0.2f64..3.0) {
            for family in [WeightFamily::Gaussian, WeightFamily::Gamma, WeightFamily::Rayleigh, WeightFamily::ChiSquared] {
                if let Ok(w) = alternative_weights(&negs, family, m, n) {
                    let sum: f64 = w.as_slice().iter().sum();
                    prop_assert!((sum - 1.0).abs() < 1e-9);
                    prop_assert!(w.as_slice().iter().all(|&x| x >= 0.0));
                }
            }
            let w = adnce_weights(&negs, 0.4, 0.8).unwrap();
            let sum: f64 = w.as_slice().iter().sum();
            prop_assert!((sum - 1.0).abs() < 1e-9);
        }

        #[test]
        fn adnce_uniform_reduction_holds_everywhere((pos, negs) in arb_row(), tau in 0.05f64..2.0) {
            let b = ScoreBatch::single(pos, negs.clone()).unwrap();
            let uniform = vec![WeightVector::uniform(negs.len())];
            let a = adnce(&b, tau, &uniform).unwrap().value();
            let i = infonce(&b, tau).unwrap().value();
            prop_assert!((a - i).abs() < 1e-12);
        }
    }
}
