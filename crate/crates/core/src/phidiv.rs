//! Convex divergence generators, their conjugates, and variational
//! divergence estimation.
//!
//! A [`PhiSpec`] packages a convex generator `phi` (with `phi(1) = 0`), its
//! convex conjugate `phi*`, and the curvature `phi''(1)`. Four divergences
//! are registered: KL, chi-squared, modified chi-squared and Hellinger.
//!
//! Estimation follows two routes for a fixed critic `f`:
//!
//! * the plain variational bound `E_P[f] - E_Q[phi*(f)]`
//!   ([`dv_divergence`]), and
//! * the shifted bound `E_P[f] - min_l { l + E_Q[phi*(f - l)] }`
//!   ([`tight_variational_divergence`]), which is never looser because
//!   `l = 0` is a feasible shift.
//!
//! Both are lower bounds on `D_phi(P || Q)` for any critic; maximizing the
//! shifted bound over a tabular critic on a discrete space recovers the
//! divergence exactly ([`tight_divergence_tabular`]).
//!
//! On the chi-squared conjugate: the quadratic generator registered here,
//! `phi(x) = (x-1)^2 / (2 sqrt 2)`, is paired with its actual
//! Legendre transform. A folklore variant pairs the same generator with
//! `phi*(y) = y + y^2`, which is the transform of `(x-1)^2 / 4` instead;
//! that variant is kept available through
//! [`PhiSpec::chi_squared_conventional_conjugate`] because the
//! mean-minus-variance form of [`chi2_variational`] is exactly its shifted
//! bound. The two scalings differ by a factor of `sqrt 2`; comparisons
//! should say which one they use.

use crate::error::{Error, Result};
use crate::num;

/// Scale of the registered chi-squared generator: `phi(x) = CHI2_SCALE (x-1)^2`.
pub const CHI2_SCALE: f64 = 0.353_553_390_593_273_8; // 1 / (2 sqrt 2)

/// A convex divergence generator with its conjugate machinery.
#[derive(Debug, Clone, Copy)]
pub struct PhiSpec {
    name: &'static str,
    phi: fn(f64) -> f64,
    conjugate_closed: Option<fn(f64) -> f64>,
    /// Closed-form maximizer `x*(y) = argmax_x { x y - phi(x) }` when known.
    conjugate_argmax: Option<fn(f64) -> f64>,
    second_deriv_at_one: f64,
    /// Supremum of arguments with finite conjugate (exclusive bound).
    conjugate_domain_hi: f64,
}

impl PhiSpec {
    /// `phi(x) = x ln x - x + 1`, `phi*(y) = e^y - 1`.
    pub fn kl() -> Self {
        PhiSpec {
            name: "KL",
            phi: |x| {
                if x == 0.0 {
                    1.0
                } else {
                    x * x.ln() - x + 1.0
                }
            },
            conjugate_closed: Some(|y| y.exp() - 1.0),
            conjugate_argmax: Some(|y| y.exp()),
            second_deriv_at_one: 1.0,
            conjugate_domain_hi: f64::INFINITY,
        }
    }

    /// Quadratic generator `phi(x) = (x-1)^2 / (2 sqrt 2)` with its actual
    /// conjugate (`y + y^2 sqrt 2 / 2` above the kink at `-1/sqrt 2`).
    pub fn chi_squared() -> Self {
        PhiSpec {
            name: "ChiSquared",
            phi: |x| CHI2_SCALE * (x - 1.0) * (x - 1.0),
            conjugate_closed: Some(|y| {
                if y >= -2.0 * CHI2_SCALE {
                    y + y * y / (4.0 * CHI2_SCALE)
                } else {
                    -CHI2_SCALE
                }
            }),
            conjugate_argmax: Some(|y| (1.0 + y / (2.0 * CHI2_SCALE)).max(0.0)),
            second_deriv_at_one: 2.0 * CHI2_SCALE,
            conjugate_domain_hi: f64::INFINITY,
        }
    }

    /// The same quadratic generator paired with `phi*(y) = y + y^2`.
    ///
    /// Not Fenchel-consistent with the generator (that conjugate belongs to
    /// `(x-1)^2/4`); retained for comparison because the mean-minus-variance
    /// chi-squared bound is its shifted form. Fails the Fenchel-Young check
    /// by construction.
    pub fn chi_squared_conventional_conjugate() -> Self {
        PhiSpec {
            name: "ChiSquaredConventional",
            phi: |x| CHI2_SCALE * (x - 1.0) * (x - 1.0),
            conjugate_closed: Some(|y| y + y * y),
            conjugate_argmax: Some(|y| (1.0 + 2.0 * y).max(0.0)),
            second_deriv_at_one: 2.0 * CHI2_SCALE,
            conjugate_domain_hi: f64::INFINITY,
        }
    }

    /// `phi(x) = (x-1)^2`, `phi*(y) = y + y^2/4` above the kink at `-2`.
    pub fn modified_chi_squared() -> Self {
        PhiSpec {
            name: "ModifiedChiSquared",
            phi: |x| (x - 1.0) * (x - 1.0),
            conjugate_closed: Some(|y| if y >= -2.0 { y + y * y / 4.0 } else { -1.0 }),
            conjugate_argmax: Some(|y| (1.0 + y / 2.0).max(0.0)),
            second_deriv_at_one: 2.0,
            conjugate_domain_hi: f64::INFINITY,
        }
    }

    /// `phi(x) = (sqrt x - 1)^2`, `phi*(y) = y / (1 - y)` for `y < 1`.
    pub fn hellinger() -> Self {
        PhiSpec {
            name: "Hellinger",
            phi: |x| {
                let d = x.sqrt() - 1.0;
                d * d
            },
            conjugate_closed: Some(|y| y / (1.0 - y)),
            conjugate_argmax: Some(|y| 1.0 / ((1.0 - y) * (1.0 - y))),
            second_deriv_at_one: 0.5,
            conjugate_domain_hi: 1.0,
        }
    }

    /// A copy of this spec with the closed forms stripped, forcing every
    /// conjugate evaluation through the numeric supremum. Used to exercise
    /// the numeric path against the closed forms.
    pub fn without_closed_forms(&self) -> Self {
        PhiSpec {
            conjugate_closed: None,
            conjugate_argmax: None,
            ..*self
        }
    }

    pub fn name(&self) -> &'static str {
        self.name
    }

    pub fn is_kl(&self) -> bool {
        self.name == "KL"
    }

    pub fn phi(&self, x: f64) -> f64 {
        (self.phi)(x)
    }

    pub fn second_deriv_at_one(&self) -> f64 {
        self.second_deriv_at_one
    }

    pub fn conjugate_domain_hi(&self) -> f64 {
        self.conjugate_domain_hi
    }

    /// `phi*(y)`, through the closed form when registered and the numeric
    /// supremum otherwise.
    pub fn conjugate(&self, y: f64) -> Result<f64> {
        if y >= self.conjugate_domain_hi {
            return Err(Error::ConjugateInfinite { argument: y });
        }
        match self.conjugate_closed {
            Some(f) => Ok(f(y)),
            None => numeric_conjugate(self, y),
        }
    }

    /// The maximizer `x*(y)` of `x y - phi(x)` over `x >= 0`; numeric when
    /// no closed form is registered.
    pub fn conjugate_argmax(&self, y: f64) -> Result<f64> {
        if y >= self.conjugate_domain_hi {
            return Err(Error::ConjugateInfinite { argument: y });
        }
        match self.conjugate_argmax {
            Some(f) => Ok(f(y)),
            None => numeric_conjugate_argmax(self, y).map(|(x, _)| x),
        }
    }
}

/// Look up a registered divergence by name.
pub fn register_divergence(name: &str) -> Result<PhiSpec> {
    match name {
        "KL" | "kl" => Ok(PhiSpec::kl()),
        "ChiSquared" | "chi-squared" | "chi2" => Ok(PhiSpec::chi_squared()),
        "ModifiedChiSquared" | "modified-chi-squared" | "mchi2" => {
            Ok(PhiSpec::modified_chi_squared())
        }
        "Hellinger" | "hellinger" => Ok(PhiSpec::hellinger()),
        other => Err(Error::UnknownDivergence {
            name: other.to_string(),
        }),
    }
}

/// Names accepted by [`register_divergence`], for CLI listings.
pub const REGISTERED_DIVERGENCES: [&str; 4] =
    ["KL", "ChiSquared", "ModifiedChiSquared", "Hellinger"];

/// `sup_x { x y - phi(x) }` over the generator domain `x >= 0`, by
/// golden-section on a log-spaced bracket (tolerance 1e-10), with the
/// boundary `x = 0` checked separately.
///
/// Returns an error when the supremum diverges.
pub fn numeric_conjugate(spec: &PhiSpec, y: f64) -> Result<f64> {
    numeric_conjugate_argmax(spec, y).map(|(_, v)| v)
}

fn numeric_conjugate_argmax(spec: &PhiSpec, y: f64) -> Result<(f64, f64)> {
    let h = |x: f64| x * y - spec.phi(x);
    let mut hi = 1.0f64;
    while h(4.0 * hi) > h(hi) {
        hi *= 4.0;
        if hi > 1e12 {
            return Err(Error::ConjugateInfinite { argument: y });
        }
    }
    let (x_in, neg_v) = num::golden_section_min_log(|x| -h(x), 1e-12, 4.0 * hi, 1e-10);
    let interior = -neg_v;
    let boundary = h(0.0);
    if boundary > interior {
        Ok((0.0, boundary))
    } else {
        Ok((x_in, interior))
    }
}

/// Critic scores on samples from `P` and `Q`, with per-sample probability
/// weights. Uniform weights give the Monte Carlo estimators; explicit
/// weights give exact expectations on discrete spaces.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    p_scores: Vec<f64>,
    p_weights: Vec<f64>,
    q_scores: Vec<f64>,
    q_weights: Vec<f64>,
}

impl SampleSet {
    /// Monte Carlo mode: uniform weights over the supplied critic scores.
    pub fn from_scores(p_scores: Vec<f64>, q_scores: Vec<f64>) -> Result<Self> {
        let np = p_scores.len();
        let nq = q_scores.len();
        if np == 0 || nq == 0 {
            return Err(Error::InvalidDistribution {
                reason: "sample sets must be nonempty",
            });
        }
        SampleSet::weighted(
            p_scores,
            vec![1.0 / np as f64; np],
            q_scores,
            vec![1.0 / nq as f64; nq],
        )
    }

    /// Exact-expectation mode: one critic value per outcome of a discrete
    /// space, weighted by the two outcome distributions.
    pub fn exact_discrete(critic: &[f64], p_probs: &[f64], q_probs: &[f64]) -> Result<Self> {
        if critic.len() != p_probs.len() || critic.len() != q_probs.len() {
            return Err(Error::LengthMismatch {
                left: critic.len(),
                right: p_probs.len().max(q_probs.len()),
            });
        }
        SampleSet::weighted(
            critic.to_vec(),
            p_probs.to_vec(),
            critic.to_vec(),
            q_probs.to_vec(),
        )
    }

    fn weighted(
        p_scores: Vec<f64>,
        p_weights: Vec<f64>,
        q_scores: Vec<f64>,
        q_weights: Vec<f64>,
    ) -> Result<Self> {
        for (scores, weights) in [(&p_scores, &p_weights), (&q_scores, &q_weights)] {
            if scores.is_empty() {
                return Err(Error::InvalidDistribution {
                    reason: "sample sets must be nonempty",
                });
            }
            if scores.iter().any(|s| !s.is_finite()) {
                return Err(Error::NonFinite {
                    what: "critic scores",
                });
            }
            validate_probability(weights)?;
        }
        Ok(SampleSet {
            p_scores,
            p_weights,
            q_scores,
            q_weights,
        })
    }

    pub fn p_scores(&self) -> &[f64] {
        &self.p_scores
    }

    pub fn q_scores(&self) -> &[f64] {
        &self.q_scores
    }
}

pub(crate) fn validate_probability(ws: &[f64]) -> Result<()> {
    if ws.iter().any(|w| !w.is_finite()) {
        return Err(Error::NonFinite {
            what: "probability weights",
        });
    }
    if ws.iter().any(|&w| w < 0.0) {
        return Err(Error::InvalidDistribution {
            reason: "negative probability",
        });
    }
    let sum: f64 = ws.iter().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(Error::WeightSumViolation { sum });
    }
    Ok(())
}

/// The shift minimizing `l + tau * E_Q[phi*((f - l)/tau)]`.
///
/// For KL this is the log-partition value `tau ln E_Q[e^{f/tau}]` in closed
/// form; other generators go through a 1-D golden-section search on
/// `[min f - 10, max f + 10]` (tolerance 1e-10).
pub fn optimal_lambda(spec: &PhiSpec, neg_critic_scores: &[f64], tau: f64) -> Result<f64> {
    if neg_critic_scores.is_empty() {
        return Err(Error::EmptyNegatives);
    }
    let n = neg_critic_scores.len();
    optimal_lambda_weighted(spec, neg_critic_scores, &vec![1.0 / n as f64; n], tau)
}

pub(crate) fn optimal_lambda_weighted(
    spec: &PhiSpec,
    scores: &[f64],
    weights: &[f64],
    tau: f64,
) -> Result<f64> {
    if !(tau.is_finite() && tau > 0.0) {
        return Err(Error::InvalidParameter {
            name: "tau",
            constraint: "positive",
            value: tau,
        });
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::NonFinite {
            what: "critic scores",
        });
    }
    if spec.is_kl() {
        let scaled: Vec<f64> = scores.iter().map(|s| s / tau).collect();
        return Ok(tau * num::weighted_log_sum_exp(&scaled, weights));
    }
    let lo = scores.iter().copied().fold(f64::INFINITY, f64::min) - 10.0;
    let hi = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max) + 10.0;
    let objective = |lambda: f64| -> f64 {
        let mut acc = lambda;
        for (&s, &w) in scores.iter().zip(weights) {
            match spec.conjugate((s - lambda) / tau) {
                Ok(v) => acc += tau * w * v,
                Err(_) => return f64::INFINITY,
            }
        }
        acc
    };
    let (lambda, _) = num::golden_section_min(objective, lo, hi, 1e-10);
    Ok(lambda)
}

/// Shifted variational bound for a fixed critic:
/// `E_P[f] - [ l* + E_Q[phi*(f - l*)] ]` with `l*` from [`optimal_lambda`].
///
/// A lower bound on `D_phi(P || Q)` for every critic.
pub fn tight_variational_divergence(spec: &PhiSpec, samples: &SampleSet) -> Result<f64> {
    let lambda = optimal_lambda_weighted(spec, &samples.q_scores, &samples.q_weights, 1.0)?;
    let mut q_term = lambda;
    for (&s, &w) in samples.q_scores.iter().zip(&samples.q_weights) {
        q_term += w * spec.conjugate(s - lambda)?;
    }
    Ok(num::weighted_mean(&samples.p_scores, &samples.p_weights) - q_term)
}

/// Plain variational bound for a fixed critic:
/// `E_P[f] - E_Q[phi*(f)]` (no shift).
pub fn dv_divergence(spec: &PhiSpec, samples: &SampleSet) -> Result<f64> {
    let mut q_term = 0.0;
    for (&s, &w) in samples.q_scores.iter().zip(&samples.q_weights) {
        q_term += w * spec.conjugate(s)?;
    }
    Ok(num::weighted_mean(&samples.p_scores, &samples.p_weights) - q_term)
}

/// Mean-minus-variance chi-squared bound for a fixed critic:
/// `E_P[f] - E_Q[f] - V_Q[f]`.
///
/// This is the shifted bound under the `phi*(y) = y + y^2` conjugate
/// convention (the shift lands on `E_Q[f]` and leaves the variance).
pub fn chi2_variational(samples: &SampleSet) -> f64 {
    let p_mean = num::weighted_mean(&samples.p_scores, &samples.p_weights);
    let q_mean = num::weighted_mean(&samples.q_scores, &samples.q_weights);
    let q_var = num::weighted_population_variance(&samples.q_scores, &samples.q_weights);
    p_mean - q_mean - q_var
}

/// Exact `D_phi(P || Q) = sum_k q_k phi(p_k / q_k)` on a discrete space.
pub fn exact_discrete_divergence(spec: &PhiSpec, p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::LengthMismatch {
            left: p.len(),
            right: q.len(),
        });
    }
    validate_probability(p)?;
    validate_probability(q)?;
    let mut acc = 0.0;
    for (i, (&pi, &qi)) in p.iter().zip(q).enumerate() {
        if qi == 0.0 {
            if pi > 0.0 {
                return Err(Error::NotAbsolutelyContinuous { index: i });
            }
            continue;
        }
        acc += qi * spec.phi(pi / qi);
    }
    Ok(acc)
}

/// Result of maximizing the shifted bound over a tabular critic.
#[derive(Debug, Clone)]
pub struct TabularFit {
    pub critic: Vec<f64>,
    pub estimate: f64,
}

/// Maximize the shifted variational bound over a tabular critic (one free
/// value per outcome) by block-coordinate ascent, alternating the shift
/// update with per-outcome critic updates.
///
/// On a discrete space with exact expectations this recovers
/// `D_phi(P || Q)` (the joint objective is concave in `(f, l)`).
pub fn tight_divergence_tabular(
    spec: &PhiSpec,
    p: &[f64],
    q: &[f64],
    sweeps: usize,
) -> Result<TabularFit> {
    if p.len() != q.len() {
        return Err(Error::LengthMismatch {
            left: p.len(),
            right: q.len(),
        });
    }
    validate_probability(p)?;
    validate_probability(q)?;
    let k = p.len();
    let mut critic = vec![0.0f64; k];
    let domain_hi = spec.conjugate_domain_hi();
    for _ in 0..sweeps {
        let lambda = optimal_lambda_weighted(spec, &critic, q, 1.0)?;
        for i in 0..k {
            if q[i] == 0.0 {
                // No conjugate penalty: the bound grows linearly in p_i f_i,
                // but such outcomes make the divergence infinite; pin to the
                // shift so the critic stays bounded.
                critic[i] = lambda;
                continue;
            }
            let (pi, qi) = (p[i], q[i]);
            let hi = lambda + if domain_hi.is_finite() { domain_hi - 1e-12 } else { 40.0 };
            let lo = lambda - 40.0;
            let (t, _) = num::golden_section_min(
                |t| {
                    let y = t - lambda;
                    match spec.conjugate(y) {
                        Ok(v) => qi * v - pi * t,
                        Err(_) => f64::INFINITY,
                    }
                },
                lo,
                hi,
                1e-12,
            );
            critic[i] = t;
        }
    }
    let samples = SampleSet::exact_discrete(&critic, p, q)?;
    let estimate = tight_variational_divergence(spec, &samples)?;
    Ok(TabularFit { critic, estimate })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn specs() -> [PhiSpec; 4] {
        [
            PhiSpec::kl(),
            PhiSpec::chi_squared(),
            PhiSpec::modified_chi_squared(),
            PhiSpec::hellinger(),
        ]
    }

    #[test]
    fn registry_resolves_known_names_and_rejects_unknown() {
        for name in REGISTERED_DIVERGENCES {
            assert!(register_divergence(name).is_ok());
        }
        assert!(matches!(
            register_divergence("Total Variation"),
            Err(Error::UnknownDivergence { .. })
        ));
    }

    #[test]
    fn every_generator_vanishes_at_one() {
        for spec in specs() {
            assert!(spec.phi(1.0).abs() < 1e-12, "{}", spec.name());
        }
    }

    #[test]
    fn kl_anchor_values() {
        let kl = PhiSpec::kl();
        assert_eq!(kl.conjugate(0.0).unwrap(), 0.0);
        assert_eq!(kl.second_deriv_at_one(), 1.0);
        assert_eq!(kl.phi(0.0), 1.0);
    }

    #[test]
    fn generators_are_midpoint_convex_on_random_triples() {
        // 1000 deterministic pseudo-random triples per generator.
        for spec in specs() {
            let mut state = 0x9E3779B97F4A7C15u64;
            let mut next = move || {
                state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                (state >> 11) as f64 / (1u64 << 53) as f64 * 8.0
            };
            for _ in 0..1000 {
                let a = next();
                let b = next();
                let mid = 0.5 * (a + b);
                assert!(
                    spec.phi(mid) <= 0.5 * spec.phi(a) + 0.5 * spec.phi(b) + 1e-12,
                    "{} fails midpoint convexity at ({a}, {b})",
                    spec.name()
                );
            }
        }
    }

    #[test]
    fn fenchel_young_holds_on_a_grid() {
        // conjugate(y) >= x y - phi(x) on a 1000-point grid; equality is
        // attained (within 1e-8) at the closed-form maximizer.
        for spec in specs() {
            for iy in 0..40 {
                let y = -3.0 + 0.1 * iy as f64;
                if y >= spec.conjugate_domain_hi() - 0.05 {
                    continue;
                }
                let cj = spec.conjugate(y).unwrap();
                for ix in 0..1000 {
                    let x = ix as f64 * 0.02;
                    let v = x * y - spec.phi(x);
                    assert!(cj + 1e-9 >= v, "{} violates FY at x={x}, y={y}", spec.name());
                }
                let x_star = spec.conjugate_argmax(y).unwrap();
                let attained = x_star * y - spec.phi(x_star);
                assert!(
                    (cj - attained).abs() < 1e-8,
                    "{} sup not attained at y={y}: {cj} vs {attained}",
                    spec.name()
                );
            }
        }
    }

    #[test]
    fn conventional_chi2_conjugate_is_not_fenchel_consistent() {
        // The retained comparison variant intentionally mismatches: its
        // stated conjugate at y=1 is 2, the actual transform gives 1+sqrt2/2.
        let spec = PhiSpec::chi_squared_conventional_conjugate();
        let actual = numeric_conjugate(&spec, 1.0).unwrap();
        let printed = spec.conjugate(1.0).unwrap();
        assert!((printed - 2.0).abs() < 1e-12);
        assert!((actual - printed).abs() > 0.2);
    }

    #[test]
    fn numeric_conjugate_matches_kl_closed_form() {
        let spec = PhiSpec::kl();
        for y in [-1.0, 0.0, 1.0] {
            let numeric = numeric_conjugate(&spec, y).unwrap();
            assert!((numeric - (y.exp() - 1.0)).abs() < 1e-8);
        }
    }

    #[test]
    fn numeric_conjugate_matches_every_closed_form() {
        for spec in specs() {
            for iy in 0..30 {
                let y = -2.5 + 0.11 * iy as f64;
                if y >= spec.conjugate_domain_hi() - 0.1 {
                    continue;
                }
                let numeric = numeric_conjugate(&spec, y).unwrap();
                let closed = spec.conjugate(y).unwrap();
                assert!(
                    (numeric - closed).abs() < 1e-7,
                    "{} at y={y}: numeric {numeric} vs closed {closed}",
                    spec.name()
                );
            }
        }
    }

    #[test]
    fn numeric_conjugate_is_convex_in_y() {
        let spec = PhiSpec::kl().without_closed_forms();
        let ys: Vec<f64> = (0..9).map(|i| -2.0 + 0.45 * i as f64).collect();
        let vals: Vec<f64> = ys.iter().map(|&y| numeric_conjugate(&spec, y).unwrap()).collect();
        for i in 1..ys.len() - 1 {
            // equally spaced grid: midpoint convexity applies directly
            assert!(vals[i] <= 0.5 * vals[i - 1] + 0.5 * vals[i + 1] + 1e-9);
        }
    }

    #[test]
    fn numeric_conjugate_detects_divergence() {
        let spec = PhiSpec::hellinger().without_closed_forms();
        assert!(matches!(
            numeric_conjugate(&spec, 1.5),
            Err(Error::ConjugateInfinite { .. })
        ));
    }

    #[test]
    fn optimal_lambda_kl_frozen_value() {
        let spec = PhiSpec::kl();
        let got = optimal_lambda(&spec, &[0.9, 0.1, -0.5], 0.5).unwrap();
        assert!((got - 0.467_322_604_163_696_6).abs() < 1e-12);
    }

    #[test]
    fn optimal_lambda_of_constant_scores_is_the_constant() {
        let spec = PhiSpec::kl();
        let got = optimal_lambda(&spec, &[0.37; 5], 0.8).unwrap();
        assert!((got - 0.37).abs() < 1e-12);
    }

    #[test]
    fn optimal_lambda_numeric_matches_kl_closed_form() {
        let numeric_spec = PhiSpec::kl().without_closed_forms();
        let kl = PhiSpec::kl();
        let mut state = 1u64;
        let mut next = move || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (state >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
        };
        for _ in 0..100 {
            let scores: Vec<f64> = (0..8).map(|_| next()).collect();
            let closed = optimal_lambda(&kl, &scores, 0.5).unwrap();
            let numeric = optimal_lambda(&numeric_spec, &scores, 0.5).unwrap();
            assert!(
                (closed - numeric).abs() < 1e-6,
                "closed {closed} vs numeric {numeric}"
            );
        }
    }

    #[test]
    fn zero_critic_gives_zero_for_kl_on_identical_samples() {
        let spec = PhiSpec::kl();
        let s = SampleSet::from_scores(vec![0.0; 6], vec![0.0; 6]).unwrap();
        assert!(tight_variational_divergence(&spec, &s).unwrap().abs() < 1e-12);
        assert!(dv_divergence(&spec, &s).unwrap().abs() < 1e-12);
    }

    #[test]
    fn tight_collapses_to_log_mean_exp_for_kl() {
        let spec = PhiSpec::kl();
        let p = vec![0.4, 0.9, 0.1];
        let q = vec![-0.2, 0.3, 0.8, 0.5];
        let s = SampleSet::from_scores(p.clone(), q.clone()).unwrap();
        let got = tight_variational_divergence(&spec, &s).unwrap();
        let want = num::mean(&p) - num::log_mean_exp(&q);
        assert!((got - want).abs() < 1e-10);
    }

    #[test]
    fn chi2_variational_vanishes_for_constant_critic() {
        let s = SampleSet::from_scores(vec![0.7; 4], vec![0.7; 9]).unwrap();
        assert!(chi2_variational(&s).abs() < 1e-15);
    }

    #[test]
    fn exact_discrete_divergence_requires_absolute_continuity() {
        let spec = PhiSpec::kl();
        let err = exact_discrete_divergence(&spec, &[0.5, 0.5], &[1.0, 0.0]);
        assert!(matches!(err, Err(Error::NotAbsolutelyContinuous { index: 1 })));
    }

    #[test]
    fn tabular_ascent_recovers_exact_kl() {
        let spec = PhiSpec::kl();
        let p = [0.5, 0.2, 0.2, 0.1];
        let q = [0.25, 0.25, 0.25, 0.25];
        let exact: f64 = p
            .iter()
            .zip(&q)
            .map(|(&pi, &qi): (&f64, &f64)| pi * (pi / qi).ln())
            .sum();
        let fit = tight_divergence_tabular(&spec, &p, &q, 60).unwrap();
        assert!(
            (fit.estimate - exact).abs() < 1e-6,
            "got {} want {exact}",
            fit.estimate
        );
    }
}
