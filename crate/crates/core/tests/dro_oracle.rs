//! Oracle cross-checks for the robust-reweighting solvers: projected
//! ascent against the dual bisection, enumeration of random feasible
//! points, the temperature-variance approximation, and the second-order
//! expansion order of the tempered log-partition.

use ncelab::dro::{
    self, projected_ascent_kl, worst_case_weights_constrained, DroConstraint, WeightVector,
};
use ncelab::num;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn random_scores(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

#[test]
fn solver_matches_projected_ascent_on_random_instances() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    for trial in 0..30 {
        let scores = random_scores(&mut rng, 16);
        let eta = [0.05, 0.2, 0.6][trial % 3];
        let sol = worst_case_weights_constrained(&scores, &DroConstraint::kl(eta).unwrap()).unwrap();
        let (_, ascent) = projected_ascent_kl(&scores, eta, 60_000, 0.1).unwrap();
        assert!(
            (sol.objective - ascent).abs() < 1e-4,
            "trial {trial}: dual {} vs ascent {ascent}",
            sol.objective
        );
    }
}

#[test]
fn solver_dominates_random_feasible_points() {
    let mut rng = ChaCha8Rng::seed_from_u64(43);
    let uniform = WeightVector::uniform(16);
    for _ in 0..100 {
        let scores = random_scores(&mut rng, 16);
        let eta = 0.3;
        let sol = worst_case_weights_constrained(&scores, &DroConstraint::kl(eta).unwrap()).unwrap();
        for _ in 0..100 {
            // random point in the simplex, pulled into the KL ball
            let raw: Vec<f64> = (0..16).map(|_| rng.gen_range(0.0f64..1.0).max(1e-9)).collect();
            let sum: f64 = raw.iter().sum();
            let mut q: Vec<f64> = raw.iter().map(|x| x / sum).collect();
            let kl = |q: &[f64]| -> f64 {
                q.iter()
                    .filter(|&&x| x > 0.0)
                    .map(|&x| x * (x * 16.0).ln())
                    .sum()
            };
            if kl(&q) > eta {
                let t = num::bisect_root(
                    |t| {
                        let mixed: Vec<f64> =
                            q.iter().map(|&c| 1.0 / 16.0 + t * (c - 1.0 / 16.0)).collect();
                        kl(&mixed) - eta
                    },
                    0.0,
                    1.0,
                    1e-12,
                );
                for c in q.iter_mut() {
                    *c = 1.0 / 16.0 + t * (*c - 1.0 / 16.0);
                }
            }
            let obj = num::dot(&q, &scores);
            assert!(
                sol.objective >= obj - 1e-8,
                "random feasible point beats solver: {obj} > {}",
                sol.objective
            );
        }
        let _ = &uniform;
    }
}

#[test]
fn variance_approximation_tracks_dual_on_gaussian_shaped_sets() {
    // Symmetrized Gaussian draws kill the odd cumulants, the regime where
    // the square-root rule is exact; spread scaled to 0.05.
    let mut rng = ChaCha8Rng::seed_from_u64(44);
    for _ in 0..20 {
        let half: Vec<f64> = (0..2048).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let mut set: Vec<f64> = half.iter().copied().chain(half.iter().map(|x| -x)).collect();
        let spread = set.iter().copied().fold(f64::NEG_INFINITY, f64::max)
            - set.iter().copied().fold(f64::INFINITY, f64::min);
        for s in set.iter_mut() {
            *s *= 0.05 / spread;
        }
        for eta in [0.1, 0.5] {
            let numeric = dro::optimal_alpha(&set, eta).unwrap().alpha_star;
            let approx = dro::alpha_variance_approx(&set, eta).unwrap();
            let rel = (numeric - approx).abs() / numeric;
            assert!(rel < 0.05, "eta {eta}: rel {rel}");
        }
    }
}

#[test]
fn log_partition_gap_shrinks_cubically_with_scale() {
    // tau ln E e^{f/tau} - mean - var/(2 tau) is third order in the score
    // scale, so halving the scale shrinks it by at least 4x (8x when the
    // third cumulant dominates). Skewed sets keep that cumulant away from
    // zero; near-symmetric sets cancel it and the ratio grows toward 16.
    let tau = 0.5;
    let gap = |scores: &[f64]| -> f64 {
        let scaled: Vec<f64> = scores.iter().map(|s| s / tau).collect();
        let lme = tau * num::log_mean_exp(&scaled);
        (lme - num::mean(scores) - num::population_variance(scores) / (2.0 * tau)).abs()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(45);
    for trial in 0..100 {
        // exponential draws: parent skewness 2, so the empirical third
        // cumulant of 32 samples stays safely away from zero
        let raw: Vec<f64> = (0..32)
            .map(|_| -rng.gen_range(1e-12f64..1.0).ln())
            .collect();
        let m = num::mean(&raw);
        let peak = raw
            .iter()
            .map(|x| (x - m).abs())
            .fold(f64::NEG_INFINITY, f64::max);
        let unit: Vec<f64> = raw.iter().map(|x| (x - m) / peak).collect();
        let coarse: Vec<f64> = unit.iter().map(|x| 0.1 * x).collect();
        let fine: Vec<f64> = unit.iter().map(|x| 0.05 * x).collect();
        let ratio = gap(&coarse) / gap(&fine);
        assert!(ratio >= 4.0, "trial {trial}: ratio {ratio}");
    }
}

#[test]
fn generic_phi_solver_agrees_with_numeric_conjugate_route() {
    // The closed-form conjugate maximizers against the fully numeric path.
    let scores = [0.9, 0.1, -0.5, 0.3];
    for (spec, eta) in [
        (ncelab::PhiSpec::modified_chi_squared(), 0.25),
        (ncelab::PhiSpec::hellinger(), 0.08),
    ] {
        let closed = worst_case_weights_constrained(
            &scores,
            &DroConstraint::new(spec, eta).unwrap(),
        )
        .unwrap();
        let numeric = worst_case_weights_constrained(
            &scores,
            &DroConstraint::new(spec.without_closed_forms(), eta).unwrap(),
        )
        .unwrap();
        for (a, b) in closed
            .worst_case
            .as_slice()
            .iter()
            .zip(numeric.worst_case.as_slice())
        {
            assert!((a - b).abs() < 1e-5, "{}: {a} vs {b}", spec.name());
        }
        assert!((closed.objective - numeric.objective).abs() < 1e-6);
    }
}
