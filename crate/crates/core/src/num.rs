//! Shared numeric kernels: stabilized exponential aggregation, moments,
//! derivative-free 1-D optimization and root finding.
//!
//! Every routine here is deterministic and allocation-light. Summations run
//! left to right so results are bit-stable regardless of caller parallelism.

/// Golden ratio constant for section search.
const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// `log(sum_i exp(x_i))` with max-shift stabilization.
///
/// Returns `-inf` for an empty slice.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    let sum: f64 = xs.iter().map(|&x| (x - max).exp()).sum();
    max + sum.ln()
}

/// `log(mean_i exp(x_i))`, the stabilized log of the empirical moment
/// generating function.
pub fn log_mean_exp(xs: &[f64]) -> f64 {
    log_sum_exp(xs) - (xs.len() as f64).ln()
}

/// `log(sum_i w_i exp(x_i))` for nonnegative weights, max-shift stabilized.
pub fn weighted_log_sum_exp(xs: &[f64], ws: &[f64]) -> f64 {
    debug_assert_eq!(xs.len(), ws.len());
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    let sum: f64 = xs.iter().zip(ws).map(|(&x, &w)| w * (x - max).exp()).sum();
    max + sum.ln()
}

/// Softmax with temperature: `w_i = exp(x_i / tau) / sum_j exp(x_j / tau)`.
///
/// The exponential tilt of the uniform distribution by the scores.
pub fn softmax(xs: &[f64], tau: f64) -> Vec<f64> {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = xs.iter().map(|&x| ((x - max) / tau).exp()).collect();
    let sum: f64 = out.iter().sum();
    for w in &mut out {
        *w /= sum;
    }
    out
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Population variance (divide by N): the variance of the empirical
/// distribution itself, not an unbiased estimate of a parent's.
pub fn population_variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|&x| (x - m) * (x - m)).sum::<f64>() / xs.len() as f64
}

pub fn weighted_mean(xs: &[f64], ws: &[f64]) -> f64 {
    debug_assert_eq!(xs.len(), ws.len());
    xs.iter().zip(ws).map(|(&x, &w)| w * x).sum()
}

/// Variance under the probability weights `ws` (which must sum to 1).
pub fn weighted_population_variance(xs: &[f64], ws: &[f64]) -> f64 {
    let m = weighted_mean(xs, ws);
    xs.iter()
        .zip(ws)
        .map(|(&x, &w)| w * (x - m) * (x - m))
        .sum()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

pub fn euclidean_norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Minimize a unimodal function on `[lo, hi]` by golden-section search,
/// stopping when the bracket width falls below `tol`.
///
/// Returns `(argmin, min)`. Non-finite objective values are treated as +inf
/// so the search retreats from infeasible regions.
pub fn golden_section_min<F: FnMut(f64) -> f64>(mut f: F, lo: f64, hi: f64, tol: f64) -> (f64, f64) {
    let guard = |x: f64, f: &mut F| {
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };
    let (mut a, mut b) = (lo, hi);
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = guard(c, &mut f);
    let mut fd = guard(d, &mut f);
    while (b - a).abs() > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = guard(c, &mut f);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = guard(d, &mut f);
        }
    }
    let x = 0.5 * (a + b);
    let fx = guard(x, &mut f);
    (x, fx)
}

/// Golden-section minimization over a positive bracket `[lo, hi]` carried out
/// in log space, so `rel_tol` bounds the *relative* width of the final
/// bracket. Suited to scale parameters like the dual temperature.
pub fn golden_section_min_log<F: FnMut(f64) -> f64>(
    mut f: F,
    lo: f64,
    hi: f64,
    rel_tol: f64,
) -> (f64, f64) {
    debug_assert!(lo > 0.0 && hi > lo);
    let (t, ft) = golden_section_min(|t: f64| f(t.exp()), lo.ln(), hi.ln(), rel_tol);
    (t.exp(), ft)
}

/// Root of a monotone function on `[lo, hi]` by bisection.
///
/// Requires `g(lo)` and `g(hi)` to bracket zero; iterates until the interval
/// width or |g| falls below `tol`.
pub fn bisect_root<F: FnMut(f64) -> f64>(mut g: F, lo: f64, hi: f64, tol: f64) -> f64 {
    let (mut a, mut b) = (lo, hi);
    let mut ga = g(a);
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        let gm = g(m);
        if gm.abs() <= tol || (b - a).abs() <= tol * f64::EPSILON.max(1e-3) {
            return m;
        }
        if (ga <= 0.0) == (gm <= 0.0) {
            a = m;
            ga = gm;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

/// Solve the symmetric positive-definite system `A x = b` in place via
/// Cholesky factorization. `a` is row-major `n x n`.
///
/// Panics if the matrix is not positive definite; callers regularize first.
pub fn solve_spd(a: &mut [f64], b: &mut [f64], n: usize) {
    debug_assert_eq!(a.len(), n * n);
    debug_assert_eq!(b.len(), n);
    // Cholesky: A = L L^T, stored in the lower triangle of `a`.
    for j in 0..n {
        let mut diag = a[j * n + j];
        for k in 0..j {
            diag -= a[j * n + k] * a[j * n + k];
        }
        assert!(diag > 0.0, "matrix not positive definite");
        let ljj = diag.sqrt();
        a[j * n + j] = ljj;
        for i in (j + 1)..n {
            let mut v = a[i * n + j];
            for k in 0..j {
                v -= a[i * n + k] * a[j * n + k];
            }
            a[i * n + j] = v / ljj;
        }
    }
    // Forward substitution L y = b.
    for i in 0..n {
        let mut v = b[i];
        for k in 0..i {
            v -= a[i * n + k] * b[k];
        }
        b[i] = v / a[i * n + i];
    }
    // Back substitution L^T x = y.
    for i in (0..n).rev() {
        let mut v = b[i];
        for k in (i + 1)..n {
            v -= a[k * n + i] * b[k];
        }
        b[i] = v / a[i * n + i];
    }
}
