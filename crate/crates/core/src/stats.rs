//! Scalar probability functions used throughout the crate.
//!
//! Thin wrappers around `statrs` distributions plus a few small helpers
//! (log binomial pmf, sample moments, exact binomial confidence intervals).

use statrs::distribution::{Beta, ContinuousCDF, Normal, StudentsT};

/// 97.5% quantile of the standard normal distribution.
pub const Z_975: f64 = 1.959963984540054;

fn std_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("standard normal")
}

/// Standard normal CDF.
pub fn norm_cdf(x: f64) -> f64 {
    std_normal().cdf(x)
}

/// Standard normal density.
pub fn norm_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Standard normal quantile function.
pub fn norm_quantile(p: f64) -> f64 {
    std_normal().inverse_cdf(p)
}

/// Quantile of Student's t distribution with `df` degrees of freedom.
pub fn t_quantile(p: f64, df: f64) -> f64 {
    StudentsT::new(0.0, 1.0, df)
        .expect("valid t distribution")
        .inverse_cdf(p)
}

/// Log density of N(mean, sd^2) at `x`.
pub fn ln_norm_pdf(x: f64, mean: f64, sd: f64) -> f64 {
    let z = (x - mean) / sd;
    -0.5 * z * z - sd.ln() - 0.5 * (2.0 * std::f64::consts::PI).ln()
}

/// Density of N(mean, sd^2) at `x`.
pub fn norm_pdf_at(x: f64, mean: f64, sd: f64) -> f64 {
    ln_norm_pdf(x, mean, sd).exp()
}

/// Log pmf of Binomial(n, p) at y, with exact handling of p = 0 and p = 1.
pub fn binom_ln_pmf(y: u64, n: u64, p: f64) -> f64 {
    debug_assert!(y <= n);
    if p <= 0.0 {
        return if y == 0 { 0.0 } else { f64::NEG_INFINITY };
    }
    if p >= 1.0 {
        return if y == n { 0.0 } else { f64::NEG_INFINITY };
    }
    let ln_coeff = statrs::function::factorial::ln_binomial(n, y);
    let y_f = y as f64;
    let rest = (n - y) as f64;
    ln_coeff + y_f * p.ln() + rest * (1.0 - p).ln()
}

/// Sample mean and standard deviation (ddof = 1).
pub fn mean_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    assert!(n >= 2, "need at least two values");
    let mean = values.iter().sum::<f64>() / n as f64;
    let ss = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>();
    (mean, (ss / (n - 1) as f64).sqrt())
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Exact Clopper-Pearson confidence interval for a binomial proportion.
///
/// Returns the `level` two-sided interval for `successes` out of `n`.
pub fn clopper_pearson(successes: u64, n: u64, level: f64) -> (f64, f64) {
    assert!(n > 0 && successes <= n);
    let alpha = 1.0 - level;
    let k = successes as f64;
    let n_f = n as f64;
    let lo = if successes == 0 {
        0.0
    } else {
        Beta::new(k, n_f - k + 1.0)
            .expect("valid beta")
            .inverse_cdf(alpha / 2.0)
    };
    let hi = if successes == n {
        1.0
    } else {
        Beta::new(k + 1.0, n_f - k)
            .expect("valid beta")
            .inverse_cdf(1.0 - alpha / 2.0)
    };
    (lo, hi)
}

/// Standard error of a treatment-effect estimate recovered from a 95% CI.
pub fn se_from_ci95(lo: f64, hi: f64) -> f64 {
    (hi - lo) / (2.0 * Z_975)
}
