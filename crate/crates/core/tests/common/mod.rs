//! Independent oracles for the acceptance suite.
//!
//! Everything here deliberately avoids the code paths it checks: Kummer's
//! function is summed as a series (the library integrates in a transformed
//! variable), marginal likelihoods are integrated by brute-force quadrature
//! (the library uses closed forms), and binomial likelihoods are midpoint
//! Riemann sums (the library uses adaptive Simpson).

use borrowsim_core::summary::SummaryMeasure;

/// log of Kummer's confluent hypergeometric function M(a, b, z) for z <= 0,
/// via the transform M(a, b, z) = e^z M(b - a, b, -z) and the ascending
/// series with positive terms (rescaled to avoid overflow).
pub fn ln_kummer_m_nonpositive(a: f64, b: f64, z: f64) -> f64 {
    assert!(z <= 0.0 && b > a && a > 0.0);
    let x = -z;
    let alpha = b - a;
    let mut term = 1.0f64;
    let mut sum = 1.0f64;
    let mut ln_scale = 0.0f64;
    let mut n = 0.0f64;
    const RESCALE: f64 = 1e250;
    loop {
        term *= (alpha + n) * x / ((b + n) * (n + 1.0));
        sum += term;
        n += 1.0;
        if sum > RESCALE {
            sum /= RESCALE;
            term /= RESCALE;
            ln_scale += RESCALE.ln();
        }
        if term < sum * 1e-18 && n > x {
            break;
        }
        assert!(n < 1e7, "Kummer series failed to converge (x = {x})");
    }
    ln_scale + sum.ln() + z
}

/// Brute-force marginal likelihood of an estimate under a normal prior:
/// the integral of N(estimate | theta, se^2) N(theta | m, v) over theta,
/// by composite midpoint quadrature.
pub fn numeric_normal_marginal(estimate: f64, se: f64, m: f64, v: f64) -> f64 {
    let sd = (se * se + v).sqrt();
    let center = 0.5 * (estimate + m);
    let half = 14.0 * sd + 0.5 * (estimate - m).abs();
    let n = 200_001;
    let dx = 2.0 * half / n as f64;
    let mut acc = 0.0;
    for i in 0..n {
        let theta = center - half + (i as f64 + 0.5) * dx;
        let z1 = (estimate - theta) / se;
        let z2 = (theta - m) / v.sqrt();
        acc += (-0.5 * (z1 * z1 + z2 * z2)).exp();
    }
    acc * dx / (2.0 * std::f64::consts::PI * se * v.sqrt())
}

/// Midpoint Riemann sum of the binomial marginal likelihood at one effect
/// value, with `points` control-rate points.
pub fn riemann_binomial_marginal(
    theta: f64,
    y_c: u32,
    n_c: u32,
    y_t: u32,
    n_t: u32,
    points: usize,
) -> f64 {
    let lo = (-theta).max(0.0);
    let hi = (1.0 - theta).min(1.0);
    if !(hi > lo) {
        return 0.0;
    }
    let choose_c = ln_choose(n_c, y_c);
    let choose_t = ln_choose(n_t, y_t);
    let dx = (hi - lo) / points as f64;
    let mut acc = 0.0;
    for i in 0..points {
        let p_c = lo + (i as f64 + 0.5) * dx;
        let p_t = theta + p_c;
        let ln = choose_c
            + ln_pow(p_c, y_c)
            + ln_pow(1.0 - p_c, n_c - y_c)
            + choose_t
            + ln_pow(p_t, y_t)
            + ln_pow(1.0 - p_t, n_t - y_t);
        acc += ln.exp();
    }
    acc * dx
}

fn ln_choose(n: u32, k: u32) -> f64 {
    // Small-count exact computation by summing logs.
    let mut acc = 0.0;
    for i in 0..k {
        acc += ((n - i) as f64).ln() - ((i + 1) as f64).ln();
    }
    acc
}

fn ln_pow(base: f64, exp: u32) -> f64 {
    if exp == 0 {
        0.0
    } else if base <= 0.0 {
        f64::NEG_INFINITY
    } else {
        exp as f64 * base.ln()
    }
}

/// Deterministic fixture stream for oracle comparisons.
pub fn summary_fixtures(count: usize, seed: u64) -> Vec<(SummaryMeasure, SummaryMeasure)> {
    use borrowsim_core::rng::derive_rng;
    use borrowsim_core::summary::EffectScale;
    use rand::Rng;
    let mut rng = derive_rng(seed, &[0xF1]);
    (0..count)
        .map(|_| {
            let s = SummaryMeasure::new(
                rng.gen_range(-1.0..1.0),
                rng.gen_range(0.05..0.5),
                EffectScale::MeanDiff,
                rng.gen_range(20..600),
                rng.gen_range(20..600),
            )
            .unwrap();
            let t = SummaryMeasure::new(
                rng.gen_range(-1.0..1.0),
                rng.gen_range(0.05..0.5),
                EffectScale::MeanDiff,
                rng.gen_range(20..600),
                rng.gen_range(20..600),
            )
            .unwrap();
            (s, t)
        })
        .collect()
}
