//! Replicate generation for the four endpoint families, drift application,
//! nuisance perturbations, and drift-range determination.

use rand::Rng;
use rand_distr::{Binomial, Distribution, Gamma, Normal, Poisson};
use serde::{Deserialize, Serialize};

use crate::binomial::BinomialArmData;
use crate::error::{Error, Result};
use crate::posterior::{DecisionRule, Direction};
use crate::stats::mean_sd;
use crate::summary::{EffectScale, SummaryMeasure};

/// Nuisance knobs applied to a scenario.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScenarioKnobs {
    /// Drift added to the source estimate: the true target effect is
    /// theta_S_hat + drift.
    pub drift: f64,
    /// Target-to-source sampling standard deviation ratio (continuous only).
    pub target_to_source_std_ratio: f64,
    /// Rescaling of the source denominator arm (ratio scales only).
    pub source_denominator_factor: f64,
}

impl Default for ScenarioKnobs {
    fn default() -> Self {
        ScenarioKnobs {
            drift: 0.0,
            target_to_source_std_ratio: 1.0,
            source_denominator_factor: 1.0,
        }
    }
}

/// Cap on zero-event resampling before a replicate is declared failed.
const MAX_RESAMPLES: u32 = 10_000;

/// Continuous endpoint: n effect-scale draws from N(theta_S_hat + drift,
/// sigma_t^2); the estimate is the sample mean with its empirical standard
/// error.
pub fn generate_continuous<R: Rng>(
    theta_s_hat: f64,
    drift: f64,
    sigma_t: f64,
    n_per_arm: u32,
    rng: &mut R,
) -> Result<SummaryMeasure> {
    if n_per_arm < 2 {
        return Err(Error::domain("continuous generation needs n >= 2"));
    }
    if !(sigma_t > 0.0) {
        return Err(Error::domain("sampling sd must be positive"));
    }
    let dist = Normal::new(theta_s_hat + drift, sigma_t).expect("valid normal");
    let draws: Vec<f64> = (0..n_per_arm).map(|_| dist.sample(rng)).collect();
    let (mean, sd) = mean_sd(&draws);
    let mut m = SummaryMeasure::new(
        mean,
        sd / (n_per_arm as f64).sqrt(),
        EffectScale::MeanDiff,
        n_per_arm,
        n_per_arm,
    )?;
    m.aux.sampling_sd = Some(sigma_t);
    Ok(m)
}

/// Binary endpoint on the log odds ratio scale. The target control rate
/// equals the source control rate; the treatment rate is set so the true
/// log-OR is the source log-OR plus the drift. A 0.5 continuity correction
/// is applied to every cell only when some cell is empty.
pub fn generate_binary_logor<R: Rng>(
    source: &SummaryMeasure,
    drift: f64,
    n_per_arm: u32,
    rng: &mut R,
) -> Result<SummaryMeasure> {
    let p_c = source
        .aux
        .control_rate
        .ok_or_else(|| Error::domain("log-OR generation needs a source control rate"))?;
    if !(p_c > 0.0 && p_c < 1.0) {
        return Err(Error::domain("control rate must lie in (0, 1)"));
    }
    let odds_c = p_c / (1.0 - p_c);
    let odds_s = source.estimate.exp() * odds_c;
    let p_t = drift.exp() / (drift.exp() + 1.0 / odds_s);
    let n = n_per_arm as u64;
    let y_c = Binomial::new(n, p_c).expect("valid binomial").sample(rng);
    let y_t = Binomial::new(n, p_t).expect("valid binomial").sample(rng);
    let zero_cell = y_c == 0 || y_c == n || y_t == 0 || y_t == n;
    let (a, b, c, d) = if zero_cell {
        (
            y_t as f64 + 0.5,
            (n - y_t) as f64 + 0.5,
            y_c as f64 + 0.5,
            (n - y_c) as f64 + 0.5,
        )
    } else {
        (y_t as f64, (n - y_t) as f64, y_c as f64, (n - y_c) as f64)
    };
    let est = (a / b).ln() - (c / d).ln();
    let se = (1.0 / a + 1.0 / b + 1.0 / c + 1.0 / d).sqrt();
    let mut m = SummaryMeasure::new(est, se, EffectScale::LogOr, n_per_arm, n_per_arm)?;
    m.aux.control_rate = Some(p_c);
    Ok(m)
}

/// Time-to-event endpoint (approximate sampling): Poisson event counts per
/// arm, then a normal draw of the log hazard ratio with SE from the counts.
/// Replicates with a zero event count in either arm are resampled and the
/// resample count returned.
pub fn generate_tte<R: Rng>(
    lambda_c: f64,
    lambda_t_source: f64,
    drift: f64,
    n_per_arm: u32,
    dt: f64,
    rng: &mut R,
) -> Result<(SummaryMeasure, u32)> {
    if !(lambda_c > 0.0 && lambda_t_source > 0.0 && dt > 0.0) {
        return Err(Error::domain("rates and follow-up must be positive"));
    }
    let lambda_t = drift.exp() * lambda_t_source;
    let n = n_per_arm as f64;
    let pois_c = Poisson::new(lambda_c * dt * n).expect("valid poisson");
    let pois_t = Poisson::new(lambda_t * dt * n).expect("valid poisson");
    let mut resamples = 0;
    loop {
        let events_c = pois_c.sample(rng);
        let events_t = pois_t.sample(rng);
        if events_c < 0.5 || events_t < 0.5 {
            resamples += 1;
            if resamples > MAX_RESAMPLES {
                return Err(Error::Numerical(
                    "zero-event resampling cap exceeded in TTE generation".into(),
                ));
            }
            continue;
        }
        let se = (1.0 / events_t + 1.0 / events_c).sqrt();
        let mean = (lambda_t / lambda_c).ln();
        let est = Normal::new(mean, se).expect("valid normal").sample(rng);
        let mut m = SummaryMeasure::new(est, se, EffectScale::LogHr, n_per_arm, n_per_arm)?;
        m.aux.control_event_rate = Some(lambda_c);
        m.aux.treatment_event_rate = Some(lambda_t);
        return Ok((m, resamples));
    }
}

/// Recurrent-event endpoint: per-patient negative binomial counts
/// (mean mu, dispersion k), estimate log of the rate ratio, SE by the
/// delta method with estimated means and the known k:
/// SE^2 = (1/mu_t_hat + 1/k)/n + (1/mu_c_hat + 1/k)/n.
pub fn generate_recurrent<R: Rng>(
    mu_c: f64,
    mu_t: f64,
    k: f64,
    drift: f64,
    n_per_arm: u32,
    rng: &mut R,
) -> Result<(SummaryMeasure, u32)> {
    if !(mu_c > 0.0 && mu_t > 0.0 && k > 0.0) {
        return Err(Error::domain("rates and dispersion must be positive"));
    }
    let mu_t_true = drift.exp() * mu_t;
    let n = n_per_arm as f64;
    let mut resamples = 0;
    loop {
        let total_c = sample_nb_total(mu_c, k, n_per_arm, rng);
        let total_t = sample_nb_total(mu_t_true, k, n_per_arm, rng);
        if total_c == 0 || total_t == 0 {
            resamples += 1;
            if resamples > MAX_RESAMPLES {
                return Err(Error::Numerical(
                    "zero-count resampling cap exceeded in recurrent generation".into(),
                ));
            }
            continue;
        }
        let mu_c_hat = total_c as f64 / n;
        let mu_t_hat = total_t as f64 / n;
        let est = (mu_t_hat / mu_c_hat).ln();
        let se = ((1.0 / mu_t_hat + 1.0 / k) / n + (1.0 / mu_c_hat + 1.0 / k) / n).sqrt();
        let mut m = SummaryMeasure::new(est, se, EffectScale::LogRr, n_per_arm, n_per_arm)?;
        m.aux.control_event_rate = Some(mu_c);
        m.aux.treatment_event_rate = Some(mu_t_true);
        m.aux.dispersion = Some(k);
        return Ok((m, resamples));
    }
}

/// Total count over an arm of NB(mu, k) patients via the Gamma-Poisson mix.
fn sample_nb_total<R: Rng>(mu: f64, k: f64, n: u32, rng: &mut R) -> u64 {
    let gamma = Gamma::new(k, mu / k).expect("valid gamma");
    let mut total = 0u64;
    for _ in 0..n {
        let lambda = gamma.sample(rng);
        if lambda > 0.0 {
            total += Poisson::new(lambda).expect("valid poisson").sample(rng) as u64;
        }
    }
    total
}

/// Rate-difference endpoint: per-arm binomial responder counts with the
/// control rate pinned to the source control rate.
pub fn generate_rate_diff_counts<R: Rng>(
    source: &SummaryMeasure,
    drift: f64,
    n_per_arm: u32,
    rng: &mut R,
) -> Result<BinomialArmData> {
    let p_c = source
        .aux
        .control_rate
        .ok_or_else(|| Error::domain("rate-diff generation needs a source control rate"))?;
    let p_t = source.estimate + drift + p_c;
    if !(0.0..=1.0).contains(&p_t) || !(0.0..=1.0).contains(&p_c) {
        return Err(Error::domain(format!(
            "treatment rate {p_t} outside [0, 1]; drift {drift} not attainable"
        )));
    }
    let n = n_per_arm as u64;
    let y_c = Binomial::new(n, p_c).expect("valid binomial").sample(rng) as u32;
    let y_t = Binomial::new(n, p_t).expect("valid binomial").sample(rng) as u32;
    BinomialArmData::new(y_c, y_t, n_per_arm, n_per_arm)
}

/// Hellinger distance between two normals, closed form.
pub fn hellinger_normal(m1: f64, s1: f64, m2: f64, s2: f64) -> f64 {
    assert!(s1 > 0.0 && s2 > 0.0, "standard deviations must be positive");
    let v = s1 * s1 + s2 * s2;
    let bc = (2.0 * s1 * s2 / v).sqrt() * (-(m1 - m2) * (m1 - m2) / (4.0 * v)).exp();
    (1.0 - bc).max(0.0).sqrt()
}

/// Hellinger threshold defining the futility edge of the drift range.
pub const DRIFT_RANGE_HELLINGER: f64 = 0.9;

/// Drift range for a case study: the null-side drift where the Hellinger
/// distance between the source posterior and the drifted target sampling
/// distribution reaches 0.9, unioned with the interval from the null drift
/// to zero. For rate differences the range is clipped to the attainable
/// drift interval.
pub fn drift_range(
    source: &SummaryMeasure,
    target_se: f64,
    rule: &DecisionRule,
) -> Result<(f64, f64)> {
    source.validate()?;
    if !(target_se > 0.0) {
        return Err(Error::domain("target SE must be positive"));
    }
    let h = |delta: f64| {
        hellinger_normal(source.estimate, source.std_err, source.estimate + delta, target_se)
    };
    // |delta| where H crosses 0.9; H is increasing in |delta|.
    let mut hi = 8.0 * (source.std_err + target_se);
    let cap = 1e3 * source.std_err;
    while h(hi) < DRIFT_RANGE_HELLINGER {
        hi *= 2.0;
        if hi > cap {
            return Err(Error::Numerical(
                "no Hellinger crossing within 1e3 source SDs".into(),
            ));
        }
    }
    let mut lo = 0.0;
    if h(0.0) >= DRIFT_RANGE_HELLINGER {
        hi = 0.0;
    }
    while hi - lo > 1e-6 {
        let mid = 0.5 * (lo + hi);
        if h(mid) < DRIFT_RANGE_HELLINGER {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let magnitude = 0.5 * (lo + hi);
    let null_drift = rule.theta0 - source.estimate;
    // The futility edge sits on the side where the effect disappears.
    let sign = match rule.direction {
        Direction::GreaterIsEffective => -1.0,
        Direction::LessIsEffective => 1.0,
    };
    let delta_star = sign * magnitude;
    let mut lo_range = delta_star.min(null_drift).min(0.0);
    let mut hi_range = delta_star.max(null_drift).max(0.0);
    if source.scale == EffectScale::RateDiff {
        let p_t_source = source
            .aux
            .control_rate
            .map(|p_c| p_c + source.estimate)
            .ok_or_else(|| Error::domain("rate-diff drift range needs the control rate"))?;
        lo_range = lo_range.max((-1.0 - source.estimate).max(-p_t_source));
        hi_range = hi_range.min((1.0 - source.estimate).min(1.0 - p_t_source));
    }
    Ok((lo_range, hi_range))
}

/// Rescale the denominator arm of a ratio-scale source summary while
/// keeping the treatment effect fixed, recomputing the standard error from
/// the implied cells or rates.
pub fn apply_denominator_factor(source: &SummaryMeasure, factor: f64) -> Result<SummaryMeasure> {
    if !(factor > 0.0) {
        return Err(Error::domain(format!("denominator factor {factor} must be positive")));
    }
    source.validate()?;
    if factor == 1.0 {
        return Ok(*source);
    }
    let mut out = *source;
    match source.scale {
        EffectScale::LogOr => {
            let p_c = source
                .aux
                .control_rate
                .ok_or_else(|| Error::domain("log-OR rescaling needs the control rate"))?;
            let odds_c = factor * p_c / (1.0 - p_c);
            let p_c_new = odds_c / (1.0 + odds_c);
            let odds_t = source.estimate.exp() * odds_c;
            let p_t_new = odds_t / (1.0 + odds_t);
            let n_c = source.n_control as f64;
            let n_t = source.n_treatment as f64;
            out.std_err = (1.0 / (n_c * p_c_new)
                + 1.0 / (n_c * (1.0 - p_c_new))
                + 1.0 / (n_t * p_t_new)
                + 1.0 / (n_t * (1.0 - p_t_new)))
            .sqrt();
            out.aux.control_rate = Some(p_c_new);
        }
        EffectScale::LogHr => {
            // Counts scale with the rate, so SE^2 scales with 1/factor.
            let l_c = source
                .aux
                .control_event_rate
                .ok_or_else(|| Error::domain("log-HR rescaling needs the control rate"))?;
            out.aux.control_event_rate = Some(factor * l_c);
            out.aux.treatment_event_rate = Some(factor * l_c * source.estimate.exp());
            out.std_err = source.std_err / factor.sqrt();
        }
        EffectScale::LogRr => {
            let mu_c = source
                .aux
                .control_event_rate
                .ok_or_else(|| Error::domain("log-RR rescaling needs the control rate"))?;
            let k = source
                .aux
                .dispersion
                .ok_or_else(|| Error::domain("log-RR rescaling needs the dispersion"))?;
            let mu_c_new = factor * mu_c;
            let mu_t_new = mu_c_new * source.estimate.exp();
            out.aux.control_event_rate = Some(mu_c_new);
            out.aux.treatment_event_rate = Some(mu_t_new);
            let n_c = source.n_control as f64;
            let n_t = source.n_treatment as f64;
            out.std_err =
                ((1.0 / mu_t_new + 1.0 / k) / n_t + (1.0 / mu_c_new + 1.0 / k) / n_c).sqrt();
        }
        EffectScale::MeanDiff | EffectScale::RateDiff => {
            return Err(Error::domain(
                "denominator rescaling applies to ratio scales only",
            ));
        }
    }
    out.validate()?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::derive_rng;
    use rand::RngCore;

    fn source_logor() -> SummaryMeasure {
        let mut m =
            SummaryMeasure::new(1.62f64.ln(), 0.1221, EffectScale::LogOr, 562, 563).unwrap();
        m.aux.control_rate = Some(0.39);
        m
    }

    #[test]
    fn continuous_generation_is_deterministic_given_seed() {
        let mut a = derive_rng(7, &[0]);
        let mut b = derive_rng(7, &[0]);
        let x = generate_continuous(0.3, -0.1, 1.0, 58, &mut a).unwrap();
        let y = generate_continuous(0.3, -0.1, 1.0, 58, &mut b).unwrap();
        assert_eq!(x, y);
    }

    #[test]
    fn continuous_estimates_center_on_the_true_effect() {
        // Law of large numbers at n = 1e6.
        let mut rng = derive_rng(11, &[1]);
        let m = generate_continuous(0.3, 0.0, 1.0, 1_000_000, &mut rng).unwrap();
        assert!((m.estimate - 0.3).abs() < 4.0 / 1000.0);
        assert!((m.std_err - 0.001).abs() < 1e-4);
    }

    #[test]
    fn logor_zero_drift_recovers_source_treatment_rate() {
        // At drift 0: p_t = odds_s / (1 + odds_s).
        let src = source_logor();
        let odds_c = 0.39f64 / 0.61;
        let odds_s = 1.62 * odds_c;
        let expect_pt = odds_s / (1.0 + odds_s);
        // Verify through a huge-n Monte Carlo mean of the estimate.
        let mut rng = derive_rng(3, &[2]);
        let mut acc = 0.0;
        let reps = 4000;
        for _ in 0..reps {
            acc += generate_binary_logor(&src, 0.0, 1000, &mut rng).unwrap().estimate;
        }
        let mean = acc / reps as f64;
        let p_c = 0.39;
        let true_logor = (expect_pt / (1.0 - expect_pt) / (p_c / (1.0 - p_c))).ln();
        assert!((true_logor - 1.62f64.ln()).abs() < 1e-12);
        assert!((mean - true_logor).abs() < 0.01, "mean {mean} vs {true_logor}");
    }

    #[test]
    fn logor_null_drift_centers_on_zero() {
        let src = source_logor();
        let mut rng = derive_rng(3, &[3]);
        let mut acc = 0.0;
        let reps = 4000;
        for _ in 0..reps {
            acc += generate_binary_logor(&src, -(1.62f64.ln()), 500, &mut rng)
                .unwrap()
                .estimate;
        }
        let mean = acc / reps as f64;
        assert!(mean.abs() < 0.012, "mean {mean}");
    }

    #[test]
    fn tte_zero_drift_centers_on_source_loghr() {
        let mut rng = derive_rng(5, &[4]);
        let mut acc = 0.0;
        let reps = 4000;
        let mut total_resamples = 0;
        for _ in 0..reps {
            let (m, r) = generate_tte(0.277, 0.187, 0.0, 123, 1.85, &mut rng).unwrap();
            acc += m.estimate;
            total_resamples += r;
        }
        let mean = acc / reps as f64;
        assert!((mean - (0.187f64 / 0.277).ln()).abs() < 0.01, "mean {mean}");
        assert_eq!(total_resamples, 0);
    }

    #[test]
    fn recurrent_matches_the_known_rate_ratio() {
        let mut rng = derive_rng(5, &[5]);
        let mut acc = 0.0;
        let reps = 3000;
        for _ in 0..reps {
            let (m, _) = generate_recurrent(1.74, 0.87, 0.8, 0.0, 68, &mut rng).unwrap();
            acc += m.estimate;
        }
        let mean = acc / reps as f64;
        // log(0.87/1.74) = -0.693; allow MC error plus the small-sample
        // log-of-means bias at n = 68.
        assert!((mean - (-0.6931)).abs() < 0.02, "mean {mean}");
    }

    #[test]
    fn recurrent_se_reduces_to_poisson_for_huge_k() {
        // Dispersion-free limit: SE formula loses its 1/k terms.
        let se_at = |k: f64| ((1.0 / 0.87 + 1.0 / k) / 68.0 + (1.0 / 1.74 + 1.0 / k) / 68.0).sqrt();
        assert!((se_at(1e8) - se_at(1e9)).abs() < 1e-6);
        let poisson = ((1.0 / 0.87 + 1.0 / 1.74) / 68.0f64).sqrt();
        assert!((se_at(1e12) - poisson).abs() < 1e-9);
    }

    #[test]
    fn hellinger_limits() {
        assert_eq!(hellinger_normal(0.3, 0.2, 0.3, 0.2), 0.0);
        assert!(hellinger_normal(0.0, 0.1, 100.0, 0.1) > 1.0 - 1e-12);
        // Symmetry in the mean difference.
        let a = hellinger_normal(0.0, 0.3, 0.5, 0.4);
        let b = hellinger_normal(0.5, 0.3, 0.0, 0.4);
        assert!((a - b).abs() < 1e-15);
    }

    #[test]
    fn drift_range_crosses_at_the_threshold() {
        let src = SummaryMeasure::new(0.0, 0.1, EffectScale::MeanDiff, 100, 100).unwrap();
        let rule = DecisionRule::one_sided(0.0, Direction::GreaterIsEffective);
        let (lo, hi) = drift_range(&src, 0.1, &rule).unwrap();
        assert!(hi >= 0.0 && lo < 0.0);
        let h = hellinger_normal(0.0, 0.1, lo, 0.1);
        assert!((h - 0.9).abs() < 1e-4, "H at lo = {h}");
        // Null drift is contained.
        assert!(lo <= 0.0 - src.estimate && 0.0 - src.estimate <= hi);
    }

    #[test]
    fn drift_range_rate_diff_respects_attainability() {
        let mut src = SummaryMeasure::new(0.08, 0.041, EffectScale::RateDiff, 280, 293).unwrap();
        src.aux.control_rate = Some(0.55);
        let rule = DecisionRule::one_sided(0.0, Direction::GreaterIsEffective);
        let (lo, hi) = drift_range(&src, 0.06, &rule).unwrap();
        assert!(lo >= (-1.0f64 - 0.08).max(-0.63) - 1e-12);
        assert!(hi <= (1.0f64 - 0.08).min(1.0 - 0.63) + 1e-12);
    }

    #[test]
    fn denominator_factor_identity_and_scaling() {
        let src = source_logor();
        let same = apply_denominator_factor(&src, 1.0).unwrap();
        assert_eq!(same, src);

        // Halving the control odds keeps the effect, changes the SE per the
        // implied 2x2 cells.
        let half = apply_denominator_factor(&src, 0.5).unwrap();
        assert_eq!(half.estimate, src.estimate);
        let odds_c = 0.5f64 * 0.39 / 0.61;
        let p_c = odds_c / (1.0 + odds_c);
        let odds_t = 1.62 * odds_c;
        let p_t = odds_t / (1.0 + odds_t);
        let se: f64 = (1.0 / (562.0 * p_c)
            + 1.0 / (562.0 * (1.0 - p_c))
            + 1.0 / (563.0 * p_t)
            + 1.0 / (563.0 * (1.0 - p_t)))
        .sqrt();
        assert!((half.std_err - se).abs() < 1e-12);

        assert!(apply_denominator_factor(&src, 0.0).is_err());
        let cont = SummaryMeasure::new(0.3, 0.1, EffectScale::MeanDiff, 10, 10).unwrap();
        assert!(apply_denominator_factor(&cont, 0.5).is_err());
    }

    #[test]
    fn denominator_factor_logrr_consistency() {
        let mut src = SummaryMeasure::new(-0.69, 0.13, EffectScale::LogRr, 182, 369).unwrap();
        src.aux.control_event_rate = Some(1.74);
        src.aux.treatment_event_rate = Some(0.87);
        src.aux.dispersion = Some(0.8);
        let up = apply_denominator_factor(&src, 1.5).unwrap();
        let mu_c = up.aux.control_event_rate.unwrap();
        let mu_t = up.aux.treatment_event_rate.unwrap();
        assert!((mu_c - 2.61).abs() < 1e-12);
        // Treatment rate keeps the log RR at -0.69.
        assert!(((mu_t / mu_c).ln() - (-0.69)).abs() < 1e-12);
    }

    #[test]
    fn rate_diff_counts_generation_respects_support() {
        let mut src = SummaryMeasure::new(0.08, 0.041, EffectScale::RateDiff, 280, 293).unwrap();
        src.aux.control_rate = Some(0.55);
        let mut rng = derive_rng(9, &[6]);
        let d = generate_rate_diff_counts(&src, -0.08, 143, &mut rng).unwrap();
        assert!(d.y_control <= 143 && d.y_treatment <= 143);
        // Unattainable drift errors out.
        assert!(generate_rate_diff_counts(&src, 0.5, 143, &mut rng).is_err());
        let _ = rng.next_u64();
    }
}
