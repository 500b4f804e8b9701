//! Monte-Carlo estimation of frequentist operating characteristics per
//! scenario, frequentist comparators, and the equivalent-type-1-error power
//! comparison.
//!
//! Reproducibility contract: every replicate draws from an RNG stream keyed
//! by (master seed, scenario content, replicate index), replicates are
//! aggregated in replicate order, and bootstrap streams are keyed by a
//! metric tag, so a record is a pure function of (scenario, seed) no matter
//! how many worker threads run.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::binomial::{BinomialSource, RateDiffPrior};
use crate::datagen::{
    self, apply_denominator_factor, generate_rate_diff_counts, ScenarioKnobs,
};
use crate::error::{Error, Result};
use crate::ess::{ess_report, EssScale};
use crate::methods::{analyze, Analysis, MethodSpec};
use crate::posterior::VaguePrior;
use crate::presets::{CaseStudyPreset, Endpoint};
use crate::rng::{derive_rng, salt_for};
use crate::stats::{clopper_pearson, norm_quantile, t_quantile};
use crate::summary::SummaryMeasure;

/// Point estimator used for bias and MSE.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PointEstimator {
    PosteriorMean,
    PosteriorMedian,
}

impl PointEstimator {
    pub fn label(self) -> &'static str {
        match self {
            PointEstimator::PosteriorMean => "posterior_mean",
            PointEstimator::PosteriorMedian => "posterior_median",
        }
    }
}

/// One simulation cell: preset, target size, drift and knobs, method,
/// replicate counts, seed.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub id: String,
    pub preset: CaseStudyPreset,
    pub n_per_arm: u32,
    pub knobs: ScenarioKnobs,
    pub method: MethodSpec,
    pub estimator: PointEstimator,
    /// Replicates for success probability and coverage.
    pub n_reps_success: u32,
    /// Replicates (a prefix of the success replicates) for MSE, bias,
    /// precision and prior ESS.
    pub n_reps_estimation: u32,
    pub master_seed: u64,
}

impl Scenario {
    /// Stable salt derived from the scenario content (not its grid index).
    pub fn salt(&self) -> u64 {
        salt_for(&format!(
            "{}|{}|{:e}|{:e}|{:e}|{:?}|{:?}",
            self.preset.name,
            self.n_per_arm,
            self.knobs.drift,
            self.knobs.target_to_source_std_ratio,
            self.knobs.source_denominator_factor,
            self.method,
            self.estimator,
        ))
    }

    /// Source summary with the denominator knob applied.
    pub fn effective_source(&self) -> Result<SummaryMeasure> {
        if self.knobs.source_denominator_factor == 1.0 {
            Ok(self.preset.source)
        } else {
            apply_denominator_factor(&self.preset.source, self.knobs.source_denominator_factor)
        }
    }

    /// True target effect on the analysis scale.
    pub fn theta_true(&self) -> f64 {
        self.preset.source.estimate + self.knobs.drift
    }

    pub fn vague_prior(&self) -> VaguePrior {
        VaguePrior { mean: 0.0, sd: self.preset.vague_prior_sd }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_per_arm < 2 {
            return Err(Error::domain("scenario needs n_per_arm >= 2"));
        }
        if self.knobs.target_to_source_std_ratio != 1.0
            && self.preset.endpoint != Endpoint::Continuous
        {
            return Err(Error::domain(
                "the std-ratio knob applies to continuous endpoints only",
            ));
        }
        if !(self.knobs.target_to_source_std_ratio > 0.0) {
            return Err(Error::domain("std ratio must be positive"));
        }
        if !(self.knobs.source_denominator_factor > 0.0) {
            return Err(Error::domain("denominator factor must be positive"));
        }
        if self.knobs.source_denominator_factor != 1.0 && !self.preset.source.scale.is_ratio() {
            return Err(Error::domain(
                "the denominator knob applies to ratio-scale endpoints only",
            ));
        }
        self.method.validate()
    }
}

/// Point estimate with its 95% Monte-Carlo confidence interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricCi {
    pub value: f64,
    pub lo: f64,
    pub hi: f64,
}

impl MetricCi {
    pub fn nan() -> Self {
        MetricCi { value: f64::NAN, lo: f64::NAN, hi: f64::NAN }
    }
}

/// Estimated operating characteristics for one scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OCRecord {
    pub scenario_id: String,
    pub case_study: String,
    pub endpoint: Endpoint,
    pub n_per_arm: u32,
    pub drift: f64,
    pub theta_true: f64,
    pub theta0: f64,
    pub std_ratio: f64,
    pub denominator_factor: f64,
    pub method: MethodSpec,
    pub method_label: String,
    pub estimator: PointEstimator,
    pub n_reps: u32,
    pub n_reps_estimation: u32,
    pub n_failed: u32,
    pub n_resampled: u64,
    pub unreliable: bool,
    /// CrI position counts: covered + above + below = used replicates.
    pub n_covered: u64,
    pub n_above: u64,
    pub n_below: u64,
    pub success_prob: MetricCi,
    pub mse: MetricCi,
    pub bias: MetricCi,
    /// Mean half-width of the 95% credible interval.
    pub precision: MetricCi,
    pub coverage: MetricCi,
    pub ess_moment: MetricCi,
    pub ess_precision: MetricCi,
    pub ess_elir: MetricCi,
    pub mean_effective_gamma: Option<f64>,
    pub mean_posterior_weight: Option<f64>,
    pub pooled_fraction: Option<f64>,
    pub mc_seed: u64,
}

/// Everything recorded about one replicate.
struct RepOutcome {
    success: bool,
    estimate: f64,
    cri_lo: f64,
    cri_hi: f64,
    summary: Option<ReplicateSummary>,
    ess: Option<[f64; 3]>,
    effective_gamma: Option<f64>,
    posterior_weight: Option<f64>,
    pooled: Option<bool>,
    resamples: u32,
}

/// The generated data a frequentist comparator needs.
#[derive(Debug, Clone, Copy)]
enum ReplicateSummary {
    Normalish { estimate: f64, std_err: f64 },
    Counts { y_control: u32, y_treatment: u32, n: u32 },
}

/// Generate one replicate and analyze it with the scenario's method.
fn run_replicate(scenario: &Scenario, source: &SummaryMeasure, rep: u32) -> Result<RepOutcome> {
    let mut rng = derive_rng(scenario.master_seed, &[scenario.salt(), rep as u64]);
    let prior = scenario.vague_prior();
    let n = scenario.n_per_arm;
    let drift = scenario.knobs.drift;
    let mut resamples = 0u32;

    let (analysis, summary, ess_scale): (Analysis, ReplicateSummary, EssScale) =
        match scenario.preset.endpoint {
            Endpoint::Continuous => {
                let sd = source
                    .aux
                    .sampling_sd
                    .ok_or_else(|| Error::domain("continuous preset lacks sampling sd"))?
                    * scenario.knobs.target_to_source_std_ratio;
                let target =
                    datagen::generate_continuous(source.estimate, drift, sd, n, &mut rng)?;
                (
                    analyze(&scenario.method, source, &target, &prior)?,
                    ReplicateSummary::Normalish {
                        estimate: target.estimate,
                        std_err: target.std_err,
                    },
                    EssScale::Normal,
                )
            }
            Endpoint::BinaryLogOr => {
                let target = datagen::generate_binary_logor(source, drift, n, &mut rng)?;
                (
                    analyze(&scenario.method, source, &target, &prior)?,
                    ReplicateSummary::Normalish {
                        estimate: target.estimate,
                        std_err: target.std_err,
                    },
                    EssScale::Normal,
                )
            }
            Endpoint::TimeToEvent => {
                let lambda_c = source
                    .aux
                    .control_event_rate
                    .ok_or_else(|| Error::domain("tte preset lacks control rate"))?;
                let lambda_t = source
                    .aux
                    .treatment_event_rate
                    .ok_or_else(|| Error::domain("tte preset lacks treatment rate"))?;
                let dt = scenario
                    .preset
                    .followup_dt
                    .ok_or_else(|| Error::domain("tte preset lacks followup_dt"))?;
                let (target, r) =
                    datagen::generate_tte(lambda_c, lambda_t, drift, n, dt, &mut rng)?;
                resamples = r;
                (
                    analyze(&scenario.method, source, &target, &prior)?,
                    ReplicateSummary::Normalish {
                        estimate: target.estimate,
                        std_err: target.std_err,
                    },
                    EssScale::Normal,
                )
            }
            Endpoint::RecurrentEvent => {
                let mu_c = source
                    .aux
                    .control_event_rate
                    .ok_or_else(|| Error::domain("recurrent preset lacks control rate"))?;
                let mu_t = source
                    .aux
                    .treatment_event_rate
                    .ok_or_else(|| Error::domain("recurrent preset lacks treatment rate"))?;
                let k = source
                    .aux
                    .dispersion
                    .ok_or_else(|| Error::domain("recurrent preset lacks dispersion"))?;
                let (target, r) =
                    datagen::generate_recurrent(mu_c, mu_t, k, drift, n, &mut rng)?;
                resamples = r;
                (
                    analyze(&scenario.method, source, &target, &prior)?,
                    ReplicateSummary::Normalish {
                        estimate: target.estimate,
                        std_err: target.std_err,
                    },
                    EssScale::Normal,
                )
            }
            Endpoint::BinaryRateDiff => {
                let counts = generate_rate_diff_counts(source, drift, n, &mut rng)?;
                let prior_spec = match scenario.method {
                    MethodSpec::Separate => RateDiffPrior::no_borrowing(),
                    _ => {
                        let src = match scenario.preset.source_counts {
                            Some(c) => BinomialSource::Counts(c),
                            None => BinomialSource::Summary(*source),
                        };
                        RateDiffPrior::borrowing(scenario.method, src)
                    }
                };
                (
                    crate::binomial::binomial_posterior(&counts, &prior_spec)?,
                    ReplicateSummary::Counts {
                        y_control: counts.y_control,
                        y_treatment: counts.y_treatment,
                        n,
                    },
                    EssScale::BetaTransformed,
                )
            }
        };

    let rule = scenario.preset.decision;
    let posterior = &analysis.posterior;
    let success = posterior.decide_success(&rule);
    let (cri_lo, cri_hi) = posterior.credible_interval_95()?;
    let estimate = match scenario.estimator {
        PointEstimator::PosteriorMean => posterior.mean(),
        PointEstimator::PosteriorMedian => posterior.quantile(0.5)?,
    };
    let ess = if rep < scenario.n_reps_estimation {
        let reference_sd = match summary {
            ReplicateSummary::Normalish { std_err, .. } => std_err * (n as f64).sqrt(),
            ReplicateSummary::Counts { .. } => 1.0,
        };
        let r = ess_report(posterior, reference_sd, ess_scale, n)?;
        Some([r.moment, r.precision, r.elir])
    } else {
        None
    };
    Ok(RepOutcome {
        success,
        estimate,
        cri_lo,
        cri_hi,
        summary: Some(summary),
        ess,
        effective_gamma: analysis.diagnostics.effective_gamma,
        posterior_weight: analysis.diagnostics.posterior_weight,
        pooled: analysis.diagnostics.pooled_flag,
        resamples,
    })
}

/// Number of bootstrap resamples for estimation-metric CIs.
pub const BOOTSTRAP_DRAWS: u32 = 2000;

/// Confidence-interval request for `ci_for_metric`.
pub enum MetricKind<'a> {
    /// Exact Clopper-Pearson interval for a binomial proportion.
    Proportion { successes: u64, n: u64 },
    /// Seeded percentile bootstrap for the mean of a value vector.
    MeanBootstrap { values: &'a [f64], seed: u64 },
}

/// 95% Monte-Carlo confidence interval for one metric.
pub fn ci_for_metric(kind: &MetricKind) -> (f64, f64) {
    match kind {
        MetricKind::Proportion { successes, n } => clopper_pearson(*successes, *n, 0.95),
        MetricKind::MeanBootstrap { values, seed } => bootstrap_mean_ci(values, *seed),
    }
}

/// Percentile bootstrap CI of the mean (B = 2000, seeded).
pub fn bootstrap_mean_ci(values: &[f64], seed: u64) -> (f64, f64) {
    assert!(values.len() >= 2, "bootstrap needs at least two values");
    use rand::Rng;
    let mut rng = derive_rng(seed, &[salt_for("bootstrap")]);
    let n = values.len();
    let mut means: Vec<f64> = Vec::with_capacity(BOOTSTRAP_DRAWS as usize);
    for _ in 0..BOOTSTRAP_DRAWS {
        let mut acc = 0.0;
        for _ in 0..n {
            acc += values[rng.gen_range(0..n)];
        }
        means.push(acc / n as f64);
    }
    means.sort_by(|a, b| a.partial_cmp(b).expect("finite means"));
    (percentile_sorted(&means, 0.025), percentile_sorted(&means, 0.975))
}

fn percentile_sorted(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    let frac = h - lo as f64;
    sorted[lo] * (1.0 - frac) + sorted[hi] * frac
}

/// Estimate all operating characteristics for one scenario.
pub fn estimate_oc(scenario: &Scenario) -> Result<OCRecord> {
    scenario.validate()?;
    if scenario.n_reps_success < 100 {
        return Err(Error::domain("estimate_oc needs n_reps >= 100"));
    }
    if scenario.n_reps_estimation > scenario.n_reps_success {
        return Err(Error::domain(
            "estimation replicate count cannot exceed the success count",
        ));
    }
    let source = scenario.effective_source()?;
    let outcomes: Vec<Result<RepOutcome>> = (0..scenario.n_reps_success)
        .into_par_iter()
        .map(|rep| run_replicate(scenario, &source, rep))
        .collect();

    // Ordered, sequential aggregation for bit-reproducibility.
    let theta_true = scenario.theta_true();
    let mut successes = 0u64;
    let mut covered = 0u64;
    let mut above = 0u64;
    let mut below = 0u64;
    let mut n_failed = 0u32;
    let mut n_resampled = 0u64;
    let mut n_used = 0u64;
    let mut estimates: Vec<f64> = Vec::new();
    let mut sq_errors: Vec<f64> = Vec::new();
    let mut half_widths: Vec<f64> = Vec::new();
    let mut ess_vals: [Vec<f64>; 3] = [Vec::new(), Vec::new(), Vec::new()];
    let mut gamma_sum = 0.0;
    let mut gamma_n = 0u64;
    let mut weight_sum = 0.0;
    let mut weight_n = 0u64;
    let mut pooled_sum = 0u64;
    let mut pooled_n = 0u64;

    for (rep, out) in outcomes.into_iter().enumerate() {
        let out = match out {
            Ok(o) => o,
            Err(_) => {
                n_failed += 1;
                continue;
            }
        };
        n_used += 1;
        n_resampled += out.resamples as u64;
        if out.success {
            successes += 1;
        }
        if out.cri_lo > theta_true {
            above += 1;
        } else if out.cri_hi < theta_true {
            below += 1;
        } else {
            covered += 1;
        }
        if (rep as u32) < scenario.n_reps_estimation {
            let err = out.estimate - theta_true;
            estimates.push(out.estimate);
            sq_errors.push(err * err);
            half_widths.push(0.5 * (out.cri_hi - out.cri_lo));
            if let Some(e) = out.ess {
                for (store, v) in ess_vals.iter_mut().zip(e) {
                    store.push(v);
                }
            }
            if let Some(g) = out.effective_gamma {
                gamma_sum += g;
                gamma_n += 1;
            }
            if let Some(w) = out.posterior_weight {
                weight_sum += w;
                weight_n += 1;
            }
            if let Some(p) = out.pooled {
                pooled_n += 1;
                if p {
                    pooled_sum += 1;
                }
            }
        }
    }
    if n_used == 0 {
        return Err(Error::Numerical("every replicate failed".into()));
    }

    let prop = |count: u64| -> MetricCi {
        let (lo, hi) = clopper_pearson(count, n_used, 0.95);
        MetricCi { value: count as f64 / n_used as f64, lo, hi }
    };
    let boot = |values: &[f64], tag: &str, offset: f64| -> MetricCi {
        if values.len() < 2 {
            return MetricCi::nan();
        }
        let value = crate::stats::mean(values) + offset;
        let (lo, hi) = bootstrap_mean_ci(
            values,
            scenario.master_seed ^ scenario.salt() ^ salt_for(tag),
        );
        MetricCi { value, lo: lo + offset, hi: hi + offset }
    };

    Ok(OCRecord {
        scenario_id: scenario.id.clone(),
        case_study: scenario.preset.name.clone(),
        endpoint: scenario.preset.endpoint,
        n_per_arm: scenario.n_per_arm,
        drift: scenario.knobs.drift,
        theta_true,
        theta0: scenario.preset.decision.theta0,
        std_ratio: scenario.knobs.target_to_source_std_ratio,
        denominator_factor: scenario.knobs.source_denominator_factor,
        method: scenario.method,
        method_label: scenario.method.label(),
        estimator: scenario.estimator,
        n_reps: scenario.n_reps_success,
        n_reps_estimation: scenario.n_reps_estimation,
        n_failed,
        n_resampled,
        unreliable: (n_failed as f64) > 0.01 * scenario.n_reps_success as f64,
        n_covered: covered,
        n_above: above,
        n_below: below,
        success_prob: prop(successes),
        mse: boot(&sq_errors, "mse", 0.0),
        bias: boot(&estimates, "bias", -theta_true),
        precision: boot(&half_widths, "precision", 0.0),
        coverage: prop(covered),
        ess_moment: boot(&ess_vals[0], "ess_moment", 0.0),
        ess_precision: boot(&ess_vals[1], "ess_precision", 0.0),
        ess_elir: boot(&ess_vals[2], "ess_elir", 0.0),
        mean_effective_gamma: (gamma_n > 0).then(|| gamma_sum / gamma_n as f64),
        mean_posterior_weight: (weight_n > 0).then(|| weight_sum / weight_n as f64),
        pooled_fraction: (pooled_n > 0).then(|| pooled_sum as f64 / pooled_n as f64),
        mc_seed: scenario.master_seed,
    })
}

// ---------------------------------------------------------------------------
// Frequentist comparators
// ---------------------------------------------------------------------------

/// Frequentist test used for power comparisons.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrequentistComparator {
    pub test: ComparatorTest,
    pub alpha: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ComparatorTest {
    /// One-sided test on estimate / SE. Student critical values for the
    /// continuous endpoint (empirical SE of a normal sample), normal
    /// critical values otherwise; the time-to-event variant uses the
    /// deterministic SE implied by the true rates.
    TTest,
    /// Difference of proportions via Cohen's h: z = h sqrt(n/2).
    CohensH,
}

impl FrequentistComparator {
    pub fn new(test: ComparatorTest, alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::domain(format!("alpha = {alpha} outside (0, 1)")));
        }
        Ok(FrequentistComparator { test, alpha })
    }
}

/// Apply the comparator to one replicate summary.
fn comparator_rejects(
    comparator: &FrequentistComparator,
    scenario: &Scenario,
    source: &SummaryMeasure,
    summary: &ReplicateSummary,
) -> Result<bool> {
    let rule = scenario.preset.decision;
    let alpha = comparator.alpha;
    let stat = match (comparator.test, summary) {
        (ComparatorTest::TTest, ReplicateSummary::Normalish { estimate, std_err }) => {
            let se = if scenario.preset.endpoint == Endpoint::TimeToEvent {
                // The paper's convention: deterministic SE from the true rates.
                let lambda_c = source.aux.control_event_rate.expect("validated");
                let lambda_t = source.aux.treatment_event_rate.expect("validated")
                    * scenario.knobs.drift.exp();
                let dt = scenario.preset.followup_dt.expect("validated");
                let n = scenario.n_per_arm as f64;
                (1.0 / (lambda_c * dt * n) + 1.0 / (lambda_t * dt * n)).sqrt()
            } else {
                *std_err
            };
            (estimate - rule.theta0) / se
        }
        (ComparatorTest::CohensH, ReplicateSummary::Counts { y_control, y_treatment, n }) => {
            let p_c = *y_control as f64 / *n as f64;
            let p_t = *y_treatment as f64 / *n as f64;
            let h = 2.0 * p_t.sqrt().asin() - 2.0 * p_c.sqrt().asin();
            h * (*n as f64 / 2.0).sqrt()
        }
        _ => {
            return Err(Error::domain(
                "comparator test does not match the endpoint's summary kind",
            ));
        }
    };
    let crit = match (comparator.test, scenario.preset.endpoint) {
        (ComparatorTest::TTest, Endpoint::Continuous) => {
            t_quantile(1.0 - alpha, (scenario.n_per_arm - 1) as f64)
        }
        _ => norm_quantile(1.0 - alpha),
    };
    Ok(match rule.direction {
        crate::posterior::Direction::GreaterIsEffective => stat > crit,
        crate::posterior::Direction::LessIsEffective => stat < -crit,
    })
}

/// Generate only the data summary for a replicate (no Bayesian analysis).
fn generate_summary_only(
    scenario: &Scenario,
    source: &SummaryMeasure,
    rep: u32,
) -> Result<ReplicateSummary> {
    let mut rng = derive_rng(scenario.master_seed, &[scenario.salt(), rep as u64]);
    let n = scenario.n_per_arm;
    let drift = scenario.knobs.drift;
    Ok(match scenario.preset.endpoint {
        Endpoint::Continuous => {
            let sd = source
                .aux
                .sampling_sd
                .ok_or_else(|| Error::domain("continuous preset lacks sampling sd"))?
                * scenario.knobs.target_to_source_std_ratio;
            let t = datagen::generate_continuous(source.estimate, drift, sd, n, &mut rng)?;
            ReplicateSummary::Normalish { estimate: t.estimate, std_err: t.std_err }
        }
        Endpoint::BinaryLogOr => {
            let t = datagen::generate_binary_logor(source, drift, n, &mut rng)?;
            ReplicateSummary::Normalish { estimate: t.estimate, std_err: t.std_err }
        }
        Endpoint::TimeToEvent => {
            let (t, _) = datagen::generate_tte(
                source.aux.control_event_rate.expect("validated"),
                source.aux.treatment_event_rate.expect("validated"),
                drift,
                n,
                scenario.preset.followup_dt.expect("validated"),
                &mut rng,
            )?;
            ReplicateSummary::Normalish { estimate: t.estimate, std_err: t.std_err }
        }
        Endpoint::RecurrentEvent => {
            let (t, _) = datagen::generate_recurrent(
                source.aux.control_event_rate.expect("validated"),
                source.aux.treatment_event_rate.expect("validated"),
                source.aux.dispersion.expect("validated"),
                drift,
                n,
                &mut rng,
            )?;
            ReplicateSummary::Normalish { estimate: t.estimate, std_err: t.std_err }
        }
        Endpoint::BinaryRateDiff => {
            let c = generate_rate_diff_counts(source, drift, n, &mut rng)?;
            ReplicateSummary::Counts { y_control: c.y_control, y_treatment: c.y_treatment, n }
        }
    })
}

/// Simulated power of a frequentist comparator on a scenario's generator.
pub fn frequentist_power(
    comparator: &FrequentistComparator,
    scenario: &Scenario,
    n_reps: u32,
) -> Result<MetricCi> {
    scenario.validate()?;
    let source = scenario.effective_source()?;
    let rejects: Vec<Result<bool>> = (0..n_reps)
        .into_par_iter()
        .map(|rep| {
            let s = generate_summary_only(scenario, &source, rep)?;
            comparator_rejects(comparator, scenario, &source, &s)
        })
        .collect();
    let mut count = 0u64;
    let mut used = 0u64;
    for r in rejects {
        if let Ok(b) = r {
            used += 1;
            if b {
                count += 1;
            }
        }
    }
    if used == 0 {
        return Err(Error::Numerical("every comparator replicate failed".into()));
    }
    let (lo, hi) = clopper_pearson(count, used, 0.95);
    Ok(MetricCi { value: count as f64 / used as f64, lo, hi })
}

/// Result of the equivalent-type-1-error comparison.
#[derive(Debug, Clone)]
pub struct EquivalentTieComparison {
    /// Method type 1 error at the null scenario.
    pub alpha_b: MetricCi,
    /// Method power at the alternative scenario.
    pub power_method: MetricCi,
    /// Comparator power at significance level alpha_b, on the same
    /// replicate stream; `None` when alpha_b was zero.
    pub power_freq_at_alpha_b: Option<MetricCi>,
    /// power_method - power_freq, with its combined Monte-Carlo SE
    /// (replicate-level difference variance plus the alpha_b propagation).
    pub diff: f64,
    pub combined_se: f64,
}

/// Compare method power against a frequentist comparator at the method's
/// own type 1 error rate.
///
/// `null_scenario` must sit at the decision boundary (theta_true = theta0);
/// the alternative scenario supplies the power point. Method and comparator
/// decisions are evaluated on the same generated replicates.
pub fn compare_at_equivalent_tie(
    null_scenario: &Scenario,
    alt_scenario: &Scenario,
    test: ComparatorTest,
    n_reps: u32,
) -> Result<EquivalentTieComparison> {
    if (null_scenario.theta_true() - null_scenario.preset.decision.theta0).abs() > 1e-9 {
        return Err(Error::domain(
            "the null scenario must satisfy theta_true = theta0",
        ));
    }
    let mut null = null_scenario.clone();
    null.n_reps_success = n_reps;
    null.n_reps_estimation = 0;
    let null_record = estimate_oc(&null)?;
    let alpha_b = null_record.success_prob;

    let mut alt = alt_scenario.clone();
    alt.n_reps_success = n_reps;
    alt.n_reps_estimation = 0;
    let source = alt.effective_source()?;

    if alpha_b.value == 0.0 {
        let alt_record = estimate_oc(&alt)?;
        return Ok(EquivalentTieComparison {
            alpha_b,
            power_method: alt_record.success_prob,
            power_freq_at_alpha_b: None,
            diff: f64::NAN,
            combined_se: f64::NAN,
        });
    }
    let comparator = FrequentistComparator::new(test, alpha_b.value)?;
    // SE of alpha_b for the propagation term.
    let se_alpha =
        (alpha_b.value * (1.0 - alpha_b.value) / n_reps as f64).sqrt().max(1e-12);
    let slope_delta = 2.0 * se_alpha;
    let comp_lo = FrequentistComparator::new(test, (alpha_b.value - slope_delta).max(1e-9))?;
    let comp_hi = FrequentistComparator::new(test, (alpha_b.value + slope_delta).min(1.0 - 1e-9))?;

    let alt_ref = &alt;
    let per_rep: Vec<Result<(bool, bool, bool, bool)>> = (0..n_reps)
        .into_par_iter()
        .map(|rep| {
            let out = run_replicate(alt_ref, &source, rep)?;
            let summary = out.summary.expect("replicate summary present");
            let freq = comparator_rejects(&comparator, alt_ref, &source, &summary)?;
            let freq_lo = comparator_rejects(&comp_lo, alt_ref, &source, &summary)?;
            let freq_hi = comparator_rejects(&comp_hi, alt_ref, &source, &summary)?;
            Ok((out.success, freq, freq_lo, freq_hi))
        })
        .collect();

    let mut n_used = 0u64;
    let mut method_count = 0u64;
    let mut freq_count = 0u64;
    let mut freq_lo_count = 0u64;
    let mut freq_hi_count = 0u64;
    let mut diff_sum = 0.0f64;
    let mut diff_sq = 0.0f64;
    for r in per_rep {
        let (m, f, flo, fhi) = match r {
            Ok(v) => v,
            Err(_) => continue,
        };
        n_used += 1;
        method_count += m as u64;
        freq_count += f as u64;
        freq_lo_count += flo as u64;
        freq_hi_count += fhi as u64;
        let d = (m as i64 - f as i64) as f64;
        diff_sum += d;
        diff_sq += d * d;
    }
    if n_used == 0 {
        return Err(Error::Numerical("every comparison replicate failed".into()));
    }
    let nf = n_used as f64;
    let power_method = {
        let (lo, hi) = clopper_pearson(method_count, n_used, 0.95);
        MetricCi { value: method_count as f64 / nf, lo, hi }
    };
    let power_freq = {
        let (lo, hi) = clopper_pearson(freq_count, n_used, 0.95);
        MetricCi { value: freq_count as f64 / nf, lo, hi }
    };
    let diff = diff_sum / nf;
    let var_diff = (diff_sq / nf - diff * diff).max(0.0) / nf;
    // Sensitivity of the comparator power to the alpha_b estimate.
    let slope = (freq_hi_count as f64 - freq_lo_count as f64) / nf / (2.0 * slope_delta);
    let combined_se = (var_diff + (slope * se_alpha).powi(2)).sqrt();
    Ok(EquivalentTieComparison {
        alpha_b,
        power_method,
        power_freq_at_alpha_b: Some(power_freq),
        diff,
        combined_se,
    })
}

/// Empirical ratio sd(sample q1-quantile) / sd(sample q2-quantile) for
/// standard-normal samples of size `n` (type-7 sample quantiles).
pub fn quantile_se_ratio<R: rand::Rng>(
    n: usize,
    q1: f64,
    q2: f64,
    n_outer: usize,
    rng: &mut R,
) -> f64 {
    use rand_distr::{Distribution, StandardNormal};
    assert!(n >= 2 && n_outer >= 2);
    let mut q1s = Vec::with_capacity(n_outer);
    let mut q2s = Vec::with_capacity(n_outer);
    let mut sample = vec![0.0f64; n];
    for _ in 0..n_outer {
        for s in sample.iter_mut() {
            *s = StandardNormal.sample(rng);
        }
        sample.sort_by(|a, b| a.partial_cmp(b).expect("finite draws"));
        q1s.push(percentile_sorted(&sample, q1));
        q2s.push(percentile_sorted(&sample, q2));
    }
    let (_, sd1) = crate::stats::mean_sd(&q1s);
    let (_, sd2) = crate::stats::mean_sd(&q2s);
    sd1 / sd2
}

/// Asymptotic counterpart of [`quantile_se_ratio`] for the standard normal:
/// sqrt(q1(1-q1)/(q2(1-q2))) * f(F^-1(q2)) / f(F^-1(q1)).
pub fn quantile_se_ratio_asymptotic(q1: f64, q2: f64) -> f64 {
    let f1 = crate::stats::norm_pdf(norm_quantile(q1));
    let f2 = crate::stats::norm_pdf(norm_quantile(q2));
    (q1 * (1.0 - q1) / (q2 * (1.0 - q2))).sqrt() * f2 / f1
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets::{builtin_presets, find_preset};

    fn scenario(preset_name: &str, n: u32, drift: f64, method: MethodSpec) -> Scenario {
        let presets = builtin_presets();
        let preset = find_preset(&presets, preset_name).unwrap().clone();
        Scenario {
            id: "test".into(),
            preset,
            n_per_arm: n,
            knobs: ScenarioKnobs { drift, ..Default::default() },
            method,
            estimator: PointEstimator::PosteriorMean,
            n_reps_success: 400,
            n_reps_estimation: 200,
            master_seed: 20240811,
        }
    }

    #[test]
    fn estimate_oc_is_reproducible_across_thread_counts() {
        let sc = scenario("dapagliflozin", 33, 0.0, MethodSpec::ConditionalPp { gamma: 0.5 });
        let pool1 = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let pool8 = rayon::ThreadPoolBuilder::new().num_threads(8).build().unwrap();
        let r1 = pool1.install(|| estimate_oc(&sc)).unwrap();
        let r8 = pool8.install(|| estimate_oc(&sc)).unwrap();
        assert_eq!(r1, r8);
    }

    #[test]
    fn coverage_bookkeeping_sums_to_one() {
        let sc = scenario("dapagliflozin", 33, -0.18, MethodSpec::Pooling);
        let r = estimate_oc(&sc).unwrap();
        let used = (r.n_reps - r.n_failed) as u64;
        assert_eq!(r.n_covered + r.n_above + r.n_below, used);
        assert!(r.coverage.value >= 0.0 && r.coverage.value <= 1.0);
        assert!(r.success_prob.lo <= r.success_prob.value);
        assert!(r.success_prob.hi >= r.success_prob.value);
        assert_eq!(r.n_failed, 0);
    }

    #[test]
    fn pooling_is_sharper_than_separate_at_zero_drift() {
        let sep = estimate_oc(&scenario("dapagliflozin", 66, 0.0, MethodSpec::Separate)).unwrap();
        let pool = estimate_oc(&scenario("dapagliflozin", 66, 0.0, MethodSpec::Pooling)).unwrap();
        assert!(
            pool.precision.value < sep.precision.value,
            "pooled half-width {} vs separate {}",
            pool.precision.value,
            sep.precision.value
        );
    }

    #[test]
    fn estimate_oc_rejects_tiny_replicate_counts() {
        let mut sc = scenario("dapagliflozin", 33, 0.0, MethodSpec::Separate);
        sc.n_reps_success = 50;
        sc.n_reps_estimation = 10;
        assert!(estimate_oc(&sc).is_err());
    }

    #[test]
    fn bootstrap_ci_collapses_for_constant_values() {
        let values = vec![0.7; 400];
        let (lo, hi) = bootstrap_mean_ci(&values, 99);
        assert_eq!(lo, hi, "interval must collapse to a point");
        assert!((lo - 0.7).abs() < 1e-12);
    }

    #[test]
    fn bootstrap_ci_contains_the_point_estimate() {
        // Property over deterministic pseudo-random fixtures.
        use rand::Rng;
        let mut contained = 0;
        let total = 200;
        for i in 0..total {
            let mut rng = derive_rng(1000 + i, &[7]);
            let values: Vec<f64> = (0..120).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let m = crate::stats::mean(&values);
            let (lo, hi) = bootstrap_mean_ci(&values, 5000 + i);
            if lo <= m && m <= hi {
                contained += 1;
            }
        }
        assert!(contained as f64 >= 0.99 * total as f64, "contained {contained}/{total}");
    }

    #[test]
    fn clopper_pearson_dispatch() {
        let (lo, hi) = ci_for_metric(&MetricKind::Proportion { successes: 250, n: 10_000 });
        assert!(lo < 0.025 && hi > 0.025);
    }

    #[test]
    fn frequentist_power_size_and_monotonicity() {
        // At theta_true = theta0 the test's size equals its level.
        let presets = builtin_presets();
        let preset = find_preset(&presets, "dapagliflozin").unwrap().clone();
        let null_drift = -preset.source.estimate;
        let sc = scenario("dapagliflozin", 66, null_drift, MethodSpec::Separate);
        let mut last = 0.0;
        for alpha in [0.01, 0.025, 0.05, 0.1] {
            let c = FrequentistComparator::new(ComparatorTest::TTest, alpha).unwrap();
            let p = frequentist_power(&c, &sc, 4000).unwrap();
            assert!(p.value >= last, "power not monotone in alpha");
            last = p.value;
            // Size within the exact binomial CI of the level.
            assert!(p.lo <= alpha && alpha <= p.hi + 0.01, "size {} at level {alpha}", p.value);
        }
    }

    #[test]
    fn frequentist_power_matches_normal_approximation() {
        // Continuous scenario with effect 0.5 sd at n = 58: compare with the
        // closed-form normal-approximation power.
        let presets = builtin_presets();
        let preset = find_preset(&presets, "dapagliflozin").unwrap().clone();
        let sigma = preset.source.aux.sampling_sd.unwrap();
        // Drift such that theta_true = 0.5 sigma.
        let drift = 0.5 * sigma - preset.source.estimate;
        let sc = scenario("dapagliflozin", 58, drift, MethodSpec::Separate);
        let c = FrequentistComparator::new(ComparatorTest::TTest, 0.025).unwrap();
        let p = frequentist_power(&c, &sc, 8000).unwrap();
        let ncp = 0.5 * (58f64).sqrt();
        let approx = crate::stats::norm_cdf(ncp - norm_quantile(0.975));
        let mc_sd = (p.value * (1.0 - p.value) / 8000.0).sqrt();
        assert!(
            (p.value - approx).abs() < 2.0 * mc_sd + 0.01,
            "power {} vs approx {approx}",
            p.value
        );
    }

    #[test]
    fn equivalent_tie_comparison_runs_on_a_small_grid() {
        let presets = builtin_presets();
        let preset = find_preset(&presets, "dapagliflozin").unwrap().clone();
        let null_drift = -preset.source.estimate;
        let null = scenario(
            "dapagliflozin",
            33,
            null_drift,
            MethodSpec::ConditionalPp { gamma: 0.25 },
        );
        let alt = scenario("dapagliflozin", 33, 0.0, MethodSpec::ConditionalPp { gamma: 0.25 });
        let cmp = compare_at_equivalent_tie(&null, &alt, ComparatorTest::TTest, 2000).unwrap();
        assert!(cmp.alpha_b.value > 0.0);
        let freq = cmp.power_freq_at_alpha_b.unwrap();
        // Affine borrowing: power curves coincide at equivalent TIE.
        assert!(
            (cmp.power_method.value - freq.value).abs() < 4.0 * cmp.combined_se.max(0.005),
            "method {} vs freq {}",
            cmp.power_method.value,
            freq.value
        );
    }

    #[test]
    fn equivalent_tie_rejects_misplaced_null() {
        let sc = scenario("dapagliflozin", 33, 0.0, MethodSpec::Separate);
        assert!(compare_at_equivalent_tie(&sc, &sc, ComparatorTest::TTest, 500).is_err());
    }

    #[test]
    fn quantile_se_ratio_identity_and_formula() {
        let mut rng = derive_rng(5, &[1]);
        let r = quantile_se_ratio(200, 0.8, 0.8, 400, &mut rng);
        assert!((r - 1.0).abs() < 1e-12);
        let formula = quantile_se_ratio_asymptotic(0.5, 0.975);
        assert!((formula - 0.47).abs() < 0.01, "formula {formula}");
    }
}
