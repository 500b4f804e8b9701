//! Case-study presets: parsing, derivation, and the built-in catalog.
//!
//! Presets ship as a human-readable TOML file (see `data/presets.toml`)
//! whose quantities stay on the scale they are usually quoted on; the
//! loader converts ratios to the log scale, recovers standard errors from
//! confidence intervals, pools multi-trial sources by inverse-variance
//! weighting, and derives the generator-side rates.

use serde::{Deserialize, Serialize};

use crate::binomial::BinomialArmData;
use crate::error::{Error, Result};
use crate::posterior::{DecisionRule, Direction};
use crate::summary::{log_scale_se_from_ratio_ci95, pool_inverse_variance, EffectScale, SummaryMeasure};

/// Endpoint family of a case study.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Endpoint {
    Continuous,
    BinaryLogOr,
    BinaryRateDiff,
    TimeToEvent,
    RecurrentEvent,
}

impl Endpoint {
    pub fn label(self) -> &'static str {
        match self {
            Endpoint::Continuous => "continuous",
            Endpoint::BinaryLogOr => "binary_log_or",
            Endpoint::BinaryRateDiff => "binary_rate_diff",
            Endpoint::TimeToEvent => "time_to_event",
            Endpoint::RecurrentEvent => "recurrent_event",
        }
    }

    pub fn scale(self) -> EffectScale {
        match self {
            Endpoint::Continuous => EffectScale::MeanDiff,
            Endpoint::BinaryLogOr => EffectScale::LogOr,
            Endpoint::BinaryRateDiff => EffectScale::RateDiff,
            Endpoint::TimeToEvent => EffectScale::LogHr,
            Endpoint::RecurrentEvent => EffectScale::LogRr,
        }
    }
}

/// A fully derived case study.
#[derive(Debug, Clone, PartialEq)]
pub struct CaseStudyPreset {
    pub name: String,
    pub endpoint: Endpoint,
    pub source: SummaryMeasure,
    /// Source responder counts, present for the exact-binomial endpoint.
    pub source_counts: Option<BinomialArmData>,
    pub decision: DecisionRule,
    /// Target sample sizes per arm.
    pub sample_size_grid: Vec<u32>,
    /// Maximum follow-up time (time-to-event only).
    pub followup_dt: Option<f64>,
    /// SD of the vague initial prior used by the analysis methods.
    pub vague_prior_sd: f64,
}

// --- raw file schema ---------------------------------------------------

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFile {
    schema_version: u32,
    #[serde(default, rename = "preset")]
    presets: Vec<RawPreset>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPreset {
    name: String,
    endpoint: Endpoint,
    direction: RawDirection,
    #[serde(default)]
    theta0: f64,
    #[serde(default = "default_rho")]
    rho: f64,
    sample_sizes: Vec<u32>,
    #[serde(default)]
    vague_prior_sd: Option<f64>,
    #[serde(default)]
    followup_dt: Option<f64>,
    #[serde(default)]
    control_event_rate: Option<f64>,
    #[serde(default)]
    source: Option<RawSource>,
    #[serde(default)]
    source_trials: Vec<RawSourceTrial>,
}

fn default_rho() -> f64 {
    0.975
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(rename_all = "snake_case")]
enum RawDirection {
    Greater,
    Less,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSource {
    estimate: Option<f64>,
    std_err: Option<f64>,
    ci95: Option<[f64; 2]>,
    odds_ratio: Option<f64>,
    control_rate: Option<f64>,
    control_event_rate: Option<f64>,
    dispersion: Option<f64>,
    y_control: Option<u32>,
    y_treatment: Option<u32>,
    n_control: u32,
    n_treatment: u32,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSourceTrial {
    hazard_ratio: f64,
    ci95: [f64; 2],
    n_control: u32,
    n_treatment: u32,
}

/// Parse a preset file.
pub fn parse_presets_str(text: &str) -> Result<Vec<CaseStudyPreset>> {
    let raw: RawFile = toml::from_str(text).map_err(|e| Error::Preset(e.to_string()))?;
    if raw.schema_version != 1 {
        return Err(Error::Preset(format!(
            "unsupported preset schema version {}",
            raw.schema_version
        )));
    }
    raw.presets.into_iter().map(derive_preset).collect()
}

/// Built-in presets shipped with the crate.
pub fn builtin_presets() -> Vec<CaseStudyPreset> {
    parse_presets_str(include_str!("../data/presets.toml"))
        .expect("built-in preset file is valid")
}

/// Look up a preset by name.
pub fn find_preset<'a>(presets: &'a [CaseStudyPreset], name: &str) -> Result<&'a CaseStudyPreset> {
    presets
        .iter()
        .find(|p| p.name == name)
        .ok_or_else(|| Error::Preset(format!("unknown preset '{name}'")))
}

fn derive_preset(raw: RawPreset) -> Result<CaseStudyPreset> {
    let ctx = |msg: String| Error::Preset(format!("preset '{}': {}", raw.name, msg));
    if raw.sample_sizes.is_empty() || raw.sample_sizes.iter().any(|&n| n < 2) {
        return Err(ctx("sample_sizes must be non-empty with every entry >= 2".into()));
    }
    let direction = match raw.direction {
        RawDirection::Greater => Direction::GreaterIsEffective,
        RawDirection::Less => Direction::LessIsEffective,
    };
    let decision = DecisionRule::new(raw.theta0, direction, raw.rho)
        .map_err(|e| ctx(e.to_string()))?;
    let vague_prior_sd = raw.vague_prior_sd.unwrap_or_else(|| 1000f64.sqrt());
    if !(vague_prior_sd > 0.0) {
        return Err(ctx("vague_prior_sd must be positive".into()));
    }

    let mut source_counts = None;
    let source = match raw.endpoint {
        Endpoint::Continuous => {
            let s = raw.source.as_ref().ok_or_else(|| ctx("missing [preset.source]".into()))?;
            let estimate = s.estimate.ok_or_else(|| ctx("continuous source needs estimate".into()))?;
            let std_err = resolve_se(s, false).map_err(|e| ctx(e.to_string()))?;
            let mut m = SummaryMeasure::new(
                estimate,
                std_err,
                EffectScale::MeanDiff,
                s.n_control,
                s.n_treatment,
            )
            .map_err(|e| ctx(e.to_string()))?;
            // Effect-scale sampling SD implied by the SE at the source size.
            m.aux.sampling_sd = Some(std_err * m.n_per_arm().sqrt());
            m
        }
        Endpoint::BinaryLogOr => {
            let s = raw.source.as_ref().ok_or_else(|| ctx("missing [preset.source]".into()))?;
            let or = s
                .odds_ratio
                .ok_or_else(|| ctx("binary_log_or source needs odds_ratio".into()))?;
            if !(or > 0.0) {
                return Err(ctx("odds_ratio must be positive".into()));
            }
            let std_err = resolve_se(s, true).map_err(|e| ctx(e.to_string()))?;
            let p_c = s
                .control_rate
                .ok_or_else(|| ctx("binary_log_or source needs control_rate".into()))?;
            if !(p_c > 0.0 && p_c < 1.0) {
                return Err(ctx("control_rate must lie in (0, 1)".into()));
            }
            let mut m = SummaryMeasure::new(
                or.ln(),
                std_err,
                EffectScale::LogOr,
                s.n_control,
                s.n_treatment,
            )
            .map_err(|e| ctx(e.to_string()))?;
            m.aux.control_rate = Some(p_c);
            m
        }
        Endpoint::BinaryRateDiff => {
            let s = raw.source.as_ref().ok_or_else(|| ctx("missing [preset.source]".into()))?;
            let y_c = s
                .y_control
                .ok_or_else(|| ctx("binary_rate_diff source needs y_control".into()))?;
            let y_t = s
                .y_treatment
                .ok_or_else(|| ctx("binary_rate_diff source needs y_treatment".into()))?;
            let counts = BinomialArmData::new(y_c, y_t, s.n_control, s.n_treatment)
                .map_err(|e| ctx(e.to_string()))?;
            source_counts = Some(counts);
            counts.to_rate_diff_summary().map_err(|e| ctx(e.to_string()))?
        }
        Endpoint::TimeToEvent => {
            if raw.source_trials.is_empty() {
                return Err(ctx("time_to_event needs at least one [[preset.source_trials]]".into()));
            }
            let trials: Vec<SummaryMeasure> = raw
                .source_trials
                .iter()
                .map(|t| {
                    if !(t.hazard_ratio > 0.0) {
                        return Err(ctx("hazard_ratio must be positive".into()));
                    }
                    let se = log_scale_se_from_ratio_ci95(t.ci95[0], t.ci95[1])
                        .map_err(|e| ctx(e.to_string()))?;
                    SummaryMeasure::new(
                        t.hazard_ratio.ln(),
                        se,
                        EffectScale::LogHr,
                        t.n_control,
                        t.n_treatment,
                    )
                    .map_err(|e| ctx(e.to_string()))
                })
                .collect::<Result<_>>()?;
            let mut pooled = pool_inverse_variance(&trials).map_err(|e| ctx(e.to_string()))?;
            let lambda_c = raw
                .control_event_rate
                .ok_or_else(|| ctx("time_to_event needs control_event_rate".into()))?;
            if !(lambda_c > 0.0) {
                return Err(ctx("control_event_rate must be positive".into()));
            }
            if raw.followup_dt.is_none() {
                return Err(ctx("time_to_event needs followup_dt".into()));
            }
            pooled.aux.control_event_rate = Some(lambda_c);
            pooled.aux.treatment_event_rate = Some(lambda_c * pooled.estimate.exp());
            pooled
        }
        Endpoint::RecurrentEvent => {
            let s = raw.source.as_ref().ok_or_else(|| ctx("missing [preset.source]".into()))?;
            let estimate =
                s.estimate.ok_or_else(|| ctx("recurrent source needs estimate".into()))?;
            let std_err = resolve_se(s, false).map_err(|e| ctx(e.to_string()))?;
            let mu_c = s
                .control_event_rate
                .ok_or_else(|| ctx("recurrent source needs control_event_rate".into()))?;
            let k = s
                .dispersion
                .ok_or_else(|| ctx("recurrent source needs dispersion".into()))?;
            if !(mu_c > 0.0 && k > 0.0) {
                return Err(ctx("rates and dispersion must be positive".into()));
            }
            let mut m = SummaryMeasure::new(
                estimate,
                std_err,
                EffectScale::LogRr,
                s.n_control,
                s.n_treatment,
            )
            .map_err(|e| ctx(e.to_string()))?;
            m.aux.control_event_rate = Some(mu_c);
            m.aux.treatment_event_rate = Some(mu_c * estimate.exp());
            m.aux.dispersion = Some(k);
            m
        }
    };
    if raw.followup_dt.is_some() && raw.endpoint != Endpoint::TimeToEvent {
        return Err(ctx("followup_dt only applies to time_to_event".into()));
    }
    if let Some(dt) = raw.followup_dt {
        if !(dt > 0.0) {
            return Err(ctx("followup_dt must be positive".into()));
        }
    }
    Ok(CaseStudyPreset {
        name: raw.name,
        endpoint: raw.endpoint,
        source,
        source_counts,
        decision,
        sample_size_grid: raw.sample_sizes,
        followup_dt: raw.followup_dt,
        vague_prior_sd,
    })
}

/// Standard error from either an explicit value or a 95% CI
/// (on the log scale when `log_ratio` is set).
fn resolve_se(s: &RawSource, log_ratio: bool) -> Result<f64> {
    match (s.std_err, s.ci95) {
        (Some(se), None) => {
            if !(se > 0.0) {
                return Err(Error::Preset("std_err must be positive".into()));
            }
            Ok(se)
        }
        (None, Some([lo, hi])) => {
            if log_ratio {
                log_scale_se_from_ratio_ci95(lo, hi)
            } else if hi > lo {
                Ok(crate::stats::se_from_ci95(lo, hi))
            } else {
                Err(Error::Preset("ci95 must satisfy lo < hi".into()))
            }
        }
        (Some(_), Some(_)) => Err(Error::Preset("give std_err or ci95, not both".into())),
        (None, None) => Err(Error::Preset("source needs std_err or ci95".into())),
    }
}
