//! Study configuration: a single TOML file with strict unknown-key
//! rejection, expanded into the deterministic scenario grid.

use serde::Deserialize;

use crate::datagen::{drift_range, ScenarioKnobs};
use crate::error::{Error, Result};
use crate::methods::{MethodSpec, TauPrior};
use crate::oc::{PointEstimator, Scenario};
use crate::presets::{CaseStudyPreset, Endpoint};

/// Parsed study configuration (not yet expanded).
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyConfig {
    pub study: StudySection,
    pub drift: DriftSection,
    #[serde(default)]
    pub knobs: KnobsSection,
    #[serde(rename = "methods")]
    pub methods: Vec<MethodSection>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudySection {
    /// Name of a built-in (or preset-file) case study.
    pub preset: String,
    /// Optional preset file extending the built-in catalog.
    #[serde(default)]
    pub preset_file: Option<String>,
    /// Target sample sizes per arm.
    pub sample_sizes: Vec<u32>,
    pub master_seed: u64,
    /// Replicates for success probability and coverage.
    pub n_reps_success: u32,
    /// Replicates for MSE, bias, precision and prior ESS.
    pub n_reps_estimation: u32,
    #[serde(default)]
    pub estimator: Option<EstimatorName>,
    /// Default output directory (CLI --out overrides).
    #[serde(default)]
    pub output: Option<String>,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorName {
    PosteriorMean,
    PosteriorMedian,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriftSection {
    /// Explicit drift values.
    #[serde(default)]
    pub values: Option<Vec<f64>>,
    /// Named scenario categories: consistent, partially_consistent, null.
    #[serde(default)]
    pub keywords: Option<Vec<String>>,
    /// Evenly spaced values across the Hellinger-derived drift range.
    #[serde(default)]
    pub auto_count: Option<u32>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KnobsSection {
    #[serde(default = "default_unit_grid")]
    pub std_ratio: Vec<f64>,
    #[serde(default = "default_unit_grid")]
    pub denominator_factor: Vec<f64>,
}

fn default_unit_grid() -> Vec<f64> {
    vec![1.0]
}

impl Default for KnobsSection {
    fn default() -> Self {
        KnobsSection { std_ratio: vec![1.0], denominator_factor: vec![1.0] }
    }
}

/// One [[methods]] entry; parameter vectors expand as a Cartesian product.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MethodSection {
    pub name: String,
    #[serde(default)]
    pub gamma: Option<Vec<f64>>,
    #[serde(default)]
    pub xi_gamma: Option<Vec<f64>>,
    #[serde(default)]
    pub sd_gamma: Option<Vec<f64>>,
    #[serde(default)]
    pub k: Option<Vec<f64>>,
    #[serde(default)]
    pub lambda: Option<Vec<f64>>,
    #[serde(default)]
    pub eta: Option<Vec<f64>>,
    #[serde(default)]
    pub tau: Option<Vec<f64>>,
    #[serde(default)]
    pub cauchy_scale: Option<Vec<f64>>,
    #[serde(default)]
    pub w: Option<Vec<f64>>,
}

/// Parse a configuration file; unknown keys fail with the offending path.
pub fn parse_config_str(text: &str) -> Result<StudyConfig> {
    let cfg: StudyConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    validate_config(&cfg)?;
    Ok(cfg)
}

fn validate_config(cfg: &StudyConfig) -> Result<()> {
    if cfg.study.sample_sizes.is_empty() {
        return Err(Error::config("study.sample_sizes must be non-empty"));
    }
    if cfg.study.sample_sizes.iter().any(|&n| n < 2) {
        return Err(Error::config("study.sample_sizes entries must be >= 2"));
    }
    if cfg.study.n_reps_success < 100 {
        return Err(Error::config("study.n_reps_success must be >= 100"));
    }
    if cfg.study.n_reps_estimation > cfg.study.n_reps_success {
        return Err(Error::config(
            "study.n_reps_estimation cannot exceed study.n_reps_success",
        ));
    }
    let drift_specs = [
        cfg.drift.values.is_some(),
        cfg.drift.keywords.is_some(),
        cfg.drift.auto_count.is_some(),
    ]
    .iter()
    .filter(|b| **b)
    .count();
    if drift_specs != 1 {
        return Err(Error::config(
            "drift: give exactly one of values, keywords, auto_count",
        ));
    }
    if cfg.methods.is_empty() {
        return Err(Error::config("at least one [[methods]] entry is required"));
    }
    if cfg.knobs.std_ratio.is_empty() || cfg.knobs.denominator_factor.is_empty() {
        return Err(Error::config("knob grids must be non-empty"));
    }
    Ok(())
}

/// Resolve the drift grid for a preset.
pub fn resolve_drifts(cfg: &DriftSection, preset: &CaseStudyPreset, first_n: u32) -> Result<Vec<f64>> {
    if let Some(values) = &cfg.values {
        if values.is_empty() {
            return Err(Error::config("drift.values must be non-empty"));
        }
        return Ok(values.clone());
    }
    if let Some(keywords) = &cfg.keywords {
        if keywords.is_empty() {
            return Err(Error::config("drift.keywords must be non-empty"));
        }
        return keywords
            .iter()
            .map(|k| match k.as_str() {
                "consistent" => Ok(0.0),
                "partially_consistent" => Ok(-preset.source.estimate / 2.0),
                "null" => Ok(preset.decision.theta0 - preset.source.estimate),
                other => Err(Error::config(format!(
                    "drift.keywords: unknown keyword '{other}' (expected consistent, partially_consistent, null)"
                ))),
            })
            .collect();
    }
    let count = cfg.auto_count.expect("validated: one drift spec present");
    if count < 2 {
        return Err(Error::config("drift.auto_count must be >= 2"));
    }
    let target_se = target_se_at(preset, first_n)?;
    let (lo, hi) = drift_range(&preset.source, target_se, &preset.decision)?;
    Ok((0..count)
        .map(|i| {
            // Hit both endpoints exactly.
            if i == count - 1 {
                hi
            } else {
                lo + (hi - lo) * i as f64 / (count - 1) as f64
            }
        })
        .collect())
}

/// Approximate target-study SE at a given per-arm size, used to anchor the
/// auto drift range (the same range is shared by all scenario cells).
pub fn target_se_at(preset: &CaseStudyPreset, n: u32) -> Result<f64> {
    let n_f = n as f64;
    let src = &preset.source;
    Ok(match preset.endpoint {
        Endpoint::Continuous => {
            src.aux
                .sampling_sd
                .ok_or_else(|| Error::config("preset lacks sampling sd"))?
                / n_f.sqrt()
        }
        Endpoint::BinaryLogOr => {
            let p_c = src.aux.control_rate.ok_or_else(|| Error::config("missing control rate"))?;
            let odds_t = src.estimate.exp() * p_c / (1.0 - p_c);
            let p_t = odds_t / (1.0 + odds_t);
            (1.0 / (n_f * p_c)
                + 1.0 / (n_f * (1.0 - p_c))
                + 1.0 / (n_f * p_t)
                + 1.0 / (n_f * (1.0 - p_t)))
            .sqrt()
        }
        Endpoint::BinaryRateDiff => {
            let p_c = src.aux.control_rate.ok_or_else(|| Error::config("missing control rate"))?;
            let p_t = p_c + src.estimate;
            (p_c * (1.0 - p_c) / n_f + p_t * (1.0 - p_t) / n_f).sqrt()
        }
        Endpoint::TimeToEvent => {
            let l_c = src
                .aux
                .control_event_rate
                .ok_or_else(|| Error::config("missing control event rate"))?;
            let l_t = src
                .aux
                .treatment_event_rate
                .ok_or_else(|| Error::config("missing treatment event rate"))?;
            let dt = preset.followup_dt.ok_or_else(|| Error::config("missing followup_dt"))?;
            (1.0 / (l_c * dt * n_f) + 1.0 / (l_t * dt * n_f)).sqrt()
        }
        Endpoint::RecurrentEvent => {
            let mu_c = src
                .aux
                .control_event_rate
                .ok_or_else(|| Error::config("missing control event rate"))?;
            let mu_t = src
                .aux
                .treatment_event_rate
                .ok_or_else(|| Error::config("missing treatment event rate"))?;
            let k = src.aux.dispersion.ok_or_else(|| Error::config("missing dispersion"))?;
            ((1.0 / mu_t + 1.0 / k) / n_f + (1.0 / mu_c + 1.0 / k) / n_f).sqrt()
        }
    })
}

/// Expand a method section into concrete specs, in field-declaration order.
fn expand_method(section: &MethodSection) -> Result<Vec<MethodSpec>> {
    let name = section.name.as_str();
    let fields: [(&str, &Option<Vec<f64>>); 8] = [
        ("gamma", &section.gamma),
        ("xi_gamma", &section.xi_gamma),
        ("sd_gamma", &section.sd_gamma),
        ("k", &section.k),
        ("lambda", &section.lambda),
        ("eta", &section.eta),
        ("tau", &section.tau),
        ("w", &section.w),
    ];
    let allowed: &[&str] = match name {
        "separate" | "pooling" | "empirical_bayes_pp" => &[],
        "conditional_pp" => &["gamma"],
        "normalized_pp" => &["xi_gamma", "sd_gamma"],
        "p_value_pp" => &["k", "lambda"],
        "ttp_diff" => &["eta"],
        "ttp_equiv" => &["eta", "lambda"],
        "commensurate_pp" => &["tau"],
        "robust_mixture" => &["w"],
        other => {
            return Err(Error::config(format!("methods: unknown method name '{other}'")));
        }
    };
    for (key, value) in &fields {
        if value.is_some() && !allowed.contains(key) {
            return Err(Error::config(format!(
                "methods.{name}: parameter '{key}' does not apply"
            )));
        }
    }
    if section.cauchy_scale.is_some() && name != "commensurate_pp" {
        return Err(Error::config(format!(
            "methods.{name}: parameter 'cauchy_scale' does not apply"
        )));
    }
    let require = |key: &str| -> Result<&Vec<f64>> {
        fields
            .iter()
            .find(|(k, _)| *k == key)
            .and_then(|(_, v)| v.as_ref())
            .filter(|v| !v.is_empty())
            .ok_or_else(|| {
                Error::config(format!("methods.{name}: missing required parameter '{key}'"))
            })
    };
    let mut specs = Vec::new();
    match name {
        "separate" => specs.push(MethodSpec::Separate),
        "pooling" => specs.push(MethodSpec::Pooling),
        "empirical_bayes_pp" => specs.push(MethodSpec::EmpiricalBayesPp),
        "conditional_pp" => {
            for &g in require("gamma")? {
                specs.push(MethodSpec::ConditionalPp { gamma: g });
            }
        }
        "normalized_pp" => {
            for &xi in require("xi_gamma")? {
                for &sd in require("sd_gamma")? {
                    specs.push(MethodSpec::NormalizedPp { xi_gamma: xi, sd_gamma: sd });
                }
            }
        }
        "p_value_pp" => {
            for &k in require("k")? {
                for &l in require("lambda")? {
                    specs.push(MethodSpec::PValuePp { k, lambda: l });
                }
            }
        }
        "ttp_diff" => {
            for &e in require("eta")? {
                specs.push(MethodSpec::TestThenPoolDiff { eta: e });
            }
        }
        "ttp_equiv" => {
            for &e in require("eta")? {
                for &l in require("lambda")? {
                    specs.push(MethodSpec::TestThenPoolEquiv { eta: e, lambda: l });
                }
            }
        }
        "commensurate_pp" => {
            let fixed = section.tau.clone().unwrap_or_default();
            let cauchy = section.cauchy_scale.clone().unwrap_or_default();
            if fixed.is_empty() && cauchy.is_empty() {
                return Err(Error::config(
                    "methods.commensurate_pp: give tau and/or cauchy_scale",
                ));
            }
            for &tau in &fixed {
                specs.push(MethodSpec::CommensuratePp { tau_prior: TauPrior::FixedTau { tau } });
            }
            for &scale in &cauchy {
                specs.push(MethodSpec::CommensuratePp {
                    tau_prior: TauPrior::LogTauCauchy { location: 0.0, scale },
                });
            }
        }
        "robust_mixture" => {
            for &w in require("w")? {
                specs.push(MethodSpec::RobustMixture { w });
            }
        }
        _ => unreachable!("name validated above"),
    }
    for s in &specs {
        s.validate().map_err(|e| Error::config(format!("methods.{name}: {e}")))?;
    }
    Ok(specs)
}

/// Expand the full scenario grid: sample sizes x drifts x std ratios x
/// denominator factors x method configurations, in declaration order.
pub fn expand_grid(cfg: &StudyConfig, presets: &[CaseStudyPreset]) -> Result<Vec<Scenario>> {
    validate_config(cfg)?;
    let preset = crate::presets::find_preset(presets, &cfg.study.preset)?;
    let drifts = resolve_drifts(&cfg.drift, preset, cfg.study.sample_sizes[0])?;
    let mut method_specs = Vec::new();
    for section in &cfg.methods {
        method_specs.extend(expand_method(section)?);
    }
    let estimator = match cfg.study.estimator {
        Some(EstimatorName::PosteriorMedian) => PointEstimator::PosteriorMedian,
        _ => PointEstimator::PosteriorMean,
    };

    // Knob applicability is a config error, not a per-scenario surprise.
    if cfg.knobs.std_ratio.iter().any(|&r| r != 1.0) && preset.endpoint != Endpoint::Continuous {
        return Err(Error::config(
            "knobs.std_ratio other than 1 applies to continuous endpoints only",
        ));
    }
    if cfg.knobs.denominator_factor.iter().any(|&f| f != 1.0)
        && !preset.source.scale.is_ratio()
    {
        return Err(Error::config(
            "knobs.denominator_factor other than 1 applies to ratio-scale endpoints only",
        ));
    }
    if preset.endpoint == Endpoint::BinaryRateDiff {
        let p_t = preset.source.aux.control_rate.unwrap_or(0.5) + preset.source.estimate;
        for &d in &drifts {
            let shifted = p_t + d;
            if !(0.0..=1.0).contains(&shifted) {
                return Err(Error::config(format!(
                    "drift {d} drives the treatment rate to {shifted}, outside [0, 1]"
                )));
            }
        }
    }

    let mut scenarios = Vec::new();
    let mut idx = 0usize;
    for &n in &cfg.study.sample_sizes {
        for &drift in &drifts {
            for &ratio in &cfg.knobs.std_ratio {
                for &factor in &cfg.knobs.denominator_factor {
                    for method in &method_specs {
                        let mut sc = Scenario {
                            id: String::new(),
                            preset: preset.clone(),
                            n_per_arm: n,
                            knobs: ScenarioKnobs {
                                drift,
                                target_to_source_std_ratio: ratio,
                                source_denominator_factor: factor,
                            },
                            method: *method,
                            estimator,
                            n_reps_success: cfg.study.n_reps_success,
                            n_reps_estimation: cfg.study.n_reps_estimation,
                            master_seed: cfg.study.master_seed,
                        };
                        sc.id = format!("s{:05}-{:08x}", idx, sc.salt() as u32);
                        sc.validate()
                            .map_err(|e| Error::config(format!("scenario {}: {e}", sc.id)))?;
                        scenarios.push(sc);
                        idx += 1;
                    }
                }
            }
        }
    }
    Ok(scenarios)
}
