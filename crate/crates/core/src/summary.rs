//! Treatment-effect summary measures.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats;

/// Analysis scale the treatment effect lives on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EffectScale {
    MeanDiff,
    LogOr,
    LogHr,
    LogRr,
    RateDiff,
}

impl EffectScale {
    /// Ratio-type scales have a denominator arm the scenario machinery can rescale.
    pub fn is_ratio(self) -> bool {
        matches!(self, EffectScale::LogOr | EffectScale::LogHr | EffectScale::LogRr)
    }

    pub fn label(self) -> &'static str {
        match self {
            EffectScale::MeanDiff => "mean_diff",
            EffectScale::LogOr => "log_or",
            EffectScale::LogHr => "log_hr",
            EffectScale::LogRr => "log_rr",
            EffectScale::RateDiff => "rate_diff",
        }
    }
}

/// Per-arm quantities some generators need beyond the effect estimate itself.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Aux {
    /// Control-arm response rate (binary endpoints).
    pub control_rate: Option<f64>,
    /// Control-arm event rate (time-to-event / recurrent endpoints).
    pub control_event_rate: Option<f64>,
    /// Treatment-arm event rate (time-to-event / recurrent endpoints).
    pub treatment_event_rate: Option<f64>,
    /// Negative-binomial dispersion parameter k (recurrent endpoints).
    pub dispersion: Option<f64>,
    /// Patient-level sampling standard deviation (continuous endpoints).
    pub sampling_sd: Option<f64>,
}

/// A treatment-effect estimate with its standard error and provenance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SummaryMeasure {
    /// Effect estimate on the analysis scale.
    pub estimate: f64,
    /// Standard error of the estimate.
    pub std_err: f64,
    pub scale: EffectScale,
    pub n_control: u32,
    pub n_treatment: u32,
    #[serde(default)]
    pub aux: Aux,
}

impl SummaryMeasure {
    pub fn new(
        estimate: f64,
        std_err: f64,
        scale: EffectScale,
        n_control: u32,
        n_treatment: u32,
    ) -> Result<Self> {
        let m = SummaryMeasure {
            estimate,
            std_err,
            scale,
            n_control,
            n_treatment,
            aux: Aux::default(),
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.std_err > 0.0) || !self.std_err.is_finite() {
            return Err(Error::domain(format!(
                "std_err must be positive and finite, got {}",
                self.std_err
            )));
        }
        if !self.estimate.is_finite() {
            return Err(Error::domain("estimate must be finite"));
        }
        if self.n_control == 0 || self.n_treatment == 0 {
            return Err(Error::domain("per-arm sample sizes must be >= 1"));
        }
        if self.scale == EffectScale::RateDiff && !(-1.0..=1.0).contains(&self.estimate) {
            return Err(Error::domain(format!(
                "rate difference {} outside [-1, 1]",
                self.estimate
            )));
        }
        Ok(())
    }

    pub fn with_aux(mut self, aux: Aux) -> Self {
        self.aux = aux;
        self
    }

    pub fn variance(&self) -> f64 {
        self.std_err * self.std_err
    }

    /// Mean per-arm sample size.
    pub fn n_per_arm(&self) -> f64 {
        0.5 * (self.n_control as f64 + self.n_treatment as f64)
    }
}

/// Pool several summary measures by inverse-variance weighting.
///
/// All inputs must share the same scale; arm sizes are summed.
pub fn pool_inverse_variance(measures: &[SummaryMeasure]) -> Result<SummaryMeasure> {
    if measures.is_empty() {
        return Err(Error::domain("cannot pool an empty set of summaries"));
    }
    let scale = measures[0].scale;
    if measures.iter().any(|m| m.scale != scale) {
        return Err(Error::domain("cannot pool summaries on different scales"));
    }
    let mut wsum = 0.0;
    let mut wx = 0.0;
    let mut n_c: u32 = 0;
    let mut n_t: u32 = 0;
    for m in measures {
        m.validate()?;
        let w = 1.0 / m.variance();
        wsum += w;
        wx += w * m.estimate;
        n_c += m.n_control;
        n_t += m.n_treatment;
    }
    SummaryMeasure::new(wx / wsum, (1.0 / wsum).sqrt(), scale, n_c, n_t)
}

/// Normal approximation of a rate difference from 2x2 counts.
///
/// When any cell is empty, 0.5 is added to every cell before computing the
/// delta-method standard error so the SE stays finite.
pub fn rate_diff_summary_from_counts(
    y_control: u32,
    n_control: u32,
    y_treatment: u32,
    n_treatment: u32,
) -> Result<SummaryMeasure> {
    if y_control > n_control || y_treatment > n_treatment || n_control == 0 || n_treatment == 0 {
        return Err(Error::domain("invalid binomial counts"));
    }
    let p_c = y_control as f64 / n_control as f64;
    let p_t = y_treatment as f64 / n_treatment as f64;
    let estimate = p_t - p_c;
    let zero_cell = y_control == 0
        || y_control == n_control
        || y_treatment == 0
        || y_treatment == n_treatment;
    let (pc_se, pt_se, nc, nt) = if zero_cell {
        let nc = n_control as f64 + 1.0;
        let nt = n_treatment as f64 + 1.0;
        ((y_control as f64 + 0.5) / nc, (y_treatment as f64 + 0.5) / nt, nc, nt)
    } else {
        (p_c, p_t, n_control as f64, n_treatment as f64)
    };
    let se = (pt_se * (1.0 - pt_se) / nt + pc_se * (1.0 - pc_se) / nc).sqrt();
    let mut m = SummaryMeasure::new(estimate, se, EffectScale::RateDiff, n_control, n_treatment)?;
    m.aux.control_rate = Some(p_c);
    Ok(m)
}

/// Recover the standard error of a log-scale ratio estimate from a 95% CI
/// quoted on the ratio scale.
pub fn log_scale_se_from_ratio_ci95(lo: f64, hi: f64) -> Result<f64> {
    if !(lo > 0.0 && hi > lo) {
        return Err(Error::domain("ratio CI must satisfy 0 < lo < hi"));
    }
    Ok(stats::se_from_ci95(lo.ln(), hi.ln()))
}
