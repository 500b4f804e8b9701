//! Exact binomial-likelihood model for rate-difference endpoints.
//!
//! The effect is the difference in response rates, the control rate carries
//! a uniform prior, and the effect given the control rate is conditionally
//! uniform on its attainable range. Posteriors are computed by deterministic
//! quadrature on a fixed effect grid: the inner control-rate integral is
//! adaptive Simpson, the outer effect axis a 2001-point uniform grid on
//! [-1, 1].
//!
//! Borrowing adaptations: the conditional power prior and the robust
//! mixture prior operate natively on the source counts; the normalized
//! power prior and the commensurate prior use a normal approximation of the
//! rate difference (delta-method standard error) and the resulting
//! posterior is truncated back to [-1, 1]; the test-then-pool family and
//! the p-value-based power prior compute their p-value from the normal
//! approximation and then analyze natively.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::methods::{
    self, difference_pvalue, ebpp_delta_hat, pvalue_gamma, tost_pvalue, Analysis,
    BorrowingDiagnostics, MethodSpec,
};
use crate::posterior::{GridDensity, Posterior};
use crate::quad::adaptive_simpson;
use crate::stats::binom_ln_pmf;
use crate::summary::{rate_diff_summary_from_counts, SummaryMeasure};

/// Number of points on the effect grid over [-1, 1].
pub const THETA_GRID: usize = 2001;

/// Responder counts for the two arms of one trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BinomialArmData {
    pub y_control: u32,
    pub y_treatment: u32,
    pub n_control: u32,
    pub n_treatment: u32,
}

impl BinomialArmData {
    pub fn new(y_control: u32, y_treatment: u32, n_control: u32, n_treatment: u32) -> Result<Self> {
        let d = BinomialArmData { y_control, y_treatment, n_control, n_treatment };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_control == 0 || self.n_treatment == 0 {
            return Err(Error::domain("arm sizes must be positive"));
        }
        if self.y_control > self.n_control || self.y_treatment > self.n_treatment {
            return Err(Error::domain("responder counts cannot exceed arm sizes"));
        }
        Ok(())
    }

    /// Normal approximation of the rate difference with delta-method SE.
    pub fn to_rate_diff_summary(&self) -> Result<SummaryMeasure> {
        rate_diff_summary_from_counts(
            self.y_control,
            self.n_control,
            self.y_treatment,
            self.n_treatment,
        )
    }
}

/// Source information available for borrowing.
#[derive(Debug, Clone, PartialEq)]
pub enum BinomialSource {
    /// Raw counts; enables the native (exact-likelihood) adaptations.
    Counts(BinomialArmData),
    /// Rate-difference summary only; all methods go through the normal route.
    Summary(SummaryMeasure),
}

/// Prior on the effect axis.
#[derive(Debug, Clone, PartialEq)]
pub enum EffectPrior {
    /// theta | p_c uniform on (-p_c, 1 - p_c); no borrowing.
    UniformConditional,
    /// Prior induced by a borrowing method applied to source data.
    SourceInduced { method: MethodSpec, source: BinomialSource },
}

/// Prior for the binomial model: the control rate is always Uniform(0, 1).
#[derive(Debug, Clone, PartialEq)]
pub struct RateDiffPrior {
    pub effect: EffectPrior,
}

impl RateDiffPrior {
    pub fn no_borrowing() -> Self {
        RateDiffPrior { effect: EffectPrior::UniformConditional }
    }

    pub fn borrowing(method: MethodSpec, source: BinomialSource) -> Self {
        RateDiffPrior { effect: EffectPrior::SourceInduced { method, source } }
    }
}

/// Marginal likelihood of the counts at a fixed effect:
/// the integral over the control rate of the product of the two binomial
/// pmfs, with the integrand zero wherever theta + p_c leaves [0, 1].
///
/// Adaptive Simpson with relative tolerance 1e-9, run on 16 panels so sharp
/// likelihood peaks at large n are localized before refinement.
pub fn binomial_marginal_likelihood(theta: f64, data: &BinomialArmData) -> Result<f64> {
    if !(-1.0..=1.0).contains(&theta) {
        return Err(Error::domain(format!("theta = {theta} outside [-1, 1]")));
    }
    data.validate()?;
    let lo = (-theta).max(0.0);
    let hi = (1.0 - theta).min(1.0);
    if !(hi > lo) {
        return Ok(0.0);
    }
    let yc = data.y_control as u64;
    let nc = data.n_control as u64;
    let yt = data.y_treatment as u64;
    let nt = data.n_treatment as u64;
    let f = |p_c: f64| -> f64 {
        let pt = theta + p_c;
        if !(0.0..=1.0).contains(&pt) || !(0.0..=1.0).contains(&p_c) {
            return 0.0;
        }
        let ln = binom_ln_pmf(yc, nc, p_c) + binom_ln_pmf(yt, nt, pt);
        if ln == f64::NEG_INFINITY {
            0.0
        } else {
            ln.exp()
        }
    };
    let panels = 16;
    let width = (hi - lo) / panels as f64;
    let mut total = 0.0;
    for i in 0..panels {
        let a = lo + i as f64 * width;
        let b = a + width;
        total += adaptive_simpson(&f, a, b, 1e-9);
    }
    Ok(total)
}

/// Effect grid spacing for an n-point grid over [-1, 1].
fn grid_dx(n_grid: usize) -> f64 {
    2.0 / (n_grid - 1) as f64
}

fn grid_theta(i: usize, n_grid: usize) -> f64 {
    -1.0 + i as f64 * grid_dx(n_grid)
}

/// Raw target marginal likelihood on the effect grid.
fn likelihood_on_grid(data: &BinomialArmData, n_grid: usize) -> Result<Vec<f64>> {
    (0..n_grid)
        .map(|i| binomial_marginal_likelihood(grid_theta(i, n_grid), data))
        .collect()
}

/// Source likelihood of theta: the marginal integral divided by the
/// conditional-uniform normalization (1 - |theta|), zero at the endpoints.
fn source_likelihood_on_grid(source: &BinomialArmData, n_grid: usize) -> Result<Vec<f64>> {
    let raw = likelihood_on_grid(source, n_grid)?;
    Ok((0..n_grid)
        .map(|i| {
            let len = 1.0 - grid_theta(i, n_grid).abs();
            if len > 0.0 {
                raw[i] / len
            } else {
                0.0
            }
        })
        .collect())
}

fn grid_posterior(values: Vec<f64>, n_grid: usize) -> Result<Posterior> {
    Ok(Posterior::Grid(GridDensity::from_unnormalized(-1.0, grid_dx(n_grid), values)?))
}

fn trapezoid_grid(values: &[f64], n_grid: usize) -> f64 {
    crate::quad::trapezoid_uniform(values, grid_dx(n_grid))
}

/// Native power-prior posterior: target likelihood times the source
/// likelihood raised to gamma. gamma = 0 skips the source factor entirely.
fn native_cpp(
    data: &BinomialArmData,
    source: &BinomialArmData,
    gamma: f64,
    n_grid: usize,
) -> Result<Posterior> {
    let lt = likelihood_on_grid(data, n_grid)?;
    if gamma == 0.0 {
        return grid_posterior(lt, n_grid);
    }
    let ls = source_likelihood_on_grid(source, n_grid)?;
    let vals: Vec<f64> = (0..n_grid)
        .map(|i| if ls[i] > 0.0 { lt[i] * ls[i].powf(gamma) } else { 0.0 })
        .collect();
    grid_posterior(vals, n_grid)
}

/// Truncate a normal-route posterior back onto the effect grid.
fn truncate_to_grid(posterior: &Posterior, n_grid: usize) -> Result<Posterior> {
    let vals: Vec<f64> = (0..n_grid)
        .map(|i| {
            let x = grid_theta(i, n_grid);
            match posterior {
                Posterior::Normal { mean, sd } => crate::stats::norm_pdf_at(x, *mean, *sd),
                Posterior::Mixture(m) => m.pdf(x),
                Posterior::Grid(g) => g.pdf(x),
            }
        })
        .collect();
    grid_posterior(vals, n_grid)
}

fn source_summary(source: &BinomialSource) -> Result<SummaryMeasure> {
    match source {
        BinomialSource::Counts(c) => c.to_rate_diff_summary(),
        BinomialSource::Summary(s) => {
            s.validate()?;
            Ok(*s)
        }
    }
}

fn source_counts(source: &BinomialSource, method: &MethodSpec) -> Result<BinomialArmData> {
    match source {
        BinomialSource::Counts(c) => Ok(*c),
        BinomialSource::Summary(_) => Err(Error::domain(format!(
            "{} requires source counts in the binomial model",
            method.label()
        ))),
    }
}

/// Posterior over the rate difference under the binomial model.
pub fn binomial_posterior(data: &BinomialArmData, prior: &RateDiffPrior) -> Result<Analysis> {
    binomial_posterior_with_grid(data, prior, THETA_GRID)
}

/// Same as [`binomial_posterior`] with an explicit effect-grid size
/// (used for grid-refinement stability checks).
pub fn binomial_posterior_with_grid(
    data: &BinomialArmData,
    prior: &RateDiffPrior,
    n_grid: usize,
) -> Result<Analysis> {
    if n_grid < 3 {
        return Err(Error::domain("effect grid needs at least 3 points"));
    }
    data.validate()?;
    let (method, source) = match &prior.effect {
        EffectPrior::UniformConditional => {
            let lt = likelihood_on_grid(data, n_grid)?;
            return Ok(Analysis {
                posterior: grid_posterior(lt, n_grid)?,
                diagnostics: BorrowingDiagnostics::default(),
            });
        }
        EffectPrior::SourceInduced { method, source } => (method, source),
    };
    method.validate()?;
    match *method {
        MethodSpec::Separate => {
            binomial_posterior_with_grid(data, &RateDiffPrior::no_borrowing(), n_grid)
        }
        MethodSpec::Pooling => {
            let src = source_counts(source, method)?;
            Ok(Analysis {
                posterior: native_cpp(data, &src, 1.0, n_grid)?,
                diagnostics: BorrowingDiagnostics {
                    effective_gamma: Some(1.0),
                    ..Default::default()
                },
            })
        }
        MethodSpec::ConditionalPp { gamma } => {
            let src = source_counts(source, method)?;
            Ok(Analysis {
                posterior: native_cpp(data, &src, gamma, n_grid)?,
                diagnostics: BorrowingDiagnostics {
                    effective_gamma: Some(gamma),
                    ..Default::default()
                },
            })
        }
        MethodSpec::RobustMixture { w } => {
            let src = source_counts(source, method)?;
            native_rmp(data, &src, w, n_grid)
        }
        MethodSpec::EmpiricalBayesPp => {
            // Plug-in gamma from the normal approximation, then the native
            // power prior at that gamma.
            let s = source_summary(source)?;
            let t = data.to_rate_diff_summary()?;
            let gamma = ebpp_delta_hat(&s, &t);
            let src = source_counts(source, method)?;
            Ok(Analysis {
                posterior: native_cpp(data, &src, gamma, n_grid)?,
                diagnostics: BorrowingDiagnostics {
                    effective_gamma: Some(gamma),
                    ..Default::default()
                },
            })
        }
        MethodSpec::PValuePp { k, lambda } => {
            let s = source_summary(source)?;
            let t = data.to_rate_diff_summary()?;
            let p = tost_pvalue(&s, &t, lambda);
            let gamma = pvalue_gamma(p, k);
            let src = source_counts(source, method)?;
            Ok(Analysis {
                posterior: native_cpp(data, &src, gamma, n_grid)?,
                diagnostics: BorrowingDiagnostics {
                    effective_gamma: Some(gamma),
                    p_value: Some(p),
                    ..Default::default()
                },
            })
        }
        MethodSpec::TestThenPoolDiff { eta } => {
            let s = source_summary(source)?;
            let t = data.to_rate_diff_summary()?;
            let p = difference_pvalue(&s, &t);
            let pool = !(p < eta);
            let src = source_counts(source, method)?;
            Ok(Analysis {
                posterior: native_cpp(data, &src, if pool { 1.0 } else { 0.0 }, n_grid)?,
                diagnostics: BorrowingDiagnostics {
                    pooled_flag: Some(pool),
                    p_value: Some(p),
                    ..Default::default()
                },
            })
        }
        MethodSpec::TestThenPoolEquiv { eta, lambda } => {
            let s = source_summary(source)?;
            let t = data.to_rate_diff_summary()?;
            let p = tost_pvalue(&s, &t, lambda);
            let pool = p < eta;
            let src = source_counts(source, method)?;
            Ok(Analysis {
                posterior: native_cpp(data, &src, if pool { 1.0 } else { 0.0 }, n_grid)?,
                diagnostics: BorrowingDiagnostics {
                    pooled_flag: Some(pool),
                    p_value: Some(p),
                    ..Default::default()
                },
            })
        }
        MethodSpec::NormalizedPp { xi_gamma, sd_gamma } => {
            let s = source_summary(source)?;
            let t = data.to_rate_diff_summary()?;
            let a = methods::analyze_npp(&s, &t, xi_gamma, sd_gamma)?;
            Ok(Analysis {
                posterior: truncate_to_grid(&a.posterior, n_grid)?,
                diagnostics: a.diagnostics,
            })
        }
        MethodSpec::CommensuratePp { tau_prior } => {
            let s = source_summary(source)?;
            let t = data.to_rate_diff_summary()?;
            let a = methods::analyze_commensurate(&s, &t, &tau_prior)?;
            Ok(Analysis {
                posterior: truncate_to_grid(&a.posterior, n_grid)?,
                diagnostics: a.diagnostics,
            })
        }
    }
}

/// Native robust mixture: mixture of the pooled (gamma = 1) and
/// no-borrowing grid posteriors with the weight updated by the marginal
/// likelihood of the target counts under each component.
fn native_rmp(
    data: &BinomialArmData,
    source: &BinomialArmData,
    w: f64,
    n_grid: usize,
) -> Result<Analysis> {
    if !(0.0..=1.0).contains(&w) {
        return Err(Error::domain(format!("w = {w} outside [0, 1]")));
    }
    let lt = likelihood_on_grid(data, n_grid)?;
    let ls_raw = likelihood_on_grid(source, n_grid)?;
    let ls = source_likelihood_on_grid(source, n_grid)?;
    let joint: Vec<f64> = (0..n_grid).map(|i| lt[i] * ls[i]).collect();

    // p(D_T | source model, D_S) = ∫ L_T L_S dθ / ∫ raw_S dθ,
    // p(D_T | weak model) = ∫ L_T dθ.
    let m_info = trapezoid_grid(&joint, n_grid) / trapezoid_grid(&ls_raw, n_grid);
    let m_vague = trapezoid_grid(&lt, n_grid);
    let w_tilde = if w == 0.0 {
        0.0
    } else if w == 1.0 {
        1.0
    } else {
        w * m_info / (w * m_info + (1.0 - w) * m_vague)
    };

    let info_total = trapezoid_grid(&joint, n_grid);
    let vague_total = trapezoid_grid(&lt, n_grid);
    let vals: Vec<f64> = (0..n_grid)
        .map(|i| w_tilde * joint[i] / info_total + (1.0 - w_tilde) * lt[i] / vague_total)
        .collect();
    Ok(Analysis {
        posterior: grid_posterior(vals, n_grid)?,
        diagnostics: BorrowingDiagnostics {
            posterior_weight: Some(w_tilde),
            ..Default::default()
        },
    })
}
