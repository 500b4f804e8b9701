//! Prior effective sample size by three measures: moment-based,
//! precision-based, and the expected local-information-ratio (ELIR), with
//! the posterior-minus-target-sample-size convention.
//!
//! Two information-unit conventions are supported. On the normal scale one
//! unit is a known-variance normal observation with standard deviation
//! `reference_sd` (the effect-scale SD a single subject per arm implies).
//! Rate-difference posteriors are linearly mapped from [-1, 1] onto [0, 1]
//! and measured against the binomial unit, where the moment-based measure
//! is the matched Beta's a + b.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::posterior::{GridDensity, MixtureComponent, NormalMixture, Posterior};
use crate::stats::ln_norm_pdf;

/// Matching family / information unit for the ESS measures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EssScale {
    /// Known-variance normal unit with SD `reference_sd`.
    Normal,
    /// Map the effect to (theta + 1)/2 and use the binomial unit.
    BetaTransformed,
}

/// Prior ESS of one posterior by the three measures.
#[derive(Debug, Clone, PartialEq)]
pub struct EssReport {
    pub moment: f64,
    pub precision: f64,
    pub elir: f64,
    /// Mixture used for matching when the input was sample-based.
    pub mixture_fit: Option<NormalMixture>,
    pub reference_sd: f64,
}

/// Moment-based ESS of a posterior (not yet prior-adjusted).
///
/// Normal scale: reference_sd^2 / Var. Beta route: moment-match a Beta to
/// the transformed distribution and return a + b.
pub fn ess_moment(dist: &Posterior, reference_sd: f64, scale: EssScale) -> f64 {
    let var = dist.variance();
    if var <= 0.0 {
        return f64::INFINITY;
    }
    match scale {
        EssScale::Normal => reference_sd * reference_sd / var,
        EssScale::BetaTransformed => {
            let m = (dist.mean() + 1.0) / 2.0;
            let v = var / 4.0;
            m * (1.0 - m) / v - 1.0
        }
    }
}

/// Precision-based ESS of a posterior (not yet prior-adjusted).
///
/// Coincides with the moment-based measure on the normal scale. On the
/// Beta route it matches mean and precision against the binomial unit
/// information at the mean, giving m(1-m)/v (one unit more than the
/// two-moment Beta match).
pub fn ess_precision(dist: &Posterior, reference_sd: f64, scale: EssScale) -> f64 {
    let var = dist.variance();
    if var <= 0.0 {
        return f64::INFINITY;
    }
    match scale {
        EssScale::Normal => reference_sd * reference_sd / var,
        EssScale::BetaTransformed => {
            let m = (dist.mean() + 1.0) / 2.0;
            let v = var / 4.0;
            m * (1.0 - m) / v
        }
    }
}

/// ELIR of a density given as a callable: E_theta[ I_pi(theta) / I_1(theta) ].
///
/// `I_pi` is the negative second derivative of the log density, computed by
/// 5-point central finite differences with step `h`; the expectation is a
/// trapezoid pass of the (renormalized) density over [lo, hi]. `unit_info`
/// supplies I_1 at each point. Negative-information regions enter as-is.
pub fn elir_of_density(
    pdf: &dyn Fn(f64) -> f64,
    lo: f64,
    hi: f64,
    n: usize,
    h: f64,
    unit_info: &dyn Fn(f64) -> f64,
) -> Result<f64> {
    if !(hi > lo) || n < 16 {
        return Err(Error::domain("ELIR needs hi > lo and n >= 16"));
    }
    let dx = (hi - lo) / (n - 1) as f64;
    let mut mass = 0.0;
    let mut acc = 0.0;
    for i in 0..n {
        let x = lo + i as f64 * dx;
        let f0 = pdf(x);
        let w = if i == 0 || i == n - 1 { 0.5 } else { 1.0 };
        if f0 <= 0.0 {
            continue;
        }
        mass += w * f0 * dx;
        let fm2 = pdf(x - 2.0 * h);
        let fm1 = pdf(x - h);
        let fp1 = pdf(x + h);
        let fp2 = pdf(x + 2.0 * h);
        if fm2 <= 0.0 || fm1 <= 0.0 || fp1 <= 0.0 || fp2 <= 0.0 {
            continue;
        }
        let d2 = (-fm2.ln() + 16.0 * fm1.ln() - 30.0 * f0.ln() + 16.0 * fp1.ln() - fp2.ln())
            / (12.0 * h * h);
        let info = -d2;
        acc += w * f0 * dx * info / unit_info(x);
    }
    if !(mass > 0.0) || !mass.is_finite() || !acc.is_finite() {
        return Err(Error::Numerical(
            "ELIR expectation did not converge on the window (non-integrable tails?)".into(),
        ));
    }
    Ok(acc / mass)
}

/// ELIR of a posterior (not yet prior-adjusted).
pub fn ess_elir(dist: &Posterior, reference_sd: f64, scale: EssScale) -> Result<f64> {
    let unit = reference_sd * reference_sd;
    match (dist, scale) {
        // Constant information: ELIR equals the variance ratio exactly.
        (Posterior::Normal { sd, .. }, EssScale::Normal) => Ok(unit / (sd * sd)),
        (Posterior::Mixture(m), EssScale::Normal) => {
            let mean = m.mean();
            let sd = m.variance().sqrt();
            let h = 1e-4 * sd;
            let pdf = |x: f64| m.pdf(x);
            let info = elir_of_density(&pdf, mean - 10.0 * sd, mean + 10.0 * sd, 2001, h, &|_| 1.0)?;
            Ok(info * unit)
        }
        (Posterior::Grid(g), EssScale::Normal) => {
            let pdf = |x: f64| g.pdf(x);
            let h = g.dx;
            let info =
                elir_of_density(&pdf, g.x0 + 2.0 * h, g.x_max() - 2.0 * h, g.len() - 4, h, &|_| 1.0)?;
            Ok(info * unit)
        }
        (_, EssScale::BetaTransformed) => {
            // u = (theta + 1)/2; binomial unit information 1/(u(1-u)).
            let pdf_u = |u: f64| 2.0 * pdf_of(dist, 2.0 * u - 1.0);
            let (lo, hi, n, h) = match dist {
                Posterior::Grid(g) => {
                    let h = g.dx / 2.0;
                    (
                        (g.x0 + 1.0) / 2.0 + 2.0 * h,
                        (g.x_max() + 1.0) / 2.0 - 2.0 * h,
                        g.len() - 4,
                        h,
                    )
                }
                _ => {
                    let m = (dist.mean() + 1.0) / 2.0;
                    let s = dist.sd() / 2.0;
                    let lo = (m - 10.0 * s).max(1e-9);
                    let hi = (m + 10.0 * s).min(1.0 - 1e-9);
                    (lo, hi, 2001, 1e-4 * s)
                }
            };
            elir_of_density(&pdf_u, lo, hi, n, h, &|u: f64| 1.0 / (u * (1.0 - u)))
        }
    }
}

fn pdf_of(dist: &Posterior, x: f64) -> f64 {
    match dist {
        Posterior::Normal { mean, sd } => crate::stats::norm_pdf_at(x, *mean, *sd),
        Posterior::Mixture(m) => m.pdf(x),
        Posterior::Grid(g) => g.pdf(x),
    }
}

/// Posterior-minus-sample-size convention for the prior ESS.
pub fn prior_ess_from_posterior(posterior_ess: f64, n_target_per_arm: u32) -> f64 {
    posterior_ess - n_target_per_arm as f64
}

/// All three prior-ESS measures for one replicate posterior.
pub fn ess_report(
    posterior: &Posterior,
    reference_sd: f64,
    scale: EssScale,
    n_target_per_arm: u32,
) -> Result<EssReport> {
    let moment = ess_moment(posterior, reference_sd, scale);
    let precision = ess_precision(posterior, reference_sd, scale);
    let elir = ess_elir(posterior, reference_sd, scale)?;
    Ok(EssReport {
        moment: prior_ess_from_posterior(moment, n_target_per_arm),
        precision: prior_ess_from_posterior(precision, n_target_per_arm),
        elir: prior_ess_from_posterior(elir, n_target_per_arm),
        mixture_fit: None,
        reference_sd,
    })
}

// ---------------------------------------------------------------------------
// Normal mixture fitting by EM
// ---------------------------------------------------------------------------

/// Input to the mixture fit: posterior samples or a grid density.
pub enum MixtureInput<'a> {
    Samples(&'a [f64]),
    Grid(&'a GridDensity),
}

/// Pseudo sample size used for the penalized-likelihood criterion when the
/// input is a grid rather than samples.
const GRID_PSEUDO_N: f64 = 1000.0;

/// Fit a normal mixture with 1..=max_components components by weighted EM,
/// selecting the component count by BIC. Initialization is deterministic
/// (quantile-spaced means, common SD, equal weights).
pub fn fit_mixture(input: &MixtureInput, max_components: usize) -> Result<NormalMixture> {
    let max_components = max_components.max(1);
    let (xs, ws, n_eff): (Vec<f64>, Vec<f64>, f64) = match input {
        MixtureInput::Samples(s) => {
            if s.len() < 500 {
                return Err(Error::domain("mixture fitting needs at least 500 samples"));
            }
            let mut xs = s.to_vec();
            xs.sort_by(|a, b| a.partial_cmp(b).expect("finite samples"));
            let n = xs.len();
            (xs, vec![1.0 / n as f64; n], n as f64)
        }
        MixtureInput::Grid(g) => {
            g.validate()?;
            let xs: Vec<f64> = (0..g.len()).map(|i| g.x(i)).collect();
            let mut ws: Vec<f64> = (0..g.len())
                .map(|i| {
                    let trap = if i == 0 || i == g.len() - 1 { 0.5 } else { 1.0 };
                    trap * g.density[i]
                })
                .collect();
            let total: f64 = ws.iter().sum();
            for w in &mut ws {
                *w /= total;
            }
            (xs, ws, GRID_PSEUDO_N)
        }
    };

    let mean: f64 = xs.iter().zip(&ws).map(|(x, w)| x * w).sum();
    let var: f64 = xs.iter().zip(&ws).map(|(x, w)| w * (x - mean) * (x - mean)).sum();
    let overall_sd = var.sqrt();
    if !(overall_sd > 1e-12 * (1.0 + mean.abs())) {
        // Degenerate input: single component with a floor SD.
        let floor = 1e-8 * (1.0 + mean.abs());
        return NormalMixture::new(vec![MixtureComponent { weight: 1.0, mean, sd: floor }]);
    }

    let mut best: Option<(f64, NormalMixture)> = None;
    for k in 1..=max_components {
        let (ll, fit) = em_fit(&xs, &ws, overall_sd, k);
        let params = (3 * k - 1) as f64;
        let bic = -2.0 * ll * n_eff + params * n_eff.ln();
        if best.as_ref().map(|(b, _)| bic < *b).unwrap_or(true) {
            best = Some((bic, fit));
        }
    }
    Ok(best.expect("at least one fit").1)
}

/// Weighted EM for a fixed component count. Returns (per-unit-weight log
/// likelihood, mixture).
fn em_fit(xs: &[f64], ws: &[f64], overall_sd: f64, k: usize) -> (f64, NormalMixture) {
    let n = xs.len();
    // Quantile-spaced initial means over the weighted distribution.
    let mut means: Vec<f64> = Vec::with_capacity(k);
    for j in 0..k {
        let q = (2 * j + 1) as f64 / (2 * k) as f64;
        means.push(weighted_quantile(xs, ws, q));
    }
    let mut sds = vec![overall_sd; k];
    let mut weights = vec![1.0 / k as f64; k];
    let sd_floor = 1e-6 * overall_sd;

    let mut ll = f64::NEG_INFINITY;
    let mut resp = vec![0.0f64; n * k];
    let mut lns = vec![0.0f64; k];
    for _ in 0..300 {
        // E step in log space.
        let mut new_ll = 0.0;
        for (i, &x) in xs.iter().enumerate() {
            let mut max_ln = f64::NEG_INFINITY;
            for c in 0..k {
                let l = weights[c].max(1e-300).ln() + ln_norm_pdf(x, means[c], sds[c]);
                lns[c] = l;
                max_ln = max_ln.max(l);
            }
            let total: f64 = lns.iter().map(|l| (l - max_ln).exp()).sum();
            for c in 0..k {
                resp[i * k + c] = (lns[c] - max_ln).exp() / total;
            }
            new_ll += ws[i] * (max_ln + total.ln());
        }
        // M step.
        for c in 0..k {
            let mut wsum = 0.0;
            let mut mdot = 0.0;
            for i in 0..n {
                let r = ws[i] * resp[i * k + c];
                wsum += r;
                mdot += r * xs[i];
            }
            if wsum < 1e-12 {
                weights[c] = 1e-12;
                continue;
            }
            let m = mdot / wsum;
            let mut vdot = 0.0;
            for i in 0..n {
                let r = ws[i] * resp[i * k + c];
                vdot += r * (xs[i] - m) * (xs[i] - m);
            }
            means[c] = m;
            sds[c] = (vdot / wsum).sqrt().max(sd_floor);
            weights[c] = wsum;
        }
        let wt: f64 = weights.iter().sum();
        for w in &mut weights {
            *w /= wt;
        }
        if (new_ll - ll).abs() < 1e-10 * (1.0 + new_ll.abs()) {
            ll = new_ll;
            break;
        }
        ll = new_ll;
    }

    let mut comps: Vec<MixtureComponent> = (0..k)
        .map(|c| MixtureComponent { weight: weights[c], mean: means[c], sd: sds[c] })
        .collect();
    comps.sort_by(|a, b| a.mean.partial_cmp(&b.mean).expect("finite means"));
    // Exact weight closure against the 1e-12 validation tolerance.
    let head: f64 = comps[..k - 1].iter().map(|c| c.weight).sum();
    comps[k - 1].weight = 1.0 - head;
    let mixture = NormalMixture::new(comps).expect("EM output is a valid mixture");
    (ll, mixture)
}

fn weighted_quantile(xs: &[f64], ws: &[f64], q: f64) -> f64 {
    let mut acc = 0.0;
    for (x, w) in xs.iter().zip(ws) {
        acc += w;
        if acc >= q {
            return *x;
        }
    }
    *xs.last().expect("non-empty input")
}
