//! Plot-data emission: long-format tables derived from a results table.
//!
//! Each view produces a CSV with columns
//! `case_study,method,params_label,metric,x,y,y_lo,y_hi`. Rendering the
//! actual figures is left to external tooling.

use crate::error::{Error, Result};
use crate::oc::{MetricCi, OCRecord};
use crate::results::fmt_f64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum View {
    /// Success probability per (drift, method), in declaration order.
    ForestBySuccess,
    /// Each metric at the alternative against the method's type 1 error.
    MetricVsTie,
    /// Each metric as a function of the drift.
    MetricVsDrift,
    /// Each metric against the mean moment-based prior ESS.
    MetricVsEss,
}

impl View {
    pub fn parse(name: &str) -> Result<View> {
        Ok(match name {
            "forest_by_success" => View::ForestBySuccess,
            "metric_vs_tie" => View::MetricVsTie,
            "metric_vs_drift" => View::MetricVsDrift,
            "metric_vs_ess" => View::MetricVsEss,
            other => {
                return Err(Error::config(format!(
                    "unknown view '{other}' (expected forest_by_success, metric_vs_tie, metric_vs_drift, metric_vs_ess)"
                )))
            }
        })
    }
}

pub const PLOT_HEADER: &str = "case_study,method,params_label,metric,x,y,y_lo,y_hi";

const METRICS: [&str; 6] = ["success_prob", "mse", "bias", "precision", "coverage", "ess_moment"];

fn metric_of<'a>(r: &'a OCRecord, name: &str) -> &'a MetricCi {
    match name {
        "success_prob" => &r.success_prob,
        "mse" => &r.mse,
        "bias" => &r.bias,
        "precision" => &r.precision,
        "coverage" => &r.coverage,
        "ess_moment" => &r.ess_moment,
        _ => unreachable!("metric names are fixed"),
    }
}

fn method_name(r: &OCRecord) -> &'static str {
    use crate::methods::MethodSpec::*;
    match r.method {
        Separate => "Separate",
        Pooling => "Pooling",
        ConditionalPp { .. } => "Conditional PP",
        NormalizedPp { .. } => "NPP",
        EmpiricalBayesPp => "EBPP",
        PValuePp { .. } => "p-PP",
        TestThenPoolDiff { .. } => "TtP (diff)",
        TestThenPoolEquiv { .. } => "TtP (eq)",
        CommensuratePp { .. } => "Com. PP",
        RobustMixture { .. } => "RMP",
    }
}

fn push_row(out: &mut String, r: &OCRecord, metric: &str, x: f64, y: &MetricCi) {
    out.push_str(&format!(
        "{},{},{},{},{},{},{},{}\n",
        r.case_study,
        method_name(r),
        r.method_label,
        metric,
        fmt_f64(x),
        fmt_f64(y.value),
        fmt_f64(y.lo),
        fmt_f64(y.hi),
    ));
}

/// Emit one view over a set of result records (input order is preserved).
pub fn emit_plotdata(records: &[OCRecord], view: View) -> Result<String> {
    if records.is_empty() {
        return Err(Error::Results("no result rows to plot".into()));
    }
    let mut out = String::from(PLOT_HEADER);
    out.push('\n');
    match view {
        View::ForestBySuccess => {
            for r in records {
                push_row(&mut out, r, "success_prob", r.drift, &r.success_prob);
            }
        }
        View::MetricVsDrift => {
            for metric in METRICS {
                for r in records {
                    push_row(&mut out, r, metric, r.drift, metric_of(r, metric));
                }
            }
        }
        View::MetricVsEss => {
            for metric in METRICS {
                for r in records {
                    push_row(&mut out, r, metric, r.ess_moment.value, metric_of(r, metric));
                }
            }
        }
        View::MetricVsTie => {
            // Group rows by everything but the drift; the x value is the
            // success probability of the group's null-drift row.
            let key = |r: &OCRecord| {
                (
                    r.case_study.clone(),
                    r.n_per_arm,
                    fmt_f64(r.std_ratio),
                    fmt_f64(r.denominator_factor),
                    r.method_label.clone(),
                )
            };
            use std::collections::HashMap;
            let mut tie: HashMap<_, f64> = HashMap::new();
            for r in records {
                if (r.theta_true - r.theta0).abs() < 1e-9 {
                    tie.insert(key(r), r.success_prob.value);
                }
            }
            if tie.is_empty() {
                return Err(Error::Results(
                    "metric_vs_tie needs rows at the null (theta_true = theta0)".into(),
                ));
            }
            for metric in METRICS {
                for r in records {
                    if (r.theta_true - r.theta0).abs() < 1e-9 {
                        continue;
                    }
                    if let Some(&alpha) = tie.get(&key(r)) {
                        push_row(&mut out, r, metric, alpha, metric_of(r, metric));
                    }
                }
            }
        }
    }
    Ok(out)
}
