//! The persisted results table: one flat comma-separated text file, one row
//! per scenario, UTF-8, LF line endings.
//!
//! Every float is written in scientific notation with 17 significant digits
//! so values round-trip losslessly; fields never contain commas, so rows
//! split on ',' without quoting rules.

use crate::error::{Error, Result};
use crate::methods::{MethodSpec, TauPrior};
use crate::oc::{MetricCi, OCRecord, PointEstimator};
use crate::presets::Endpoint;

pub const RESULTS_HEADER: &str = "scenario_id,case_study,endpoint,n_per_arm,drift,theta_true,theta0,std_ratio,denominator_factor,method,method_label,estimator,n_reps,n_reps_estimation,n_failed,n_resampled,unreliable,n_covered,n_above,n_below,success_prob,success_prob_lo,success_prob_hi,mse,mse_lo,mse_hi,bias,bias_lo,bias_hi,precision,precision_lo,precision_hi,coverage,coverage_lo,coverage_hi,ess_moment,ess_moment_lo,ess_moment_hi,ess_precision,ess_precision_lo,ess_precision_hi,ess_elir,ess_elir_lo,ess_elir_hi,mean_effective_gamma,mean_posterior_weight,pooled_fraction,mc_seed";

/// Lossless decimal encoding of a float (17 significant digits).
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

/// Compact, parseable encoding of a method spec.
pub fn encode_method(m: &MethodSpec) -> String {
    match m {
        MethodSpec::Separate => "separate".into(),
        MethodSpec::Pooling => "pooling".into(),
        MethodSpec::ConditionalPp { gamma } => format!("conditional_pp;gamma={gamma}"),
        MethodSpec::NormalizedPp { xi_gamma, sd_gamma } => {
            format!("normalized_pp;xi_gamma={xi_gamma};sd_gamma={sd_gamma}")
        }
        MethodSpec::EmpiricalBayesPp => "empirical_bayes_pp".into(),
        MethodSpec::PValuePp { k, lambda } => format!("p_value_pp;k={k};lambda={lambda}"),
        MethodSpec::TestThenPoolDiff { eta } => format!("ttp_diff;eta={eta}"),
        MethodSpec::TestThenPoolEquiv { eta, lambda } => {
            format!("ttp_equiv;eta={eta};lambda={lambda}")
        }
        MethodSpec::CommensuratePp { tau_prior } => match tau_prior {
            TauPrior::FixedTau { tau } => format!("commensurate_pp;tau={tau}"),
            TauPrior::LogTauCauchy { location, scale } => {
                format!("commensurate_pp;cauchy_location={location};cauchy_scale={scale}")
            }
        },
        MethodSpec::RobustMixture { w } => format!("robust_mixture;w={w}"),
    }
}

/// Parse the encoding produced by [`encode_method`].
pub fn decode_method(text: &str) -> Result<MethodSpec> {
    let mut parts = text.split(';');
    let name = parts.next().unwrap_or_default();
    let mut params: Vec<(&str, f64)> = Vec::new();
    for p in parts {
        let (k, v) = p
            .split_once('=')
            .ok_or_else(|| Error::Results(format!("bad method parameter '{p}'")))?;
        let v: f64 = v
            .parse()
            .map_err(|_| Error::Results(format!("bad method parameter value '{p}'")))?;
        params.push((k, v));
    }
    let get = |key: &str| -> Result<f64> {
        params
            .iter()
            .find(|(k, _)| *k == key)
            .map(|(_, v)| *v)
            .ok_or_else(|| Error::Results(format!("method '{text}' lacks parameter '{key}'")))
    };
    Ok(match name {
        "separate" => MethodSpec::Separate,
        "pooling" => MethodSpec::Pooling,
        "conditional_pp" => MethodSpec::ConditionalPp { gamma: get("gamma")? },
        "normalized_pp" => MethodSpec::NormalizedPp {
            xi_gamma: get("xi_gamma")?,
            sd_gamma: get("sd_gamma")?,
        },
        "empirical_bayes_pp" => MethodSpec::EmpiricalBayesPp,
        "p_value_pp" => MethodSpec::PValuePp { k: get("k")?, lambda: get("lambda")? },
        "ttp_diff" => MethodSpec::TestThenPoolDiff { eta: get("eta")? },
        "ttp_equiv" => MethodSpec::TestThenPoolEquiv { eta: get("eta")?, lambda: get("lambda")? },
        "commensurate_pp" => {
            if let Ok(tau) = get("tau") {
                MethodSpec::CommensuratePp { tau_prior: TauPrior::FixedTau { tau } }
            } else {
                MethodSpec::CommensuratePp {
                    tau_prior: TauPrior::LogTauCauchy {
                        location: get("cauchy_location")?,
                        scale: get("cauchy_scale")?,
                    },
                }
            }
        }
        "robust_mixture" => MethodSpec::RobustMixture { w: get("w")? },
        other => return Err(Error::Results(format!("unknown method '{other}'"))),
    })
}

fn endpoint_from_label(s: &str) -> Result<Endpoint> {
    Ok(match s {
        "continuous" => Endpoint::Continuous,
        "binary_log_or" => Endpoint::BinaryLogOr,
        "binary_rate_diff" => Endpoint::BinaryRateDiff,
        "time_to_event" => Endpoint::TimeToEvent,
        "recurrent_event" => Endpoint::RecurrentEvent,
        other => return Err(Error::Results(format!("unknown endpoint '{other}'"))),
    })
}

/// Render one record as a results row.
pub fn to_row(r: &OCRecord) -> String {
    let ci = |c: &MetricCi| format!("{},{},{}", fmt_f64(c.value), fmt_f64(c.lo), fmt_f64(c.hi));
    for field in [&r.scenario_id, &r.case_study, &r.method_label] {
        debug_assert!(!field.contains(',') && !field.contains('\n'));
    }
    format!(
        "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
        r.scenario_id,
        r.case_study,
        r.endpoint.label(),
        r.n_per_arm,
        fmt_f64(r.drift),
        fmt_f64(r.theta_true),
        fmt_f64(r.theta0),
        fmt_f64(r.std_ratio),
        fmt_f64(r.denominator_factor),
        encode_method(&r.method),
        r.method_label,
        r.estimator.label(),
        r.n_reps,
        r.n_reps_estimation,
        r.n_failed,
        r.n_resampled,
        r.unreliable,
        r.n_covered,
        r.n_above,
        r.n_below,
        ci(&r.success_prob),
        ci(&r.mse),
        ci(&r.bias),
        ci(&r.precision),
        ci(&r.coverage),
        ci(&r.ess_moment),
        ci(&r.ess_precision),
        ci(&r.ess_elir),
        format!(
            "{},{},{},{}",
            fmt_opt(r.mean_effective_gamma),
            fmt_opt(r.mean_posterior_weight),
            fmt_opt(r.pooled_fraction),
            r.mc_seed
        ),
    )
}

/// Parse one results row.
pub fn from_row(line: &str) -> Result<OCRecord> {
    let cols: Vec<&str> = line.split(',').collect();
    let expect = RESULTS_HEADER.split(',').count();
    if cols.len() != expect {
        return Err(Error::Results(format!(
            "row has {} columns, expected {expect}",
            cols.len()
        )));
    }
    let f = |i: usize| -> Result<f64> {
        cols[i]
            .parse::<f64>()
            .map_err(|_| Error::Results(format!("bad float in column {i}: '{}'", cols[i])))
    };
    let u = |i: usize| -> Result<u64> {
        cols[i]
            .parse::<u64>()
            .map_err(|_| Error::Results(format!("bad integer in column {i}: '{}'", cols[i])))
    };
    let opt = |i: usize| -> Result<Option<f64>> {
        if cols[i].is_empty() {
            Ok(None)
        } else {
            f(i).map(Some)
        }
    };
    let ci = |i: usize| -> Result<MetricCi> {
        Ok(MetricCi { value: f(i)?, lo: f(i + 1)?, hi: f(i + 2)? })
    };
    let estimator = match cols[11] {
        "posterior_mean" => PointEstimator::PosteriorMean,
        "posterior_median" => PointEstimator::PosteriorMedian,
        other => return Err(Error::Results(format!("unknown estimator '{other}'"))),
    };
    Ok(OCRecord {
        scenario_id: cols[0].to_string(),
        case_study: cols[1].to_string(),
        endpoint: endpoint_from_label(cols[2])?,
        n_per_arm: u(3)? as u32,
        drift: f(4)?,
        theta_true: f(5)?,
        theta0: f(6)?,
        std_ratio: f(7)?,
        denominator_factor: f(8)?,
        method: decode_method(cols[9])?,
        method_label: cols[10].to_string(),
        estimator,
        n_reps: u(12)? as u32,
        n_reps_estimation: u(13)? as u32,
        n_failed: u(14)? as u32,
        n_resampled: u(15)?,
        unreliable: cols[16] == "true",
        n_covered: u(17)?,
        n_above: u(18)?,
        n_below: u(19)?,
        success_prob: ci(20)?,
        mse: ci(23)?,
        bias: ci(26)?,
        precision: ci(29)?,
        coverage: ci(32)?,
        ess_moment: ci(35)?,
        ess_precision: ci(38)?,
        ess_elir: ci(41)?,
        mean_effective_gamma: opt(44)?,
        mean_posterior_weight: opt(45)?,
        pooled_fraction: opt(46)?,
        mc_seed: u(47)? as u64,
    })
}

/// Render a whole table.
pub fn to_table(rows: &[String]) -> String {
    let mut out = String::with_capacity(rows.iter().map(|r| r.len() + 1).sum::<usize>() + 256);
    out.push_str(RESULTS_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(r);
        out.push('\n');
    }
    out
}

/// Parse a whole table into records.
pub fn parse_table(text: &str) -> Result<Vec<OCRecord>> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == RESULTS_HEADER => {}
        Some(_) => return Err(Error::Results("unexpected results header".into())),
        None => return Err(Error::Results("empty results table".into())),
    }
    lines.filter(|l| !l.is_empty()).map(from_row).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample_record() -> OCRecord {
        OCRecord {
            scenario_id: "s00003-ab12cd34".into(),
            case_study: "belimumab".into(),
            endpoint: Endpoint::BinaryLogOr,
            n_per_arm: 140,
            drift: -0.241213,
            theta_true: 0.241213,
            theta0: 0.0,
            std_ratio: 1.0,
            denominator_factor: 1.0,
            method: MethodSpec::ConditionalPp { gamma: 0.25 },
            method_label: MethodSpec::ConditionalPp { gamma: 0.25 }.label(),
            estimator: PointEstimator::PosteriorMean,
            n_reps: 10_000,
            n_reps_estimation: 2_000,
            n_failed: 3,
            n_resampled: 0,
            unreliable: false,
            n_covered: 9500,
            n_above: 250,
            n_below: 247,
            success_prob: MetricCi { value: 0.31, lo: 0.30, hi: 0.32 },
            mse: MetricCi { value: 1.25e-2, lo: 1.2e-2, hi: 1.3e-2 },
            bias: MetricCi { value: -3.4e-3, lo: -4.0e-3, hi: -2.8e-3 },
            precision: MetricCi { value: 0.21, lo: 0.20, hi: 0.22 },
            coverage: MetricCi { value: 0.95, lo: 0.945, hi: 0.955 },
            ess_moment: MetricCi { value: 61.2, lo: 60.0, hi: 62.4 },
            ess_precision: MetricCi { value: 61.2, lo: 60.0, hi: 62.4 },
            ess_elir: MetricCi { value: 60.8, lo: 59.7, hi: 61.9 },
            mean_effective_gamma: Some(0.25),
            mean_posterior_weight: None,
            pooled_fraction: None,
            mc_seed: 42,
        }
    }

    #[test]
    fn row_round_trips_exactly() {
        let rec = sample_record();
        let row = to_row(&rec);
        let back = from_row(&row).unwrap();
        assert_eq!(rec, back);
        // And the re-rendered row is byte-identical.
        assert_eq!(to_row(&back), row);
    }

    #[test]
    fn header_column_count_matches_rows() {
        let row = to_row(&sample_record());
        assert_eq!(
            row.split(',').count(),
            RESULTS_HEADER.split(',').count(),
            "row and header column counts differ"
        );
    }

    #[test]
    fn table_round_trip() {
        let rec = sample_record();
        let table = to_table(&[to_row(&rec)]);
        let parsed = parse_table(&table).unwrap();
        assert_eq!(parsed.len(), 1);
        assert_eq!(parsed[0], rec);
    }

    #[test]
    fn malformed_rows_are_rejected() {
        assert!(from_row("only,three,columns").is_err());
        assert!(parse_table("bogus header\n").is_err());
        assert!(decode_method("no_such_method").is_err());
        assert!(decode_method("conditional_pp;gamma=oops").is_err());
    }

    proptest! {
        #[test]
        fn float_encoding_is_lossless(x in proptest::num::f64::NORMAL | proptest::num::f64::SUBNORMAL) {
            let s = fmt_f64(x);
            let back: f64 = s.parse().unwrap();
            prop_assert_eq!(x.to_bits(), back.to_bits());
        }

        #[test]
        fn method_encoding_round_trips(gamma in 0.0f64..=1.0, k in 0.01f64..50.0) {
            for m in [
                MethodSpec::ConditionalPp { gamma },
                MethodSpec::PValuePp { k, lambda: gamma },
                MethodSpec::NormalizedPp { xi_gamma: 0.5, sd_gamma: 0.25 },
                MethodSpec::CommensuratePp {
                    tau_prior: TauPrior::LogTauCauchy { location: 0.0, scale: k },
                },
            ] {
                let enc = encode_method(&m);
                prop_assert_eq!(decode_method(&enc).unwrap(), m);
            }
        }
    }
}
