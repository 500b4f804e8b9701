//! Acceptance suite: one test per criterion, each printing a pass line.
//!
//! Monte-Carlo criteria pin their tolerances in code; every expected value
//! is either computed by an independent oracle in `common` or is an exact
//! identity.

mod common;

use borrowsim_core::binomial::{
    binomial_marginal_likelihood, binomial_posterior, binomial_posterior_with_grid,
    BinomialArmData, RateDiffPrior,
};
use borrowsim_core::config::parse_config_str;
use borrowsim_core::datagen::{drift_range, hellinger_normal, ScenarioKnobs};
use borrowsim_core::ess::{ess_elir, ess_moment, ess_precision, ess_report, EssScale};
use borrowsim_core::methods::{
    analyze_cpp, analyze_ebpp, analyze_npp, analyze_pooling, analyze_rmp_centered,
    analyze_separate, ebpp_delta_hat, MethodSpec,
};
use borrowsim_core::oc::{
    compare_at_equivalent_tie, estimate_oc, ComparatorTest, PointEstimator, Scenario,
};
use borrowsim_core::posterior::{Posterior, VaguePrior};
use borrowsim_core::presets::{builtin_presets, find_preset, CaseStudyPreset};
use borrowsim_core::rng::derive_rng;
use borrowsim_core::runner::{run_with, RunOptions, ScenarioState};
use borrowsim_core::stats::ln_norm_pdf;
use borrowsim_core::summary::{EffectScale, SummaryMeasure};

use rand::Rng;

fn preset(name: &str) -> CaseStudyPreset {
    find_preset(&builtin_presets(), name).unwrap().clone()
}

fn scenario(
    preset_name: &str,
    n: u32,
    drift: f64,
    method: MethodSpec,
    n_reps: u32,
    n_est: u32,
    seed: u64,
) -> Scenario {
    Scenario {
        id: format!("acc-{preset_name}-{n}"),
        preset: preset(preset_name),
        n_per_arm: n,
        knobs: ScenarioKnobs { drift, ..Default::default() },
        method,
        estimator: PointEstimator::PosteriorMean,
        n_reps_success: n_reps,
        n_reps_estimation: n_est,
        master_seed: seed,
    }
}

#[test]
fn criterion_01_cpp_conjugacy_identities() {
    let t0 = std::time::Instant::now();
    let prior = VaguePrior::default();
    for (s, t) in common::summary_fixtures(1000, 101) {
        let pool = analyze_pooling(&s, &t, &prior).unwrap().posterior;
        let sep = analyze_separate(&t, &prior).unwrap().posterior;
        let g1 = analyze_cpp(&s, &t, 1.0, &prior).unwrap().posterior;
        let g0 = analyze_cpp(&s, &t, 0.0, &prior).unwrap().posterior;
        assert!((g1.mean() - pool.mean()).abs() <= 1e-12);
        assert!((g1.sd() - pool.sd()).abs() <= 1e-12);
        assert!((g0.mean() - sep.mean()).abs() <= 1e-12);
        assert!((g0.sd() - sep.sd()).abs() <= 1e-12);
    }
    let secs = t0.elapsed().as_secs_f64();
    assert!(secs < 1.0, "criterion 1 took {secs:.2}s, budget 1s");
    println!("criterion 01 PASS: CPP gamma=1/0 match pooling/separate to 1e-12 ({secs:.2}s)");
}

#[test]
fn criterion_02_npp_matches_kummer_closed_form() {
    let t0 = std::time::Instant::now();
    let mut rng = derive_rng(202, &[2]);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let s = SummaryMeasure::new(
            rng.gen_range(-0.5..0.5),
            rng.gen_range(0.1..0.5),
            EffectScale::MeanDiff,
            100,
            100,
        )
        .unwrap();
        let t = SummaryMeasure::new(
            s.estimate + rng.gen_range(-1.0..1.0),
            rng.gen_range(0.1..0.5),
            EffectScale::MeanDiff,
            100,
            100,
        )
        .unwrap();
        let xi: f64 = rng.gen_range(0.15..0.85);
        let max_sd = (xi * (1.0 - xi)).sqrt();
        let sd = rng.gen_range(0.05..(0.5f64.min(0.95 * max_sd)));
        let a = analyze_npp(&s, &t, xi, sd).unwrap();
        let grid = match &a.posterior {
            Posterior::Grid(g) => g,
            _ => panic!("expected grid"),
        };
        // Closed form: exp(-(tT-θ)^2/2σT²) M(p+1/2, p+q+1/2, -(tS-θ)²/2σS²).
        let omega = sd * sd / (xi * (1.0 - xi) - sd * sd);
        let p = xi / omega;
        let q = (1.0 - xi) / omega;
        let mut ln_ref: Vec<f64> = Vec::with_capacity(grid.len());
        for i in 0..grid.len() {
            let theta = grid.x(i);
            let z = -(s.estimate - theta).powi(2) / (2.0 * s.variance());
            let ln = -(t.estimate - theta).powi(2) / (2.0 * t.variance())
                + common::ln_kummer_m_nonpositive(p + 0.5, p + q + 0.5, z);
            ln_ref.push(ln);
        }
        let max_ln = ln_ref.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let vals: Vec<f64> = ln_ref.iter().map(|l| (l - max_ln).exp()).collect();
        let total = borrowsim_core::quad::trapezoid_uniform(&vals, grid.dx);
        let peak = grid.density.iter().cloned().fold(0.0, f64::max);
        for i in 0..grid.len() {
            let diff = (grid.density[i] - vals[i] / total).abs() / peak;
            worst = worst.max(diff);
        }
    }
    assert!(worst < 1e-6, "relative sup-norm {worst:e} >= 1e-6");
    let secs = t0.elapsed().as_secs_f64();
    assert!(secs < 30.0, "criterion 2 took {secs:.1}s, budget 30s");
    println!("criterion 02 PASS: NPP density matches Kummer form, sup {worst:.2e} ({secs:.1}s)");
}

#[test]
fn criterion_03_ebpp_against_grid_argmax_and_density_product() {
    // delta_hat versus a 10,001-point grid argmax of the marginal likelihood.
    for (s, t) in common::summary_fixtures(100, 303) {
        let delta = ebpp_delta_hat(&s, &t);
        let mut best = (f64::NEG_INFINITY, 0.0);
        for i in 1..=10_000 {
            let gamma = i as f64 / 10_000.0;
            let v = t.variance() + s.variance() / gamma;
            let ll = -0.5 * v.ln() - 0.5 * (t.estimate - s.estimate).powi(2) / v;
            if ll > best.0 {
                best = (ll, gamma);
            }
        }
        assert!(
            (delta - best.1).abs() < 1e-3,
            "delta_hat {delta} vs grid argmax {}",
            best.1
        );
    }
    // Two-case posterior equals the normalized product of the two densities.
    for (s, t) in common::summary_fixtures(100, 304) {
        let post = analyze_ebpp(&s, &t).unwrap().posterior;
        let d2 = (t.estimate - s.estimate).powi(2);
        let v_s = if d2 > t.variance() + s.variance() { d2 - t.variance() } else { s.variance() };
        // Product identity: N(θ|tT,vT) N(θ|tS,vS) = N(tT|tS, vT+vS) N(θ|m*,v*).
        let ln_norm = ln_norm_pdf(t.estimate, s.estimate, (t.variance() + v_s).sqrt());
        let mut rng = derive_rng(305, &[1]);
        for _ in 0..20 {
            let theta = post.mean() + post.sd() * rng.gen_range(-4.0..4.0);
            let direct = ln_norm_pdf(theta, t.estimate, t.std_err)
                + ln_norm_pdf(theta, s.estimate, v_s.sqrt());
            let via_post = ln_norm + ln_norm_pdf(theta, post.mean(), post.sd());
            assert!(
                (direct.exp() - via_post.exp()).abs() <= 1e-10 * direct.exp().max(1.0),
                "density product mismatch at theta={theta}"
            );
        }
    }
    println!("criterion 03 PASS: EBPP delta-hat within 1e-3 of argmax; posterior product exact to 1e-10");
}

#[test]
fn criterion_04_rmp_weight_update_brute_force() {
    let mut rng = derive_rng(404, &[4]);
    for (s, t) in common::summary_fixtures(1000, 404) {
        let w: f64 = rng.gen_range(0.01..0.99);
        let a = analyze_rmp_centered(&s, &t, w, 0.0).unwrap();
        let w_tilde = a.diagnostics.posterior_weight.unwrap();
        let unit_var = t.variance() * t.n_per_arm();
        let p_info = common::numeric_normal_marginal(t.estimate, t.std_err, s.estimate, s.variance());
        let p_vague = common::numeric_normal_marginal(t.estimate, t.std_err, 0.0, unit_var);
        let brute = w * p_info / (w * p_info + (1.0 - w) * p_vague);
        assert!(
            (w_tilde - brute).abs() < 1e-10,
            "w_tilde {w_tilde} vs brute force {brute}"
        );
    }
    // Identical components: exact no-op.
    let t = SummaryMeasure::new(0.3, 0.2, EffectScale::MeanDiff, 100, 100).unwrap();
    let s = SummaryMeasure::new(0.0, (0.2f64 * 0.2 * 100.0).sqrt(), EffectScale::MeanDiff, 100, 100)
        .unwrap();
    for w in [0.1, 0.37, 0.5, 0.9] {
        let a = analyze_rmp_centered(&s, &t, w, 0.0).unwrap();
        assert_eq!(a.diagnostics.posterior_weight, Some(w), "tie must be exact");
    }
    println!("criterion 04 PASS: RMP weight update matches brute force to 1e-10; ties exact");
}

#[test]
fn criterion_05_binomial_quadrature_vs_riemann_oracle() {
    // n = 5 per arm: the full 2001-point grid against a 1e6-point Riemann sum.
    let data = BinomialArmData::new(2, 3, 5, 5).unwrap();
    let n_grid = 2001;
    let worst: f64 = (0..n_grid)
        .map(|i| {
            let theta = -1.0 + 2.0 * i as f64 / (n_grid - 1) as f64;
            let ours = binomial_marginal_likelihood(theta, &data).unwrap();
            let oracle = common::riemann_binomial_marginal(theta, 2, 5, 3, 5, 1_000_000);
            (ours - oracle).abs()
        })
        .fold(0.0, f64::max);
    assert!(worst < 1e-8, "sup-norm {worst:e} >= 1e-8");

    // Aprepitant-scale stability: doubling the effect grid moves the
    // success probability by less than 1e-4.
    let target = BinomialArmData::new(79, 84, 143, 143).unwrap();
    let rule = preset("aprepitant").decision;
    let p1 = binomial_posterior(&target, &RateDiffPrior::no_borrowing())
        .unwrap()
        .posterior
        .prob_effective(&rule);
    let p2 = binomial_posterior_with_grid(&target, &RateDiffPrior::no_borrowing(), 4001)
        .unwrap()
        .posterior
        .prob_effective(&rule);
    assert!((p1 - p2).abs() < 1e-4, "grid doubling moved prob_effective by {}", (p1 - p2).abs());
    println!("criterion 05 PASS: binomial likelihood sup {worst:.2e} vs Riemann; grid-doubling stable");
}

#[test]
fn criterion_06_separate_analysis_calibration() {
    let t0 = std::time::Instant::now();
    let p = preset("teriflunomide");
    let null_drift = p.decision.theta0 - p.source.estimate;
    let sc = scenario("teriflunomide", 123, null_drift, MethodSpec::Separate, 10_000, 0, 606);
    let rec = estimate_oc(&sc).unwrap();
    assert!(
        rec.success_prob.lo <= 0.025 && 0.025 <= rec.success_prob.hi,
        "TIE {} with CI [{}, {}] does not contain 0.025",
        rec.success_prob.value,
        rec.success_prob.lo,
        rec.success_prob.hi
    );
    let secs = t0.elapsed().as_secs_f64();
    assert!(secs < 60.0, "criterion 6 took {secs:.1}s, budget 60s");
    println!(
        "criterion 06 PASS: separate-analysis TIE {:.4} in [{:.4}, {:.4}] ({secs:.1}s)",
        rec.success_prob.value, rec.success_prob.lo, rec.success_prob.hi
    );
}

#[test]
fn criterion_07_separate_analysis_coverage() {
    let p = preset("botox");
    let theta_s = p.source.estimate;
    for (i, drift) in [0.0, -theta_s / 2.0, -theta_s].into_iter().enumerate() {
        let sc = scenario("botox", 234, drift, MethodSpec::Separate, 10_000, 0, 707 + i as u64);
        let rec = estimate_oc(&sc).unwrap();
        assert!(
            (rec.coverage.value - 0.95).abs() <= 0.0065,
            "coverage {} at drift {drift} outside 0.95 +/- 0.0065",
            rec.coverage.value
        );
    }
    println!("criterion 07 PASS: separate-analysis coverage within 0.95 +/- 0.0065 at three drifts");
}

#[test]
fn criterion_08_tie_inflation_under_borrowing() {
    let t0 = std::time::Instant::now();
    let p = preset("belimumab");
    let null_drift = p.decision.theta0 - p.source.estimate;
    for method in [MethodSpec::Pooling, MethodSpec::ConditionalPp { gamma: 0.5 }] {
        let sc = scenario("belimumab", 140, null_drift, method, 10_000, 0, 808);
        let rec = estimate_oc(&sc).unwrap();
        assert!(
            rec.success_prob.lo > 0.025,
            "{}: TIE lower bound {} not above 0.025",
            method.label(),
            rec.success_prob.lo
        );
    }
    let secs = t0.elapsed().as_secs_f64();
    assert!(secs < 120.0, "criterion 8 took {secs:.1}s, budget 120s");
    println!("criterion 08 PASS: pooling and CPP(0.5) inflate the type 1 error ({secs:.1}s)");
}

#[test]
fn criterion_09_equivalent_tie_power_identity() {
    let t0 = std::time::Instant::now();
    let p = preset("belimumab");
    let null_drift = p.decision.theta0 - p.source.estimate;
    let method = MethodSpec::ConditionalPp { gamma: 0.25 };
    let null = scenario("belimumab", 93, null_drift, method, 100, 0, 909);
    let alt = scenario("belimumab", 93, 0.0, method, 100, 0, 909);
    let cmp = compare_at_equivalent_tie(&null, &alt, ComparatorTest::TTest, 50_000).unwrap();
    let freq = cmp.power_freq_at_alpha_b.expect("nonzero alpha_b");
    assert!(
        cmp.diff.abs() <= 2.0 * cmp.combined_se,
        "method power {} vs comparator {} differ by {} (> 2 x {})",
        cmp.power_method.value,
        freq.value,
        cmp.diff,
        cmp.combined_se
    );
    let secs = t0.elapsed().as_secs_f64();
    assert!(secs < 300.0, "criterion 9 took {secs:.1}s, budget 300s");
    println!(
        "criterion 09 PASS: CPP(0.25) power {:.4} = comparator {:.4} at alpha_B {:.4} ({secs:.1}s)",
        cmp.power_method.value, freq.value, cmp.alpha_b.value
    );
}

#[test]
fn criterion_10_power_loss_of_pvalue_pp() {
    let t0 = std::time::Instant::now();
    let p = preset("botox");
    let null_drift = p.decision.theta0 - p.source.estimate;
    let method = MethodSpec::PValuePp { k: 20.0, lambda: 20.0 };
    let null = scenario("botox", 58, null_drift, method, 100, 0, 1010);
    let alt = scenario("botox", 58, 0.0, method, 100, 0, 1010);
    let cmp = compare_at_equivalent_tie(&null, &alt, ComparatorTest::TTest, 50_000).unwrap();
    let freq = cmp.power_freq_at_alpha_b.expect("nonzero alpha_b");
    // One-sided: the comparator must beat the method by at least 4 sigma.
    assert!(
        cmp.diff < -4.0 * cmp.combined_se,
        "no detectable power loss: method {} vs comparator {} (diff {}, se {})",
        cmp.power_method.value,
        freq.value,
        cmp.diff,
        cmp.combined_se
    );
    let secs = t0.elapsed().as_secs_f64();
    println!(
        "criterion 10 PASS: p-PP(20, 20) power {:.4} < comparator {:.4} at alpha_B {:.4} ({secs:.1}s)",
        cmp.power_method.value, freq.value, cmp.alpha_b.value
    );
}

#[test]
fn criterion_11_prior_ess_measures() {
    // (a) Conjugate identity for all three measures.
    let reference_sd = 1.3;
    for n in [7.0f64, 58.0, 234.0] {
        let post = Posterior::normal(0.4, reference_sd / n.sqrt()).unwrap();
        assert!((ess_moment(&post, reference_sd, EssScale::Normal) - n).abs() < 1e-6);
        assert!((ess_precision(&post, reference_sd, EssScale::Normal) - n).abs() < 1e-6);
        assert!((ess_elir(&post, reference_sd, EssScale::Normal).unwrap() - n).abs() < 1e-6);
    }
    // (b) Pooling on the conjugate fixture: prior ESS ~ source size per arm.
    let n = 120u32;
    let se = reference_sd / (n as f64).sqrt();
    let s = SummaryMeasure::new(0.2, se, EffectScale::MeanDiff, n, n).unwrap();
    let t = SummaryMeasure::new(0.2, se, EffectScale::MeanDiff, n, n).unwrap();
    let pooled = analyze_pooling(&s, &t, &VaguePrior::default()).unwrap().posterior;
    let report = ess_report(&pooled, reference_sd, EssScale::Normal, n).unwrap();
    assert!(
        (report.moment - f64::from(n)).abs() / f64::from(n) < 0.01,
        "pooled prior ESS {} vs {}",
        report.moment,
        n
    );
    // (c) Adaptive methods: mean prior ESS nonincreasing in |drift| (3 sigma).
    let theta_s = preset("botox").source.estimate;
    for method in [MethodSpec::RobustMixture { w: 0.5 }, MethodSpec::EmpiricalBayesPp] {
        let mut last: Option<(f64, f64)> = None;
        for (i, drift) in [0.0, -theta_s / 2.0, -theta_s].into_iter().enumerate() {
            let sc = scenario("botox", 58, drift, method, 4000, 4000, 1111 + i as u64);
            let rec = estimate_oc(&sc).unwrap();
            let se = (rec.ess_moment.hi - rec.ess_moment.lo) / (2.0 * 1.96);
            if let Some((prev, prev_se)) = last {
                let slack = 3.0 * (se * se + prev_se * prev_se).sqrt();
                assert!(
                    rec.ess_moment.value <= prev + slack,
                    "{}: ESS rose from {prev} to {} at drift {drift}",
                    method.label(),
                    rec.ess_moment.value
                );
            }
            last = Some((rec.ess_moment.value, se));
        }
    }
    println!("criterion 11 PASS: ESS conjugate identities, pooling fixture, drift trend");
}

#[test]
fn criterion_12_drift_machinery() {
    // Closed-form Hellinger vs quadrature of (sqrt f - sqrt g)^2 / 2.
    let mut rng = derive_rng(1212, &[12]);
    for _ in 0..100 {
        let m1 = rng.gen_range(-2.0..2.0);
        let m2 = rng.gen_range(-2.0..2.0);
        let s1 = rng.gen_range(0.05..1.5);
        let s2 = rng.gen_range(0.05..1.5);
        let h = hellinger_normal(m1, s1, m2, s2);
        let lo = (m1 - 12.0 * s1).min(m2 - 12.0 * s2);
        let hi = (m1 + 12.0 * s1).max(m2 + 12.0 * s2);
        let n = 200_001;
        let dx = (hi - lo) / (n - 1) as f64;
        let mut acc = 0.0;
        for i in 0..n {
            let x = lo + i as f64 * dx;
            let f = ln_norm_pdf(x, m1, s1).exp();
            let g = ln_norm_pdf(x, m2, s2).exp();
            let d = f.sqrt() - g.sqrt();
            let w = if i == 0 || i == n - 1 { 0.5 } else { 1.0 };
            acc += w * d * d * dx;
        }
        let h2_quad = 0.5 * acc;
        assert!((h * h - h2_quad).abs() < 1e-8, "H^2 {} vs quadrature {}", h * h, h2_quad);
    }
    // Root at the 0.9 threshold, and the null interval inside the range,
    // for all six presets.
    for p in builtin_presets() {
        let first_n = p.sample_size_grid[0];
        let target_se = borrowsim_core::config::target_se_at(&p, first_n).unwrap();
        let (lo, hi) = drift_range(&p.source, target_se, &p.decision).unwrap();
        let null = p.decision.theta0 - p.source.estimate;
        assert!(lo <= null.min(0.0) && hi >= null.max(0.0), "{}: null drift outside range", p.name);
        // The Hellinger edge (when not clipped by attainability) sits at 0.9.
        let edge = if null < 0.0 { lo } else { hi };
        let h = hellinger_normal(
            p.source.estimate,
            p.source.std_err,
            p.source.estimate + edge,
            target_se,
        );
        if p.source.scale != EffectScale::RateDiff {
            assert!((h - 0.9).abs() < 1e-6, "{}: H at edge = {h}", p.name);
        } else {
            assert!(h <= 0.9 + 1e-6, "{}: clipped edge exceeds the threshold", p.name);
        }
    }
    println!("criterion 12 PASS: Hellinger quadrature, 0.9 root, null interval in range for all presets");
}

#[test]
fn criterion_13_quantile_se_ratio() {
    let formula = borrowsim_core::oc::quantile_se_ratio_asymptotic(0.5, 0.975);
    assert!((formula - 0.47).abs() < 0.01, "formula {formula}");
    let mut rng = derive_rng(1313, &[13]);
    let r = borrowsim_core::oc::quantile_se_ratio(10_000, 0.5, 0.975, 10_000, &mut rng);
    assert!((r - 0.47).abs() / 0.47 < 0.10, "empirical ratio {r}");
    println!("criterion 13 PASS: quantile SE ratio {r:.3} (formula {formula:.3}) near 0.47");
}

const DETERMINISM_CONFIG: &str = r#"
[study]
preset = "dapagliflozin"
sample_sizes = [33]
master_seed = 1414
n_reps_success = 300
n_reps_estimation = 150

[drift]
keywords = ["consistent", "null"]

[[methods]]
name = "separate"

[[methods]]
name = "conditional_pp"
gamma = [0.5]

[[methods]]
name = "robust_mixture"
w = [0.5]
"#;

#[test]
fn criterion_14_determinism_and_resume() {
    let cfg = parse_config_str(DETERMINISM_CONFIG).unwrap();
    let presets = builtin_presets();
    let d1 = tempfile::tempdir().unwrap();
    let d8 = tempfile::tempdir().unwrap();
    let opts1 = RunOptions { jobs: Some(1), out_dir: d1.path().into(), resume: false };
    let opts8 = RunOptions { jobs: Some(8), out_dir: d8.path().into(), resume: false };
    run_with(&cfg, DETERMINISM_CONFIG, &presets, &opts1).unwrap();
    run_with(&cfg, DETERMINISM_CONFIG, &presets, &opts8).unwrap();
    let t1 = std::fs::read(d1.path().join("results.csv")).unwrap();
    let t8 = std::fs::read(d8.path().join("results.csv")).unwrap();
    assert_eq!(t1, t8, "results differ between 1 and 8 workers");

    // Resume recomputes nothing and leaves the table byte-identical.
    let opts_resume = RunOptions { jobs: Some(8), out_dir: d8.path().into(), resume: true };
    let manifest = run_with(&cfg, DETERMINISM_CONFIG, &presets, &opts_resume).unwrap();
    assert!(manifest.scenarios.iter().all(|s| s.state == ScenarioState::Resumed));
    let t8b = std::fs::read(d8.path().join("results.csv")).unwrap();
    assert_eq!(t8, t8b);
    println!("criterion 14 PASS: byte-identical across worker counts; resume recomputes nothing");
}

const THROUGHPUT_CONFIG: &str = r#"
[study]
preset = "botox"
sample_sizes = [234, 117, 58, 39]
master_seed = 1515
n_reps_success = 2000
n_reps_estimation = 2000

[drift]
keywords = ["consistent", "partially_consistent", "null"]

[[methods]]
name = "separate"

[[methods]]
name = "pooling"

[[methods]]
name = "conditional_pp"
gamma = [0.25, 0.5]

[[methods]]
name = "normalized_pp"
xi_gamma = [0.5]
sd_gamma = [0.25]

[[methods]]
name = "empirical_bayes_pp"

[[methods]]
name = "p_value_pp"
k = [20.0]
lambda = [20.0]

[[methods]]
name = "ttp_diff"
eta = [0.05]

[[methods]]
name = "ttp_equiv"
eta = [0.05]
lambda = [20.0]

[[methods]]
name = "commensurate_pp"
tau = [0.01, 1.0]

[[methods]]
name = "robust_mixture"
w = [0.5]
"#;

#[test]
fn criterion_15_desk_scale_throughput() {
    let t0 = std::time::Instant::now();
    let cfg = parse_config_str(THROUGHPUT_CONFIG).unwrap();
    let presets = builtin_presets();
    let scenarios = borrowsim_core::config::expand_grid(&cfg, &presets).unwrap();
    assert_eq!(scenarios.len(), 4 * 3 * 12, "grid should be 4 sizes x 3 drifts x 12 configs");
    let dir = tempfile::tempdir().unwrap();
    let opts = RunOptions { jobs: Some(4), out_dir: dir.path().into(), resume: false };
    let manifest = run_with(&cfg, THROUGHPUT_CONFIG, &presets, &opts).unwrap();
    assert_eq!(manifest.n_failed_scenarios, 0);
    let secs = t0.elapsed().as_secs_f64();
    assert!(secs < 600.0, "throughput run took {secs:.0}s, budget 600s");
    println!("criterion 15 PASS: 144 scenarios x 2000 replicates in {secs:.0}s on 4 workers");
}
