use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use skl_core::error::Error;
use skl_core::filters::log_space;
use skl_core::harness::{
    argmin_prefer_larger_lambda, build_target, cross_validate_krr, eval_target, fit_rate_loglog,
    run_experiment, select_gf_time, ExperimentConfig, ExperimentResult, TargetConfig,
    TimeSelection,
};
use skl_core::kernels::InnerProductKernel;
use skl_core::par::Execution;
use skl_core::regression::{fit_spectral, risk_from_predictions, Dataset};
use skl_core::sphere::{funk_hecke_spectrum_auto, sample_uniform, GegenbauerConvention, SphereDim};
use skl_core::target::TargetFunction;

fn config(v: Value) -> ExperimentConfig {
    ExperimentConfig::from_json(&v.to_string()).unwrap()
}

fn small_rate(master_seed: u64, d_list: &[usize], repeats: usize) -> ExperimentConfig {
    config(json!({
        "kernel": {"name": "rbf"},
        "algorithms": [
            {"filter": {"name": "gradient_flow"},
             "tuning": {"rule": "stopping_time", "c1": [0.0, 0.1, 1.0, 10.0, 100.0]}},
            {"filter": {"name": "krr"},
             "tuning": {"rule": "lambda_grid", "c2": [0.01, 1.0], "c3": [0.5, 1.0], "selection": "cv5"}},
            {"filter": {"name": "gradient_flow"}, "label": "gf_holdout",
             "tuning": {"rule": "stopping_time", "c1": [0.1, 10.0], "selection": "holdout"}}
        ],
        "target": {"type": "kernel_sections"},
        "gamma": 1.0,
        "d_list": d_list,
        "repeats": repeats,
        "test_size": 200,
        "master_seed": master_seed
    }))
}

fn rows_for(r: &ExperimentResult, d: usize) -> Vec<String> {
    r.rows
        .iter()
        .filter(|row| row.d == d)
        .map(|row| format!("{row:?}"))
        .collect()
}

#[test]
fn experiments_are_deterministic() {
    let cfg = small_rate(7, &[12, 20], 3);
    let a = run_experiment(&cfg, Execution::Parallel).unwrap();
    let b = run_experiment(&cfg, Execution::Sequential).unwrap();
    let c = run_experiment(&cfg, Execution::Parallel).unwrap();
    assert_eq!(a, b);
    assert_eq!(a, c);
    assert_eq!(a.rows.len(), 2 * 3 * 3);

    // Any subset of (d, trial) cells reruns identically.
    let only_20 = run_experiment(&small_rate(7, &[20], 2), Execution::Parallel).unwrap();
    let full: Vec<String> = rows_for(&a, 20).into_iter().take(2 * 3).collect();
    assert_eq!(rows_for(&only_20, 20), full);

    let other = run_experiment(&small_rate(8, &[12, 20], 3), Execution::Parallel).unwrap();
    assert_ne!(a.rows, other.rows);
}

#[test]
fn target_evaluation_examples() {
    let dim = SphereDim::new(4).unwrap();
    let kern = InnerProductKernel::rbf();
    let u = sample_uniform(dim, 1, 3);
    let f = TargetFunction::kernel_sections(kern.clone(), u.clone());
    assert!((eval_target(&f, &u).unwrap()[0] - 1.0).abs() < 1e-15);

    let g = build_target(
        &TargetConfig::Gegenbauer {
            k: 2,
            s: 1.9,
            convention: GegenbauerConvention::Ambient,
        },
        &kern,
        4,
        1,
    )
    .unwrap();
    let TargetFunction::GegenbauerDegree {
        xi, scale, mu_k, ..
    } = &g
    else {
        panic!("wrong target");
    };
    // N(4, 2) = 14 on S^4.
    assert!((scale - (mu_k.powf(1.9) * 14.0).sqrt()).abs() < 1e-15);
    let at_xi = skl_core::sphere::PointCloud::from_rows(dim, std::slice::from_ref(xi)).unwrap();
    assert!((eval_target(&g, &at_xi).unwrap()[0] - scale).abs() < 1e-13);
    assert_eq!(eval_target(&TargetFunction::Zero, &u).unwrap(), vec![0.0]);
}

#[test]
fn gegenbauer_target_norm_matches_mu_power() {
    for (d, k, s) in [(3usize, 2usize, 1.9), (6, 2, 1.0), (5, 3, 1.5)] {
        let dim = SphereDim::new(d).unwrap();
        let kern = InnerProductKernel::rbf();
        let xi = sample_uniform(dim, 1, 40 + d as u64).row(0).to_vec();
        let f =
            TargetFunction::gegenbauer_degree(&kern, dim, k, s, xi, Default::default()).unwrap();
        let mu = funk_hecke_spectrum_auto(&kern, dim, k).unwrap().groups()[k].mu;
        let test = sample_uniform(dim, 100_000, 50 + d as u64);
        let r = risk_from_predictions(&vec![0.0; test.len()], &f.eval(&test).unwrap());
        let want = mu.powf(s);
        assert!(
            (r.excess_risk - want).abs() <= 3.0 * r.mc_std_error,
            "d={d} k={k}: {} vs {want} (se {})",
            r.excess_risk,
            r.mc_std_error
        );
    }
}

#[test]
fn tuned_risk_never_exceeds_zero_estimator() {
    let cfg = config(json!({
        "kernel": {"name": "ntk"},
        "algorithms": [
            {"filter": {"name": "gradient_flow"},
             "tuning": {"rule": "stopping_time", "c1": [0.0, 0.01, 0.1, 1.0, 10.0, 100.0]}},
            {"filter": {"name": "gradient_flow"}, "label": "zero",
             "tuning": {"rule": "stopping_time", "c1": [0.0]}}
        ],
        "target": {"type": "kernel_sections"},
        "gamma": 1.0,
        "d_list": [8, 16],
        "repeats": 5,
        "test_size": 300,
        "sigma": 2.0,
        "master_seed": 3
    }));
    let r = run_experiment(&cfg, Execution::Parallel).unwrap();
    for t in r.rows.iter().filter(|r| r.algorithm == "gradient_flow") {
        let z = r
            .rows
            .iter()
            .find(|z| z.algorithm == "zero" && z.d == t.d && z.trial == t.trial)
            .unwrap();
        assert_eq!(z.tuned_param, 0.0);
        assert!(t.test_risk <= z.test_risk, "{t:?} vs {z:?}");
    }
}

#[test]
fn noiseless_long_flow_beats_zero() {
    let cfg = config(json!({
        "kernel": {"name": "rbf"},
        "algorithms": [
            {"filter": {"name": "gradient_flow"}, "label": "long",
             "tuning": {"rule": "stopping_time", "c1": [1e8], "exponent": 0.0}},
            {"filter": {"name": "gradient_flow"}, "label": "zero",
             "tuning": {"rule": "stopping_time", "c1": [0.0]}}
        ],
        "target": {"type": "kernel_sections"},
        "gamma": 1.0,
        "d_list": [5, 10],
        "repeats": 4,
        "test_size": 300,
        "sigma": 0.0,
        "master_seed": 4
    }));
    let r = run_experiment(&cfg, Execution::Parallel).unwrap();
    for (a, b) in r
        .algorithm("long")
        .unwrap()
        .per_d
        .iter()
        .zip(&r.algorithm("zero").unwrap().per_d)
    {
        assert!(
            a.mean_risk < b.mean_risk,
            "d={}: {} vs {}",
            a.d,
            a.mean_risk,
            b.mean_risk
        );
    }
}

#[test]
fn loglog_fit_under_multiplicative_noise() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let ns = log_space(10.0, 1000.0, 8);
    for truth in [-0.5, -1.0, -1.4] {
        let pts: Vec<(f64, f64)> = ns
            .iter()
            .map(|&n| (n, 3.0 * n.powf(truth) * rng.random_range(0.9..=1.1)))
            .collect();
        let fit = fit_rate_loglog(&pts).unwrap();
        assert!((fit.slope - truth).abs() <= 0.1, "{} vs {truth}", fit.slope);
    }
    let exact: Vec<(f64, f64)> = ns.iter().map(|&n| (n, 3.0 * n.powf(-1.4))).collect();
    assert!((fit_rate_loglog(&exact).unwrap().slope + 1.4).abs() <= 1e-12);
    assert!(fit_rate_loglog(&exact[..2]).is_err());
}

#[test]
fn config_rejects_unknown_and_invalid_fields() {
    let base = json!({
        "kernel": {"name": "rbf"},
        "algorithms": [{"filter": {"name": "krr"}, "tuning": {"rule": "fixed", "c": 0.05, "theta": 0.7}}],
        "target": {"type": "zero"},
        "gamma": 1.0,
        "d_list": [4, 8]
    });
    let cfg = ExperimentConfig::from_json(&base.to_string()).unwrap();
    assert_eq!(
        (cfg.repeats, cfg.test_size, cfg.sigma, cfg.n_max),
        (50, 1000, 1.0, 4000)
    );

    let mut extra = base.clone();
    extra["learning_rate"] = json!(0.1);
    assert!(matches!(
        ExperimentConfig::from_json(&extra.to_string()),
        Err(Error::Config(_))
    ));

    let mut nested = base.clone();
    nested["algorithms"][0]["tuning"]["extra"] = json!(1);
    assert!(ExperimentConfig::from_json(&nested.to_string()).is_err());

    let mut unsorted = base.clone();
    unsorted["d_list"] = json!([8, 4]);
    assert!(ExperimentConfig::from_json(&unsorted.to_string()).is_err());

    let mut too_big = base.clone();
    too_big["gamma"] = json!(5.0);
    too_big["d_list"] = json!([4, 8]);
    assert!(ExperimentConfig::from_json(&too_big.to_string()).is_err());

    let mut dup = base.clone();
    dup["algorithms"] = json!([base["algorithms"][0], base["algorithms"][0]]);
    assert!(ExperimentConfig::from_json(&dup.to_string()).is_err());
}

fn noiseless_instance(seed: u64) -> (Dataset, InnerProductKernel, TargetFunction) {
    let dim = SphereDim::new(3).unwrap();
    let kern = InnerProductKernel::rbf();
    let f = TargetFunction::kernel_sections(kern.clone(), sample_uniform(dim, 3, seed));
    let x = sample_uniform(dim, 60, seed + 1);
    let y = f.eval(&x).unwrap();
    (Dataset::new(x, y, 0.0).unwrap(), kern, f)
}

#[test]
fn cross_validation_prefers_small_lambda_without_noise() {
    let grid = log_space(1e-6, 1.0, 13);
    let median = grid[6];
    for seed in [1u64, 20, 300] {
        let (data, kern, _) = noiseless_instance(seed);
        let lam = cross_validate_krr(&data, &kern, &grid, seed).unwrap();
        assert!(lam <= median, "seed {seed}: {lam}");
    }
    let (data, kern, _) = noiseless_instance(5);
    assert_eq!(cross_validate_krr(&data, &kern, &[0.2], 0).unwrap(), 0.2);
    assert_eq!(
        argmin_prefer_larger_lambda(&[1.0, 1.0 + 1e-16], &[0.1, 0.2]),
        Some(1)
    );
}

#[test]
fn stopping_time_selection() {
    let dim = SphereDim::new(3).unwrap();
    let (data, kern, f) = noiseless_instance(9);
    let test = sample_uniform(dim, 500, 10);
    let f_test = f.eval(&test).unwrap();
    let grid = [0.0, 0.1, 1.0, 10.0, 100.0];
    let holdout = select_gf_time(&data, &kern, &grid, TimeSelection::Holdout { seed: 1 }).unwrap();
    assert!(holdout > 0.0);
    let best = select_gf_time(
        &data,
        &kern,
        &grid,
        TimeSelection::BestOnTest {
            x: &test,
            f: &f_test,
        },
    )
    .unwrap();
    assert!(best > 0.0);
    let risk = |t: f64| {
        let est = fit_spectral(
            &kern,
            &skl_core::filters::FilterSpec::gradient_flow_time(t).unwrap(),
            &data,
        )
        .unwrap();
        risk_from_predictions(&est.predict(&test).unwrap(), &f_test).excess_risk
    };
    assert!(risk(best) <= risk(holdout));
}

fn saturation_config(
    s: f64,
    theta_krr: f64,
    theta_gf: f64,
    d_list: &[usize],
    repeats: usize,
) -> ExperimentConfig {
    config(json!({
        "kind": "saturation",
        "kernel": {"name": "rbf"},
        "algorithms": [
            {"filter": {"name": "krr"}, "tuning": {"rule": "fixed", "c": 0.05, "theta": theta_krr}},
            {"filter": {"name": "gradient_flow"}, "tuning": {"rule": "fixed", "c": 0.05, "theta": theta_gf}}
        ],
        "target": {"type": "gegenbauer", "k": 2, "s": s},
        "gamma": 1.8,
        "d_list": d_list,
        "repeats": repeats,
        "test_size": 500,
        "master_seed": 1
    }))
}

#[test]
fn no_saturation_for_smooth_enough_targets() {
    // s = 1 <= τ = 1: both algorithms reach the same rate; balanced θ = 0.5 for both.
    let cfg = saturation_config(1.0, 0.5, 0.5, &[8, 12, 16, 24], 10);
    let r = run_experiment(&cfg, Execution::Parallel).unwrap();
    assert_eq!(r.saturation_observed, Some(false), "{:?}", r.algorithms);
    assert!(
        r.warnings.iter().all(|w| !w.contains("balanced")),
        "{:?}",
        r.warnings
    );
}

#[test]
fn swapped_thetas_warn() {
    let cfg = saturation_config(1.9, 0.5, 0.7, &[6, 8, 10], 1);
    let r = run_experiment(&cfg, Execution::Sequential).unwrap();
    assert!(r.saturation_observed.is_some());
    assert!(
        r.warnings
            .iter()
            .any(|w| w.contains("deviates from the balanced exponents")),
        "{:?}",
        r.warnings
    );
    let ok = saturation_config(1.9, 0.7, 0.5, &[6, 8, 10], 1);
    let r = run_experiment(&ok, Execution::Sequential).unwrap();
    assert!(r.warnings.iter().all(|w| !w.contains("balanced")));
}

#[test]
fn failing_trials_abort_with_partial_result() {
    // η far above 1/(2 λ_max(G)) fails every trial.
    let cfg = config(json!({
        "kernel": {"name": "rbf"},
        "algorithms": [
            {"filter": {"name": "gradient_descent", "eta": 100.0},
             "tuning": {"rule": "fixed", "c": 0.05, "theta": 0.5}},
            {"filter": {"name": "krr"}, "tuning": {"rule": "fixed", "c": 0.05, "theta": 0.5}}
        ],
        "target": {"type": "kernel_sections"},
        "gamma": 1.0,
        "d_list": [5, 8],
        "repeats": 3,
        "test_size": 50
    }));
    match run_experiment(&cfg, Execution::Parallel) {
        Err(Error::TooManyFailures {
            failed,
            total,
            partial,
        }) => {
            assert_eq!((failed, total), (6, 12));
            assert_eq!(partial.rows.len(), 6);
            assert!(partial
                .failures
                .iter()
                .all(|f| f.code == Error::StepSize(String::new()).code()));
        }
        other => panic!("expected too many failures, got {other:?}"),
    }
}
