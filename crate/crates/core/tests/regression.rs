use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use skl_core::filters::FilterSpec;
use skl_core::kernels::{gram_matrix, InnerProductKernel};
use skl_core::regression::{
    excess_risk_mc, fit_gf_euler_oracle, fit_krr_direct, fit_spectral, risk_decomposition, Dataset,
    SpectralSolver,
};
use skl_core::sphere::{
    funk_hecke_spectrum_auto, harmonic_multiplicity_f64, sample_uniform, SphereDim,
};
use skl_core::target::TargetFunction;

fn random_data(d: usize, n: usize, seed: u64) -> Dataset {
    let x = sample_uniform(SphereDim::new(d).unwrap(), n, seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let y = (0..n)
        .map(|_| rng.sample::<f64, _>(StandardNormal))
        .collect();
    Dataset::new(x, y, 1.0).unwrap()
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |a, x| a.max(x.abs()))
}

#[test]
fn spectral_ridge_matches_direct_solve() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for i in 0..20 {
        let d = rng.random_range(1..=20);
        let n = rng.random_range(2..=200);
        let lam = 10f64.powf(rng.random_range(-4.0..=0.0));
        let kern = if i % 2 == 0 {
            InnerProductKernel::rbf()
        } else {
            InnerProductKernel::ntk()
        };
        let data = random_data(d, n, 100 + i);
        let a = fit_spectral(&kern, &FilterSpec::krr(lam).unwrap(), &data).unwrap();
        let b = fit_krr_direct(&kern, lam, &data).unwrap();
        let test = sample_uniform(SphereDim::new(d).unwrap(), 50, 900 + i);
        let pa = a.predict(&test).unwrap();
        let pb = b.predict(&test).unwrap();
        let diff: Vec<f64> = pa.iter().zip(&pb).map(|(x, y)| x - y).collect();
        let rel = max_abs(&diff) / max_abs(&pb);
        assert!(rel <= 1e-8, "d={d} n={n} lam={lam:e}: {rel:e}");
    }
}

#[test]
fn direct_solve_residual() {
    let kern = InnerProductKernel::ntk();
    let data = random_data(6, 80, 3);
    let lam = 1e-3;
    let est = fit_krr_direct(&kern, lam, &data).unwrap();
    let g = gram_matrix(&kern, &data.x);
    let n = data.n();
    let mut res2 = 0.0;
    for i in 0..n {
        let mut r = n as f64 * lam * est.alpha[i] - data.y[i];
        for j in 0..n {
            r += g.values[(i, j)] * est.alpha[j];
        }
        res2 += r * r;
    }
    let ynorm = data.y.iter().map(|v| v * v).sum::<f64>().sqrt();
    assert!(res2.sqrt() / ynorm <= 1e-10);
}

#[test]
fn euler_oracle_matches_flow() {
    let kern = InnerProductKernel::ntk();
    let data = random_data(5, 30, 8);
    let t = 10.0;
    let exact = fit_spectral(&kern, &FilterSpec::gradient_flow_time(t).unwrap(), &data).unwrap();
    let euler = fit_gf_euler_oracle(&kern, t, 1e-3 * t, &data).unwrap();
    let test = sample_uniform(SphereDim::new(5).unwrap(), 200, 9);
    let a = exact.predict(&test).unwrap();
    let b = euler.predict(&test).unwrap();
    let err = a
        .iter()
        .zip(&b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max);
    assert!(err <= 1e-3, "{err:e}");
}

#[test]
fn flow_training_error_non_increasing() {
    let kern = InnerProductKernel::rbf();
    let data = random_data(4, 60, 21);
    let solver = SpectralSolver::new(&kern, &data.x).unwrap();
    let g = gram_matrix(&kern, &data.x);
    let n = data.n();
    let mut prev = f64::INFINITY;
    for t in [0.0, 0.1, 1.0, 3.0, 10.0, 30.0, 100.0, 1e3, 1e4, 1e5] {
        let est = solver
            .fit(&FilterSpec::gradient_flow_time(t).unwrap(), &data.y)
            .unwrap();
        let mut r2 = 0.0;
        for i in 0..n {
            let mut fi = 0.0;
            for j in 0..n {
                fi += g.values[(i, j)] * est.alpha[j];
            }
            r2 += (data.y[i] - fi).powi(2);
        }
        let r = r2.sqrt();
        assert!(r <= prev * (1.0 + 1e-12), "t={t}: {r} > {prev}");
        prev = r;
    }
}

#[test]
fn infinite_regularization_gives_zero() {
    let kern = InnerProductKernel::rbf();
    let data = random_data(3, 25, 4);
    let test = sample_uniform(SphereDim::new(3).unwrap(), 40, 5);
    let big = fit_spectral(&kern, &FilterSpec::krr(1e12).unwrap(), &data).unwrap();
    assert!(max_abs(&big.predict(&test).unwrap()) < 1e-10);
    let inf = fit_spectral(&kern, &FilterSpec::krr(f64::INFINITY).unwrap(), &data).unwrap();
    assert!(inf.predict(&test).unwrap().iter().all(|p| *p == 0.0));
}

#[test]
fn long_flow_interpolates() {
    let kern = InnerProductKernel::rbf();
    let data = random_data(5, 20, 6);
    let solver = SpectralSolver::new(&kern, &data.x).unwrap();
    let lmin = solver.eigen().eigenvalues[0];
    assert!(lmin > 0.0);
    let est = solver
        .fit(
            &FilterSpec::gradient_flow_time(1e8 / lmin).unwrap(),
            &data.y,
        )
        .unwrap();
    let fit = est.predict(&data.x).unwrap();
    let err = fit
        .iter()
        .zip(&data.y)
        .map(|(f, y)| (f - y).abs())
        .fold(0.0, f64::max);
    assert!(err <= 1e-6, "{err:e}");
}

#[test]
fn zero_estimator_risk_is_target_norm() {
    // ‖K(u, ·)‖²_{L²} = Σ_k μ_k² N(d, k) by the addition formula.
    let dim = SphereDim::new(3).unwrap();
    let kern = InnerProductKernel::rbf();
    let spec = funk_hecke_spectrum_auto(&kern, dim, 30).unwrap();
    let want: f64 = spec
        .groups()
        .iter()
        .enumerate()
        .map(|(k, g)| g.mu * g.mu * harmonic_multiplicity_f64(dim, k))
        .sum();
    let anchor = sample_uniform(dim, 1, 77);
    let f = TargetFunction::kernel_sections(kern.clone(), anchor);
    let data = random_data(3, 10, 78);
    let zero = fit_spectral(&kern, &FilterSpec::gradient_flow_time(0.0).unwrap(), &data).unwrap();
    let test = sample_uniform(dim, 20_000, 79);
    let r = excess_risk_mc(&zero, &f, &test).unwrap();
    assert!(
        (r.excess_risk - want).abs() <= 3.0 * r.mc_std_error,
        "{} vs {want} (se {})",
        r.excess_risk,
        r.mc_std_error
    );
}

#[test]
fn decomposition_limits() {
    let dim = SphereDim::new(4).unwrap();
    let kern = InnerProductKernel::ntk();
    let x = sample_uniform(dim, 40, 31);
    let f = TargetFunction::kernel_sections(kern.clone(), sample_uniform(dim, 3, 32));
    let test = sample_uniform(dim, 2000, 33);
    let filt = FilterSpec::krr(1e-2).unwrap();
    let quiet = risk_decomposition(&kern, &filt, &x, &f, 0.0, &test).unwrap();
    assert_eq!(quiet.variance, Some(0.0));
    assert_eq!(quiet.excess_risk, quiet.bias_sq.unwrap());

    let huge = FilterSpec::krr(1e12).unwrap();
    let r = risk_decomposition(&kern, &huge, &x, &f, 1.0, &test).unwrap();
    let truth = f.eval(&test).unwrap();
    let norm = truth.iter().map(|v| v * v).sum::<f64>() / truth.len() as f64;
    assert!((r.bias_sq.unwrap() - norm).abs() <= 1e-9 * norm);
    assert!(r.variance.unwrap() < 1e-20);
}
