use std::f64::consts::PI;

use proptest::prelude::*;
use skl_core::kernels::InnerProductKernel;
use skl_core::sphere::{
    binomial, funk_hecke_spectrum, funk_hecke_spectrum_auto, gegenbauer, harmonic_multiplicity,
    mercer_reconstruct, surface_area_ratio, SphereDim,
};

fn sd(d: usize) -> SphereDim {
    SphereDim::new(d).unwrap()
}

/// Composite Simpson on `[0, π]` of `Φ(cos θ) P_k(cos θ) sin^{d-1} θ`,
/// independent of the Gauss–Legendre path.
fn simpson_mu(phi: impl Fn(f64) -> f64, d: usize, k: usize, panels: usize) -> f64 {
    let h = PI / panels as f64;
    let f = |th: f64| {
        let t = th.cos();
        phi(t) * gegenbauer(sd(d), k, t).unwrap() * th.sin().powi(d as i32 - 1)
    };
    let mut s = f(0.0) + f(PI);
    for i in 1..panels {
        s += f(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    surface_area_ratio(sd(d)) * s * h / 3.0
}

#[test]
fn multiplicity_matches_binomial_difference() {
    for d in 1..=20u128 {
        for k in 1..=10u128 {
            let a = binomial(k + d, k).unwrap();
            let b = if k >= 2 {
                binomial(k + d - 2, k - 2).unwrap()
            } else {
                0
            };
            assert_eq!(
                harmonic_multiplicity(sd(d as usize), k as usize).unwrap(),
                a - b,
                "d={d} k={k}"
            );
        }
    }
}

#[test]
fn gegenbauer_orthogonality() {
    // Weight (1-t²)^{(d-2)/2} in t is sin^{d-1}θ dθ in θ.
    for d in [2, 3, 5, 8] {
        for j in 0..=10 {
            for k in 0..j {
                let h = PI / 4000.0;
                let f = |th: f64| {
                    let t = th.cos();
                    gegenbauer(sd(d), j, t).unwrap()
                        * gegenbauer(sd(d), k, t).unwrap()
                        * th.sin().powi(d as i32 - 1)
                };
                let mut s = f(0.0) + f(PI);
                for i in 1..4000 {
                    s += f(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
                }
                assert!((s * h / 3.0).abs() < 1e-10, "d={d} j={j} k={k}");
            }
        }
    }
}

#[test]
fn linear_kernel_spectrum() {
    let k = InnerProductKernel::power_series(vec![0.0, 1.0]).unwrap();
    let s = funk_hecke_spectrum(&k, sd(4), 3, 64).unwrap();
    for (i, g) in s.groups().iter().enumerate() {
        let want = if i == 1 { 0.2 } else { 0.0 };
        assert!((g.mu - want).abs() < 1e-14, "k={i} mu={}", g.mu);
    }
    let r = mercer_reconstruct(&s, sd(4), 0.3).unwrap();
    assert!((r - 0.3).abs() < 1e-14);
}

#[test]
fn ntk_trace_on_s2() {
    let k = InnerProductKernel::ntk();
    let s = funk_hecke_spectrum_auto(&k, sd(2), 30).unwrap();
    let err = (s.trace() - 1.0).abs();
    // Trace identity with K = 30: the NTK tail beyond degree 30 carries
    // about 5e-3 of the mass, so this check fails at the stated tolerance.
    assert!(err <= 1e-4, "trace error {err:e}, tail {:?}", s.tail_mass());
}

#[test]
fn rbf_mercer_at_half() {
    let k = InnerProductKernel::rbf();
    let s = funk_hecke_spectrum_auto(&k, sd(3), 30).unwrap();
    let r = mercer_reconstruct(&s, sd(3), 0.5).unwrap();
    assert!((r - (-0.5f64).exp()).abs() < 1e-6);
}

#[test]
fn gauss_legendre_matches_simpson() {
    let rbf = InnerProductKernel::rbf();
    let ntk = InnerProductKernel::ntk();
    for d in [2, 3, 7] {
        for (kern, name) in [(&rbf, "rbf"), (&ntk, "ntk")] {
            let s = funk_hecke_spectrum_auto(kern, sd(d), 8).unwrap();
            for k in 0..=8 {
                let want = simpson_mu(|t| kern.phi_clamped(t), d, k, 20_000).max(0.0);
                let got = s.groups()[k].mu;
                assert!(
                    (got - want).abs() < 1e-10,
                    "{name} d={d} k={k}: {got} vs {want}"
                );
            }
        }
    }
}

#[test]
fn trace_increases_to_phi_one() {
    let k = InnerProductKernel::rbf();
    for d in [2, 5, 10] {
        let mut prev = 0.0;
        for kmax in [2, 5, 10, 20] {
            let t = funk_hecke_spectrum_auto(&k, sd(d), kmax).unwrap().trace();
            assert!(t >= prev - 1e-14 && t <= 1.0 + 1e-12);
            prev = t;
        }
        assert!((prev - 1.0).abs() < 1e-10);
    }
}

#[test]
fn mercer_error_decreases_with_degree() {
    let grid: Vec<f64> = (0..=100).map(|i| -1.0 + 0.02 * i as f64).collect();
    for kern in [InnerProductKernel::rbf(), InnerProductKernel::ntk()] {
        for d in [2, 5] {
            let mut prev = f64::INFINITY;
            for kmax in [2, 4, 8, 16, 32] {
                let s = funk_hecke_spectrum_auto(&kern, sd(d), kmax).unwrap();
                let err = grid
                    .iter()
                    .map(|&t| {
                        (mercer_reconstruct(&s, sd(d), t).unwrap() - kern.phi(t).unwrap()).abs()
                    })
                    .fold(0.0, f64::max);
                assert!(err <= prev + 1e-12, "{} d={d} K={kmax}", kern.name());
                prev = err;
            }
        }
    }
}

proptest! {
    #[test]
    fn gegenbauer_bounded(d in 1usize..30, k in 0usize..=20, t in -1.0f64..=1.0) {
        let v = gegenbauer(sd(d), k, t).unwrap();
        prop_assert!(v.abs() <= 1.0 + 1e-12);
    }

    #[test]
    fn gegenbauer_parity(d in 1usize..30, k in 0usize..=20, t in -1.0f64..=1.0) {
        let a = gegenbauer(sd(d), k, t).unwrap();
        let b = gegenbauer(sd(d), k, -t).unwrap();
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        prop_assert!((a - sign * b).abs() <= 1e-12);
    }
}
