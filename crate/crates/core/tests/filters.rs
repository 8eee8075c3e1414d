use proptest::prelude::*;
use skl_core::filters::{check_filter_axioms, log_space, FilterFamily, FilterSpec};

fn families() -> Vec<FilterFamily> {
    vec![
        FilterFamily::Krr,
        FilterFamily::IteratedRidge { q: 1 },
        FilterFamily::IteratedRidge { q: 3 },
        FilterFamily::GradientFlow,
        FilterFamily::GradientDescent { eta: 0.25 },
    ]
}

fn z_grid() -> Vec<f64> {
    let mut z = vec![0.0];
    z.extend(log_space(1e-10, 1.0, 300));
    z
}

proptest! {
    #[test]
    fn remainder_identity(z in 0.0f64..=1.0, log_lam in -4.0f64..0.0, which in 0usize..5) {
        let f = FilterSpec::new(families()[which], 10f64.powf(log_lam)).unwrap();
        let (phi, psi) = (f.phi(z), f.psi(z));
        prop_assert!((psi + z * phi - 1.0).abs() <= 1e-12, "{:?} z={} psi={} phi={}", f, z, psi, phi);
        prop_assert!((-1e-15..=1.0 + 1e-15).contains(&psi));
        prop_assert!(phi >= 0.0);
    }
}

#[test]
fn remainder_identity_on_grid() {
    for fam in families() {
        for lam in log_space(1e-4, 0.9, 20) {
            let f = FilterSpec::new(fam, lam).unwrap();
            for z in z_grid() {
                let r = f.psi(z) + z * f.phi(z) - 1.0;
                assert!(r.abs() <= 1e-12, "{} lam={lam} z={z}: {r:e}", fam.label());
            }
        }
    }
}

fn gd_gf_gap(eta: f64, lam: f64) -> f64 {
    let gd = FilterSpec::new(FilterFamily::GradientDescent { eta }, lam).unwrap();
    let gf = FilterSpec::new(FilterFamily::GradientFlow, lam).unwrap();
    z_grid()
        .into_iter()
        .map(|z| (gd.phi(z) - gf.phi(z)).abs())
        .fold(0.0, f64::max)
}

#[test]
fn gradient_descent_tends_to_flow() {
    let lam = 0.1;
    let coarse = gd_gf_gap(1e-3, lam);
    let fine = gd_gf_gap(1e-4, lam);
    assert!(fine < 1e-2, "gap {fine:e}");
    // First order in eta.
    let ratio = coarse / fine;
    assert!((8.0..12.5).contains(&ratio), "ratio {ratio}");
}

#[test]
fn iterated_ridge_one_is_ridge() {
    for lam in log_space(1e-4, 0.9, 30) {
        let a = FilterSpec::new(FilterFamily::IteratedRidge { q: 1 }, lam).unwrap();
        let b = FilterSpec::krr(lam).unwrap();
        for z in z_grid() {
            let (pa, pb) = (a.phi(z), b.phi(z));
            assert!((pa - pb).abs() <= 1e-14 * pb.max(1.0), "lam={lam} z={z}");
            assert!((a.psi(z) - b.psi(z)).abs() <= 1e-14);
        }
    }
}

#[test]
fn z_phi_non_increasing_in_lambda() {
    let lams = log_space(1e-4, 0.9, 50);
    for fam in families() {
        for z in z_grid() {
            let vals: Vec<f64> = lams
                .iter()
                .map(|&l| z * FilterSpec::new(fam, l).unwrap().phi(z))
                .collect();
            for w in vals.windows(2) {
                assert!(
                    w[1] <= w[0] + 1e-12,
                    "{} z={z}: {} -> {}",
                    fam.label(),
                    w[0],
                    w[1]
                );
            }
        }
    }
}

#[test]
fn documented_values() {
    let gd = FilterSpec::new(FilterFamily::GradientDescent { eta: 0.1 }, 0.1).unwrap();
    let want = 0.9f64.powi(100);
    assert!((gd.psi(1.0) - want).abs() <= 1e-12 * want);
    assert!((want - 2.6561e-5).abs() < 1e-9);

    let ir = FilterSpec::new(FilterFamily::IteratedRidge { q: 2 }, 0.5).unwrap();
    assert!((ir.phi(0.5) - 1.5).abs() < 1e-15);
    // Removable singularity limits.
    assert!((ir.phi(0.0) - 4.0).abs() < 1e-15);
    let gd0 = FilterSpec::new(FilterFamily::GradientDescent { eta: 0.1 }, 0.1).unwrap();
    assert!((gd0.phi(0.0) - 10.0).abs() < 1e-12);
}

#[test]
fn all_families_pass_axioms() {
    let z = z_grid();
    let lams = log_space(1e-3, 0.5, 12);
    for fam in families() {
        let r = check_filter_axioms(fam, &lams, &z, 1.0).unwrap();
        assert!(r.passed(), "{r}");
        for c in r.constants.iter().flatten() {
            assert!(c.is_finite() && *c > 0.0, "{r}");
        }
    }
}
