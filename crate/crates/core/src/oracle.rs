//! Data-free spectral quantities on grouped spectra.
//!
//! With eigenvalue groups `(μ_k, m_k)` and per-degree target energies `e_k`:
//!
//! * `N₁ = Σ_k m_k μ_k φ_λ(μ_k)`
//! * `N₂ = Σ_k m_k (μ_k φ_λ(μ_k))²`
//! * `M₂ = Σ_k ψ_λ(μ_k)² e_k`
//!
//! and the dominant-term risk is `M₂ + σ² N₂ / n`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Error, Result};
use crate::filters::{FilterFamily, FilterSpec, Qualification};
use crate::harness::fit_rate_loglog;
use crate::kernels::InnerProductKernel;
use crate::rates::{balanced_lambda_exponent, phase_index, spectral_rate_exponent, RateQuery};
use crate::sphere::{
    funk_hecke_spectrum_auto, gegenbauer_table, harmonic_multiplicity, sample_uniform_rng,
    SphereDim,
};
use crate::target::TargetFunction;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpectrumGroup {
    pub mu: f64,
    pub mult: f64,
    /// Exact multiplicity when it fits in `u128`.
    pub mult_exact: Option<u128>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum SpectrumOrigin {
    FunkHecke { kernel: String, d: usize },
    Idealized { d: usize },
    Custom,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SpectrumModel {
    groups: Vec<SpectrumGroup>,
    origin: SpectrumOrigin,
    tail_mass: Option<f64>,
}

impl SpectrumModel {
    pub(crate) fn new(
        groups: Vec<SpectrumGroup>,
        origin: SpectrumOrigin,
        tail_mass: Option<f64>,
    ) -> Self {
        Self {
            groups,
            origin,
            tail_mass,
        }
    }

    /// `μ_k = d^{-k}`, `m_k = d^k` for `k = 0..=K`.
    pub fn idealized(d: usize, max_degree: usize) -> Result<Self> {
        if d < 2 {
            return Err(invalid("idealized spectrum needs d >= 2"));
        }
        let df = d as f64;
        let groups = (0..=max_degree)
            .map(|k| {
                let mult = df.powi(k as i32);
                let exact = (d as u128).checked_pow(k as u32);
                SpectrumGroup {
                    mu: df.powi(-(k as i32)),
                    mult,
                    mult_exact: exact,
                }
            })
            .collect();
        Ok(Self::new(groups, SpectrumOrigin::Idealized { d }, None))
    }

    /// Arbitrary `(μ_k, m_k)` pairs; `μ_k >= 0`, `m_k > 0`.
    pub fn custom(pairs: &[(f64, f64)]) -> Result<Self> {
        let mut groups = Vec::with_capacity(pairs.len());
        for (k, &(mu, mult)) in pairs.iter().enumerate() {
            if !(mu.is_finite() && mu >= 0.0 && mult.is_finite() && mult > 0.0) {
                return Err(invalid(format!(
                    "invalid group {k}: mu = {mu}, mult = {mult}"
                )));
            }
            let exact = (mult.fract() == 0.0 && mult < 2f64.powi(100)).then_some(mult as u128);
            groups.push(SpectrumGroup {
                mu,
                mult,
                mult_exact: exact,
            });
        }
        Ok(Self::new(groups, SpectrumOrigin::Custom, None))
    }

    pub fn groups(&self) -> &[SpectrumGroup] {
        &self.groups
    }

    pub fn origin(&self) -> &SpectrumOrigin {
        &self.origin
    }

    /// `Φ(1) - Σ μ_k m_k` when `Φ(1)` is known.
    pub fn tail_mass(&self) -> Option<f64> {
        self.tail_mass
    }

    pub fn max_degree(&self) -> usize {
        self.groups.len().saturating_sub(1)
    }

    /// `Σ_k μ_k m_k`.
    pub fn trace(&self) -> f64 {
        self.groups.iter().map(|g| g.mu * g.mult).sum()
    }
}

/// Per-degree squared coefficient mass `e_k` of a target.
#[derive(Clone, Debug, PartialEq)]
pub struct TargetCoefficients {
    pub energies: Vec<f64>,
    pub s: f64,
    /// Lower bound `c₀` on `μ_k^{-s} e_k` over populated degrees.
    pub c0: f64,
}

impl TargetCoefficients {
    /// `Σ_k μ_k^{-s} e_k` over degrees with `e_k > 0`.
    pub fn source_norm(&self, spectrum: &SpectrumModel) -> f64 {
        self.energies
            .iter()
            .zip(spectrum.groups())
            .filter(|(e, _)| **e > 0.0)
            .map(|(e, g)| e * g.mu.powf(-self.s))
            .sum()
    }

    /// Energies of a concrete target function on `S^d`.
    ///
    /// Kernel sections `Σ_a K(u_a, ·)`: `e_k = μ_k² N(d,k) Σ_{a,b} P_k(<u_a, u_b>)`.
    /// Gegenbauer targets of degree `k` (ambient convention): `e_k = μ_k^s`.
    /// `s` is recorded as given; `c0` is the smallest `μ_k^{-s} e_k` over
    /// degrees with `μ_k, e_k > 0`.
    pub fn from_target(
        spectrum: &SpectrumModel,
        target: &TargetFunction,
        dim: SphereDim,
        s: f64,
    ) -> Result<Self> {
        let groups = spectrum.groups();
        let mut energies = vec![0.0; groups.len()];
        match target {
            TargetFunction::Zero => {}
            TargetFunction::KernelSections { anchors, .. } => {
                if anchors.dim() != dim {
                    return Err(Error::DimensionMismatch {
                        expected: dim.ambient(),
                        got: anchors.dim().ambient(),
                    });
                }
                let mut sums = vec![0.0; groups.len()];
                let mut p = vec![0.0; groups.len()];
                for u in anchors.rows() {
                    for v in anchors.rows() {
                        let t = crate::sphere::dot(u, v).clamp(-1.0, 1.0);
                        gegenbauer_table(dim.ambient(), t, &mut p);
                        for (s, pk) in sums.iter_mut().zip(&p) {
                            *s += pk;
                        }
                    }
                }
                for (k, g) in groups.iter().enumerate() {
                    energies[k] = (g.mu * g.mu * g.mult * sums[k]).max(0.0);
                }
            }
            TargetFunction::GegenbauerDegree {
                k,
                s: ts,
                convention,
                ..
            } => {
                if *convention != crate::sphere::GegenbauerConvention::Ambient {
                    return Err(Error::Unsupported(
                        "energies are defined for the ambient Gegenbauer convention only".into(),
                    ));
                }
                if *k < energies.len() {
                    energies[*k] = groups[*k].mu.powf(*ts);
                }
            }
        }
        let c0 = energies
            .iter()
            .zip(groups)
            .filter(|(e, g)| **e > 0.0 && g.mu > 0.0)
            .map(|(e, g)| e * g.mu.powf(-s))
            .fold(f64::INFINITY, f64::min);
        Ok(Self {
            energies,
            s,
            c0: if c0.is_finite() { c0 } else { 0.0 },
        })
    }
}

/// `e_k = μ_k^s` for `k <= q`, zero above; `c₀ = 1` and source norm `q + 1`.
pub fn source_coefficients(
    spectrum: &SpectrumModel,
    s: f64,
    q: usize,
) -> Result<TargetCoefficients> {
    if !(s.is_finite() && s > 0.0) {
        return Err(invalid(format!("s = {s} must be positive")));
    }
    let groups = spectrum.groups();
    if q >= groups.len() {
        return Err(invalid(format!(
            "q = {q} exceeds the spectrum's maximal degree {}",
            spectrum.max_degree()
        )));
    }
    let mut energies = vec![0.0; groups.len()];
    for k in 0..=q {
        let mu = groups[k].mu;
        if mu <= 0.0 {
            return Err(invalid(format!(
                "mu_{k} = 0 but degree {k} <= q must be populated"
            )));
        }
        energies[k] = mu.powf(s);
    }
    Ok(TargetCoefficients {
        energies,
        s,
        c0: 1.0,
    })
}

pub fn n1(spectrum: &SpectrumModel, filter: &FilterSpec) -> f64 {
    spectrum
        .groups()
        .iter()
        .map(|g| g.mult * g.mu * filter.phi(g.mu))
        .sum()
}

pub fn n2(spectrum: &SpectrumModel, filter: &FilterSpec) -> f64 {
    spectrum
        .groups()
        .iter()
        .map(|g| g.mult * (g.mu * filter.phi(g.mu)).powi(2))
        .sum()
}

pub fn m2(spectrum: &SpectrumModel, target: &TargetCoefficients, filter: &FilterSpec) -> f64 {
    spectrum
        .groups()
        .iter()
        .zip(&target.energies)
        .filter(|(_, e)| **e > 0.0)
        .map(|(g, e)| filter.psi(g.mu).powi(2) * e)
        .sum()
}

/// `M₂ + σ² N₂ / n`.
pub fn theoretical_risk(
    spectrum: &SpectrumModel,
    target: &TargetCoefficients,
    filter: &FilterSpec,
    n: f64,
    sigma: f64,
) -> Result<f64> {
    if !(n >= 1.0) {
        return Err(invalid(format!("n = {n} must be >= 1")));
    }
    Ok(m2(spectrum, target, filter) + sigma * sigma * n2(spectrum, filter) / n)
}

#[derive(Clone, Debug, PartialEq)]
pub struct M1Estimate {
    pub value: f64,
    pub sample_size: usize,
    /// Always true: a maximum over samples bounds the essential sup from below.
    pub is_lower_bound: bool,
}

/// Sampled lower bound on `sup_x |f_⋆(x) - f_λ(x)|`, where `f_λ` is the
/// population-filtered target `Σ_j (1 - ψ_λ(λ_j)) f_j φ_j`.
///
/// Only finitely-supported targets are accepted: zero and single-degree
/// Gegenbauer targets, for which `f_⋆ - f_λ = ψ_λ(μ_k) f_⋆`.
pub fn m1_sampled(
    kernel: &InnerProductKernel,
    target: &TargetFunction,
    filter: &FilterSpec,
    dim: SphereDim,
    sample_size: usize,
    seed: u64,
) -> Result<M1Estimate> {
    let k = match target {
        TargetFunction::Zero => {
            return Ok(M1Estimate {
                value: 0.0,
                sample_size,
                is_lower_bound: true,
            })
        }
        TargetFunction::GegenbauerDegree { k, convention, .. } => {
            if *convention != crate::sphere::GegenbauerConvention::Ambient {
                return Err(Error::Unsupported(
                    "M1 needs a target expanded in true spherical harmonics".into(),
                ));
            }
            *k
        }
        TargetFunction::KernelSections { .. } => {
            return Err(Error::Unsupported(
                "kernel-section targets populate every degree; M1 is not computable".into(),
            ))
        }
    };
    let spectrum = funk_hecke_spectrum_auto(kernel, dim, k)?;
    let psi = filter.psi(spectrum.groups()[k].mu);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = sample_uniform_rng(dim, sample_size, &mut rng);
    let vals = target.eval(&x)?;
    let max = vals.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    Ok(M1Estimate {
        value: psi.abs() * max,
        sample_size,
        is_lower_bound: true,
    })
}

/// One row of an oracle sweep.
#[derive(Clone, Debug, PartialEq)]
pub struct OraclePoint {
    pub d: usize,
    pub n: f64,
    pub lambda: f64,
    pub ell: f64,
    pub m2: f64,
    pub n1: f64,
    pub n2: f64,
    pub risk: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SlopeFit {
    pub fitted: f64,
    pub fitted_stderr: f64,
    pub theory: f64,
    pub abs_diff: f64,
    pub points: Vec<OraclePoint>,
}

/// Oracle risk at one `d`: idealized spectrum with `K = p + 3`, energies with
/// `q = p + 1`, `n = d^γ`, `λ = d^{-ℓ}` with the balanced `ℓ`.
pub fn oracle_point(
    s: f64,
    tau: f64,
    gamma: f64,
    d: usize,
    family: FilterFamily,
    sigma: f64,
) -> Result<OraclePoint> {
    let p = phase_index(s, gamma);
    let spectrum = SpectrumModel::idealized(d, p + 3)?;
    let target = source_coefficients(&spectrum, s, p + 1)?;
    let ell = balanced_lambda_exponent(s, tau, gamma)?.ell;
    let df = d as f64;
    let n = df.powf(gamma);
    let lambda = df.powf(-ell);
    let filter = FilterSpec::new(family, lambda)?;
    let m2v = m2(&spectrum, &target, &filter);
    let n1v = n1(&spectrum, &filter);
    let n2v = n2(&spectrum, &filter);
    Ok(OraclePoint {
        d,
        n,
        lambda,
        ell,
        m2: m2v,
        n1: n1v,
        n2: n2v,
        risk: m2v + sigma * sigma * n2v / n,
    })
}

/// Least-squares slope of `ln risk` against `ln d` over an oracle sweep,
/// compared with `-spectral_rate_exponent`.
pub fn risk_slope_fit(
    s: f64,
    tau: f64,
    gamma: f64,
    d_list: &[usize],
    family: FilterFamily,
) -> Result<SlopeFit> {
    if d_list.len() < 4 {
        return Err(invalid("risk_slope_fit needs at least four dimensions"));
    }
    if family.qualification() != Qualification::from_value(tau) {
        return Err(invalid(format!(
            "filter {} has qualification {}, not tau = {tau}",
            family.label(),
            family.qualification()
        )));
    }
    let theory = -spectral_rate_exponent(RateQuery::new(s, tau, gamma)?).exponent;
    let points = d_list
        .iter()
        .map(|&d| oracle_point(s, tau, gamma, d, family, 1.0))
        .collect::<Result<Vec<_>>>()?;
    let fit = fit_rate_loglog(
        &points
            .iter()
            .map(|p| (p.d as f64, p.risk))
            .collect::<Vec<_>>(),
    )?;
    Ok(SlopeFit {
        fitted: fit.slope,
        fitted_stderr: fit.stderr,
        theory,
        abs_diff: (fit.slope - theory).abs(),
        points,
    })
}

/// Spectrum of `kernel` on `S^d` together with the exact multiplicities,
/// used as the experiment-side source of `μ_k`.
pub fn kernel_spectrum(
    kernel: &InnerProductKernel,
    dim: SphereDim,
    max_degree: usize,
) -> Result<SpectrumModel> {
    let s = funk_hecke_spectrum_auto(kernel, dim, max_degree)?;
    debug_assert!(s
        .groups()
        .iter()
        .enumerate()
        .all(|(k, g)| harmonic_multiplicity(dim, k).map_or(true, |m| m as f64 == g.mult)));
    Ok(s)
}
