//! Geometry and harmonic analysis on the unit sphere `S^d ⊂ R^{d+1}`.
//!
//! Harmonic degrees are plain `usize` values. Individual spherical harmonics
//! are never built; everything goes through the normalized Gegenbauer
//! polynomial `P_k` and the multiplicity `N(d, k)`.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{invalid, Error, Result};
use crate::kernels::InnerProductKernel;
use crate::oracle::{SpectrumGroup, SpectrumModel, SpectrumOrigin};
use crate::quadrature::GaussLegendre;

/// Arguments outside `[-1, 1]` by at most this much are clamped.
pub const DOMAIN_SLACK: f64 = 1e-12;

/// Dimension `d` of the sphere `S^d`; points have `d + 1` coordinates.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SphereDim(usize);

impl SphereDim {
    pub fn new(d: usize) -> Result<Self> {
        if d == 0 {
            return Err(invalid("sphere dimension d must be at least 1"));
        }
        Ok(Self(d))
    }

    pub fn d(self) -> usize {
        self.0
    }

    /// Number of coordinates of a point, `d + 1`.
    pub fn ambient(self) -> usize {
        self.0 + 1
    }
}

/// Which dimension parameter the Gegenbauer recurrence uses.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GegenbauerConvention {
    /// `D = d + 1`, the ambient dimension of `S^d`. These are the true zonal
    /// harmonics of the sphere, consistent with `N(d, k)`.
    #[default]
    Ambient,
    /// `D = d`, so that `P_2(t) = (d t² - 1)/(d - 1)`. Requires `d >= 2`.
    Intrinsic,
}

impl GegenbauerConvention {
    fn dimension(self, dim: SphereDim) -> Result<usize> {
        match self {
            GegenbauerConvention::Ambient => Ok(dim.ambient()),
            GegenbauerConvention::Intrinsic if dim.d() >= 2 => Ok(dim.d()),
            GegenbauerConvention::Intrinsic => {
                Err(invalid("intrinsic Gegenbauer convention needs d >= 2"))
            }
        }
    }
}

/// Exact and floating-point forms of `N(d, k)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Multiplicity {
    pub exact: Option<u128>,
    pub value: f64,
}

/// `N(d, k)`, the dimension of degree-`k` spherical harmonics on `S^d`.
///
/// Computed as `C(k+d-1, k) + C(k+d-2, k-1)` in checked 128-bit arithmetic,
/// which equals `((2k+d-1)/k)·(k+d-2)!/((d-1)!(k-1)!)`.
pub fn harmonic_multiplicity(dim: SphereDim, k: usize) -> Result<u128> {
    if k == 0 {
        return Ok(1);
    }
    let d = dim.d() as u128;
    let k = k as u128;
    let overflow = || Error::Overflow(format!("N(d={d}, k={k}) exceeds u128"));
    let a = binomial(k + d - 1, k).ok_or_else(overflow)?;
    let b = binomial(k + d - 2, k - 1).ok_or_else(overflow)?;
    a.checked_add(b).ok_or_else(overflow)
}

/// `N(d, k)` in floating point via log-Gamma; finite for any realistic input.
pub fn harmonic_multiplicity_f64(dim: SphereDim, k: usize) -> f64 {
    if k == 0 {
        return 1.0;
    }
    let d = dim.d() as f64;
    let k = k as f64;
    let ln = (2.0 * k + d - 1.0).ln() - k.ln() + libm::lgamma(k + d - 1.0)
        - libm::lgamma(d)
        - libm::lgamma(k);
    ln.exp()
}

pub fn multiplicity(dim: SphereDim, k: usize) -> Multiplicity {
    match harmonic_multiplicity(dim, k) {
        Ok(n) => Multiplicity {
            exact: Some(n),
            value: n as f64,
        },
        Err(_) => Multiplicity {
            exact: None,
            value: harmonic_multiplicity_f64(dim, k),
        },
    }
}

/// Binomial coefficient with overflow check; `None` on overflow.
pub fn binomial(n: u128, r: u128) -> Option<u128> {
    if r > n {
        return Some(0);
    }
    let r = r.min(n - r);
    let mut acc: u128 = 1;
    for i in 1..=r {
        // acc = C(n-r+i-1, i-1); multiply then divide stays exact. Split the
        // factor through gcd to delay overflow.
        let num = n - r + i;
        let g = gcd(acc, i);
        let (a, den) = (acc / g, i / g);
        let g2 = gcd(num, den);
        acc = a.checked_mul(num / g2)? / (den / g2);
    }
    Some(acc)
}

fn gcd(mut a: u128, mut b: u128) -> u128 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

pub(crate) fn check_unit_interval(t: f64) -> Result<f64> {
    if !t.is_finite() || t.abs() > 1.0 + DOMAIN_SLACK {
        return Err(Error::Domain(format!("argument {t} outside [-1, 1]")));
    }
    Ok(t.clamp(-1.0, 1.0))
}

/// Normalized Gegenbauer polynomial `P_k(t)` with `P_k(1) = 1`, ambient convention.
pub fn gegenbauer(dim: SphereDim, k: usize, t: f64) -> Result<f64> {
    gegenbauer_with(dim, k, t, GegenbauerConvention::Ambient)
}

pub fn gegenbauer_with(
    dim: SphereDim,
    k: usize,
    t: f64,
    convention: GegenbauerConvention,
) -> Result<f64> {
    let t = check_unit_interval(t)?;
    let big_d = convention.dimension(dim)?;
    let mut out = vec![0.0; k + 1];
    gegenbauer_table(big_d, t, &mut out);
    Ok(out[k])
}

/// `P_0(t), …, P_K(t)` for ambient dimension `big_d >= 2`; `out.len() = K + 1`.
///
/// Normalized recurrence `(k+D-2) P_{k+1} = (2k+D-2) t P_k - k P_{k-1}`.
pub(crate) fn gegenbauer_table(big_d: usize, t: f64, out: &mut [f64]) {
    if out.is_empty() {
        return;
    }
    out[0] = 1.0;
    if out.len() == 1 {
        return;
    }
    out[1] = t;
    let dm2 = big_d as f64 - 2.0;
    for k in 1..out.len() - 1 {
        let kf = k as f64;
        out[k + 1] = ((2.0 * kf + dm2) * t * out[k] - kf * out[k - 1]) / (kf + dm2);
    }
}

/// `n` points on `S^d`, stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct PointCloud {
    dim: SphereDim,
    points: Vec<f64>,
    seed: Option<u64>,
}

impl PointCloud {
    /// Build from explicit rows; each must have unit norm within `1e-12`.
    pub fn from_rows(dim: SphereDim, rows: &[Vec<f64>]) -> Result<Self> {
        let mut points = Vec::with_capacity(rows.len() * dim.ambient());
        for (i, r) in rows.iter().enumerate() {
            if r.len() != dim.ambient() {
                return Err(Error::DimensionMismatch {
                    expected: dim.ambient(),
                    got: r.len(),
                });
            }
            let norm = r.iter().map(|v| v * v).sum::<f64>().sqrt();
            if (norm - 1.0).abs() > 1e-12 {
                return Err(invalid(format!("row {i} has norm {norm}, expected 1")));
            }
            points.extend_from_slice(r);
        }
        Ok(Self {
            dim,
            points,
            seed: None,
        })
    }

    /// Empty cloud (zero rows).
    pub fn empty(dim: SphereDim) -> Self {
        Self {
            dim,
            points: Vec::new(),
            seed: None,
        }
    }

    pub fn dim(&self) -> SphereDim {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.points.len() / self.dim.ambient()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let w = self.dim.ambient();
        &self.points[i * w..(i + 1) * w]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.points.chunks_exact(self.dim.ambient())
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.points
    }

    /// Rows at the given indices, in that order.
    pub fn select(&self, idx: &[usize]) -> Self {
        let mut points = Vec::with_capacity(idx.len() * self.dim.ambient());
        for &i in idx {
            points.extend_from_slice(self.row(i));
        }
        Self {
            dim: self.dim,
            points,
            seed: None,
        }
    }

    /// FNV-1a hash of the coordinates' bit patterns.
    pub fn fingerprint(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for v in &self.points {
            for b in v.to_bits().to_le_bytes() {
                h ^= b as u64;
                h = h.wrapping_mul(0x0000_0100_0000_01b3);
            }
        }
        h
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for (x, y) in a.iter().zip(b) {
        s += x * y;
    }
    s
}

/// `n` independent uniform points on `S^d` from normalized Gaussian draws.
pub fn sample_uniform(dim: SphereDim, n: usize, seed: u64) -> PointCloud {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cloud = sample_uniform_rng(dim, n, &mut rng);
    cloud.seed = Some(seed);
    cloud
}

/// Same as [`sample_uniform`] but drawing from a caller-owned generator.
pub fn sample_uniform_rng<R: Rng + ?Sized>(dim: SphereDim, n: usize, rng: &mut R) -> PointCloud {
    let w = dim.ambient();
    let mut points = vec![0.0; n * w];
    for row in points.chunks_exact_mut(w) {
        loop {
            for v in row.iter_mut() {
                *v = rng.sample(StandardNormal);
            }
            let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > 1e-300 {
                row.iter_mut().for_each(|v| *v /= norm);
                break;
            }
        }
    }
    PointCloud {
        dim,
        points,
        seed: None,
    }
}

/// `ω_{d-1}/ω_d = Γ((d+1)/2) / (√π Γ(d/2))`, the Funk–Hecke normalisation.
pub fn surface_area_ratio(dim: SphereDim) -> f64 {
    let d = dim.d() as f64;
    (libm::lgamma((d + 1.0) / 2.0) - libm::lgamma(d / 2.0) - 0.5 * PI.ln()).exp()
}

/// Relative agreement required between a rule and its doubled-order rule.
pub const FH_REL_TOL: f64 = 1e-8;
/// Absolute floor of the convergence check, as a fraction of the spectrum scale.
pub const FH_ABS_TOL: f64 = 1e-12;
/// Negative eigenvalues above `-FH_NEG_TOL · scale` are clamped to zero.
pub const FH_NEG_TOL: f64 = 1e-10;

/// Default quadrature order for truncation degree `K`.
pub fn default_quad_order(max_degree: usize) -> usize {
    64.max(4 * max_degree)
}

/// Eigenvalues `μ_0, …, μ_K` of `K(x, x') = Φ(<x, x'>)` on `S^d`.
///
/// `μ_k = (ω_{d-1}/ω_d) ∫ Φ(t) P_k(t) (1-t²)^{(d-2)/2} dt`, evaluated after the
/// substitution `t = cos θ` as `∫_0^π Φ(cos θ) P_k(cos θ) sin^{d-1} θ dθ` with
/// Gauss–Legendre on `[0, π]`. The substitution absorbs the weight, so no
/// endpoint singularity remains for any `d`, and kernels with a `√(1-t²)`
/// term become smooth in `θ`.
///
/// The integral is evaluated at `quad_order` and `2·quad_order`; the second
/// value is returned, and the two must agree to
/// `FH_REL_TOL·|μ_k| + FH_ABS_TOL·scale` where `scale = max(|μ_0|, |Φ(1)|)`.
pub fn funk_hecke_spectrum(
    kernel: &InnerProductKernel,
    dim: SphereDim,
    max_degree: usize,
    quad_order: usize,
) -> Result<SpectrumModel> {
    if quad_order < max_degree + 2 {
        return Err(invalid(format!(
            "quad_order {quad_order} must be at least max_degree + 2 = {}",
            max_degree + 2
        )));
    }
    let coarse = funk_hecke_raw(kernel, dim, max_degree, quad_order)?;
    let fine = funk_hecke_raw(kernel, dim, max_degree, 2 * quad_order)?;
    let phi1 = kernel.phi(1.0)?;
    let scale = fine[0].abs().max(phi1.abs());
    for (k, (a, b)) in coarse.iter().zip(&fine).enumerate() {
        if (a - b).abs() > FH_REL_TOL * b.abs() + FH_ABS_TOL * scale {
            return Err(Error::NonConvergence(format!(
                "mu_{k} changed from {a:e} to {b:e} when doubling order {quad_order}"
            )));
        }
    }
    let mut groups = Vec::with_capacity(max_degree + 1);
    for (k, &mu) in fine.iter().enumerate() {
        let mu = if mu < 0.0 {
            if mu < -FH_NEG_TOL * scale {
                return Err(Error::Indefinite {
                    degree: k,
                    value: mu,
                });
            }
            0.0
        } else {
            mu
        };
        let m = multiplicity(dim, k);
        groups.push(SpectrumGroup {
            mu,
            mult: m.value,
            mult_exact: m.exact,
        });
    }
    let captured: f64 = groups.iter().map(|g| g.mu * g.mult).sum();
    Ok(SpectrumModel::new(
        groups,
        SpectrumOrigin::FunkHecke {
            kernel: kernel.name().to_string(),
            d: dim.d(),
        },
        Some(phi1 - captured),
    ))
}

/// [`funk_hecke_spectrum`] starting at the default order and doubling it on
/// non-convergence until the order reaches 4096.
pub fn funk_hecke_spectrum_auto(
    kernel: &InnerProductKernel,
    dim: SphereDim,
    max_degree: usize,
) -> Result<SpectrumModel> {
    let mut order = default_quad_order(max_degree);
    loop {
        match funk_hecke_spectrum(kernel, dim, max_degree, order) {
            Err(Error::NonConvergence(_)) if order < 4096 => order *= 2,
            other => return other,
        }
    }
}

fn funk_hecke_raw(
    kernel: &InnerProductKernel,
    dim: SphereDim,
    max_degree: usize,
    order: usize,
) -> Result<Vec<f64>> {
    let rule = GaussLegendre::new(order);
    let (theta, w) = rule.mapped(0.0, PI);
    let c = surface_area_ratio(dim);
    let big_d = dim.ambient();
    let pow = dim.d() as i32 - 1;
    let mut acc = vec![0.0; max_degree + 1];
    let mut p = vec![0.0; max_degree + 1];
    for (th, wi) in theta.iter().zip(&w) {
        let t = th.cos();
        let f = kernel.phi(t)? * th.sin().powi(pow) * wi;
        gegenbauer_table(big_d, t, &mut p);
        for (a, pk) in acc.iter_mut().zip(&p) {
            *a += f * pk;
        }
    }
    acc.iter_mut().for_each(|a| *a *= c);
    Ok(acc)
}

/// Truncated Mercer series `Σ_{k<=K} μ_k N(d,k) P_k(t)`.
pub fn mercer_reconstruct(spectrum: &SpectrumModel, dim: SphereDim, t: f64) -> Result<f64> {
    let t = check_unit_interval(t)?;
    let groups = spectrum.groups();
    let mut p = vec![0.0; groups.len()];
    gegenbauer_table(dim.ambient(), t, &mut p);
    Ok(groups
        .iter()
        .zip(&p)
        .map(|(g, pk)| g.mu * g.mult * pk)
        .sum())
}
