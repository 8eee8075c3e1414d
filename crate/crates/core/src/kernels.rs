//! Inner-product kernels `K(x, x') = Φ(<x, x'>)` and kernel-matrix assembly.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use faer::Mat;

use crate::error::{invalid, Error, Result};
use crate::par::{self, Execution};
use crate::sphere::{check_unit_interval, dot, PointCloud};

pub type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Clone)]
pub enum KernelFamily {
    /// `Φ(t) = exp(t - 1)`, i.e. `exp(-‖x - x'‖²/2)` on the sphere.
    RbfFixedBandwidth,
    /// Two-layer ReLU NTK, `Φ(t) = [sin(arccos t) + 2(π - arccos t) t]/(2π)`.
    TwoLayerNtk,
    /// `Φ(t) = Σ a_j t^j` with `a_j >= 0`.
    PowerSeries(Vec<f64>),
    /// Any user profile. Positivity is not checked here.
    Custom(ScalarFn),
}

impl fmt::Debug for KernelFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KernelFamily::RbfFixedBandwidth => f.write_str("RbfFixedBandwidth"),
            KernelFamily::TwoLayerNtk => f.write_str("TwoLayerNtk"),
            KernelFamily::PowerSeries(c) => f.debug_tuple("PowerSeries").field(c).finish(),
            KernelFamily::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

#[derive(Clone, Debug)]
pub struct InnerProductKernel {
    family: KernelFamily,
    name: String,
    kappa_sq: f64,
}

impl InnerProductKernel {
    pub fn rbf() -> Self {
        Self {
            family: KernelFamily::RbfFixedBandwidth,
            name: "rbf".into(),
            kappa_sq: 1.0,
        }
    }

    pub fn ntk() -> Self {
        Self {
            family: KernelFamily::TwoLayerNtk,
            name: "ntk".into(),
            kappa_sq: 1.0,
        }
    }

    /// Rejects empty, non-finite or negative coefficient lists.
    pub fn power_series(coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(invalid("power series needs at least one coefficient"));
        }
        if let Some((j, a)) = coeffs
            .iter()
            .enumerate()
            .find(|(_, a)| !a.is_finite() || **a < 0.0)
        {
            return Err(invalid(format!(
                "power series coefficient a_{j} = {a} must be finite and non-negative"
            )));
        }
        let kappa_sq = coeffs.iter().sum();
        Ok(Self {
            family: KernelFamily::PowerSeries(coeffs),
            name: "power_series".into(),
            kappa_sq,
        })
    }

    /// Wraps an arbitrary `Φ`; `Φ(1)` must be finite.
    pub fn custom(name: impl Into<String>, phi: ScalarFn) -> Result<Self> {
        let kappa_sq = phi(1.0);
        if !kappa_sq.is_finite() {
            return Err(invalid("custom kernel has non-finite Φ(1)"));
        }
        Ok(Self {
            family: KernelFamily::Custom(phi),
            name: name.into(),
            kappa_sq,
        })
    }

    pub fn family(&self) -> &KernelFamily {
        &self.family
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Recorded bound `κ² = Φ(1) = sup_x K(x, x)`.
    pub fn kappa_sq(&self) -> f64 {
        self.kappa_sq
    }

    /// `Φ(t)`; arguments within `1e-12` of `[-1, 1]` are clamped.
    pub fn phi(&self, t: f64) -> Result<f64> {
        let t = check_unit_interval(t)?;
        Ok(self.phi_inner(t))
    }

    /// `Φ` with silent clamping, for inner products of unit vectors.
    #[inline]
    pub fn phi_clamped(&self, t: f64) -> f64 {
        self.phi_inner(t.clamp(-1.0, 1.0))
    }

    #[inline]
    fn phi_inner(&self, t: f64) -> f64 {
        match &self.family {
            KernelFamily::RbfFixedBandwidth => (t - 1.0).exp(),
            KernelFamily::TwoLayerNtk => {
                let th = t.acos();
                (((1.0 - t) * (1.0 + t)).sqrt() + 2.0 * (PI - th) * t) / (2.0 * PI)
            }
            KernelFamily::PowerSeries(a) => a.iter().rev().fold(0.0, |acc, c| acc * t + c),
            KernelFamily::Custom(f) => f(t),
        }
    }

    /// `K(x, x')` for two points.
    pub fn eval(&self, x: &[f64], y: &[f64]) -> f64 {
        self.phi_clamped(dot(x, y))
    }

    /// Taylor coefficients `a_0, …, a_J` of `Φ` at 0.
    ///
    /// Exact for RBF and power series. Otherwise `Φ(t/2)` is projected onto
    /// Chebyshev polynomials on `[-1, 1]` (so `Φ` is sampled on `[-1/2, 1/2]`,
    /// away from the branch points at `±1`) with `max(256, 4J)` nodes, the
    /// series is cut where coefficients reach round-off, and the result is
    /// converted to the monomial basis. That conversion amplifies round-off
    /// by roughly `2^J` per step; for the NTK, degrees above 4 lose more than
    /// [`MAX_DIGITS_LOST`] digits and are refused.
    pub fn power_series_coefficients(&self, j_max: usize) -> Result<PowerSeriesCoefficients> {
        let coeffs = match &self.family {
            KernelFamily::RbfFixedBandwidth => {
                let mut a = Vec::with_capacity(j_max + 1);
                let mut c = (-1.0f64).exp();
                for j in 0..=j_max {
                    if j > 0 {
                        c /= j as f64;
                    }
                    a.push(c);
                }
                return Ok(PowerSeriesCoefficients::new(a, 0.0));
            }
            KernelFamily::PowerSeries(c) => {
                let mut a = c.clone();
                a.resize(j_max + 1, 0.0);
                return Ok(PowerSeriesCoefficients::new(a, 0.0));
            }
            _ => chebyshev_taylor(|t| self.phi_inner(t), j_max)?,
        };
        if coeffs.digits_lost > MAX_DIGITS_LOST {
            return Err(Error::IllConditioned(format!(
                "basis conversion to degree {j_max} loses {:.1} digits",
                coeffs.digits_lost
            )));
        }
        Ok(coeffs)
    }
}

/// Coefficients with `|a_j|` at or below this are flagged as zero.
pub const ZERO_COEFF_TOL: f64 = 1e-10;
/// Basis conversion losing more decimal digits than this is refused.
pub const MAX_DIGITS_LOST: f64 = 6.0;

#[derive(Clone, Debug, PartialEq)]
pub struct PowerSeriesCoefficients {
    pub coeffs: Vec<f64>,
    /// `is_zero[j]` when `|a_j| <= ZERO_COEFF_TOL`.
    pub is_zero: Vec<bool>,
    /// `log10` of the cancellation factor in the basis conversion.
    pub digits_lost: f64,
}

impl PowerSeriesCoefficients {
    fn new(coeffs: Vec<f64>, digits_lost: f64) -> Self {
        let is_zero = coeffs.iter().map(|a| a.abs() <= ZERO_COEFF_TOL).collect();
        Self {
            coeffs,
            is_zero,
            digits_lost,
        }
    }

    /// `Σ_{j<=J} a_j t^j`.
    pub fn eval(&self, t: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, c| acc * t + c)
    }
}

const CHEB_HALF_WIDTH: f64 = 0.5;

fn chebyshev_taylor<F: Fn(f64) -> f64>(f: F, j_max: usize) -> Result<PowerSeriesCoefficients> {
    let m = 256.max(4 * j_max);
    let h = CHEB_HALF_WIDTH;
    // Mirror the nodes so that x_{m-1-j} = -x_j holds exactly.
    let mut nodes = vec![0.0; m];
    for j in 0..m.div_ceil(2) {
        let x = (PI * (j as f64 + 0.5) / m as f64).cos();
        nodes[j] = x;
        nodes[m - 1 - j] = -x;
    }
    let samples: Vec<f64> = nodes.iter().map(|&x| f(h * x)).collect();
    if samples.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("Φ is not finite on [-1/2, 1/2]".into()));
    }
    // Angles n(2j+1)π/(2m) are reduced mod 2π in integers first; large
    // unreduced arguments to cos would dominate the noise floor.
    let c_full: Vec<f64> = (0..m)
        .map(|n| {
            let s: f64 = samples
                .iter()
                .enumerate()
                .map(|(j, v)| {
                    let r = (n * (2 * j + 1)) % (4 * m);
                    v * (PI * r as f64 / (2 * m) as f64).cos()
                })
                .sum();
            2.0 * s / m as f64
        })
        .collect();
    let mut c = c_full;
    c[0] *= 0.5;
    // Drop the round-off plateau; it would be amplified by the monomial
    // coefficients of high-order T_n. The upper half of the coefficients of an
    // analytic Φ is pure noise and sets the cut.
    let cmax = c.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let plateau = c[m / 2..].iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let floor = (1e-15 * cmax).max(10.0 * plateau);
    let last = c.iter().rposition(|v| v.abs() > floor).unwrap_or(0);
    c.truncate(last + 1);
    // Interior coefficients under the floor are noise too (e.g. the odd
    // terms of a function that is even up to a linear part).
    for v in c.iter_mut() {
        if v.abs() <= floor {
            *v = 0.0;
        }
    }

    // Low-order monomial coefficients of T_n, truncated at degree j_max.
    // Truncation is exact: T_{n+1} = 2u T_n - T_{n-1} never lowers degrees.
    // `gain[j]` is Σ_n |T_n[j]|, the worst-case amplification of a
    // perturbation of the c_n into b_j.
    let mut b = vec![0.0; j_max + 1];
    let mut gain = vec![0.0; j_max + 1];
    let mut prev = vec![0.0; j_max + 1];
    let mut cur = vec![0.0; j_max + 1];
    prev[0] = 1.0;
    if j_max >= 1 {
        cur[1] = 1.0;
    }
    for (n, cn) in c.iter().enumerate() {
        let tn: &[f64] = if n == 0 { &prev } else { &cur };
        for j in 0..=j_max {
            b[j] += cn * tn[j];
            gain[j] += tn[j].abs();
        }
        if n >= 1 {
            let mut next = vec![0.0; j_max + 1];
            for j in 0..=j_max {
                let up = if j >= 1 { 2.0 * cur[j - 1] } else { 0.0 };
                next[j] = up - prev[j];
            }
            prev = std::mem::replace(&mut cur, next);
        }
    }
    let mut a = Vec::with_capacity(j_max + 1);
    let mut worst = 0.0f64;
    for j in 0..=j_max {
        let scale = h.powi(-(j as i32));
        a.push(b[j] * scale);
        worst = worst.max(gain[j] * scale);
    }
    // Relative condition of the map (c_n) -> (a_j), both measured against
    // their largest entry.
    let amax = a.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    let digits_lost = if amax > 0.0 {
        (worst * cmax / amax).log10().max(0.0)
    } else {
        0.0
    };
    Ok(PowerSeriesCoefficients::new(a, digits_lost))
}

/// Symmetric `n × n` matrix `K(X, X)` tagged with its provenance.
#[derive(Clone, Debug)]
pub struct GramMatrix {
    pub values: Mat<f64>,
    pub kernel_name: String,
    pub fingerprint: u64,
}

impl GramMatrix {
    pub fn n(&self) -> usize {
        self.values.nrows()
    }
}

pub fn gram_matrix(kernel: &InnerProductKernel, x: &PointCloud) -> GramMatrix {
    gram_matrix_with(kernel, x, Execution::Parallel)
}

/// `K(X, X)`: upper triangle computed row by row (possibly in parallel), then
/// mirrored. Each entry is one fixed-order dot product, so the result does
/// not depend on the thread count.
pub fn gram_matrix_with(
    kernel: &InnerProductKernel,
    x: &PointCloud,
    exec: Execution,
) -> GramMatrix {
    let n = x.len();
    let mut buf = vec![0.0; n * n];
    par::for_each_chunk(exec, &mut buf, n, |i, row| {
        let xi = x.row(i);
        for (j, v) in row.iter_mut().enumerate().skip(i) {
            *v = kernel.eval(xi, x.row(j));
        }
    });
    for i in 0..n {
        for j in 0..i {
            buf[i * n + j] = buf[j * n + i];
        }
    }
    GramMatrix {
        values: Mat::from_fn(n, n, |i, j| buf[i * n + j]),
        kernel_name: kernel.name().to_string(),
        fingerprint: x.fingerprint(),
    }
}

pub fn cross_kernel(
    kernel: &InnerProductKernel,
    x_eval: &PointCloud,
    x_train: &PointCloud,
) -> Result<Mat<f64>> {
    cross_kernel_with(kernel, x_eval, x_train, Execution::Parallel)
}

/// `m × n` matrix with entries `Φ(<x_eval_i, x_train_j>)`.
pub fn cross_kernel_with(
    kernel: &InnerProductKernel,
    x_eval: &PointCloud,
    x_train: &PointCloud,
    exec: Execution,
) -> Result<Mat<f64>> {
    if x_eval.dim() != x_train.dim() {
        return Err(Error::DimensionMismatch {
            expected: x_train.dim().ambient(),
            got: x_eval.dim().ambient(),
        });
    }
    let (m, n) = (x_eval.len(), x_train.len());
    let mut buf = vec![0.0; m * n];
    par::for_each_chunk(exec, &mut buf, n, |i, row| {
        let xi = x_eval.row(i);
        for (j, v) in row.iter_mut().enumerate() {
            *v = kernel.eval(xi, x_train.row(j));
        }
    });
    Ok(Mat::from_fn(m, n, |i, j| buf[i * n + j]))
}
