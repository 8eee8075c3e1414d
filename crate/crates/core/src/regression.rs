//! Spectral-algorithm estimators, prediction and risk evaluation.
//!
//! With `G = K(X, X)/n = U Λ Uᵀ`, the estimator for filter `φ_λ` is
//! `f̂(x) = K(x, X) α` with `α = (1/n) U φ_λ(Λ) Uᵀ Y`. Eigenvalues of `G` are
//! clamped at zero before the filter is applied.

use std::sync::Arc;

use faer::Mat;

use crate::error::{invalid, Error, Result};
use crate::filters::{FilterFamily, FilterSpec};
use crate::kernels::{cross_kernel_with, gram_matrix_with, GramMatrix, InnerProductKernel};
use crate::linalg::{mat_t_vec, mat_vec, norm, spd_solve, sym_eigen};
use crate::par::Execution;
use crate::sphere::PointCloud;
use crate::target::TargetFunction;

#[derive(Clone, Debug)]
pub struct Dataset {
    pub x: PointCloud,
    pub y: Vec<f64>,
    /// Noise level used for reporting.
    pub sigma: f64,
}

impl Dataset {
    pub fn new(x: PointCloud, y: Vec<f64>, sigma: f64) -> Result<Self> {
        if x.is_empty() {
            return Err(invalid("dataset needs at least one point"));
        }
        if x.len() != y.len() {
            return Err(Error::DimensionMismatch {
                expected: x.len(),
                got: y.len(),
            });
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(invalid("responses must be finite"));
        }
        Ok(Self { x, y, sigma })
    }

    pub fn n(&self) -> usize {
        self.x.len()
    }
}

/// Eigendecomposition of `G = K/n`, eigenvalues clamped at zero.
#[derive(Clone, Debug)]
pub struct EigenCache {
    pub eigenvalues: Vec<f64>,
    pub vectors: Mat<f64>,
    /// Most negative raw eigenvalue before clamping (0 if none).
    pub min_raw_eigenvalue: f64,
}

#[derive(Clone, Debug)]
pub struct FittedEstimator {
    pub x_train: PointCloud,
    pub alpha: Vec<f64>,
    pub kernel: InnerProductKernel,
    pub filter: FilterSpec,
    pub eigen_cache: Option<Arc<EigenCache>>,
}

impl FittedEstimator {
    /// `K(X_eval, X) α`.
    pub fn predict(&self, x_eval: &PointCloud) -> Result<Vec<f64>> {
        let k = cross_kernel_with(&self.kernel, x_eval, &self.x_train, Execution::Sequential)?;
        Ok(mat_vec(&k, &self.alpha))
    }
}

pub fn predict(est: &FittedEstimator, x_eval: &PointCloud) -> Result<Vec<f64>> {
    est.predict(x_eval)
}

/// One eigendecomposition of `G`, reusable across filters and responses.
#[derive(Clone, Debug)]
pub struct SpectralSolver {
    kernel: InnerProductKernel,
    x: PointCloud,
    gram: GramMatrix,
    cache: Arc<EigenCache>,
}

impl SpectralSolver {
    pub fn new(kernel: &InnerProductKernel, x: &PointCloud) -> Result<Self> {
        Self::new_with(kernel, x, Execution::Sequential)
    }

    pub fn new_with(kernel: &InnerProductKernel, x: &PointCloud, exec: Execution) -> Result<Self> {
        if x.is_empty() {
            return Err(invalid("cannot fit on zero points"));
        }
        let gram = gram_matrix_with(kernel, x, exec);
        if (0..gram.n()).any(|i| !gram.values[(i, i)].is_finite()) {
            return Err(Error::Linalg("Gram matrix is not finite".into()));
        }
        let n = x.len() as f64;
        let g = Mat::from_fn(gram.n(), gram.n(), |i, j| gram.values[(i, j)] / n);
        let (raw, vectors) = sym_eigen(&g)?;
        let min_raw_eigenvalue = raw.iter().copied().fold(0.0, f64::min);
        let eigenvalues = raw.iter().map(|v| v.max(0.0)).collect();
        Ok(Self {
            kernel: kernel.clone(),
            x: x.clone(),
            gram,
            cache: Arc::new(EigenCache {
                eigenvalues,
                vectors,
                min_raw_eigenvalue,
            }),
        })
    }

    pub fn n(&self) -> usize {
        self.x.len()
    }

    pub fn kernel(&self) -> &InnerProductKernel {
        &self.kernel
    }

    pub fn points(&self) -> &PointCloud {
        &self.x
    }

    pub fn gram(&self) -> &GramMatrix {
        &self.gram
    }

    pub fn eigen(&self) -> &EigenCache {
        &self.cache
    }

    /// Largest eigenvalue of `G`.
    pub fn lambda_max(&self) -> f64 {
        self.cache.eigenvalues.last().copied().unwrap_or(0.0)
    }

    /// `Uᵀ y`.
    pub fn project(&self, y: &[f64]) -> Vec<f64> {
        mat_t_vec(&self.cache.vectors, y)
    }

    fn check_filter(&self, filter: &FilterSpec) -> Result<()> {
        if let FilterFamily::GradientDescent { eta } = filter.family() {
            let bound = 1.0 / (2.0 * self.lambda_max());
            if eta >= bound {
                return Err(Error::StepSize(format!(
                    "eta = {eta} must be below 1/(2 lambda_max(G)) = {bound}"
                )));
            }
        }
        Ok(())
    }

    /// `φ_λ(Λ) ∘ proj / n`, the coefficients of `α` in the eigenbasis.
    pub(crate) fn spectral_weights(&self, filter: &FilterSpec, proj: &[f64]) -> Result<Vec<f64>> {
        self.check_filter(filter)?;
        let n = self.n() as f64;
        Ok(self
            .cache
            .eigenvalues
            .iter()
            .zip(proj)
            .map(|(l, p)| filter.phi(*l) * p / n)
            .collect())
    }

    /// Dual coefficients `α` for responses with eigenbasis projection `proj`.
    pub fn alpha_from_projection(&self, filter: &FilterSpec, proj: &[f64]) -> Result<Vec<f64>> {
        let w = self.spectral_weights(filter, proj)?;
        Ok(mat_vec(&self.cache.vectors, &w))
    }

    /// `n × G` matrix whose columns are `α` for each filter.
    pub fn alpha_matrix(&self, filters: &[FilterSpec], proj: &[f64]) -> Result<Mat<f64>> {
        let n = self.n();
        let mut w = Mat::<f64>::zeros(n, filters.len());
        for (c, f) in filters.iter().enumerate() {
            let col = self.spectral_weights(f, proj)?;
            for (i, v) in col.into_iter().enumerate() {
                w[(i, c)] = v;
            }
        }
        Ok(&self.cache.vectors * &w)
    }

    pub fn fit(&self, filter: &FilterSpec, y: &[f64]) -> Result<FittedEstimator> {
        if y.len() != self.n() {
            return Err(Error::DimensionMismatch {
                expected: self.n(),
                got: y.len(),
            });
        }
        let alpha = self.alpha_from_projection(filter, &self.project(y))?;
        Ok(FittedEstimator {
            x_train: self.x.clone(),
            alpha,
            kernel: self.kernel.clone(),
            filter: *filter,
            eigen_cache: Some(self.cache.clone()),
        })
    }

    /// Bias/variance decomposition of the estimator on this design.
    ///
    /// `bias_sq` is the Monte-Carlo risk of the noiseless fit (`Y = f_⋆(X)`);
    /// the variance is `(σ²/n²)·mean_z ‖φ_λ(G) k_z‖²` with `k_z = K(X, z)`,
    /// which equals `(σ²/n²)·mean_z Σ_i φ(λ_i)² (Uᵀk_z)_i²`.
    pub fn risk_decomposition(
        &self,
        filter: &FilterSpec,
        f_star: &TargetFunction,
        sigma: f64,
        test: &PointCloud,
    ) -> Result<RiskReport> {
        let f_x = f_star.eval(&self.x)?;
        let f_test = f_star.eval(test)?;
        let alpha = self.alpha_from_projection(filter, &self.project(&f_x))?;
        let k_eval = cross_kernel_with(&self.kernel, test, &self.x, Execution::Sequential)?;
        let pred = mat_vec(&k_eval, &alpha);
        let e = &k_eval * &self.cache.vectors;
        let n = self.n() as f64;
        let phi2: Vec<f64> = self
            .cache
            .eigenvalues
            .iter()
            .map(|l| filter.phi(*l).powi(2))
            .collect();
        let m = test.len();
        let mut bias_terms = Vec::with_capacity(m);
        let mut var_terms = Vec::with_capacity(m);
        let mut total_terms = Vec::with_capacity(m);
        for z in 0..m {
            let mut v = 0.0;
            for (i, p) in phi2.iter().enumerate() {
                v += p * e[(z, i)].powi(2);
            }
            let var_z = sigma * sigma / (n * n) * v;
            let r2 = (f_test[z] - pred[z]).powi(2);
            bias_terms.push(r2);
            var_terms.push(var_z);
            total_terms.push(r2 + var_z);
        }
        let (bias_sq, _) = mean_stderr(&bias_terms);
        let (variance, _) = mean_stderr(&var_terms);
        let (_, se) = mean_stderr(&total_terms);
        Ok(RiskReport {
            excess_risk: bias_sq + variance,
            bias_sq: Some(bias_sq),
            variance: Some(variance),
            mc_std_error: se,
            test_size: m,
        })
    }
}

/// `f̂_λ = φ_λ(T_X) ĝ_Z` through one eigendecomposition of `G`.
pub fn fit_spectral(
    kernel: &InnerProductKernel,
    filter: &FilterSpec,
    data: &Dataset,
) -> Result<FittedEstimator> {
    SpectralSolver::new(kernel, &data.x)?.fit(filter, &data.y)
}

/// `α = (K + nλI)⁻¹ Y` by Cholesky, without any eigendecomposition.
pub fn fit_krr_direct(
    kernel: &InnerProductKernel,
    lambda: f64,
    data: &Dataset,
) -> Result<FittedEstimator> {
    let filter = FilterSpec::krr(lambda)?;
    let gram = gram_matrix_with(kernel, &data.x, Execution::Sequential);
    let n = data.n();
    let shift = n as f64 * lambda;
    let a = Mat::from_fn(n, n, |i, j| {
        gram.values[(i, j)] + if i == j { shift } else { 0.0 }
    });
    let alpha = spd_solve(&a, &data.y)?;
    Ok(FittedEstimator {
        x_train: data.x.clone(),
        alpha,
        kernel: kernel.clone(),
        filter,
        eigen_cache: None,
    })
}

/// Explicit Euler on the dual coefficients of the gradient-flow ODE:
/// `α ← α + (h/n)(Y - Kα)` from `α = 0`, `⌈t_final/step⌉` times.
///
/// `h = t_final / ⌈t_final/step⌉ <= step`, so the iteration lands exactly
/// on `t_final`.
pub fn fit_gf_euler_oracle(
    kernel: &InnerProductKernel,
    t_final: f64,
    step: f64,
    data: &Dataset,
) -> Result<FittedEstimator> {
    if !(t_final.is_finite() && t_final >= 0.0) {
        return Err(invalid(format!(
            "t_final = {t_final} must be finite and >= 0"
        )));
    }
    if !(step.is_finite() && step > 0.0) {
        return Err(invalid(format!("step = {step} must be positive")));
    }
    let filter = FilterSpec::gradient_flow_time(t_final)?;
    let gram = gram_matrix_with(kernel, &data.x, Execution::Sequential);
    let n = data.n();
    let nf = n as f64;
    let lmax = power_iteration(&gram.values, 500) / nf;
    if step > 1.0 / (2.0 * lmax) {
        return Err(Error::StepSize(format!(
            "step = {step} exceeds 1/(2 lambda_max(G)) = {}",
            1.0 / (2.0 * lmax)
        )));
    }
    let steps = (t_final / step).ceil() as usize;
    let mut alpha = vec![0.0; n];
    if steps > 0 {
        let h = t_final / steps as f64;
        // ‖α(t)‖ <= t‖Y‖/n along the exact flow.
        let limit = 1e6 * (t_final / nf) * norm(&data.y).max(f64::MIN_POSITIVE);
        for it in 0..steps {
            let ka = mat_vec(&gram.values, &alpha);
            for i in 0..n {
                alpha[i] += h / nf * (data.y[i] - ka[i]);
            }
            let a = norm(&alpha);
            if !a.is_finite() || a > limit {
                return Err(Error::Divergence(format!(
                    "|alpha| = {a:e} after {} of {steps} steps",
                    it + 1
                )));
            }
        }
    }
    Ok(FittedEstimator {
        x_train: data.x.clone(),
        alpha,
        kernel: kernel.clone(),
        filter,
        eigen_cache: None,
    })
}

// Rayleigh-quotient estimate of the largest eigenvalue of a PSD matrix.
fn power_iteration(a: &Mat<f64>, iters: usize) -> f64 {
    let n = a.nrows();
    let mut v = vec![1.0 / (n as f64).sqrt(); n];
    let mut est = 0.0;
    for _ in 0..iters {
        let w = mat_vec(a, &v);
        let nw = norm(&w);
        if nw == 0.0 {
            return 0.0;
        }
        let next: f64 = v.iter().zip(&w).map(|(x, y)| x * y).sum();
        v = w.iter().map(|x| x / nw).collect();
        if (next - est).abs() <= 1e-14 * next.abs() {
            return next;
        }
        est = next;
    }
    est
}

#[derive(Clone, Debug, PartialEq)]
pub struct RiskReport {
    pub excess_risk: f64,
    pub bias_sq: Option<f64>,
    pub variance: Option<f64>,
    pub mc_std_error: f64,
    pub test_size: usize,
}

/// Mean and standard error of the mean; standard error 0 below two samples.
pub fn mean_stderr(v: &[f64]) -> (f64, f64) {
    let m = v.len();
    if m == 0 {
        return (0.0, 0.0);
    }
    let mean = v.iter().sum::<f64>() / m as f64;
    if m < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (m - 1) as f64;
    (mean, (var / m as f64).sqrt())
}

/// Monte-Carlo `‖f̂ - f‖²` from predictions and target values.
pub fn risk_from_predictions(pred: &[f64], truth: &[f64]) -> RiskReport {
    let sq: Vec<f64> = pred
        .iter()
        .zip(truth)
        .map(|(p, t)| (p - t).powi(2))
        .collect();
    let (mean, se) = mean_stderr(&sq);
    RiskReport {
        excess_risk: mean,
        bias_sq: None,
        variance: None,
        mc_std_error: se,
        test_size: sq.len(),
    }
}

/// `‖f̂ - f_⋆‖²_{L²}` estimated on uniform test points.
pub fn excess_risk_mc(
    est: &FittedEstimator,
    f_star: &TargetFunction,
    test: &PointCloud,
) -> Result<RiskReport> {
    let pred = est.predict(test)?;
    let truth = f_star.eval(test)?;
    Ok(risk_from_predictions(&pred, &truth))
}

pub fn risk_decomposition(
    kernel: &InnerProductKernel,
    filter: &FilterSpec,
    x: &PointCloud,
    f_star: &TargetFunction,
    sigma: f64,
    test: &PointCloud,
) -> Result<RiskReport> {
    SpectralSolver::new(kernel, x)?.risk_decomposition(filter, f_star, sigma, test)
}
