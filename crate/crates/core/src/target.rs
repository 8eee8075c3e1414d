//! Regression targets `f_⋆` on the sphere.

use crate::error::{invalid, Error, Result};
use crate::kernels::InnerProductKernel;
use crate::sphere::{
    dot, funk_hecke_spectrum_auto, gegenbauer_table, harmonic_multiplicity_f64,
    GegenbauerConvention, PointCloud, SphereDim,
};

#[derive(Clone, Debug)]
pub enum TargetFunction {
    /// `f(x) = Σ_i K(u_i, x)`; its squared RKHS norm is `Σ_{i,j} Φ(<u_i, u_j>)`.
    KernelSections {
        kernel: InnerProductKernel,
        anchors: PointCloud,
    },
    /// `f(x) = scale · P_k(<ξ, x>)` with `scale = √(μ_k^s N(d, k))`.
    GegenbauerDegree {
        k: usize,
        xi: Vec<f64>,
        dim: SphereDim,
        s: f64,
        mu_k: f64,
        scale: f64,
        convention: GegenbauerConvention,
    },
    Zero,
}

impl TargetFunction {
    pub fn kernel_sections(kernel: InnerProductKernel, anchors: PointCloud) -> Self {
        TargetFunction::KernelSections { kernel, anchors }
    }

    /// Degree-`k` zonal target with unit `[H]^s` norm; `μ_k` comes from the
    /// kernel's Funk–Hecke spectrum on `S^d`.
    pub fn gegenbauer_degree(
        kernel: &InnerProductKernel,
        dim: SphereDim,
        k: usize,
        s: f64,
        xi: Vec<f64>,
        convention: GegenbauerConvention,
    ) -> Result<Self> {
        if !(s.is_finite() && s > 0.0) {
            return Err(invalid(format!("source exponent s = {s} must be positive")));
        }
        // Validates length and unit norm.
        PointCloud::from_rows(dim, std::slice::from_ref(&xi))?;
        let spectrum = funk_hecke_spectrum_auto(kernel, dim, k)?;
        let mu_k = spectrum.groups()[k].mu;
        if mu_k <= 0.0 {
            return Err(invalid(format!("kernel has mu_{k} = 0 on S^{}", dim.d())));
        }
        let scale = (mu_k.powf(s) * harmonic_multiplicity_f64(dim, k)).sqrt();
        // Reject conventions that do not apply to this dimension up front.
        crate::sphere::gegenbauer_with(dim, k, 1.0, convention)?;
        Ok(TargetFunction::GegenbauerDegree {
            k,
            xi,
            dim,
            s,
            mu_k,
            scale,
            convention,
        })
    }

    fn check_dim(&self, dim: SphereDim) -> Result<()> {
        let own = match self {
            TargetFunction::KernelSections { anchors, .. } => anchors.dim(),
            TargetFunction::GegenbauerDegree { dim, .. } => *dim,
            TargetFunction::Zero => return Ok(()),
        };
        if own != dim {
            return Err(Error::DimensionMismatch {
                expected: own.ambient(),
                got: dim.ambient(),
            });
        }
        Ok(())
    }

    pub fn eval(&self, x: &PointCloud) -> Result<Vec<f64>> {
        self.check_dim(x.dim())?;
        Ok(x.rows().map(|r| self.eval_point(r)).collect())
    }

    /// `f(x)` at one point of matching dimension.
    pub fn eval_point(&self, x: &[f64]) -> f64 {
        match self {
            TargetFunction::KernelSections { kernel, anchors } => {
                anchors.rows().map(|u| kernel.eval(u, x)).sum()
            }
            TargetFunction::GegenbauerDegree {
                k,
                xi,
                dim,
                scale,
                convention,
                ..
            } => {
                let big_d = match convention {
                    GegenbauerConvention::Ambient => dim.ambient(),
                    GegenbauerConvention::Intrinsic => dim.d(),
                };
                let mut p = vec![0.0; k + 1];
                gegenbauer_table(big_d, dot(xi, x).clamp(-1.0, 1.0), &mut p);
                scale * p[*k]
            }
            TargetFunction::Zero => 0.0,
        }
    }

    /// Squared source norm: RKHS norm for kernel sections, `[H]^s` norm
    /// (equal to 1 under the ambient convention) for Gegenbauer targets.
    pub fn source_norm_sq(&self) -> f64 {
        match self {
            TargetFunction::KernelSections { kernel, anchors } => anchors
                .rows()
                .map(|u| anchors.rows().map(|v| kernel.eval(u, v)).sum::<f64>())
                .sum(),
            TargetFunction::GegenbauerDegree { .. } => 1.0,
            TargetFunction::Zero => 0.0,
        }
    }
}
