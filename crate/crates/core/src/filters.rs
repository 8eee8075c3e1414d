//! Filter functions `φ_λ`, remainders `ψ_λ = 1 - zφ_λ(z)` and a grid-based
//! checker for the filter axioms.
//!
//! Every family is parametrised by `λ`. Gradient flow runs for time
//! `t = 1/λ`, gradient descent for `t = 1/(ηλ)` (possibly fractional) steps.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum FilterFamily {
    Krr,
    IteratedRidge { q: u32 },
    GradientFlow,
    GradientDescent { eta: f64 },
}

impl FilterFamily {
    pub fn validate(&self) -> Result<()> {
        match *self {
            FilterFamily::IteratedRidge { q: 0 } => Err(invalid("iterated ridge needs q >= 1")),
            FilterFamily::GradientDescent { eta } if !(eta.is_finite() && eta > 0.0) => {
                Err(invalid(format!(
                    "gradient descent step eta = {eta} must be positive"
                )))
            }
            _ => Ok(()),
        }
    }

    pub fn qualification(&self) -> Qualification {
        match *self {
            FilterFamily::Krr => Qualification::Finite(1.0),
            FilterFamily::IteratedRidge { q } => Qualification::Finite(q as f64),
            FilterFamily::GradientFlow | FilterFamily::GradientDescent { .. } => {
                Qualification::Infinite
            }
        }
    }

    /// Short label used in output tables, e.g. `iterated_ridge_q2`.
    pub fn label(&self) -> String {
        match *self {
            FilterFamily::Krr => "krr".into(),
            FilterFamily::IteratedRidge { q } => format!("iterated_ridge_q{q}"),
            FilterFamily::GradientFlow => "gradient_flow".into(),
            FilterFamily::GradientDescent { eta } => format!("gradient_descent_eta{eta}"),
        }
    }

    pub fn with_lambda(self, lambda: f64) -> Result<FilterSpec> {
        FilterSpec::new(self, lambda)
    }
}

/// Qualification `τ ∈ [1, ∞]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Qualification {
    Finite(f64),
    Infinite,
}

impl Qualification {
    pub fn value(self) -> f64 {
        match self {
            Qualification::Finite(t) => t,
            Qualification::Infinite => f64::INFINITY,
        }
    }

    pub fn from_value(tau: f64) -> Self {
        if tau.is_infinite() {
            Qualification::Infinite
        } else {
            Qualification::Finite(tau)
        }
    }

    pub fn is_finite(self) -> bool {
        matches!(self, Qualification::Finite(_))
    }
}

impl fmt::Display for Qualification {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Qualification::Finite(t) => write!(f, "{t}"),
            Qualification::Infinite => f.write_str("inf"),
        }
    }
}

/// A filter family together with its regularization parameter.
///
/// `λ` may be any positive value, including `+∞` (the zero estimator;
/// gradient flow at `t = 0`). Values `λ >= 1` lie outside the nominal
/// range `(0, 1)` and are flagged by [`FilterSpec::outside_nominal_range`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FilterSpec {
    family: FilterFamily,
    lambda: f64,
}

/// Below `z < SERIES_CUTOFF · λ` the removable singularity at `z = 0` is
/// evaluated by its Taylor expansion.
const SERIES_CUTOFF: f64 = 1e-8;

impl FilterSpec {
    pub fn new(family: FilterFamily, lambda: f64) -> Result<Self> {
        family.validate()?;
        if lambda.is_nan() || lambda <= 0.0 {
            return Err(invalid(format!("lambda = {lambda} must be positive")));
        }
        Ok(Self { family, lambda })
    }

    pub fn krr(lambda: f64) -> Result<Self> {
        Self::new(FilterFamily::Krr, lambda)
    }

    /// Gradient flow stopped at time `t >= 0` (`λ = 1/t`).
    pub fn gradient_flow_time(t: f64) -> Result<Self> {
        if t.is_nan() || t < 0.0 {
            return Err(invalid(format!("stopping time {t} must be non-negative")));
        }
        Self::new(FilterFamily::GradientFlow, 1.0 / t)
    }

    pub fn family(&self) -> FilterFamily {
        self.family
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Time `1/λ` (gradient flow) or step count `1/(ηλ)` (gradient descent).
    pub fn time(&self) -> Option<f64> {
        match self.family {
            FilterFamily::GradientFlow => Some(1.0 / self.lambda),
            FilterFamily::GradientDescent { eta } => Some(1.0 / (eta * self.lambda)),
            _ => None,
        }
    }

    pub fn qualification(&self) -> Qualification {
        self.family.qualification()
    }

    pub fn outside_nominal_range(&self) -> bool {
        self.lambda >= 1.0
    }

    /// `φ_λ(z)` for `z >= 0`.
    pub fn phi(&self, z: f64) -> f64 {
        let lam = self.lambda;
        match self.family {
            FilterFamily::Krr => 1.0 / (z + lam),
            FilterFamily::IteratedRidge { q } => {
                let q = q as f64;
                if z < SERIES_CUTOFF * lam {
                    q / lam * (1.0 - 0.5 * (q + 1.0) * z / lam)
                } else {
                    -(-q * (z / lam).ln_1p()).exp_m1() / z
                }
            }
            FilterFamily::GradientFlow => {
                let t = 1.0 / lam;
                if z * t < SERIES_CUTOFF {
                    t * (1.0 - 0.5 * t * z)
                } else {
                    -(-t * z).exp_m1() / z
                }
            }
            FilterFamily::GradientDescent { eta } => {
                let t = 1.0 / (eta * lam);
                if z * t < SERIES_CUTOFF {
                    eta * t * (1.0 - 0.5 * (t - 1.0) * eta * z)
                } else {
                    -(t * (-eta * z).ln_1p()).exp_m1() / z
                }
            }
        }
    }

    /// `ψ_λ(z) = 1 - zφ_λ(z)` from its closed form.
    ///
    /// For gradient descent the closed form `(1 - ηz)^t` needs `ηz < 1`;
    /// outside that range the result is NaN.
    pub fn psi(&self, z: f64) -> f64 {
        let lam = self.lambda;
        match self.family {
            FilterFamily::Krr => 1.0 / (1.0 + z / lam),
            FilterFamily::IteratedRidge { q } => (-(q as f64) * (z / lam).ln_1p()).exp(),
            FilterFamily::GradientFlow => (-z / lam).exp(),
            FilterFamily::GradientDescent { eta } => {
                if eta * z >= 1.0 {
                    return f64::NAN;
                }
                let t = 1.0 / (eta * lam);
                (t * (-eta * z).ln_1p()).exp()
            }
        }
    }
}

/// Default axiom-check grids: `z ∈ {0} ∪` 199 log-spaced points in
/// `[1e-8, κ²]`, `λ` at 20 log-spaced points in `[1e-4, 0.5]`.
#[derive(Clone, Debug)]
pub struct AxiomGrids {
    pub z: Vec<f64>,
    pub lambda: Vec<f64>,
    /// Largest kernel eigenvalue used for the `ψ_λ(λ₁) >= C₆ λ^τ` check.
    pub lambda_1: f64,
}

impl AxiomGrids {
    pub fn default_for(kappa_sq: f64) -> Self {
        let mut z = vec![0.0];
        z.extend(log_space(1e-8, kappa_sq, 199));
        Self {
            z,
            lambda: log_space(1e-4, 0.5, 20),
            lambda_1: kappa_sq,
        }
    }
}

impl Default for AxiomGrids {
    fn default() -> Self {
        Self::default_for(1.0)
    }
}

pub fn log_space(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct Violation {
    pub item: u8,
    pub check: &'static str,
    pub z: f64,
    pub lambda: f64,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub enum ItemStatus {
    Checked { violations: Vec<Violation> },
    NotApplicable(&'static str),
}

impl ItemStatus {
    pub fn passed(&self) -> bool {
        match self {
            ItemStatus::Checked { violations } => violations.is_empty(),
            ItemStatus::NotApplicable(_) => true,
        }
    }
}

/// Result of [`check_filter_axioms`]. Constants are the tightest values
/// observed on the grid; `None` when the item was not checked or no grid
/// point fell in the relevant region.
#[derive(Clone, Debug, PartialEq)]
pub struct FilterAxiomReport {
    pub family: FilterFamily,
    pub item1: ItemStatus,
    pub item2: ItemStatus,
    pub item3: ItemStatus,
    /// `C₁ … C₈`, index 0 holds `C₁`.
    pub constants: [Option<f64>; 8],
}

impl FilterAxiomReport {
    pub fn passed(&self) -> bool {
        self.item1.passed() && self.item2.passed() && self.item3.passed()
    }

    pub fn constant(&self, i: usize) -> Option<f64> {
        self.constants[i - 1]
    }
}

impl fmt::Display for FilterAxiomReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "family: {} (tau = {})",
            self.family.label(),
            self.family.qualification()
        )?;
        for (i, item) in [&self.item1, &self.item2, &self.item3].iter().enumerate() {
            match item {
                ItemStatus::Checked { violations } if violations.is_empty() => {
                    writeln!(f, "item {}: pass", i + 1)?
                }
                ItemStatus::Checked { violations } => {
                    writeln!(f, "item {}: FAIL ({} violations)", i + 1, violations.len())?;
                    for v in violations.iter().take(10) {
                        writeln!(
                            f,
                            "  {} at z = {:e}, lambda = {:e}: {:e}",
                            v.check, v.z, v.lambda, v.value
                        )?;
                    }
                }
                ItemStatus::NotApplicable(why) => {
                    writeln!(f, "item {}: not applicable, {why}", i + 1)?
                }
            }
        }
        for (i, c) in self.constants.iter().enumerate() {
            match c {
                Some(v) => writeln!(f, "C{} = {v:e}", i + 1)?,
                None => writeln!(f, "C{} = n/a", i + 1)?,
            }
        }
        Ok(())
    }
}

/// Lower-type constants must exceed this, upper-type ones stay below its inverse.
pub const CONSTANT_BOUND: f64 = 1e-12;
/// Slack for `zφ ∈ [0, 1]` and the monotonicity checks.
const ROUNDOFF: f64 = 1e-12;
/// Largest `τ'` sampled for the `ψ ≤ C₂ (z/λ)^{-τ'}` bound.
const TAU_PRIME_CAP: u32 = 8;

/// Falsification of filter axioms (1)–(3) on a `(z, λ)` grid.
///
/// The `z` grid is augmented with `λ` and `λ(1 + 1e-9)` for each `λ`, so the
/// one-sided limits at `z = λ` are probed.
pub fn check_filter_axioms(
    family: FilterFamily,
    lambda_grid: &[f64],
    z_grid: &[f64],
    lambda_1: f64,
) -> Result<FilterAxiomReport> {
    family.validate()?;
    if lambda_grid.is_empty() || z_grid.is_empty() {
        return Err(invalid("axiom grids must be non-empty"));
    }
    let mut lams = lambda_grid.to_vec();
    lams.sort_by(f64::total_cmp);
    let mut zs = z_grid.to_vec();
    for &l in &lams {
        zs.push(l);
        zs.push(l * (1.0 + 1e-9));
    }
    zs.sort_by(f64::total_cmp);
    zs.dedup();
    if zs[0] < 0.0 || lams[0] <= 0.0 {
        return Err(invalid("z must be >= 0 and lambda > 0"));
    }

    let specs: Vec<FilterSpec> = lams
        .iter()
        .map(|&l| FilterSpec::new(family, l))
        .collect::<Result<_>>()?;

    // Item (1)
    let mut v1 = Vec::new();
    for s in &specs {
        let mut prev = f64::NEG_INFINITY;
        for &z in &zs {
            let r = z * s.phi(z);
            if !(-ROUNDOFF..=1.0 + ROUNDOFF).contains(&r) {
                v1.push(viol(1, "z*phi in [0,1]", z, s.lambda, r));
            }
            if r < prev - ROUNDOFF * prev.abs() {
                v1.push(viol(1, "z*phi non-decreasing in z", z, s.lambda, r - prev));
            }
            prev = r;
        }
    }
    for &z in &zs {
        let mut prev = f64::INFINITY;
        for s in &specs {
            let r = z * s.phi(z);
            if r > prev + ROUNDOFF * prev.abs() {
                v1.push(viol(
                    1,
                    "z*phi non-increasing in lambda",
                    z,
                    s.lambda,
                    r - prev,
                ));
            }
            prev = r;
        }
    }

    // Item (2)
    let tau = family.qualification();
    let tau_cap = match tau {
        Qualification::Finite(t) => (t.floor() as u32).min(TAU_PRIME_CAP),
        Qualification::Infinite => TAU_PRIME_CAP,
    };
    let mut c = [None::<f64>; 8];
    let mut v2 = Vec::new();
    for s in &specs {
        let lam = s.lambda;
        for &z in &zs {
            let phi = s.phi(z);
            let psi = s.psi(z);
            if z > lam {
                lower(&mut c[0], z * phi);
                for tp in 0..=tau_cap {
                    upper(&mut c[1], psi * (z / lam).powi(tp as i32));
                }
            } else {
                lower(&mut c[2], lam * phi);
                upper(&mut c[3], lam * phi);
                lower(&mut c[4], psi);
            }
        }
    }
    check_lower(&mut v2, 2, "C1", c[0]);
    check_upper(&mut v2, 2, "C2", c[1]);
    check_lower(&mut v2, 2, "C3", c[2]);
    check_upper(&mut v2, 2, "C4", c[3]);
    check_lower(&mut v2, 2, "C5", c[4]);

    // Item (3)
    let item3 = match tau {
        Qualification::Infinite => ItemStatus::NotApplicable("tau = inf"),
        Qualification::Finite(t) => {
            let mut v3 = Vec::new();
            for s in &specs {
                let lam = s.lambda;
                lower(&mut c[5], s.psi(lambda_1) / lam.powf(t));
                for &z in &zs {
                    let lhs = (z / lam).powf(2.0 * t) * s.psi(z).powi(2);
                    if z > lam {
                        lower(&mut c[6], lhs);
                    } else if z > 0.0 {
                        upper(&mut c[7], lhs / (z * s.phi(z)));
                    } else if lhs != 0.0 {
                        v3.push(viol(3, "C8 at z = 0", z, lam, lhs));
                    }
                }
            }
            check_lower(&mut v3, 3, "C6", c[5]);
            check_lower(&mut v3, 3, "C7", c[6]);
            check_upper(&mut v3, 3, "C8", c[7]);
            ItemStatus::Checked { violations: v3 }
        }
    };

    Ok(FilterAxiomReport {
        family,
        item1: ItemStatus::Checked { violations: v1 },
        item2: ItemStatus::Checked { violations: v2 },
        item3,
        constants: c,
    })
}

/// [`check_filter_axioms`] on [`AxiomGrids::default`].
pub fn check_filter_axioms_default(family: FilterFamily) -> Result<FilterAxiomReport> {
    let g = AxiomGrids::default();
    check_filter_axioms(family, &g.lambda, &g.z, g.lambda_1)
}

fn viol(item: u8, check: &'static str, z: f64, lambda: f64, value: f64) -> Violation {
    Violation {
        item,
        check,
        z,
        lambda,
        value,
    }
}

fn lower(slot: &mut Option<f64>, v: f64) {
    *slot = Some(match *slot {
        Some(c) if v >= c => c,
        _ => v,
    });
}

fn upper(slot: &mut Option<f64>, v: f64) {
    *slot = Some(match *slot {
        Some(c) if v <= c => c,
        _ => v,
    });
}

fn check_lower(out: &mut Vec<Violation>, item: u8, name: &'static str, c: Option<f64>) {
    if let Some(v) = c {
        if !(v.is_finite() && v > CONSTANT_BOUND) {
            out.push(viol(item, name, f64::NAN, f64::NAN, v));
        }
    }
}

fn check_upper(out: &mut Vec<Violation>, item: u8, name: &'static str, c: Option<f64>) {
    if let Some(v) = c {
        if !(v.is_finite() && v < 1.0 / CONSTANT_BOUND) {
            out.push(viol(item, name, f64::NAN, f64::NAN, v));
        }
    }
}
