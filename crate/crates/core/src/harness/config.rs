//! JSON experiment configuration.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filters::FilterFamily;
use crate::kernels::InnerProductKernel;
use crate::sphere::GegenbauerConvention;

/// `C₁` grid for stopping times `t = C₁ n^{1/2}`.
pub const DEFAULT_C1: [f64; 7] = [0.001, 0.01, 0.1, 1.0, 10.0, 100.0, 1000.0];
/// `C₂` grid for `λ = C₂ n^{-C₃}`.
pub const DEFAULT_C2: [f64; 13] = [
    0.001, 0.005, 0.01, 0.1, 0.5, 1.0, 2.0, 5.0, 10.0, 40.0, 100.0, 300.0, 1000.0,
];

/// `C₃ ∈ {0.1, 0.2, …, 1.5}`.
pub fn default_c3() -> Vec<f64> {
    (1..=15).map(|i| i as f64 / 10.0).collect()
}

fn default_c1() -> Vec<f64> {
    DEFAULT_C1.to_vec()
}

fn default_c2() -> Vec<f64> {
    DEFAULT_C2.to_vec()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum KernelConfig {
    Rbf,
    Ntk,
    PowerSeries { coeffs: Vec<f64> },
}

impl KernelConfig {
    pub fn build(&self) -> Result<InnerProductKernel> {
        match self {
            KernelConfig::Rbf => Ok(InnerProductKernel::rbf()),
            KernelConfig::Ntk => Ok(InnerProductKernel::ntk()),
            KernelConfig::PowerSeries { coeffs } => {
                InnerProductKernel::power_series(coeffs.clone())
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Selection {
    /// Minimise the Monte-Carlo test risk (oracle tuning).
    BestOnTest,
    /// 80/20 split of the training set.
    Holdout,
    /// Five-fold cross-validation.
    Cv5,
}

impl Selection {
    pub fn label(self) -> &'static str {
        match self {
            Selection::BestOnTest => "best_on_test",
            Selection::Holdout => "holdout",
            Selection::Cv5 => "cv5",
        }
    }
}

fn cv5() -> Selection {
    Selection::Cv5
}

fn best_on_test() -> Selection {
    Selection::BestOnTest
}

fn half() -> f64 {
    0.5
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case", deny_unknown_fields)]
pub enum TuningSpec {
    /// `λ = c · d^{-θ}`.
    Fixed { c: f64, theta: f64 },
    /// `λ = C₂ n^{-C₃}` over the product grid.
    LambdaGrid {
        #[serde(default = "default_c2")]
        c2: Vec<f64>,
        #[serde(default = "default_c3")]
        c3: Vec<f64>,
        #[serde(default = "cv5")]
        selection: Selection,
    },
    /// `t = C₁ n^{exponent}`, `λ = 1/t`.
    StoppingTime {
        #[serde(default = "default_c1")]
        c1: Vec<f64>,
        #[serde(default = "half")]
        exponent: f64,
        #[serde(default = "best_on_test")]
        selection: Selection,
    },
}

impl TuningSpec {
    pub fn label(&self) -> String {
        match self {
            TuningSpec::Fixed { .. } => "fixed".into(),
            TuningSpec::LambdaGrid { selection, .. } => format!("lambda_{}", selection.label()),
            TuningSpec::StoppingTime { selection, .. } => format!("time_{}", selection.label()),
        }
    }

    pub fn is_oracle(&self) -> bool {
        matches!(
            self,
            TuningSpec::LambdaGrid {
                selection: Selection::BestOnTest,
                ..
            } | TuningSpec::StoppingTime {
                selection: Selection::BestOnTest,
                ..
            }
        )
    }

    /// Whether the reported parameter is a time `t` rather than `λ`.
    pub fn reports_time(&self) -> bool {
        matches!(self, TuningSpec::StoppingTime { .. })
    }

    /// Candidate `λ` values (descending order not guaranteed).
    pub fn lambdas(&self, d: usize, n: usize) -> Vec<f64> {
        let (df, nf) = (d as f64, n as f64);
        match self {
            TuningSpec::Fixed { c, theta } => vec![c * df.powf(-theta)],
            TuningSpec::LambdaGrid { c2, c3, .. } => c2
                .iter()
                .flat_map(|a| c3.iter().map(move |b| a * nf.powf(-b)))
                .collect(),
            TuningSpec::StoppingTime { c1, exponent, .. } => c1
                .iter()
                .map(|c| {
                    let t = c * nf.powf(*exponent);
                    if t == 0.0 {
                        f64::INFINITY
                    } else {
                        1.0 / t
                    }
                })
                .collect(),
        }
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        match self {
            TuningSpec::Fixed { c, theta } => {
                if !(c.is_finite() && *c > 0.0 && theta.is_finite()) {
                    return bad("fixed tuning needs c > 0 and finite theta");
                }
            }
            TuningSpec::LambdaGrid { c2, c3, .. } => {
                if c2.is_empty() || c3.is_empty() {
                    return bad("lambda grid must be non-empty");
                }
                if c2.iter().any(|v| !(v.is_finite() && *v > 0.0))
                    || c3.iter().any(|v| !v.is_finite())
                {
                    return bad("lambda grid constants must be finite, C2 > 0");
                }
            }
            TuningSpec::StoppingTime { c1, exponent, .. } => {
                if c1.is_empty() {
                    return bad("stopping-time grid must be non-empty");
                }
                if c1.iter().any(|v| !(v.is_finite() && *v >= 0.0)) || !exponent.is_finite() {
                    return bad("stopping-time constants must be finite and non-negative");
                }
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlgorithmConfig {
    pub filter: FilterFamily,
    pub tuning: TuningSpec,
    /// Name used in output; defaults to the filter label.
    #[serde(default)]
    pub label: Option<String>,
}

impl AlgorithmConfig {
    pub fn name(&self) -> String {
        self.label.clone().unwrap_or_else(|| self.filter.label())
    }
}

fn three() -> usize {
    3
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum TargetConfig {
    /// `Σ_i K(u_i, ·)` with `anchors` random anchors drawn once per `d`.
    KernelSections {
        #[serde(default = "three")]
        anchors: usize,
    },
    /// `√(μ_k^s N(d,k)) P_k(<ξ, ·>)` with `ξ` drawn once per `d`.
    Gegenbauer {
        k: usize,
        s: f64,
        #[serde(default)]
        convention: GegenbauerConvention,
    },
    Zero,
}

impl TargetConfig {
    /// Source exponent the target is built for (`1` for kernel sections).
    pub fn source_exponent(&self) -> Option<f64> {
        match self {
            TargetConfig::KernelSections { .. } => Some(1.0),
            TargetConfig::Gegenbauer { s, .. } => Some(*s),
            TargetConfig::Zero => None,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    #[default]
    Rate,
    Saturation,
}

fn one() -> f64 {
    1.0
}
fn fifty() -> usize {
    50
}
fn thousand() -> usize {
    1000
}
fn n_max_default() -> usize {
    4000
}
fn margin_default() -> f64 {
    0.2
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub kind: ExperimentKind,
    pub kernel: KernelConfig,
    pub algorithms: Vec<AlgorithmConfig>,
    pub target: TargetConfig,
    pub gamma: f64,
    pub d_list: Vec<usize>,
    /// Explicit sample sizes, one per `d`; otherwise `n = round(c_n d^γ)`.
    #[serde(default)]
    pub n_list: Option<Vec<usize>>,
    #[serde(default = "one")]
    pub sigma: f64,
    #[serde(default = "fifty")]
    pub repeats: usize,
    #[serde(default = "thousand")]
    pub test_size: usize,
    #[serde(default = "n_max_default")]
    pub n_max: usize,
    #[serde(default = "one")]
    pub c_n: f64,
    #[serde(default)]
    pub master_seed: u64,
    /// Required slope-magnitude gap for `saturation_observed`.
    #[serde(default = "margin_default")]
    pub saturation_margin: f64,
    #[serde(default)]
    pub output: Option<String>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn sample_size(&self, index: usize) -> usize {
        match &self.n_list {
            Some(v) => v[index],
            None => (self.c_n * (self.d_list[index] as f64).powf(self.gamma)).round() as usize,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.repeats == 0 {
            return bad("repeats must be >= 1".into());
        }
        if self.d_list.is_empty() {
            return bad("d_list must be non-empty".into());
        }
        if self.d_list.windows(2).any(|w| w[0] >= w[1]) {
            return bad("d_list must be strictly ascending".into());
        }
        if self.d_list[0] == 0 {
            return bad("d must be >= 1".into());
        }
        if !(self.gamma.is_finite() && self.gamma > 0.0) {
            return bad(format!("gamma = {} must be positive", self.gamma));
        }
        if !(self.sigma.is_finite() && self.sigma >= 0.0) {
            return bad(format!("sigma = {} must be non-negative", self.sigma));
        }
        if !(self.c_n.is_finite() && self.c_n > 0.0) {
            return bad("c_n must be positive".into());
        }
        if self.test_size == 0 {
            return bad("test_size must be >= 1".into());
        }
        if !self.saturation_margin.is_finite() {
            return bad("saturation_margin must be finite".into());
        }
        if let Some(v) = &self.n_list {
            if v.len() != self.d_list.len() {
                return bad("n_list and d_list lengths differ".into());
            }
        }
        if self.algorithms.is_empty() {
            return bad("at least one algorithm is required".into());
        }
        for a in &self.algorithms {
            a.filter
                .validate()
                .map_err(|e| Error::Config(e.to_string()))?;
            a.tuning.validate()?;
        }
        let mut names: Vec<String> = self.algorithms.iter().map(|a| a.name()).collect();
        names.sort();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return bad("algorithm names must be unique; set `label`".into());
        }
        match &self.target {
            TargetConfig::KernelSections { anchors } if *anchors == 0 => {
                return bad("kernel_sections needs at least one anchor".into())
            }
            TargetConfig::Gegenbauer { s, .. } if !(s.is_finite() && *s > 0.0) => {
                return bad("gegenbauer target needs s > 0".into())
            }
            _ => {}
        }
        for i in 0..self.d_list.len() {
            let n = self.sample_size(i);
            if n == 0 {
                return bad(format!("n = 0 at d = {}", self.d_list[i]));
            }
            if n > self.n_max {
                return bad(format!(
                    "n = {n} at d = {} exceeds n_max = {}",
                    self.d_list[i], self.n_max
                ));
            }
        }
        self.kernel
            .build()
            .map_err(|e| Error::Config(e.to_string()))?;
        Ok(())
    }
}
