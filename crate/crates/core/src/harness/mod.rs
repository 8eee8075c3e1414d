//! Seeded Monte-Carlo experiments: data generation, tuning, repeated trials
//! and log-log rate fits.
//!
//! Every trial draws its own design, noise and test set from a generator
//! seeded by `(master_seed, d, trial)`, so any subset of trials reruns
//! identically and results do not depend on scheduling.

mod config;
mod fit;
pub mod output;
mod tuning;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

pub use config::{
    default_c3, AlgorithmConfig, ExperimentConfig, ExperimentKind, KernelConfig, Selection,
    TargetConfig, TuningSpec, DEFAULT_C1, DEFAULT_C2,
};
pub use fit::{fit_rate_loglog, LogLogFit};
pub use tuning::{
    argmin_prefer_larger_lambda, cross_validate, cross_validate_krr, cross_validation_scores,
    holdout_scores, select_gf_time, TimeSelection, TIE_TOL,
};

pub use crate::target::TargetFunction;

use crate::error::{Error, Result};
use crate::filters::FilterSpec;
use crate::kernels::InnerProductKernel;
use crate::par::{map_range, Execution};
use crate::rates::balanced_lambda_exponent;
use crate::regression::{mean_stderr, risk_from_predictions, Dataset, SpectralSolver};
use crate::sphere::{sample_uniform_rng, PointCloud, SphereDim};
use tuning::EvalBasis;

/// Fraction of failed trials above which an experiment is aborted.
pub const MAX_FAILURE_FRACTION: f64 = 0.1;

/// `f_⋆(X)` for a target on matching points.
pub fn eval_target(f: &TargetFunction, x: &PointCloud) -> Result<Vec<f64>> {
    f.eval(x)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed for one `(d, trial)` cell.
pub fn trial_seed(master: u64, d: usize, trial: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(master) ^ d as u64) ^ trial)
}

/// Seed for the target drawn once per `d` (anchors or `ξ`).
fn target_seed(master: u64, d: usize) -> u64 {
    trial_seed(master, d, u64::MAX)
}

/// The regression target used at sphere dimension `d`.
pub fn build_target(
    cfg: &TargetConfig,
    kernel: &InnerProductKernel,
    d: usize,
    master_seed: u64,
) -> Result<TargetFunction> {
    let dim = SphereDim::new(d)?;
    let mut rng = ChaCha8Rng::seed_from_u64(target_seed(master_seed, d));
    match cfg {
        TargetConfig::KernelSections { anchors } => Ok(TargetFunction::kernel_sections(
            kernel.clone(),
            sample_uniform_rng(dim, *anchors, &mut rng),
        )),
        TargetConfig::Gegenbauer { k, s, convention } => {
            let xi = sample_uniform_rng(dim, 1, &mut rng).row(0).to_vec();
            TargetFunction::gegenbauer_degree(kernel, dim, *k, *s, xi, *convention)
        }
        TargetConfig::Zero => Ok(TargetFunction::Zero),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrialRow {
    pub d: usize,
    pub n: usize,
    pub trial: usize,
    pub algorithm: String,
    pub tuning_rule: String,
    /// `λ`, or `t` for stopping-time rules.
    pub tuned_param: f64,
    pub test_risk: f64,
    pub mc_stderr: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrialFailure {
    pub d: usize,
    pub trial: usize,
    pub algorithm: String,
    pub code: String,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DimensionMean {
    pub d: usize,
    pub n: usize,
    pub mean_risk: f64,
    pub stderr: f64,
    pub trials: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AlgorithmSummary {
    pub algorithm: String,
    pub tuning_rule: String,
    pub oracle_tuning: bool,
    pub per_d: Vec<DimensionMean>,
    pub slope_vs_n: Option<LogLogFit>,
    pub slope_vs_d: Option<LogLogFit>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentResult {
    pub kind: ExperimentKind,
    pub master_seed: u64,
    /// Sorted by `(d, trial, algorithm order in the config)`.
    pub rows: Vec<TrialRow>,
    pub failures: Vec<TrialFailure>,
    pub algorithms: Vec<AlgorithmSummary>,
    pub saturation_observed: Option<bool>,
    pub warnings: Vec<String>,
    pub total_units: usize,
}

#[derive(Serialize)]
pub struct Summary<'a> {
    pub kind: ExperimentKind,
    pub master_seed: u64,
    pub algorithms: &'a [AlgorithmSummary],
    pub saturation_observed: Option<bool>,
    pub failures: &'a [TrialFailure],
    pub total_units: usize,
    pub warnings: &'a [String],
}

impl ExperimentResult {
    pub fn summary(&self) -> Summary<'_> {
        Summary {
            kind: self.kind,
            master_seed: self.master_seed,
            algorithms: &self.algorithms,
            saturation_observed: self.saturation_observed,
            failures: &self.failures,
            total_units: self.total_units,
            warnings: &self.warnings,
        }
    }

    pub fn algorithm(&self, name: &str) -> Option<&AlgorithmSummary> {
        self.algorithms.iter().find(|a| a.algorithm == name)
    }
}

struct DimContext {
    d: usize,
    n: usize,
    dim: SphereDim,
    target: TargetFunction,
}

type Outcome = std::result::Result<TrialRow, TrialFailure>;

fn failure(d: usize, trial: usize, algorithm: &str, e: &Error) -> TrialFailure {
    TrialFailure {
        d,
        trial,
        algorithm: algorithm.to_string(),
        code: e.code().to_string(),
        message: e.to_string(),
    }
}

fn run_trial(
    cfg: &ExperimentConfig,
    kernel: &InnerProductKernel,
    ctx: &DimContext,
    trial: usize,
) -> Vec<Outcome> {
    let seed = trial_seed(cfg.master_seed, ctx.d, trial as u64);
    let names: Vec<String> = cfg.algorithms.iter().map(|a| a.name()).collect();
    let all_fail = |e: Error| {
        names
            .iter()
            .map(|a| Err(failure(ctx.d, trial, a, &e)))
            .collect::<Vec<_>>()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = sample_uniform_rng(ctx.dim, ctx.n, &mut rng);
    let noise: Vec<f64> = (0..ctx.n)
        .map(|_| cfg.sigma * rng.sample::<f64, _>(StandardNormal))
        .collect();
    let test = sample_uniform_rng(ctx.dim, cfg.test_size, &mut rng);
    let prepared = (|| -> Result<_> {
        let f_x = ctx.target.eval(&x)?;
        let y: Vec<f64> = f_x.iter().zip(&noise).map(|(f, e)| f + e).collect();
        let f_test = ctx.target.eval(&test)?;
        let data = Dataset::new(x.clone(), y, cfg.sigma)?;
        let solver = SpectralSolver::new(kernel, &x)?;
        Ok((data, f_test, solver))
    })();
    let (data, f_test, solver) = match prepared {
        Ok(v) => v,
        Err(e) => return all_fail(e),
    };
    let basis = match EvalBasis::new(&solver, &test) {
        Ok(b) => b,
        Err(e) => return all_fail(e),
    };
    let proj = solver.project(&data.y);
    cfg.algorithms
        .iter()
        .zip(&names)
        .enumerate()
        .map(|(a_idx, (alg, name))| {
            let tune_seed = splitmix64(seed ^ (a_idx as u64 + 1));
            run_algorithm(alg, kernel, ctx, &data, &basis, &proj, &f_test, tune_seed)
                .map(|(param, risk)| TrialRow {
                    d: ctx.d,
                    n: ctx.n,
                    trial,
                    algorithm: name.clone(),
                    tuning_rule: alg.tuning.label(),
                    tuned_param: param,
                    test_risk: risk.0,
                    mc_stderr: risk.1,
                })
                .map_err(|e| failure(ctx.d, trial, name, &e))
        })
        .collect()
}

#[allow(clippy::too_many_arguments)]
fn run_algorithm(
    alg: &AlgorithmConfig,
    kernel: &InnerProductKernel,
    ctx: &DimContext,
    data: &Dataset,
    basis: &EvalBasis<'_>,
    proj: &[f64],
    f_test: &[f64],
    seed: u64,
) -> Result<(f64, (f64, f64))> {
    let lambdas = alg.tuning.lambdas(ctx.d, ctx.n);
    let family = alg.filter;
    let idx = if lambdas.len() == 1 {
        0
    } else {
        let selection = match &alg.tuning {
            TuningSpec::LambdaGrid { selection, .. }
            | TuningSpec::StoppingTime { selection, .. } => *selection,
            TuningSpec::Fixed { .. } => unreachable!("fixed tuning has a single grid point"),
        };
        let scores = match selection {
            Selection::BestOnTest => basis.scores(family, &lambdas, proj, f_test),
            Selection::Holdout => holdout_scores(data, kernel, family, &lambdas, seed)?,
            Selection::Cv5 => {
                if data.n() < 10 {
                    return Err(Error::InvalidArgument(format!(
                        "cross-validation needs n >= 10, got {}",
                        data.n()
                    )));
                }
                cross_validation_scores(data, kernel, family, &lambdas, 5, seed)?
            }
        };
        tuning::select_index(&scores, &lambdas)?
    };
    let lambda = lambdas[idx];
    let filter = FilterSpec::new(family, lambda)?;
    let pred = basis.predict(&filter, proj)?;
    let r = risk_from_predictions(&pred, f_test);
    if !r.excess_risk.is_finite() {
        return Err(Error::Divergence("non-finite test risk".into()));
    }
    let param = if alg.tuning.reports_time() {
        1.0 / lambda
    } else {
        lambda
    };
    Ok((param, (r.excess_risk, r.mc_std_error)))
}

fn summarize(cfg: &ExperimentConfig, rows: &[TrialRow]) -> (Vec<AlgorithmSummary>, Vec<String>) {
    let mut warnings = Vec::new();
    let summaries = cfg
        .algorithms
        .iter()
        .map(|alg| {
            let name = alg.name();
            let per_d: Vec<DimensionMean> = cfg
                .d_list
                .iter()
                .enumerate()
                .filter_map(|(i, &d)| {
                    let risks: Vec<f64> = rows
                        .iter()
                        .filter(|r| r.d == d && r.algorithm == name)
                        .map(|r| r.test_risk)
                        .collect();
                    if risks.is_empty() {
                        return None;
                    }
                    let (mean_risk, stderr) = mean_stderr(&risks);
                    Some(DimensionMean {
                        d,
                        n: cfg.sample_size(i),
                        mean_risk,
                        stderr,
                        trials: risks.len(),
                    })
                })
                .collect();
            let fit = |pts: Vec<(f64, f64)>, what: &str, warnings: &mut Vec<String>| {
                match fit_rate_loglog(&pts) {
                    Ok(f) => {
                        for w in &f.warnings {
                            warnings.push(format!("{name} {what}: {w}"));
                        }
                        Some(f)
                    }
                    Err(e) => {
                        warnings.push(format!("{name} {what}: no fit ({e})"));
                        None
                    }
                }
            };
            let slope_vs_n = fit(
                per_d.iter().map(|m| (m.n as f64, m.mean_risk)).collect(),
                "slope vs n",
                &mut warnings,
            );
            let slope_vs_d = fit(
                per_d.iter().map(|m| (m.d as f64, m.mean_risk)).collect(),
                "slope vs d",
                &mut warnings,
            );
            AlgorithmSummary {
                algorithm: name,
                tuning_rule: alg.tuning.label(),
                oracle_tuning: alg.tuning.is_oracle(),
                per_d,
                slope_vs_n,
                slope_vs_d,
            }
        })
        .collect();
    (summaries, warnings)
}

/// Rate experiment with rayon over trials (when enabled).
pub fn run_rate_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    run_experiment_with(cfg, Execution::Parallel, ExperimentKind::Rate)
}

/// Saturation experiment: rate experiment plus the slope comparison between
/// the lowest- and highest-qualification algorithms.
pub fn run_saturation_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    run_experiment_with(cfg, Execution::Parallel, ExperimentKind::Saturation)
}

/// Dispatch on `cfg.kind`.
pub fn run_experiment(cfg: &ExperimentConfig, exec: Execution) -> Result<ExperimentResult> {
    run_experiment_with(cfg, exec, cfg.kind)
}

fn saturation_pair(cfg: &ExperimentConfig) -> Result<(usize, usize)> {
    let tau = |i: usize| cfg.algorithms[i].filter.qualification().value();
    let n = cfg.algorithms.len();
    let lo = (0..n)
        .min_by(|&a, &b| tau(a).total_cmp(&tau(b)))
        .unwrap_or(0);
    let hi = (0..n)
        .max_by(|&a, &b| tau(a).total_cmp(&tau(b)))
        .unwrap_or(0);
    if tau(lo) == tau(hi) {
        return Err(Error::Config(
            "saturation experiment needs algorithms with different qualifications".into(),
        ));
    }
    Ok((lo, hi))
}

/// Warn when fixed exponents `θ` are ordered against the balanced `ℓ`.
fn theta_warnings(cfg: &ExperimentConfig) -> Vec<String> {
    let Some(s) = cfg.target.source_exponent() else {
        return Vec::new();
    };
    let fixed: Vec<(String, f64, f64)> = cfg
        .algorithms
        .iter()
        .filter_map(|a| match a.tuning {
            TuningSpec::Fixed { theta, .. } => {
                let tau = a.filter.qualification().value();
                let ell = balanced_lambda_exponent(s, tau, cfg.gamma).ok()?.ell;
                Some((a.name(), theta, ell))
            }
            _ => None,
        })
        .collect();
    let mut out = Vec::new();
    for (i, a) in fixed.iter().enumerate() {
        for b in &fixed[i + 1..] {
            let dt = a.1 - b.1;
            let dl = a.2 - b.2;
            if dt * dl < 0.0 {
                out.push(format!(
                    "tuning deviates from the balanced exponents: theta({}) = {}, theta({}) = {} \
                     but ell({}) = {}, ell({}) = {}",
                    a.0, a.1, b.0, b.1, a.0, a.2, b.0, b.2
                ));
            }
        }
    }
    out
}

fn run_experiment_with(
    cfg: &ExperimentConfig,
    exec: Execution,
    kind: ExperimentKind,
) -> Result<ExperimentResult> {
    cfg.validate()?;
    let pair = match kind {
        ExperimentKind::Saturation => Some(saturation_pair(cfg)?),
        ExperimentKind::Rate => None,
    };
    let kernel = cfg.kernel.build()?;
    let contexts = cfg
        .d_list
        .iter()
        .enumerate()
        .map(|(i, &d)| {
            Ok(DimContext {
                d,
                n: cfg.sample_size(i),
                dim: SphereDim::new(d)?,
                target: build_target(&cfg.target, &kernel, d, cfg.master_seed)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let reps = cfg.repeats;
    let cells = contexts.len() * reps;
    let outcomes: Vec<Vec<Outcome>> = map_range(exec, cells, |c| {
        run_trial(cfg, &kernel, &contexts[c / reps], c % reps)
    });
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for o in outcomes.into_iter().flatten() {
        match o {
            Ok(r) => rows.push(r),
            Err(f) => failures.push(f),
        }
    }
    let total_units = cells * cfg.algorithms.len();
    let (algorithms, mut warnings) = summarize(cfg, &rows);
    if kind == ExperimentKind::Saturation {
        warnings.extend(theta_warnings(cfg));
    }
    let saturation_observed = pair.and_then(|(lo, hi)| {
        let s_lo = algorithms[lo].slope_vs_d.as_ref()?.slope;
        let s_hi = algorithms[hi].slope_vs_d.as_ref()?.slope;
        Some(s_lo.abs() < s_hi.abs() - cfg.saturation_margin)
    });
    let result = ExperimentResult {
        kind,
        master_seed: cfg.master_seed,
        rows,
        failures,
        algorithms,
        saturation_observed,
        warnings,
        total_units,
    };
    let failed = result.failures.len();
    if failed as f64 > MAX_FAILURE_FRACTION * total_units as f64 {
        return Err(Error::TooManyFailures {
            failed,
            total: total_units,
            partial: Box::new(result),
        });
    }
    Ok(result)
}
