//! Hyperparameter selection on a grid of `λ` values.

use faer::Mat;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Error, Result};
use crate::filters::{FilterFamily, FilterSpec};
use crate::kernels::{cross_kernel_with, InnerProductKernel};
use crate::linalg::mat_vec;
use crate::par::Execution;
use crate::regression::{Dataset, SpectralSolver};
use crate::sphere::PointCloud;

/// Scores closer than this are treated as equal.
pub const TIE_TOL: f64 = 1e-15;

/// Predictions of a fitted solver at fixed evaluation points for any filter,
/// through `E = K(X_eval, X) U`.
pub(crate) struct EvalBasis<'a> {
    solver: &'a SpectralSolver,
    e: Mat<f64>,
}

impl<'a> EvalBasis<'a> {
    pub(crate) fn new(solver: &'a SpectralSolver, x_eval: &PointCloud) -> Result<Self> {
        let k = cross_kernel_with(
            solver.kernel(),
            x_eval,
            solver.points(),
            Execution::Sequential,
        )?;
        let e = &k * &solver.eigen().vectors;
        Ok(Self { solver, e })
    }

    pub(crate) fn predict(&self, filter: &FilterSpec, proj: &[f64]) -> Result<Vec<f64>> {
        let w = self.solver.spectral_weights(filter, proj)?;
        Ok(mat_vec(&self.e, &w))
    }

    /// Mean squared error against `truth` for each `λ`; failures score `+∞`.
    pub(crate) fn scores(
        &self,
        family: FilterFamily,
        lambdas: &[f64],
        proj: &[f64],
        truth: &[f64],
    ) -> Vec<f64> {
        lambdas
            .iter()
            .map(|&l| {
                let pred = FilterSpec::new(family, l).and_then(|f| self.predict(&f, proj));
                match pred {
                    Ok(p) => {
                        let m = p.len() as f64;
                        let s = p
                            .iter()
                            .zip(truth)
                            .map(|(a, b)| (a - b).powi(2))
                            .sum::<f64>()
                            / m;
                        if s.is_nan() {
                            f64::INFINITY
                        } else {
                            s
                        }
                    }
                    Err(_) => f64::INFINITY,
                }
            })
            .collect()
    }
}

/// Index of the smallest score; ties within [`TIE_TOL`] go to the larger `λ`.
pub fn argmin_prefer_larger_lambda(scores: &[f64], lambdas: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &s) in scores.iter().enumerate() {
        if !s.is_finite() {
            continue;
        }
        best = match best {
            None => Some(i),
            Some(b) => {
                let sb = scores[b];
                if s < sb - TIE_TOL || ((s - sb).abs() <= TIE_TOL && lambdas[i] > lambdas[b]) {
                    Some(i)
                } else {
                    Some(b)
                }
            }
        };
    }
    best
}

fn shuffled(n: usize, seed: u64) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    idx
}

/// Validation scores of training on `train_idx` and predicting `val_idx`.
fn split_scores(
    data: &Dataset,
    kernel: &InnerProductKernel,
    family: FilterFamily,
    lambdas: &[f64],
    train_idx: &[usize],
    val_idx: &[usize],
) -> Result<Vec<f64>> {
    let xt = data.x.select(train_idx);
    let yt: Vec<f64> = train_idx.iter().map(|&i| data.y[i]).collect();
    let xv = data.x.select(val_idx);
    let yv: Vec<f64> = val_idx.iter().map(|&i| data.y[i]).collect();
    let solver = SpectralSolver::new(kernel, &xt)?;
    let basis = EvalBasis::new(&solver, &xv)?;
    Ok(basis.scores(family, lambdas, &solver.project(&yt), &yv))
}

/// Mean validation error per `λ` under `folds`-fold cross-validation with
/// contiguous folds after a seeded shuffle.
pub fn cross_validation_scores(
    data: &Dataset,
    kernel: &InnerProductKernel,
    family: FilterFamily,
    lambdas: &[f64],
    folds: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    let n = data.n();
    if folds < 2 || n < folds {
        return Err(invalid(format!(
            "{folds}-fold cross-validation needs n >= {folds}, got {n}"
        )));
    }
    let idx = shuffled(n, seed);
    let mut total = vec![0.0; lambdas.len()];
    for f in 0..folds {
        let (lo, hi) = (f * n / folds, (f + 1) * n / folds);
        let val = &idx[lo..hi];
        let train: Vec<usize> = idx[..lo].iter().chain(&idx[hi..]).copied().collect();
        let s = split_scores(data, kernel, family, lambdas, &train, val)?;
        for (t, v) in total.iter_mut().zip(s) {
            *t += v * (hi - lo) as f64;
        }
    }
    Ok(total.into_iter().map(|t| t / n as f64).collect())
}

fn pick(scores: &[f64], lambdas: &[f64]) -> Result<usize> {
    argmin_prefer_larger_lambda(scores, lambdas)
        .ok_or_else(|| Error::NonConvergence("every grid point failed to produce a score".into()))
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(invalid("tuning grid is empty"));
    }
    Ok(())
}

/// Five-fold cross-validated KRR `λ`; ties go to the larger `λ`.
pub fn cross_validate_krr(
    data: &Dataset,
    kernel: &InnerProductKernel,
    grid: &[f64],
    seed: u64,
) -> Result<f64> {
    cross_validate(data, kernel, FilterFamily::Krr, grid, seed)
}

/// Five-fold cross-validation for any filter family.
pub fn cross_validate(
    data: &Dataset,
    kernel: &InnerProductKernel,
    family: FilterFamily,
    grid: &[f64],
    seed: u64,
) -> Result<f64> {
    check_grid(grid)?;
    if grid.len() == 1 {
        return Ok(grid[0]);
    }
    if data.n() < 10 {
        return Err(invalid(format!(
            "cross-validation needs n >= 10, got {}",
            data.n()
        )));
    }
    let scores = cross_validation_scores(data, kernel, family, grid, 5, seed)?;
    Ok(grid[pick(&scores, grid)?])
}

/// Rule for choosing a gradient-flow stopping time.
#[derive(Clone, Copy, Debug)]
pub enum TimeSelection<'a> {
    /// Seeded 80/20 split of the training data.
    Holdout { seed: u64 },
    /// Smallest risk against the noiseless target on a test set.
    BestOnTest { x: &'a PointCloud, f: &'a [f64] },
}

/// Stopping time from `grid`; ties go to the smaller `t`.
pub fn select_gf_time(
    data: &Dataset,
    kernel: &InnerProductKernel,
    grid: &[f64],
    rule: TimeSelection<'_>,
) -> Result<f64> {
    check_grid(grid)?;
    if grid.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
        return Err(invalid("stopping times must be finite and non-negative"));
    }
    if grid.len() == 1 {
        return Ok(grid[0]);
    }
    let lambdas: Vec<f64> = grid
        .iter()
        .map(|&t| if t == 0.0 { f64::INFINITY } else { 1.0 / t })
        .collect();
    let scores = match rule {
        TimeSelection::Holdout { seed } => {
            holdout_scores(data, kernel, FilterFamily::GradientFlow, &lambdas, seed)?
        }
        TimeSelection::BestOnTest { x, f } => {
            let solver = SpectralSolver::new(kernel, &data.x)?;
            let basis = EvalBasis::new(&solver, x)?;
            basis.scores(
                FilterFamily::GradientFlow,
                &lambdas,
                &solver.project(&data.y),
                f,
            )
        }
    };
    Ok(grid[pick(&scores, &lambdas)?])
}

/// Validation error per `λ` on a seeded 80/20 split.
pub fn holdout_scores(
    data: &Dataset,
    kernel: &InnerProductKernel,
    family: FilterFamily,
    lambdas: &[f64],
    seed: u64,
) -> Result<Vec<f64>> {
    let n = data.n();
    if n < 2 {
        return Err(invalid("holdout needs at least two points"));
    }
    let idx = shuffled(n, seed);
    let n_train = ((n as f64) * 0.8).round().clamp(1.0, (n - 1) as f64) as usize;
    split_scores(
        data,
        kernel,
        family,
        lambdas,
        &idx[..n_train],
        &idx[n_train..],
    )
}

pub(crate) fn select_index(scores: &[f64], lambdas: &[f64]) -> Result<usize> {
    pick(scores, lambdas)
}
