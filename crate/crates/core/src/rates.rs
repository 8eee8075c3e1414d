//! Closed-form convergence-rate exponents under the scaling `n ≍ d^γ`.
//!
//! All results are exponents `r` with risk `≍ d^{-r}`; logarithmic factors are
//! carried only as annotations. `τ = ∞` is `f64::INFINITY`.

use std::fmt;

use crate::error::{invalid, Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RateQuery {
    pub s: f64,
    pub tau: f64,
    pub gamma: f64,
}

impl RateQuery {
    pub fn new(s: f64, tau: f64, gamma: f64) -> Result<Self> {
        if !(s.is_finite() && s > 0.0) {
            return Err(invalid(format!("s = {s} must be positive and finite")));
        }
        if !(gamma.is_finite() && gamma > 0.0) {
            return Err(invalid(format!(
                "gamma = {gamma} must be positive and finite"
            )));
        }
        if tau.is_nan() || tau < 1.0 {
            return Err(invalid(format!("tau = {tau} must be >= 1")));
        }
        Ok(Self { s, tau, gamma })
    }
}

/// Which term of the minimum is attained (ties go to the earlier term).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Branch {
    /// `γ - p`
    First,
    /// `(τ(γ-p+1) + p s̃)/(τ+1)`, only present when `s > τ`.
    Middle,
    /// `s(p+1)` or `s̃(p+1)`
    Last,
}

impl fmt::Display for Branch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Branch::First => "first branch",
            Branch::Middle => "middle branch",
            Branch::Last => "last branch",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RateResult {
    pub p: usize,
    pub exponent: f64,
    pub s_tilde: Option<f64>,
    pub regime: Branch,
    pub log_factor_note: &'static str,
    pub warnings: Vec<String>,
}

/// The integer `p >= 0` with `p(s+1) <= γ < (p+1)(s+1)`, by exact comparison.
pub fn phase_index(s: f64, gamma: f64) -> usize {
    let w = s + 1.0;
    let mut p = (gamma / w).floor().max(0.0) as usize;
    while p > 0 && p as f64 * w > gamma {
        p -= 1;
    }
    while (p + 1) as f64 * w <= gamma {
        p += 1;
    }
    p
}

fn argmin(terms: &[(f64, Branch)]) -> (f64, Branch) {
    let mut best = terms[0];
    for &t in &terms[1..] {
        if t.0 < best.0 {
            best = t;
        }
    }
    best
}

fn log_note(tau: f64, p: usize) -> &'static str {
    if tau.is_infinite() && p == 0 {
        "(ln d)^2"
    } else {
        "poly(ln d)"
    }
}

/// Rate of an optimally tuned spectral algorithm with qualification `τ`.
///
/// `s <= τ`: `min{γ-p, s(p+1)}`. `s > τ`, with `s̃ = min{s, 2τ}`:
/// `min{γ-p, (τ(γ-p+1) + p s̃)/(τ+1), s̃(p+1)}`.
pub fn spectral_rate_exponent(q: RateQuery) -> RateResult {
    let RateQuery { s, tau, gamma } = q;
    let p = phase_index(s, gamma);
    let pf = p as f64;
    let mut warnings = Vec::new();
    if s <= tau {
        if tau.is_finite() {
            let ok_ii = s > 1.0 / (2.0 * tau);
            let ok_iii = gamma > (2.0 * tau + 1.0) * s / (2.0 * tau * (1.0 + s));
            if !(ok_ii || ok_iii) {
                warnings.push(
                    "neither s > 1/(2 tau) nor gamma > (2 tau + 1) s/(2 tau (1 + s)) holds; \
                     the rate is outside its proven range"
                        .to_string(),
                );
            }
        }
        let (r, b) = argmin(&[(gamma - pf, Branch::First), (s * (pf + 1.0), Branch::Last)]);
        RateResult {
            p,
            exponent: r,
            s_tilde: None,
            regime: b,
            log_factor_note: log_note(tau, p),
            warnings,
        }
    } else {
        let st = s.min(2.0 * tau);
        let (r, b) = argmin(&[
            (gamma - pf, Branch::First),
            (
                (tau * (gamma - pf + 1.0) + pf * st) / (tau + 1.0),
                Branch::Middle,
            ),
            (st * (pf + 1.0), Branch::Last),
        ]);
        RateResult {
            p,
            exponent: r,
            s_tilde: Some(st),
            regime: b,
            log_factor_note: log_note(tau, p),
            warnings,
        }
    }
}

/// Kernel ridge regression rate. For `s >= 1`, with `s̃ = min{s, 2}`:
/// `min{γ-p, (γ-p+p s̃+1)/2, s̃(p+1)}`. For `s < 1` this is the spectral rate
/// with `τ = 1`.
pub fn krr_rate_exponent(s: f64, gamma: f64) -> Result<RateResult> {
    let q = RateQuery::new(s, 1.0, gamma)?;
    if s < 1.0 {
        return Ok(spectral_rate_exponent(q));
    }
    let p = phase_index(s, gamma);
    let pf = p as f64;
    let st = s.min(2.0);
    let (r, b) = argmin(&[
        (gamma - pf, Branch::First),
        ((gamma - pf + pf * st + 1.0) / 2.0, Branch::Middle),
        (st * (pf + 1.0), Branch::Last),
    ]);
    Ok(RateResult {
        p,
        exponent: r,
        s_tilde: Some(st),
        regime: b,
        log_factor_note: "poly(ln d)",
        warnings: Vec::new(),
    })
}

/// Minimax lower-bound exponent `min{γ-p, s(p+1)}`.
pub fn minimax_exponent(s: f64, gamma: f64) -> Result<RateResult> {
    RateQuery::new(s, f64::INFINITY, gamma)?;
    let p = phase_index(s, gamma);
    let pf = p as f64;
    let (r, b) = argmin(&[(gamma - pf, Branch::First), (s * (pf + 1.0), Branch::Last)]);
    Ok(RateResult {
        p,
        exponent: r,
        s_tilde: None,
        regime: b,
        log_factor_note: "poly(ln d)",
        warnings: Vec::new(),
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct MinimaxLower {
    /// Explicit bound, present only for `γ ∈ (p(s+1), p+ps+s]`.
    pub value: Option<f64>,
    /// Exponent `r` of the bound `d^{-r}`.
    pub exponent: f64,
    pub up_to_constants: bool,
}

/// Explicit minimax lower bound at finite `d >= 3`.
///
/// For `γ ∈ (p(s+1), p+ps+s]` the value is
/// `ln ln d / (50 (γ - p(s+1)) (ln d)²) · d^{p-γ}`; otherwise only the
/// exponent `s(p+1)` is returned, marked as holding up to constants.
pub fn minimax_lower_value(s: f64, gamma: f64, d: f64) -> Result<MinimaxLower> {
    RateQuery::new(s, f64::INFINITY, gamma)?;
    if !(d >= 3.0) {
        return Err(Error::Domain(format!("d = {d} must be >= 3")));
    }
    let p = phase_index(s, gamma);
    let pf = p as f64;
    let lo = pf * (s + 1.0);
    let hi = pf + pf * s + s;
    if gamma > lo && gamma <= hi {
        let ln = d.ln();
        let v = ln.ln() / (50.0 * (gamma - lo) * ln * ln) * d.powf(pf - gamma);
        Ok(MinimaxLower {
            value: Some(v),
            exponent: gamma - pf,
            up_to_constants: false,
        })
    } else {
        Ok(MinimaxLower {
            value: None,
            exponent: s * (pf + 1.0),
            up_to_constants: true,
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BalancedLambda {
    /// `λ⋆ ≍ d^{-ell}`.
    pub ell: f64,
    /// Human-readable description of the case that fired.
    pub case: String,
}

/// Exponent `ℓ` of the regularization `λ⋆ = d^{-ℓ}` balancing bias and variance.
///
/// Cases by smoothness: `s < 1`; `1 <= s <= τ`; `τ < s <= 2τ` using
/// `Δ = γ - p(s+1)`; and `s > 2τ`, which is treated as `s = 2τ`.
pub fn balanced_lambda_exponent(s: f64, tau: f64, gamma: f64) -> Result<BalancedLambda> {
    RateQuery::new(s, tau, gamma)?;
    let out = |ell: f64, case: &str| {
        Ok(BalancedLambda {
            ell,
            case: case.to_string(),
        })
    };
    if s > tau {
        let s = s.min(2.0 * tau);
        let p = phase_index(s, gamma);
        let pf = p as f64;
        let delta = gamma - pf * (s + 1.0);
        let label = |c: &str| {
            if s == 2.0 * tau {
                format!("s > 2 tau treated as s = 2 tau; {c}")
            } else {
                c.to_string()
            }
        };
        return if gamma < 1.0 {
            out(gamma / 2.0, &label("tau < s <= 2 tau, gamma < 1"))
        } else if delta <= tau {
            out(
                pf + delta / (2.0 * tau),
                &label("tau < s <= 2 tau, delta <= tau"),
            )
        } else if delta <= s + s / tau - 1.0 {
            out(
                pf + (delta + 1.0) / (2.0 * tau + 2.0),
                &label("tau < s <= 2 tau, tau <= delta <= s + s/tau - 1"),
            )
        } else {
            out(
                pf + (delta + 1.0 - s) / 2.0,
                &label("tau < s <= 2 tau, delta >= s + s/tau - 1"),
            )
        };
    }
    let p = phase_index(s, gamma);
    let pf = p as f64;
    let mid = pf * s + pf + s;
    if s >= 1.0 {
        if p >= 1 {
            if gamma < mid {
                out(pf + 0.5, "1 <= s <= tau, p >= 1, gamma < ps + p + s")
            } else {
                out(
                    (gamma - (pf + 1.0) * (s - 1.0)) / 2.0,
                    "1 <= s <= tau, p >= 1, gamma >= ps + p + s",
                )
            }
        } else if gamma < s {
            out(gamma.min(1.0) / 2.0, "1 <= s <= tau, gamma < s")
        } else {
            out(
                (gamma - (s - 1.0)) / 2.0,
                "1 <= s <= tau, s <= gamma < s + 1",
            )
        }
    } else if tau.is_infinite() {
        if p >= 1 {
            if gamma < mid {
                out(pf + s / 2.0, "s < 1, tau = inf, p >= 1, gamma < ps + p + s")
            } else {
                out(
                    (gamma + pf * (1.0 - s)) / 2.0,
                    "s < 1, tau = inf, p >= 1, gamma >= ps + p + s",
                )
            }
        } else if gamma < s {
            out(
                gamma.min(1.0).min(2.0 * gamma * s) / 2.0,
                "s < 1, tau = inf, gamma < s",
            )
        } else {
            out(
                ((gamma + 1.0 - s) / 2.0)
                    .min(gamma * (1.0 + s) - s)
                    .min(gamma / 2.0),
                "s < 1, tau = inf, s <= gamma < s + 1",
            )
        }
    } else if gamma < mid {
        out(
            (gamma + 2.0 * tau * pf - s * pf - pf) / (2.0 * tau),
            "s < 1, tau finite, gamma < ps + p + s",
        )
    } else {
        out(
            pf + s / (2.0 * tau),
            "s < 1, tau finite, gamma >= ps + p + s",
        )
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CurveRow {
    pub gamma: f64,
    pub p: usize,
    pub r_spectral: f64,
    pub r_minimax: f64,
    pub r_krr: f64,
    pub regime: Branch,
    pub plateau: bool,
}

/// Rate exponents along an ascending `γ` grid. `γ = 0` rows are allowed and
/// evaluate to zero rates.
pub fn rate_curve(s: f64, tau: f64, gamma_grid: &[f64]) -> Result<Vec<CurveRow>> {
    if gamma_grid.windows(2).any(|w| !(w[0] <= w[1])) {
        return Err(invalid("gamma grid must be sorted ascending"));
    }
    let plateaus = plateau_intervals(
        s,
        tau,
        phase_index(s, gamma_grid.last().copied().unwrap_or(0.0).max(0.0)),
    )?;
    gamma_grid
        .iter()
        .map(|&g| {
            if g == 0.0 {
                RateQuery::new(s, tau, 1.0)?;
                return Ok(CurveRow {
                    gamma: 0.0,
                    p: 0,
                    r_spectral: 0.0,
                    r_minimax: 0.0,
                    r_krr: 0.0,
                    regime: Branch::First,
                    plateau: false,
                });
            }
            let spec = spectral_rate_exponent(RateQuery::new(s, tau, g)?);
            Ok(CurveRow {
                gamma: g,
                p: spec.p,
                r_spectral: spec.exponent,
                r_minimax: minimax_exponent(s, g)?.exponent,
                r_krr: krr_rate_exponent(s, g)?.exponent,
                regime: spec.regime,
                plateau: plateaus.contains(g),
            })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct PlateauIntervals {
    /// `(p, start, end)` for the half-open interval `[start, end)`.
    pub intervals: Vec<(usize, f64, f64)>,
    pub note: Option<String>,
}

impl PlateauIntervals {
    pub fn contains(&self, gamma: f64) -> bool {
        self.intervals
            .iter()
            .any(|&(_, a, b)| gamma >= a && gamma < b)
    }
}

/// `[p(s+1) + s + max{s,τ}/τ - 1, (p+1)(s+1))` for `p = 0..=p_max`, where the
/// rate is constant. Empty when `s > 2τ`; degenerate intervals are skipped.
pub fn plateau_intervals(s: f64, tau: f64, p_max: usize) -> Result<PlateauIntervals> {
    RateQuery::new(s, tau, 1.0)?;
    if s > 2.0 * tau {
        return Ok(PlateauIntervals {
            intervals: Vec::new(),
            note: Some(format!("no plateaus: s = {s} > 2 tau = {}", 2.0 * tau)),
        });
    }
    // max{s,τ}/τ, written so that τ = ∞ gives 1 rather than ∞/∞.
    let ratio = if s <= tau { 1.0 } else { s / tau };
    let intervals = (0..=p_max)
        .filter_map(|p| {
            let pf = p as f64;
            let start = pf * (s + 1.0) + s + ratio - 1.0;
            let end = (pf + 1.0) * (s + 1.0);
            (start < end).then_some((p, start, end))
        })
        .collect();
    Ok(PlateauIntervals {
        intervals,
        note: None,
    })
}

/// `minimax - spectral`; positive exactly when the algorithm saturates.
pub fn saturation_gap(s: f64, tau: f64, gamma: f64) -> Result<f64> {
    let q = RateQuery::new(s, tau, gamma)?;
    Ok(minimax_exponent(s, gamma)?.exponent - spectral_rate_exponent(q).exponent)
}
