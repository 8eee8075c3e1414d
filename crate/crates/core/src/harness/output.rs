//! CSV and JSON writers.
//!
//! Floats carry 17 significant digits, so every value round-trips exactly;
//! infinities are written `inf`.

use std::io::Write;

use crate::error::{Error, Result};
use crate::oracle::{OraclePoint, SpectrumModel};
use crate::rates::CurveRow;

use super::ExperimentResult;

/// `%.17g`-style formatting.
pub fn fmt_g17(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return if x.is_sign_negative() {
            "-0".into()
        } else {
            "0".into()
        };
    }
    let sci = format!("{x:.16e}");
    let (mant, exp) = sci.split_once('e').expect("exponent marker");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..17).contains(&exp) {
        let decimals = (16 - exp).max(0) as usize;
        trim_zeros(format!("{x:.decimals$}"))
    } else {
        let mant = trim_zeros(mant.to_string());
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{mant}e{sign}{:02}", exp.abs())
    }
}

fn trim_zeros(s: String) -> String {
    if !s.contains('.') {
        return s;
    }
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

fn csv_writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(w)
}

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Io(std::io::Error::other(format!("{other:?}"))),
    }
}

/// `gamma,p,r_spectral,r_minimax,r_krr,regime,plateau`.
pub fn write_curve_csv<W: Write>(w: W, rows: &[CurveRow]) -> Result<()> {
    let mut c = csv_writer(w);
    c.write_record([
        "gamma",
        "p",
        "r_spectral",
        "r_minimax",
        "r_krr",
        "regime",
        "plateau",
    ])
    .map_err(csv_err)?;
    for r in rows {
        c.write_record([
            fmt_g17(r.gamma),
            r.p.to_string(),
            fmt_g17(r.r_spectral),
            fmt_g17(r.r_minimax),
            fmt_g17(r.r_krr),
            r.regime.to_string(),
            r.plateau.to_string(),
        ])
        .map_err(csv_err)?;
    }
    c.flush()?;
    Ok(())
}

/// `k,mu_k,multiplicity,mu_k_times_mult_cumsum`.
pub fn write_spectrum_csv<W: Write>(w: W, spectrum: &SpectrumModel) -> Result<()> {
    let mut c = csv_writer(w);
    c.write_record(["k", "mu_k", "multiplicity", "mu_k_times_mult_cumsum"])
        .map_err(csv_err)?;
    let mut cum = 0.0;
    for (k, g) in spectrum.groups().iter().enumerate() {
        cum += g.mu * g.mult;
        let mult = match g.mult_exact {
            Some(m) => m.to_string(),
            None => fmt_g17(g.mult),
        };
        c.write_record([k.to_string(), fmt_g17(g.mu), mult, fmt_g17(cum)])
            .map_err(csv_err)?;
    }
    c.flush()?;
    Ok(())
}

/// `d,n,lambda,ell,M2,N1,N2,risk`.
pub fn write_oracle_csv<W: Write>(w: W, points: &[OraclePoint]) -> Result<()> {
    let mut c = csv_writer(w);
    c.write_record(["d", "n", "lambda", "ell", "M2", "N1", "N2", "risk"])
        .map_err(csv_err)?;
    for p in points {
        c.write_record([
            p.d.to_string(),
            fmt_g17(p.n),
            fmt_g17(p.lambda),
            fmt_g17(p.ell),
            fmt_g17(p.m2),
            fmt_g17(p.n1),
            fmt_g17(p.n2),
            fmt_g17(p.risk),
        ])
        .map_err(csv_err)?;
    }
    c.flush()?;
    Ok(())
}

/// `d,n,trial,algorithm,tuning_rule,tuned_param,test_risk,mc_stderr`.
pub fn write_experiment_csv<W: Write>(w: W, result: &ExperimentResult) -> Result<()> {
    let mut c = csv_writer(w);
    c.write_record([
        "d",
        "n",
        "trial",
        "algorithm",
        "tuning_rule",
        "tuned_param",
        "test_risk",
        "mc_stderr",
    ])
    .map_err(csv_err)?;
    for r in &result.rows {
        c.write_record([
            r.d.to_string(),
            r.n.to_string(),
            r.trial.to_string(),
            r.algorithm.clone(),
            r.tuning_rule.clone(),
            fmt_g17(r.tuned_param),
            fmt_g17(r.test_risk),
            fmt_g17(r.mc_stderr),
        ])
        .map_err(csv_err)?;
    }
    c.flush()?;
    Ok(())
}

/// Pretty-printed JSON summary (slopes, per-`d` means, failures, warnings).
pub fn write_summary_json<W: Write>(mut w: W, result: &ExperimentResult) -> Result<()> {
    serde_json::to_writer_pretty(&mut w, &result.summary())
        .map_err(|e| Error::Io(std::io::Error::other(e)))?;
    w.write_all(b"\n")?;
    Ok(())
}
