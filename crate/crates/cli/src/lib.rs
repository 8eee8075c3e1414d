//! Argument parsing and dispatch for the `skl` binary.
//!
//! Exit codes: 0 success, 1 usage or I/O error, 2 partial failure (too many
//! failed trials), 3 validation failure. Errors go to standard error as
//! `error_code: <code>: <message>`.

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;
use skl_core::filters::{check_filter_axioms_default, FilterFamily};
use skl_core::harness::output::{
    write_curve_csv, write_experiment_csv, write_oracle_csv, write_spectrum_csv, write_summary_json,
};
use skl_core::harness::{run_experiment, ExperimentConfig, ExperimentResult};
use skl_core::kernels::InnerProductKernel;
use skl_core::oracle::oracle_point;
use skl_core::par::Execution;
use skl_core::rates::{
    minimax_exponent, plateau_intervals, rate_curve, saturation_gap, spectral_rate_exponent,
    RateQuery,
};
use skl_core::sphere::{default_quad_order, funk_hecke_spectrum, SphereDim};
use skl_core::Error;

pub const EXIT_OK: u8 = 0;
pub const EXIT_USAGE: u8 = 1;
pub const EXIT_PARTIAL: u8 = 2;
pub const EXIT_VALIDATION: u8 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "skl",
    version,
    about = "Spectral kernel learning on spheres: rates, spectra and experiments"
)]
pub struct Cli {
    /// Worker threads for parallel sections (default: available parallelism).
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// Master seed for experiments; overrides the config's `master_seed`.
    #[arg(long, global = true, env = "SKL_SEED")]
    pub seed: Option<u64>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print the rate exponent, minimax exponent and saturation gap.
    Rates(RatesArgs),
    /// Write rate exponents along a gamma grid as CSV.
    Curve(CurveArgs),
    /// Print the gamma intervals on which the rate is constant.
    Plateau(PlateauArgs),
    /// Write the Funk-Hecke spectrum of a kernel as CSV.
    Spectrum(SpectrumArgs),
    /// Evaluate M2, N1, N2 and the dominant-term risk over a d sweep.
    Oracle(OracleArgs),
    /// Run a Monte-Carlo experiment from a JSON config.
    Experiment(ExperimentArgs),
    /// Check the filter axioms on the default grids.
    ValidateFilters(ValidateArgs),
}

#[derive(Debug, Args)]
pub struct RatesArgs {
    /// Source exponent s > 0.
    #[arg(long)]
    pub s: f64,
    /// Qualification tau >= 1; `inf` for unbounded.
    #[arg(long)]
    pub tau: f64,
    /// Scaling exponent gamma > 0 in n = d^gamma.
    #[arg(long)]
    pub gamma: f64,
}

#[derive(Debug, Args)]
pub struct CurveArgs {
    /// Source exponent s > 0.
    #[arg(long)]
    pub s: f64,
    /// Qualification tau >= 1; `inf` for unbounded.
    #[arg(long)]
    pub tau: f64,
    /// Smallest gamma (>= 0).
    #[arg(long)]
    pub gmin: f64,
    /// Largest gamma.
    #[arg(long)]
    pub gmax: f64,
    /// Number of equally spaced grid points (>= 2).
    #[arg(long)]
    pub steps: usize,
    /// Output CSV path; standard output when omitted.
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PlateauArgs {
    /// Source exponent s > 0.
    #[arg(long)]
    pub s: f64,
    /// Qualification tau >= 1; `inf` for unbounded.
    #[arg(long)]
    pub tau: f64,
    /// Largest phase index p to list.
    #[arg(long)]
    pub pmax: usize,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum KernelName {
    Rbf,
    Ntk,
}

#[derive(Debug, Args)]
pub struct SpectrumArgs {
    /// Kernel profile.
    #[arg(long, value_enum)]
    pub kernel: KernelName,
    /// Sphere dimension d (points live in R^{d+1}).
    #[arg(long)]
    pub d: usize,
    /// Largest degree K.
    #[arg(long = "K", id = "max_degree")]
    pub max_degree: usize,
    /// Gauss-Legendre order (default max(64, 4K)).
    #[arg(long)]
    pub quad_order: Option<usize>,
    /// Output CSV path; standard output when omitted.
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    /// JSON file with `s`, `gamma`, `d_list`, `filter` and optional `sigma`.
    #[arg(long)]
    pub config: PathBuf,
    /// Output CSV path; standard output when omitted.
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    /// Experiment JSON config.
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory for `results.csv` and `summary.json`.
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum FamilyName {
    Krr,
    IteratedRidge,
    GradientFlow,
    GradientDescent,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    /// Filter family.
    #[arg(long, value_enum)]
    pub family: FamilyName,
    /// Iteration count for iterated-ridge (default 2).
    #[arg(long)]
    pub q: Option<u32>,
    /// Step size for gradient-descent (default 0.1).
    #[arg(long)]
    pub eta: Option<f64>,
}

/// Oracle sweep over the idealized spectrum; `tau` is the filter's qualification.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleConfig {
    pub s: f64,
    pub gamma: f64,
    pub d_list: Vec<usize>,
    pub filter: FilterFamily,
    #[serde(default = "one")]
    pub sigma: f64,
}

fn one() -> f64 {
    1.0
}

/// Failure carrying its exit code and machine tag.
#[derive(Debug)]
pub struct CliError {
    pub exit: u8,
    pub code: String,
    pub message: String,
}

impl CliError {
    fn usage(msg: impl Into<String>) -> Self {
        Self {
            exit: EXIT_USAGE,
            code: "usage".into(),
            message: msg.into(),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let exit = match &e {
            Error::TooManyFailures { .. } => EXIT_PARTIAL,
            Error::Io(_) => EXIT_USAGE,
            _ => EXIT_VALIDATION,
        };
        Self {
            exit,
            code: e.code().into(),
            message: e.to_string(),
        }
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        Error::Io(e).into()
    }
}

fn sink(path: Option<&Path>) -> Result<Box<dyn Write>, CliError> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(io::stdout().lock()),
    })
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path)
        .map_err(|e| CliError::usage(format!("cannot read {}: {e}", path.display())))
}

fn rates(a: &RatesArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let q = RateQuery::new(a.s, a.tau, a.gamma)?;
    let r = spectral_rate_exponent(q);
    let m = minimax_exponent(a.s, a.gamma)?;
    let gap = saturation_gap(a.s, a.tau, a.gamma)?;
    let st = r.s_tilde.map_or("none".to_string(), |v| v.to_string());
    writeln!(
        out,
        "p={} exponent={} regime=\"{}\" minimax={} gap={} s_tilde={} log_factor=\"{}\"",
        r.p, r.exponent, r.regime, m.exponent, gap, st, r.log_factor_note
    )?;
    for w in &r.warnings {
        eprintln!("warning: {w}");
    }
    Ok(())
}

fn curve(a: &CurveArgs) -> Result<(), CliError> {
    if a.steps < 2 {
        return Err(Error::InvalidArgument("--steps must be >= 2".into()).into());
    }
    if !(a.gmin >= 0.0 && a.gmax > a.gmin && a.gmax.is_finite()) {
        return Err(Error::InvalidArgument("need 0 <= gmin < gmax < inf".into()).into());
    }
    let span = a.gmax - a.gmin;
    let last = (a.steps - 1) as f64;
    let grid: Vec<f64> = (0..a.steps)
        .map(|i| a.gmin + span * i as f64 / last)
        .collect();
    let rows = rate_curve(a.s, a.tau, &grid)?;
    write_curve_csv(sink(a.output.as_deref())?, &rows)?;
    Ok(())
}

fn plateau(a: &PlateauArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let p = plateau_intervals(a.s, a.tau, a.pmax)?;
    writeln!(out, "p,gamma_start,gamma_end,rate")?;
    for (k, lo, hi) in &p.intervals {
        writeln!(out, "{k},{lo},{hi},{}", k + 1)?;
    }
    if let Some(n) = &p.note {
        eprintln!("note: {n}");
    }
    Ok(())
}

fn spectrum(a: &SpectrumArgs) -> Result<(), CliError> {
    let kernel = match a.kernel {
        KernelName::Rbf => InnerProductKernel::rbf(),
        KernelName::Ntk => InnerProductKernel::ntk(),
    };
    let dim = SphereDim::new(a.d)?;
    let order = a
        .quad_order
        .unwrap_or_else(|| default_quad_order(a.max_degree));
    let s = funk_hecke_spectrum(&kernel, dim, a.max_degree, order)?;
    write_spectrum_csv(sink(a.output.as_deref())?, &s)?;
    Ok(())
}

fn oracle(a: &OracleArgs) -> Result<(), CliError> {
    let cfg: OracleConfig = serde_json::from_str(&read(&a.config)?)
        .map_err(|e| CliError::from(Error::Config(e.to_string())))?;
    cfg.filter.validate()?;
    let tau = cfg.filter.qualification().value();
    let points = cfg
        .d_list
        .iter()
        .map(|&d| oracle_point(cfg.s, tau, cfg.gamma, d, cfg.filter, cfg.sigma))
        .collect::<Result<Vec<_>, _>>()?;
    write_oracle_csv(sink(a.output.as_deref())?, &points)?;
    Ok(())
}

fn write_experiment(dir: &Path, r: &ExperimentResult) -> Result<(), CliError> {
    fs::create_dir_all(dir)?;
    let mut csv = BufWriter::new(File::create(dir.join("results.csv"))?);
    write_experiment_csv(&mut csv, r)?;
    csv.flush()?;
    let mut js = BufWriter::new(File::create(dir.join("summary.json"))?);
    write_summary_json(&mut js, r)?;
    js.flush()?;
    Ok(())
}

fn experiment(a: &ExperimentArgs, seed: Option<u64>) -> Result<(), CliError> {
    let mut cfg = ExperimentConfig::from_json(&read(&a.config)?)?;
    if let Some(s) = seed {
        cfg.master_seed = s;
    }
    match run_experiment(&cfg, Execution::Parallel) {
        Ok(r) => {
            for w in &r.warnings {
                eprintln!("warning: {w}");
            }
            write_experiment(&a.output, &r)
        }
        Err(Error::TooManyFailures {
            failed,
            total,
            partial,
        }) => {
            write_experiment(&a.output, &partial)?;
            Err(Error::TooManyFailures {
                failed,
                total,
                partial,
            }
            .into())
        }
        Err(e) => Err(e.into()),
    }
}

fn validate(a: &ValidateArgs, out: &mut dyn Write) -> Result<(), CliError> {
    if a.q.is_some() && !matches!(a.family, FamilyName::IteratedRidge) {
        return Err(CliError::usage("--q applies to iterated-ridge only"));
    }
    if a.eta.is_some() && !matches!(a.family, FamilyName::GradientDescent) {
        return Err(CliError::usage("--eta applies to gradient-descent only"));
    }
    let family = match a.family {
        FamilyName::Krr => FilterFamily::Krr,
        FamilyName::IteratedRidge => FilterFamily::IteratedRidge {
            q: a.q.unwrap_or(2),
        },
        FamilyName::GradientFlow => FilterFamily::GradientFlow,
        FamilyName::GradientDescent => FilterFamily::GradientDescent {
            eta: a.eta.unwrap_or(0.1),
        },
    };
    let report = check_filter_axioms_default(family)?;
    write!(out, "{report}")?;
    if report.passed() {
        Ok(())
    } else {
        Err(CliError {
            exit: EXIT_VALIDATION,
            code: "axiom_violation".into(),
            message: format!("{} violates the filter axioms", family.label()),
        })
    }
}

fn dispatch(cli: &Cli) -> Result<(), CliError> {
    let mut stdout = io::stdout().lock();
    match &cli.command {
        Command::Rates(a) => rates(a, &mut stdout),
        Command::Curve(a) => curve(a),
        Command::Plateau(a) => plateau(a, &mut stdout),
        Command::Spectrum(a) => spectrum(a),
        Command::Oracle(a) => oracle(a),
        Command::Experiment(a) => experiment(a, cli.seed),
        Command::ValidateFilters(a) => validate(a, &mut stdout),
    }
}

#[cfg(feature = "parallel")]
fn with_threads<T: Send>(
    threads: Option<usize>,
    f: impl FnOnce() -> T + Send,
) -> Result<T, CliError> {
    match threads {
        Some(0) => Err(CliError::usage("--threads must be >= 1")),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map(|p| p.install(f))
            .map_err(|e| CliError::usage(e.to_string())),
        None => Ok(f()),
    }
}

#[cfg(not(feature = "parallel"))]
fn with_threads<T: Send>(
    threads: Option<usize>,
    f: impl FnOnce() -> T + Send,
) -> Result<T, CliError> {
    match threads {
        Some(0) => Err(CliError::usage("--threads must be >= 1")),
        _ => Ok(f()),
    }
}

/// Run a parsed invocation and return the process exit code.
pub fn run(cli: &Cli) -> u8 {
    let res = with_threads(cli.threads, || dispatch(cli)).and_then(|r| r);
    match res {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error_code: {}: {}", e.code, e.message);
            e.exit
        }
    }
}

/// Parse `args` (including the program name) and run.
pub fn main_with_args<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => run(&cli),
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                EXIT_OK
            } else {
                eprintln!("error_code: usage: {}", e.render().to_string().trim_end());
                EXIT_USAGE
            }
        }
    }
}
