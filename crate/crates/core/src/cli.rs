//! The `farcast` command line.
//!
//! Every subcommand that writes files also writes a `manifest.json` echoing
//! its full configuration; `farcast replay <manifest>` runs it again.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::backtest::{run_backtest, BacktestSpec, Method, Split, Target, DEFAULT_HORIZON};
use crate::error::{FarError, Result};
use crate::estimators::{fit_diebold_li, DifferencedFar, FarModel, Forecaster, History};
use crate::export::{write_curves_csv, write_diebold_li_model, write_far_model};
use crate::grid::{Curve, Grid};
use crate::ingest::{build_panel, parse_quotes};
use crate::moments::SampleMoments;
use crate::panel::CurvePanel;
use crate::synth::{cosine_noise, make_gaussian_kernel, simulate_far, SimSpec};
use crate::toy::{ToyParams, ToyReport};

pub const MANIFEST_NAME: &str = "manifest.json";

#[derive(Debug, Parser)]
#[command(name = "farcast", version, about = "Forecast forward-rate curves with functional autoregressions")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, PartialEq, Subcommand, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "snake_case")]
pub enum Command {
    /// Interpolate raw quotes onto a maturity grid.
    Ingest(IngestArgs),
    /// Fit a model and export its curves and eigenvalues.
    Estimate(EstimateArgs),
    /// Fit a model on the whole panel and forecast from its last curve.
    Forecast(ForecastArgs),
    /// Print the two-dimensional closed-form example.
    Toy(ToyArgs),
    /// Simulate a functional AR(1) panel.
    Synth(SynthArgs),
    /// Expanding-window out-of-sample comparison of methods.
    Backtest(BacktestArgs),
    /// Re-run the configuration saved in a manifest.
    Replay(ReplayArgs),
}

#[derive(Debug, Clone, Default, PartialEq, Args, Serialize, Deserialize)]
pub struct DateFilter {
    /// Drop dates before this one (YYYY-MM-DD).
    #[arg(long)]
    pub from: Option<NaiveDate>,
    /// Drop dates after this one (YYYY-MM-DD).
    #[arg(long)]
    pub to: Option<NaiveDate>,
}

impl DateFilter {
    fn apply(&self, p: CurvePanel) -> Result<CurvePanel> {
        if self.from.is_none() && self.to.is_none() {
            Ok(p)
        } else {
            p.filter_dates(self.from, self.to)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct IngestArgs {
    /// Quote file with header `date,days_to_expiry,rate`.
    #[arg(long)]
    pub input: PathBuf,
    /// Output panel CSV.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 90.0)]
    pub min_days: f64,
    #[arg(long, default_value_t = 3480.0)]
    pub max_days: f64,
    #[arg(long, default_value_t = 30.0)]
    pub spacing: f64,
    #[command(flatten)]
    #[serde(default)]
    pub dates: DateFilter,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct EstimateArgs {
    /// Panel CSV with header `date,<maturities>`.
    #[arg(long)]
    pub input: PathBuf,
    /// `pf:k=3,alpha=0.1`, `pca:k=3` or `dl:lambda=0.0609`.
    #[arg(long, default_value = "pf:k=3,alpha=0.1")]
    pub method: Method,
    /// Forecast horizon in rows.
    #[arg(long, default_value_t = DEFAULT_HORIZON)]
    pub lag: usize,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    #[serde(default)]
    pub dates: DateFilter,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct ForecastArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Any backtest method.
    #[arg(long, default_value = "pf:k=3,alpha=0.1")]
    pub method: Method,
    #[arg(long, default_value_t = DEFAULT_HORIZON)]
    pub lag: usize,
    /// Output CSV `maturity_days,forecast`.
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    #[serde(default)]
    pub dates: DateFilter,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct ToyArgs {
    #[arg(long, default_value_t = 0.9, allow_hyphen_values = true)]
    pub a: f64,
    #[arg(long, default_value_t = 0.6, allow_hyphen_values = true)]
    pub b: f64,
    #[arg(long, default_value_t = 0.19)]
    pub var_eps: f64,
    #[arg(long, default_value_t = 1.28)]
    pub var_eta: f64,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct SynthArgs {
    /// Output panel CSV.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 1000)]
    pub n: usize,
    #[arg(long, default_value_t = 500)]
    pub burn_in: usize,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    #[arg(long, default_value_t = 90.0)]
    pub min_days: f64,
    #[arg(long, default_value_t = 3480.0)]
    pub max_days: f64,
    #[arg(long, default_value_t = 30.0)]
    pub spacing: f64,
    /// HS norm of the Gaussian-kernel coefficient operator.
    #[arg(long, default_value_t = 0.8)]
    pub hs_norm: f64,
    /// Kernel bandwidth in days.
    #[arg(long, default_value_t = 600.0)]
    pub bandwidth: f64,
    /// Number of cosine noise modes.
    #[arg(long, default_value_t = 8)]
    pub modes: usize,
    /// Standard deviation of the first noise mode; mode i gets scale / i.
    #[arg(long, default_value_t = 0.02)]
    pub noise_scale: f64,
    /// Constant added to every simulated curve.
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub level: f64,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct BacktestArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value_t = DEFAULT_HORIZON)]
    pub horizon: usize,
    /// Initial training share in (0, 1), or the last training date (YYYY-MM-DD).
    #[arg(long, default_value = "0.5", value_parser = parse_split)]
    pub split: SplitArg,
    /// Repeatable; defaults to pf, pca, rw, mean and dl.
    #[arg(long = "method")]
    pub methods: Vec<Method>,
    #[arg(long, default_value_t = 1)]
    pub refit_every: usize,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    #[serde(default)]
    pub dates: DateFilter,
}

/// Newtype so clap can parse a [`Split`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SplitArg(pub Split);

fn parse_split(s: &str) -> std::result::Result<SplitArg, String> {
    if let Ok(f) = s.parse::<f64>() {
        if f > 0.0 && f < 1.0 {
            return Ok(SplitArg(Split::Fraction(f)));
        }
        return Err(format!("split fraction must be in (0, 1), got {f}"));
    }
    s.parse::<NaiveDate>()
        .map(|d| SplitArg(Split::Date(d)))
        .map_err(|_| format!("`{s}` is neither a fraction nor a YYYY-MM-DD date"))
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct ReplayArgs {
    pub manifest: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: String,
    pub config: Command,
    /// First and last date of the panel the run used.
    pub date_range: Option<(NaiveDate, NaiveDate)>,
    pub outputs: Vec<PathBuf>,
}

/// Attach the path to IO failures.
fn with_path(path: &Path) -> impl Fn(io::Error) -> FarError + '_ {
    move |e| FarError::Io(io::Error::new(e.kind(), format!("{}: {e}", path.display())))
}

fn open(path: &Path) -> Result<BufReader<File>> {
    Ok(BufReader::new(File::open(path).map_err(with_path(path))?))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(with_path(dir))?;
    }
    Ok(BufWriter::new(File::create(path).map_err(with_path(path))?))
}

fn read_panel(path: &Path, dates: &DateFilter) -> Result<CurvePanel> {
    dates.apply(CurvePanel::read_csv(open(path)?)?)
}

fn date_range(p: &CurvePanel) -> Option<(NaiveDate, NaiveDate)> {
    Some((*p.dates().first()?, *p.dates().last()?))
}

/// Manifest path for a single-file output: `<file>.manifest.json`.
fn sidecar(path: &Path) -> PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(".");
    name.push(MANIFEST_NAME);
    path.with_file_name(name)
}

fn write_manifest(path: &Path, config: &Command, panel: Option<&CurvePanel>, outputs: Vec<PathBuf>) -> Result<()> {
    let manifest = Manifest {
        version: env!("CARGO_PKG_VERSION").into(),
        config: config.clone(),
        date_range: panel.and_then(date_range),
        outputs,
    };
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, &manifest)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn warn_unregularized(method: &Method, out: &mut dyn Write) -> Result<()> {
    if let Method::PredictiveFactor { alpha, .. } = method {
        if *alpha == 0.0 {
            writeln!(out, "warning: alpha=0: the predictive-factor estimate is inconsistent without regularization")?;
        }
    }
    Ok(())
}

/// Runs one command; normal output goes to `out`, diagnostics to `err`.
pub fn run(command: &Command, out: &mut dyn Write, err: &mut dyn Write) -> Result<()> {
    match command {
        Command::Ingest(a) => cmd_ingest(command, a, out, err),
        Command::Estimate(a) => cmd_estimate(command, a, out, err),
        Command::Forecast(a) => cmd_forecast(command, a, out, err),
        Command::Toy(a) => cmd_toy(a, out),
        Command::Synth(a) => cmd_synth(command, a, out),
        Command::Backtest(a) => cmd_backtest(command, a, out, err),
        Command::Replay(a) => {
            let manifest: Manifest = serde_json::from_reader(open(&a.manifest)?)?;
            if matches!(manifest.config, Command::Replay(_)) {
                return Err(FarError::InvalidParameter("a manifest cannot replay another manifest".into()));
            }
            run(&manifest.config, out, err)
        }
    }
}

fn cmd_ingest(config: &Command, a: &IngestArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<()> {
    let days = parse_quotes(open(&a.input)?)?;
    if days.is_empty() {
        return Err(FarError::Empty(format!("{} has no quotes", a.input.display())));
    }
    let days: Vec<_> = days
        .into_iter()
        .filter(|d| a.dates.from.is_none_or(|f| d.date >= f) && a.dates.to.is_none_or(|t| d.date <= t))
        .collect();
    if days.is_empty() {
        return Err(FarError::NoValidDates("the date filter excludes every quote date".into()));
    }
    let build = build_panel(&days, a.min_days, a.max_days, a.spacing)?;
    for d in &build.dropped {
        writeln!(err, "dropped {}: {}", d.date, d.reason)?;
    }
    let mut w = create(&a.out)?;
    build.panel.write_csv(&mut w)?;
    w.flush()?;
    write_manifest(&sidecar(&a.out), config, Some(&build.panel), vec![a.out.clone()])?;
    writeln!(
        out,
        "wrote {} curves x {} maturities to {} ({} dates dropped)",
        build.panel.len(),
        build.panel.grid().len(),
        a.out.display(),
        build.dropped.len()
    )?;
    Ok(())
}

fn cmd_estimate(config: &Command, a: &EstimateArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<()> {
    let raw = read_panel(&a.input, &a.dates)?;
    warn_unregularized(&a.method, err)?;
    let mut files = match a.method {
        Method::PredictiveFactor { k, target, .. } | Method::Pca { k, target } => {
            let model = fit_far(&raw, &a.method, a.lag, k, target)?;
            for tie in model.ties() {
                writeln!(err, "warning: eigenvalues {} and {} tie; their factors are not unique", tie.0 + 1, tie.1 + 1)?;
            }
            if model.is_degenerate() {
                writeln!(err, "warning: the panel has no variation; the fit forecasts its mean")?;
            }
            writeln!(out, "rank,eigenvalue")?;
            for (i, v) in model.eigenvalues().iter().enumerate() {
                writeln!(out, "{},{v}", i + 1)?;
            }
            write_far_model(&model, &a.out)?
        }
        Method::DieboldLi { lambda } => {
            let model = fit_diebold_li(&raw, a.lag, lambda)?;
            let c = model.ar_coeffs();
            writeln!(out, "coefficient,intercept,slope")?;
            for (j, ar) in c.iter().enumerate() {
                writeln!(out, "beta{},{},{}", j + 1, ar.intercept, ar.slope)?;
            }
            write_diebold_li_model(&model, raw.dates(), &a.out)?
        }
        _ => {
            return Err(FarError::InvalidParameter(format!(
                "estimate fits pf, pca or dl models, not `{}`",
                a.method
            )))
        }
    };
    let manifest = a.out.join(MANIFEST_NAME);
    files.push(manifest.clone());
    write_manifest(&manifest, config, Some(&raw), files)
}

fn fit_far(raw: &CurvePanel, method: &Method, lag: usize, k: usize, target: Target) -> Result<FarModel> {
    let panel = match target {
        Target::Levels => raw.clone(),
        Target::Changes => raw.difference(lag)?,
    };
    let moments = SampleMoments::from_panel(&panel.center()?, lag)?;
    match *method {
        Method::PredictiveFactor { alpha, .. } => FarModel::predictive_factors(&moments, k, alpha),
        _ => FarModel::pca(&moments, k),
    }
}

fn cmd_forecast(config: &Command, a: &ForecastArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<()> {
    let raw = read_panel(&a.input, &a.dates)?;
    warn_unregularized(&a.method, err)?;
    let history = History::all(&raw)?;
    let forecast = match a.method {
        Method::PredictiveFactor { k, target, .. } | Method::Pca { k, target } => {
            let model = fit_far(&raw, &a.method, a.lag, k, target)?;
            match target {
                Target::Levels => Forecaster::forecast(&model, &history)?,
                Target::Changes => Forecaster::forecast(&DifferencedFar::new(model), &history)?,
            }
        }
        Method::RandomWalk => history.latest(),
        Method::Mean => crate::estimators::forecast_mean(&history)?,
        Method::DieboldLi { lambda } => Forecaster::forecast(&fit_diebold_li(&raw, a.lag, lambda)?, &history)?,
    };
    let mut w = create(&a.out)?;
    write_curves_csv(raw.grid(), &["forecast".into()], &[forecast], &mut w)?;
    w.flush()?;
    write_manifest(&sidecar(&a.out), config, Some(&raw), vec![a.out.clone()])?;
    let last = raw.dates().last().expect("non-empty panel");
    writeln!(out, "forecast {} rows after {last} written to {}", a.lag, a.out.display())?;
    Ok(())
}

fn cmd_toy(a: &ToyArgs, out: &mut dyn Write) -> Result<()> {
    let p = ToyParams::new(a.a, a.b, a.var_eps, a.var_eta)?;
    writeln!(out, "{}", ToyReport::new(&p)?)?;
    Ok(())
}

fn cmd_synth(config: &Command, a: &SynthArgs, out: &mut dyn Write) -> Result<()> {
    let grid = Grid::window(a.min_days, a.max_days, a.spacing)?;
    let rho = make_gaussian_kernel(grid, a.hs_norm, a.bandwidth)?;
    let spec = SimSpec {
        grid,
        rho,
        noise: cosine_noise(grid, a.modes, a.noise_scale),
        n: a.n,
        burn_in: a.burn_in,
        seed: a.seed,
    };
    let sim = simulate_far(&spec)?;
    let panel = if a.level == 0.0 {
        sim
    } else {
        let level = Curve::constant(grid, a.level);
        let curves: Vec<_> = (0..sim.len()).map(|t| sim.curve(t).add(&level)).collect::<Result<_>>()?;
        CurvePanel::from_curves(grid, sim.dates().to_vec(), &curves)?
    };
    let mut w = create(&a.out)?;
    panel.write_csv(&mut w)?;
    w.flush()?;
    write_manifest(&sidecar(&a.out), config, Some(&panel), vec![a.out.clone()])?;
    writeln!(out, "wrote {} simulated curves x {} maturities to {}", panel.len(), grid.len(), a.out.display())?;
    Ok(())
}

/// Methods used when none are given.
pub fn default_methods() -> Vec<Method> {
    ["pf:k=3,alpha=0.1", "pca:k=3", "rw", "mean", "dl:lambda=0.0609"]
        .iter()
        .map(|s| s.parse().expect("valid default method"))
        .collect()
}

fn cmd_backtest(config: &Command, a: &BacktestArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<()> {
    let raw = read_panel(&a.input, &a.dates)?;
    let methods = if a.methods.is_empty() { default_methods() } else { a.methods.clone() };
    for m in &methods {
        warn_unregularized(m, err)?;
    }
    let spec = BacktestSpec { horizon: a.horizon, split: a.split.0, methods, refit_every: a.refit_every };
    let report = run_backtest(&raw, &spec)?;
    let mut files = report.write_outputs(&a.out)?;
    writeln!(out, "{} origins from {} to {}", report.origins.len(), report.origins[0], report.origins[report.origins.len() - 1])?;
    writeln!(out, "method,mean_rmse,forecasts")?;
    for m in &report.methods {
        writeln!(out, "{},{},{}", m.label, m.mean_rmse(), m.count)?;
    }
    let manifest = a.out.join(MANIFEST_NAME);
    files.push(manifest.clone());
    write_manifest(&manifest, config, Some(&raw), files)
}
