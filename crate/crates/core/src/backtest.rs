//! Expanding-window pseudo out-of-sample evaluation.
//!
//! At each origin `t` every method is fitted on rows `0..=t`, forecasts row
//! `t + horizon`, and the error against the realized curve is recorded. The
//! first origin is the last row of the initial training split.

use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use chrono::NaiveDate;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{FarError, Result};
use crate::estimators::{
    fit_diebold_li, forecast_mean, DieboldLiModel, DifferencedFar, FarModel, Forecaster, History, DEFAULT_DECAY,
};
use crate::grid::{Curve, Grid};
use crate::moments::ExpandingMoments;
use crate::panel::{format_maturity, CurvePanel};

pub const DEFAULT_HORIZON: usize = 252;
pub const DEFAULT_RANK: usize = 3;
pub const DEFAULT_ALPHA: f64 = 0.1;
pub const DEFAULT_SPLIT: f64 = 0.5;

/// Whether the autoregression runs on levels or on `horizon`-step changes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Target {
    #[default]
    Levels,
    Changes,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Method {
    PredictiveFactor { k: usize, alpha: f64, target: Target },
    Pca { k: usize, target: Target },
    RandomWalk,
    Mean,
    DieboldLi { lambda: f64 },
}

impl Method {
    /// Column label used in output files, e.g. `pf_k3_a0.1`.
    pub fn label(&self) -> String {
        let suffix = |t: &Target| if *t == Target::Changes { "_b" } else { "" };
        match self {
            Method::PredictiveFactor { k, alpha, target } => format!("pf_k{k}_a{alpha}{}", suffix(target)),
            Method::Pca { k, target } => format!("pca_k{k}{}", suffix(target)),
            Method::RandomWalk => "rw".into(),
            Method::Mean => "mean".into(),
            Method::DieboldLi { lambda } => format!("dl_l{lambda}"),
        }
    }

    pub fn is_predictive_factor(&self) -> bool {
        matches!(self, Method::PredictiveFactor { .. })
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let model = |t: &Target| if *t == Target::Changes { ",model=b" } else { "" };
        match self {
            Method::PredictiveFactor { k, alpha, target } => write!(f, "pf:k={k},alpha={alpha}{}", model(target)),
            Method::Pca { k, target } => write!(f, "pca:k={k}{}", model(target)),
            Method::RandomWalk => f.write_str("rw"),
            Method::Mean => f.write_str("mean"),
            Method::DieboldLi { lambda } => write!(f, "dl:lambda={lambda}"),
        }
    }
}

impl FromStr for Method {
    type Err = FarError;

    /// `pf:k=3,alpha=0.1[,model=a|b]`, `pca:k=3[,model=a|b]`, `rw`, `mean`, `dl[:lambda=0.0609]`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = |msg: String| FarError::InvalidParameter(format!("method `{s}`: {msg}"));
        let (name, rest) = s.trim().split_once(':').unwrap_or((s.trim(), ""));
        let mut k = DEFAULT_RANK;
        let mut alpha = DEFAULT_ALPHA;
        let mut lambda = DEFAULT_DECAY;
        let mut target = Target::Levels;
        for pair in rest.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (key, value) = pair.split_once('=').ok_or_else(|| bad(format!("expected key=value, got `{pair}`")))?;
            let allowed = match name {
                "pf" => ["k", "alpha", "model"].as_slice(),
                "pca" => ["k", "model"].as_slice(),
                "dl" => ["lambda"].as_slice(),
                _ => [].as_slice(),
            };
            if !allowed.contains(&key) {
                return Err(bad(format!("unknown parameter `{key}`")));
            }
            let num = || value.parse::<f64>().map_err(|_| bad(format!("`{value}` is not a number")));
            match key {
                "k" => k = value.parse().map_err(|_| bad(format!("`{value}` is not a rank")))?,
                "alpha" => alpha = num()?,
                "lambda" => lambda = num()?,
                "model" => {
                    target = match value {
                        "a" | "A" => Target::Levels,
                        "b" | "B" => Target::Changes,
                        _ => return Err(bad(format!("model must be a or b, got `{value}`"))),
                    }
                }
                _ => unreachable!(),
            }
        }
        let method = match name {
            "pf" => Method::PredictiveFactor { k, alpha, target },
            "pca" => Method::Pca { k, target },
            "rw" => Method::RandomWalk,
            "mean" => Method::Mean,
            "dl" => Method::DieboldLi { lambda },
            other => return Err(bad(format!("unknown method `{other}`"))),
        };
        if matches!(name, "rw" | "mean") && !rest.is_empty() {
            return Err(bad("takes no parameters".into()));
        }
        if k == 0 {
            return Err(bad("k must be at least 1".into()));
        }
        if !(alpha >= 0.0) || !alpha.is_finite() {
            return Err(bad("alpha must be finite and >= 0".into()));
        }
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(bad("lambda must be positive".into()));
        }
        Ok(method)
    }
}

/// End of the initial training window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Split {
    /// The first `floor(fraction · n)` rows.
    Fraction(f64),
    /// Every row dated on or before the given date.
    Date(NaiveDate),
}

impl Default for Split {
    fn default() -> Self {
        Split::Fraction(DEFAULT_SPLIT)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BacktestSpec {
    pub horizon: usize,
    pub split: Split,
    pub methods: Vec<Method>,
    pub refit_every: usize,
}

impl Default for BacktestSpec {
    fn default() -> Self {
        BacktestSpec { horizon: DEFAULT_HORIZON, split: Split::default(), methods: Vec::new(), refit_every: 1 }
    }
}

impl BacktestSpec {
    /// Rows in the initial training window.
    pub fn train_len(&self, panel: &CurvePanel) -> Result<usize> {
        let n = panel.len();
        let len = match self.split {
            Split::Fraction(f) => {
                if !(f > 0.0 && f < 1.0) {
                    return Err(FarError::InvalidParameter(format!("split fraction must be in (0, 1), got {f}")));
                }
                (f * n as f64).floor() as usize
            }
            Split::Date(d) => panel.dates().partition_point(|&x| x <= d),
        };
        if len <= self.horizon {
            return Err(FarError::TooFewRows { needed: self.horizon, got: len });
        }
        if len + self.horizon > n {
            return Err(FarError::InvalidParameter(format!(
                "no forecast origin: {len} training rows plus horizon {} exceed {n} rows",
                self.horizon
            )));
        }
        Ok(len)
    }
}

#[derive(Debug, Clone)]
pub struct MethodReport {
    pub method: Method,
    pub label: String,
    pub rmse: Curve,
    pub count: usize,
    /// Eigenvalues of the last fit, for predictive-factor methods.
    pub eigenvalues: Option<Vec<f64>>,
}

impl MethodReport {
    /// RMSE averaged over maturities.
    pub fn mean_rmse(&self) -> f64 {
        self.rmse.values().mean()
    }
}

#[derive(Debug, Clone)]
pub struct BacktestReport {
    pub grid: Grid,
    /// Forecast origins; identical for every method.
    pub origins: Vec<NaiveDate>,
    pub methods: Vec<MethodReport>,
}

impl BacktestReport {
    pub fn get(&self, label: &str) -> Option<&MethodReport> {
        self.methods.iter().find(|m| m.label == label)
    }

    /// `maturity_days,<label>...`, one row per maturity.
    pub fn write_rmse_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["maturity_days".to_string()];
        header.extend(self.methods.iter().map(|m| m.label.clone()));
        w.write_record(&header)?;
        for (i, t) in self.grid.points().enumerate() {
            let mut rec = vec![format_maturity(t)];
            rec.extend(self.methods.iter().map(|m| m.rmse.values()[i].to_string()));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    /// `rmse.csv`, `eigenvalues.csv` for the first predictive-factor method,
    /// and `eigenvalues_<label>.csv` for each of them.
    pub fn write_outputs(&self, dir: &Path) -> Result<Vec<std::path::PathBuf>> {
        std::fs::create_dir_all(dir)?;
        let mut written = Vec::new();
        let path = dir.join("rmse.csv");
        self.write_rmse_csv(std::fs::File::create(&path)?)?;
        written.push(path);
        let mut first = true;
        for m in &self.methods {
            if let Some(ev) = &m.eigenvalues {
                if first {
                    let path = dir.join("eigenvalues.csv");
                    write_eigenvalues_csv(ev, std::fs::File::create(&path)?)?;
                    written.push(path);
                    first = false;
                }
                let path = dir.join(format!("eigenvalues_{}.csv", m.label));
                write_eigenvalues_csv(ev, std::fs::File::create(&path)?)?;
                written.push(path);
            }
        }
        Ok(written)
    }
}

/// `rank,value` with ranks from 1.
pub fn write_eigenvalues_csv<W: Write>(values: &[f64], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["rank", "value"])?;
    for (i, v) in values.iter().enumerate() {
        w.write_record([(i + 1).to_string(), v.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Pointwise root mean square of forecast errors.
pub fn rmse_by_maturity(errors: &[Curve]) -> Result<Curve> {
    let first = errors.first().ok_or_else(|| FarError::Empty("no forecast errors".into()))?;
    let grid = *first.grid();
    let mut sum = DVector::zeros(grid.len());
    for e in errors {
        grid.ensure_compatible(e.grid())?;
        sum += e.values().component_mul(e.values());
    }
    Ok(Curve::from_parts_unchecked(grid, (sum / errors.len() as f64).map(f64::sqrt)))
}

/// The pencil eigenvalues of a predictive-factor fit, descending.
pub fn eigenvalue_report(model: &FarModel) -> Result<Vec<f64>> {
    match model.kind() {
        crate::estimators::FarKind::PredictiveFactor => Ok(model.eigenvalues().to_vec()),
        crate::estimators::FarKind::Pca => {
            Err(FarError::InvalidParameter("eigenvalue report needs a predictive-factor model".into()))
        }
    }
}

enum Fitted {
    Stateless,
    Far(FarModel),
    Differenced(DifferencedFar),
    DieboldLi(DieboldLiModel),
}

/// Per-method state carried across origins.
struct Runner {
    method: Method,
    moments: Option<ExpandingMoments>,
    /// Rows pushed into `moments` so far.
    pushed: usize,
    fitted: Option<Fitted>,
    errors: Vec<Curve>,
}

impl Runner {
    fn new(method: Method, grid: Grid, horizon: usize) -> Result<Self> {
        let moments = match method {
            Method::PredictiveFactor { .. } | Method::Pca { .. } => Some(ExpandingMoments::new(grid, horizon)?),
            _ => None,
        };
        Ok(Runner { method, moments, pushed: 0, fitted: None, errors: Vec::new() })
    }

    /// Bring the running moments up to row `t` and refit.
    fn refit(&mut self, panel: &CurvePanel, t: usize, horizon: usize) -> Result<()> {
        let target = match self.method {
            Method::PredictiveFactor { target, .. } | Method::Pca { target, .. } => target,
            Method::RandomWalk | Method::Mean => {
                self.fitted = Some(Fitted::Stateless);
                return Ok(());
            }
            Method::DieboldLi { lambda } => {
                let history = panel.head(t + 1)?;
                self.fitted = Some(Fitted::DieboldLi(fit_diebold_li(&history, horizon, lambda)?));
                return Ok(());
            }
        };
        let acc = self.moments.as_mut().expect("autoregressive methods keep moments");
        let rows = panel.rows();
        while self.pushed <= t {
            let s = self.pushed;
            match target {
                Target::Levels => acc.push(&panel.curve(s))?,
                Target::Changes if s >= horizon => {
                    let d = DVector::from_iterator(rows.ncols(), (0..rows.ncols()).map(|j| rows[(s, j)] - rows[(s - horizon, j)]));
                    acc.push(&Curve::from_parts_unchecked(*panel.grid(), d))?
                }
                Target::Changes => {}
            }
            self.pushed += 1;
        }
        let moments = acc.moments()?;
        let model = match self.method {
            Method::PredictiveFactor { k, alpha, .. } => FarModel::predictive_factors(&moments, k, alpha)?,
            Method::Pca { k, .. } => FarModel::pca(&moments, k)?,
            _ => unreachable!(),
        };
        self.fitted = Some(match target {
            Target::Levels => Fitted::Far(model),
            Target::Changes => Fitted::Differenced(DifferencedFar::new(model)),
        });
        Ok(())
    }

    fn forecast(&self, history: &History<'_>) -> Result<Curve> {
        match self.fitted.as_ref().expect("refit before forecasting") {
            Fitted::Stateless => match self.method {
                Method::RandomWalk => Ok(history.latest()),
                _ => forecast_mean(history),
            },
            Fitted::Far(m) => Forecaster::forecast(m, history),
            Fitted::Differenced(m) => Forecaster::forecast(m, history),
            Fitted::DieboldLi(m) => Forecaster::forecast(m, history),
        }
    }

    fn eigenvalues(&self) -> Option<Vec<f64>> {
        match (&self.method, &self.fitted) {
            (Method::PredictiveFactor { .. }, Some(Fitted::Far(m))) => Some(m.eigenvalues().to_vec()),
            (Method::PredictiveFactor { .. }, Some(Fitted::Differenced(m))) => Some(m.model().eigenvalues().to_vec()),
            _ => None,
        }
    }
}

pub fn run_backtest(panel: &CurvePanel, spec: &BacktestSpec) -> Result<BacktestReport> {
    if panel.is_centered() {
        return Err(FarError::AlreadyCentered);
    }
    if spec.methods.is_empty() {
        return Err(FarError::InvalidParameter("no methods to evaluate".into()));
    }
    if spec.horizon == 0 {
        return Err(FarError::InvalidParameter("horizon must be at least 1".into()));
    }
    if spec.refit_every == 0 {
        return Err(FarError::InvalidParameter("refit_every must be at least 1".into()));
    }
    let train = spec.train_len(panel)?;
    let h = spec.horizon;
    let first = train - 1;
    let last = panel.len() - 1 - h;
    let grid = *panel.grid();

    let mut runners = spec.methods.iter().map(|&m| Runner::new(m, grid, h)).collect::<Result<Vec<_>>>()?;
    let mut origins = Vec::with_capacity(last - first + 1);
    for t in first..=last {
        let date = panel.dates()[t];
        origins.push(date);
        let history = History::new(panel, t)?;
        let realized = panel.curve(t + h);
        for r in &mut runners {
            let method = r.method;
            let wrap = |e: FarError| FarError::FitFailed { method: method.to_string(), date, source: Box::new(e) };
            if (t - first) % spec.refit_every == 0 {
                r.refit(panel, t, h).map_err(wrap)?;
            }
            let f = r.forecast(&history).map_err(wrap)?;
            r.errors.push(f.sub(&realized)?);
        }
    }

    let methods = runners
        .iter()
        .map(|r| {
            Ok(MethodReport {
                method: r.method,
                label: r.method.label(),
                rmse: rmse_by_maturity(&r.errors)?,
                count: r.errors.len(),
                eigenvalues: r.eigenvalues(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    debug_assert!(methods.iter().all(|m| m.count == origins.len()));
    Ok(BacktestReport { grid, origins, methods })
}

/// Forecast errors stacked as an `origins × maturities` matrix.
pub fn stack_errors(errors: &[Curve]) -> DMatrix<f64> {
    let m = errors.first().map_or(0, |e| e.grid().len());
    DMatrix::from_fn(errors.len(), m, |i, j| errors[i].values()[j])
}
