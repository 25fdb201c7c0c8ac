//! Fitted-model files: curves and eigenvalues as CSV, metadata as JSON.

use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::backtest::write_eigenvalues_csv;
use crate::error::Result;
use crate::estimators::{DieboldLiModel, FarKind, FarModel};
use crate::grid::{Curve, Grid};
use crate::panel::format_maturity;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridMeta {
    pub origin: f64,
    pub spacing: f64,
    pub count: usize,
}

impl From<&Grid> for GridMeta {
    fn from(g: &Grid) -> Self {
        GridMeta { origin: g.origin(), spacing: g.spacing(), count: g.len() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelMeta {
    pub kind: String,
    pub k: Option<usize>,
    pub alpha: Option<f64>,
    pub lag: usize,
    pub lambda: Option<f64>,
    pub grid: GridMeta,
    #[serde(default)]
    pub degenerate: bool,
    #[serde(default)]
    pub ties: Vec<(usize, usize)>,
    pub version: String,
}

/// `maturity_days,<names>...` with one column per curve.
pub fn write_curves_csv<W: Write>(grid: &Grid, names: &[String], curves: &[Curve], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["maturity_days".to_string()];
    header.extend(names.iter().cloned());
    w.write_record(&header)?;
    for (i, t) in grid.points().enumerate() {
        let mut rec = vec![format_maturity(t)];
        rec.extend(curves.iter().map(|c| c.values()[i].to_string()));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let mut f = File::create(path)?;
    serde_json::to_writer_pretty(&mut f, value)?;
    writeln!(f)?;
    Ok(())
}

/// `mean_curve.csv`, `factors.csv` (B), `loadings.csv` (A), `eigenvalues.csv`,
/// `rho.csv` (kernel) and `model.json`.
pub fn write_far_model(model: &FarModel, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let g = *model.grid();
    let k = model.rank();
    let mut out = Vec::new();

    let path = dir.join("mean_curve.csv");
    write_curves_csv(&g, &["mean".into()], &[model.mean_curve().clone()], File::create(&path)?)?;
    out.push(path);

    let names = |p: &str| (1..=k).map(|j| format!("{p}{j}")).collect::<Vec<_>>();
    let path = dir.join("factors.csv");
    let b: Vec<_> = (0..k).map(|j| model.factor(j)).collect();
    write_curves_csv(&g, &names("b"), &b, File::create(&path)?)?;
    out.push(path);

    let path = dir.join("loadings.csv");
    let a: Vec<_> = (0..k).map(|j| model.loading(j)).collect();
    write_curves_csv(&g, &names("a"), &a, File::create(&path)?)?;
    out.push(path);

    let path = dir.join("eigenvalues.csv");
    write_eigenvalues_csv(model.eigenvalues(), File::create(&path)?)?;
    out.push(path);

    let path = dir.join("rho.csv");
    model.rho().write_kernel_csv(File::create(&path)?)?;
    out.push(path);

    let meta = ModelMeta {
        kind: match model.kind() {
            FarKind::PredictiveFactor => "predictive_factor".into(),
            FarKind::Pca => "pca".into(),
        },
        k: Some(k),
        alpha: model.alpha(),
        lag: model.lag(),
        lambda: None,
        grid: GridMeta::from(&g),
        degenerate: model.is_degenerate(),
        ties: model.ties().to_vec(),
        version: env!("CARGO_PKG_VERSION").into(),
    };
    let path = dir.join("model.json");
    write_json(&meta, &path)?;
    out.push(path);
    Ok(out)
}

/// `betas.csv` (`date,beta1,beta2,beta3`), `ar.csv` and `model.json`.
pub fn write_diebold_li_model(model: &DieboldLiModel, dates: &[NaiveDate], dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut out = Vec::new();

    let path = dir.join("betas.csv");
    let mut w = csv::Writer::from_writer(File::create(&path)?);
    w.write_record(["date", "beta1", "beta2", "beta3"])?;
    for (d, row) in dates.iter().zip(model.betas().row_iter()) {
        w.write_record([d.to_string(), row[0].to_string(), row[1].to_string(), row[2].to_string()])?;
    }
    w.flush()?;
    out.push(path);

    let path = dir.join("ar.csv");
    let mut w = csv::Writer::from_writer(File::create(&path)?);
    w.write_record(["coefficient", "intercept", "slope"])?;
    for (j, c) in model.ar_coeffs().iter().enumerate() {
        w.write_record([format!("beta{}", j + 1), c.intercept.to_string(), c.slope.to_string()])?;
    }
    w.flush()?;
    out.push(path);

    let meta = ModelMeta {
        kind: "diebold_li".into(),
        k: None,
        alpha: None,
        lag: model.lag(),
        lambda: Some(model.lambda()),
        grid: GridMeta::from(model.grid()),
        degenerate: false,
        ties: Vec::new(),
        version: env!("CARGO_PKG_VERSION").into(),
    };
    let path = dir.join("model.json");
    write_json(&meta, &path)?;
    out.push(path);
    Ok(out)
}
