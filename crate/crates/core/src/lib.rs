//! Functional autoregression of forward-rate curves.
//!
//! Curves live on a uniform maturity [`grid::Grid`]. A lag-`l` model
//! `f_{t+l} = ρ f_t + ε` is estimated by reduced-rank regression on
//! predictive factors ([`estimators::fit_predictive_factors`]) or by
//! principal components ([`estimators::fit_pca_far`]), and compared against
//! random-walk, historical-mean and Diebold–Li forecasts in an
//! expanding-window [`backtest`].
//!
//! ```
//! use farcast::estimators::fit_predictive_factors;
//! use farcast::synth::{make_gaussian_kernel, simulate_far, SimSpec};
//! use farcast::grid::Grid;
//!
//! let grid = Grid::window(90.0, 990.0, 30.0)?;
//! let rho = make_gaussian_kernel(grid, 0.8, 300.0)?;
//! let panel = simulate_far(&SimSpec::new(rho, 500, 1))?.center()?;
//! let model = fit_predictive_factors(&panel, 1, 2, 0.1)?;
//! assert_eq!(model.eigenvalues().len(), 2);
//! # Ok::<(), farcast::FarError>(())
//! ```

pub mod backtest;
pub mod cli;
pub mod error;
pub mod estimators;
pub mod export;
pub mod grid;
pub mod ingest;
pub mod moments;
pub mod operator;
pub mod panel;
pub mod pencil;
pub mod spline;
pub mod synth;
pub mod toy;

pub use error::{FarError, Result};
pub use estimators::{FarModel, Forecaster};
pub use grid::{Curve, Grid};
pub use operator::LinOp;
pub use panel::CurvePanel;

// The guide's snippets run as doc-tests, one module per chapter.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/curves.md")]
    mod curves {}
    #[doc = include_str!("../../../book/src/operators.md")]
    mod operators {}
    #[doc = include_str!("../../../book/src/predictive_factors.md")]
    mod predictive_factors {}
    #[doc = include_str!("../../../book/src/benchmarks.md")]
    mod benchmarks {}
    #[doc = include_str!("../../../book/src/toy.md")]
    mod toy {}
    #[doc = include_str!("../../../book/src/simulation.md")]
    mod simulation {}
    #[doc = include_str!("../../../book/src/backtesting.md")]
    mod backtesting {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
