use nalgebra::DVector;

use super::{Forecaster, History};
use crate::error::{FarError, Result};
use crate::grid::Curve;

/// Today's curve is the forecast.
pub fn forecast_rw(f_now: &Curve) -> Curve {
    f_now.clone()
}

/// Per-maturity average of every curve seen so far.
pub fn forecast_mean(history: &History<'_>) -> Result<Curve> {
    if history.is_empty() {
        return Err(FarError::Empty("mean forecast needs at least one curve".into()));
    }
    let n = history.len() as f64;
    let means = DVector::from_iterator(history.grid().len(), history.rows().column_iter().map(|c| c.sum() / n));
    Ok(Curve::from_parts_unchecked(*history.grid(), means))
}

#[derive(Debug, Clone, Copy, Default)]
pub struct RandomWalk;

impl Forecaster for RandomWalk {
    fn forecast(&self, history: &History<'_>) -> Result<Curve> {
        Ok(forecast_rw(&history.latest()))
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct HistoricalMean;

impl Forecaster for HistoricalMean {
    fn forecast(&self, history: &History<'_>) -> Result<Curve> {
        forecast_mean(history)
    }
}
