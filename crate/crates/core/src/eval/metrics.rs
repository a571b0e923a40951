//! Point-forecast error metrics.

use serde::Serialize;

use crate::error::EvalError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ForecastMetrics {
    pub count: usize,
    pub mse: f64,
    pub mae: f64,
    /// Percent, over nonzero actuals only; `None` when every actual is zero.
    pub mape: Option<f64>,
    /// Number of zero actuals left out of MAPE.
    pub mape_skipped: usize,
    /// Percent in `[0, 200]`; a pair of zeros contributes 0.
    pub smape: f64,
}

/// MSE, MAE, MAPE and SMAPE of `forecast` against `actual`. With
/// `exclude_zero_actuals` every pair whose actual is zero (night) is dropped
/// before any metric is computed.
pub fn forecast_metrics(actual: &[f64], forecast: &[f64], exclude_zero_actuals: bool) -> Result<ForecastMetrics, EvalError> {
    if actual.len() != forecast.len() {
        return Err(EvalError::LengthMismatch(actual.len(), forecast.len()));
    }
    let pairs: Vec<(f64, f64)> = actual
        .iter()
        .zip(forecast)
        .map(|(&a, &f)| (a, f))
        .filter(|(a, _)| !exclude_zero_actuals || *a != 0.0)
        .collect();
    if pairs.is_empty() {
        return Err(EvalError::Empty);
    }
    let n = pairs.len() as f64;
    let mse = pairs.iter().map(|(a, f)| (a - f).powi(2)).sum::<f64>() / n;
    let mae = pairs.iter().map(|(a, f)| (a - f).abs()).sum::<f64>() / n;
    let nonzero: Vec<&(f64, f64)> = pairs.iter().filter(|(a, _)| *a != 0.0).collect();
    let mape = if nonzero.is_empty() {
        None
    } else {
        Some(100.0 * nonzero.iter().map(|(a, f)| ((a - f) / a).abs()).sum::<f64>() / nonzero.len() as f64)
    };
    let smape = 100.0
        * pairs
            .iter()
            .map(|(a, f)| {
                let d = a.abs() + f.abs();
                if d == 0.0 {
                    0.0
                } else {
                    2.0 * (f - a).abs() / d
                }
            })
            .sum::<f64>()
        / n;
    Ok(ForecastMetrics {
        count: pairs.len(),
        mse,
        mae,
        mape,
        mape_skipped: pairs.len() - nonzero.len(),
        smape,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_forecast() {
        let m = forecast_metrics(&[1.0, 2.0, 0.0], &[1.0, 2.0, 0.0], false).unwrap();
        assert_eq!((m.mse, m.mae, m.mape, m.smape), (0.0, 0.0, Some(0.0), 0.0));
        assert_eq!(m.mape_skipped, 1);
    }

    #[test]
    fn closed_forms() {
        let m = forecast_metrics(&[2.0], &[1.0], false).unwrap();
        assert_eq!((m.mae, m.mse, m.mape), (1.0, 1.0, Some(50.0)));
        assert!((m.smape - 200.0 / 3.0).abs() < 1e-12);
        assert_eq!(forecast_metrics(&[1.0], &[0.0], false).unwrap().smape, 200.0);
    }

    #[test]
    fn all_zero_actuals_flag_mape() {
        let m = forecast_metrics(&[0.0, 0.0], &[1.0, 0.0], false).unwrap();
        assert_eq!(m.mape, None);
        assert_eq!(m.mape_skipped, 2);
        assert_eq!(forecast_metrics(&[0.0, 0.0], &[1.0, 0.0], true), Err(EvalError::Empty));
    }

    #[test]
    fn night_exclusion_changes_row_count() {
        let a = [0.0, 3.0, 4.0, 0.0];
        let f = [0.5, 2.0, 4.5, 0.0];
        assert_eq!(forecast_metrics(&a, &f, false).unwrap().count, 4);
        assert_eq!(forecast_metrics(&a, &f, true).unwrap().count, 2);
        assert!(forecast_metrics(&a, &f[..3], false).is_err());
    }
}
