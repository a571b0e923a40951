use crate::error::DataError;
use crate::scenario::StartPreference;

/// Value substituted for forbidden (infinite-cost) slots at the input of the
/// scheduling layer.
pub const NEURAL_COST_CAP: f64 = 100.0;

/// Inverted-Gaussian dissatisfaction cost over slot numbers `1..=slots`:
/// `1 − exp(−((s − μ)/σ)² / 2) / (σ √(2π))`, infinite outside
/// `[earliest, latest]`.
pub fn cost_profile(pref: &StartPreference, slots: usize) -> Result<Vec<f64>, DataError> {
    if !(pref.sigma > 0.0 && pref.sigma.is_finite()) {
        return Err(DataError::InvalidParameter(format!(
            "sigma must be positive, got {}",
            pref.sigma
        )));
    }
    if !(pref.desired_start >= 1.0 && pref.desired_start <= slots as f64) {
        return Err(DataError::InvalidParameter(format!(
            "desired start {} outside [1, {slots}]",
            pref.desired_start
        )));
    }
    let peak = 1.0 / (pref.sigma * (2.0 * std::f64::consts::PI).sqrt());
    Ok((1..=slots)
        .map(|s| {
            let too_early = pref.earliest.is_some_and(|e| s < e);
            let too_late = pref.latest.is_some_and(|l| s > l);
            if too_early || too_late {
                f64::INFINITY
            } else {
                let z = (s as f64 - pref.desired_start) / pref.sigma;
                1.0 - peak * (-0.5 * z * z).exp()
            }
        })
        .collect())
}

/// Replaces infinite entries by `cap`.
pub fn cap_costs(row: &[f64], cap: f64) -> Vec<f64> {
    row.iter()
        .map(|&c| if c.is_finite() { c } else { cap })
        .collect()
}
