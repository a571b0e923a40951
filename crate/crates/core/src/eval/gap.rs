//! Per-day objective comparison against the exact optimum.

use std::path::Path;

use serde::Serialize;

use crate::error::EvalError;
use crate::scenario::{ScenarioWindow, Schedule};

pub const EXACT_METHOD: &str = "exact";

/// Schedules produced by every method for one day.
#[derive(Debug, Clone)]
pub struct DaySchedules {
    pub day: usize,
    pub schedules: Vec<(String, Schedule)>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GapRow {
    pub day: usize,
    pub method: String,
    pub objective: f64,
    pub gap_abs: f64,
    /// Percent of the exact objective; 0 when both are 0.
    pub gap_pct: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GapSummary {
    pub method: String,
    pub days: usize,
    pub mean_abs: f64,
    pub mean_pct: f64,
    pub median_pct: f64,
    pub q1_pct: f64,
    pub q3_pct: f64,
    pub max_pct: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GapReport {
    pub rows: Vec<GapRow>,
    pub summary: Vec<GapSummary>,
}

/// Linear-interpolation quantile of sorted values.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Objectives of every method on every day, and their gaps to the exact
/// schedule of the same day. `scenarios[i]` is the window of `days[i]`.
pub fn cost_gap(scenarios: &[ScenarioWindow], days: &[DaySchedules]) -> Result<GapReport, EvalError> {
    if scenarios.len() != days.len() {
        return Err(EvalError::Alignment(format!(
            "{} scenarios for {} days of schedules",
            scenarios.len(),
            days.len()
        )));
    }
    let mut rows = Vec::new();
    let mut methods: Vec<String> = Vec::new();
    for (scenario, day) in scenarios.iter().zip(days) {
        let exact = day
            .schedules
            .iter()
            .find(|(m, _)| m == EXACT_METHOD)
            .ok_or_else(|| EvalError::Alignment(format!("day {} has no exact schedule", day.day)))?;
        let best = scenario.objective(exact.1.starts());
        for (method, schedule) in &day.schedules {
            let objective = scenario.objective(schedule.starts());
            let gap_abs = objective - best;
            let gap_pct = if best != 0.0 { 100.0 * gap_abs / best } else { 0.0 };
            if !methods.contains(method) {
                methods.push(method.clone());
            }
            rows.push(GapRow {
                day: day.day,
                method: method.clone(),
                objective,
                gap_abs,
                gap_pct,
            });
        }
    }
    let summary = methods
        .into_iter()
        .map(|method| {
            let mine: Vec<&GapRow> = rows.iter().filter(|r| r.method == method).collect();
            let mut pct: Vec<f64> = mine.iter().map(|r| r.gap_pct).collect();
            pct.sort_by(f64::total_cmp);
            let n = mine.len() as f64;
            GapSummary {
                days: mine.len(),
                mean_abs: mine.iter().map(|r| r.gap_abs).sum::<f64>() / n,
                mean_pct: pct.iter().sum::<f64>() / n,
                median_pct: quantile(&pct, 0.5),
                q1_pct: quantile(&pct, 0.25),
                q3_pct: quantile(&pct, 0.75),
                max_pct: pct.last().copied().unwrap_or(f64::NAN),
                method,
            }
        })
        .collect();
    Ok(GapReport { rows, summary })
}

impl GapReport {
    pub fn method(&self, name: &str) -> Option<&GapSummary> {
        self.summary.iter().find(|s| s.method == name)
    }

    /// `day,method,objective,gap_abs,gap_pct`.
    pub fn write_rows_csv(&self, path: &Path) -> std::io::Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["day", "method", "objective", "gap_abs", "gap_pct"])?;
        for r in &self.rows {
            w.write_record([
                r.day.to_string(),
                r.method.clone(),
                format!("{:.9}", r.objective),
                format!("{:.9}", r.gap_abs),
                format!("{:.6}", r.gap_pct),
            ])?;
        }
        w.flush()
    }

    pub fn write_summary_csv(&self, path: &Path) -> std::io::Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        for s in &self.summary {
            w.serialize(s)?;
        }
        w.flush()
    }
}
