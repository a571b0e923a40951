//! Forecast metrics, baselines, cost gaps and timing.

pub mod baselines;
pub mod gap;
pub mod metrics;
pub mod timing;

pub use baselines::{naive_forecast, LinearRegression, MlpBaseline};
pub use gap::{cost_gap, DaySchedules, GapReport, GapRow, GapSummary, EXACT_METHOD};
pub use metrics::{forecast_metrics, ForecastMetrics};
pub use timing::{summarize, timing_bench, Timed, TimingRow, TimingTable};
