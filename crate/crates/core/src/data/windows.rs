//! Lag construction and chronological train/test split.

use chrono::{NaiveDateTime, Timelike};
use serde::{Deserialize, Serialize};

use super::ingest::SeriesTable;
use crate::error::DataError;
use crate::rtpnn::ForecastInput;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitSpec {
    pub train_days: usize,
    pub test_days: usize,
    /// Window length S in hourly slots.
    pub slots: usize,
    /// Clock hour at which every window starts.
    pub day_start_hour: u32,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            train_days: 300,
            test_days: 361,
            slots: 24,
            day_start_hour: super::devices::DEFAULT_DAY_START_HOUR,
        }
    }
}

/// Periodicities, in hours, of generation (`τ₀`) and of the weather
/// features (`τ_f`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LagSpec {
    pub generation_hours: usize,
    pub feature_hours: usize,
}

impl Default for LagSpec {
    fn default() -> Self {
        Self {
            generation_hours: 24,
            feature_hours: 24,
        }
    }
}

impl LagSpec {
    pub fn max_hours(&self) -> usize {
        self.generation_hours.max(self.feature_hours)
    }
}

/// One forecasting window: its lagged inputs and the actual generation.
#[derive(Debug, Clone, PartialEq)]
pub struct Window {
    pub start: NaiveDateTime,
    pub input: ForecastInput,
    pub actual: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WindowSplit {
    pub train: Vec<Window>,
    pub test: Vec<Window>,
}

/// Every full window of `slots` hours starting at `day_start_hour` whose
/// lags resolve inside the table, one per day, in time order.
pub fn all_windows(
    table: &SeriesTable,
    slots: usize,
    day_start_hour: u32,
    lags: LagSpec,
) -> Result<Vec<Window>, DataError> {
    if slots == 0 || slots > 24 {
        return Err(DataError::InvalidParameter(format!(
            "window length must be in 1..=24 hourly slots, got {slots}"
        )));
    }
    if lags.generation_hours == 0 || lags.feature_hours == 0 {
        return Err(DataError::InvalidParameter("lags must be positive".into()));
    }
    let history = 2 * lags.max_hours();
    if table.len() < history + slots {
        return Err(DataError::InsufficientHistory {
            required: history + slots,
            available: table.len(),
        });
    }
    let nseries = table.num_features() + 1;
    let mut out = Vec::new();
    let mut r0 = history;
    while r0 + slots <= table.len() {
        if table.timestamps[r0].hour() != day_start_hour {
            r0 += 1;
            continue;
        }
        let mut lag_rows = Vec::with_capacity(slots);
        for s in 0..slots {
            let r = r0 + s;
            let pairs = (0..nseries)
                .map(|i| {
                    let tau = if i == 0 {
                        lags.generation_hours
                    } else {
                        lags.feature_hours
                    };
                    let col = table.series(i);
                    (col[r - 2 * tau], col[r - tau])
                })
                .collect();
            lag_rows.push(pairs);
        }
        out.push(Window {
            start: table.timestamps[r0],
            input: ForecastInput {
                timestamps: table.timestamps[r0..r0 + slots].to_vec(),
                lags: lag_rows,
            },
            actual: table.generation[r0..r0 + slots].to_vec(),
        });
        r0 += 24;
    }
    Ok(out)
}

/// Chronological split: the first `train_days` windows train, the next
/// `test_days` test.
pub fn build_windows(table: &SeriesTable, split: &SplitSpec, lags: LagSpec) -> Result<WindowSplit, DataError> {
    let all = all_windows(table, split.slots, split.day_start_hour, lags)?;
    let required = split.train_days + split.test_days;
    if required > all.len() {
        return Err(DataError::SplitTooLarge {
            required,
            available: all.len(),
        });
    }
    let mut it = all.into_iter();
    let train: Vec<Window> = it.by_ref().take(split.train_days).collect();
    let test: Vec<Window> = it.take(split.test_days).collect();
    check_no_leakage(&train, &test)?;
    Ok(WindowSplit { train, test })
}

/// Every training target precedes every test target.
pub fn check_no_leakage(train: &[Window], test: &[Window]) -> Result<(), DataError> {
    let last_train = train.iter().flat_map(|w| w.input.timestamps.iter()).max();
    let first_test = test.iter().flat_map(|w| w.input.timestamps.iter()).min();
    match (last_train, first_test) {
        (Some(a), Some(b)) if a >= b => Err(DataError::InvalidParameter(format!(
            "training target {a} is not before test target {b}"
        ))),
        _ => Ok(()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::ingest::IngestReport;
    use chrono::{Duration, NaiveDate};

    fn table(days: usize, features: usize) -> SeriesTable {
        let t0 = NaiveDate::from_ymd_opt(2020, 6, 1).unwrap().and_hms_opt(0, 0, 0).unwrap();
        let n = days * 24;
        SeriesTable {
            timestamps: (0..n).map(|h| t0 + Duration::hours(h as i64)).collect(),
            generation: (0..n).map(|h| h as f64).collect(),
            feature_names: (0..features).map(|f| format!("f{f}")).collect(),
            features: (0..features)
                .map(|f| (0..n).map(|h| (h * 10 + f) as f64).collect())
                .collect(),
            imputed: vec![false; n],
            report: IngestReport::default(),
        }
    }

    #[test]
    fn three_days_give_one_window() {
        let w = all_windows(&table(3, 2), 24, 0, LagSpec::default()).unwrap();
        assert_eq!(w.len(), 1);
        let win = &w[0];
        assert_eq!(win.input.lags.len(), 24);
        // 2 · (F + 1) lag values per slot
        assert!(win.input.lags.iter().all(|slot| slot.len() == 3));
        // slot 0 is row 48: lags at rows 0 and 24
        assert_eq!(win.input.lags[0][0], (0.0, 24.0));
        assert_eq!(win.input.lags[5][2], (51.0, 291.0));
        assert_eq!(win.actual[0], 48.0);
    }

    #[test]
    fn window_count_matches_lag_arithmetic() {
        for days in 3..10 {
            let w = all_windows(&table(days, 1), 24, 0, LagSpec::default()).unwrap();
            assert_eq!(w.len(), days - 2);
        }
    }

    #[test]
    fn day_start_offset() {
        let w = all_windows(&table(4, 1), 24, 6, LagSpec::default()).unwrap();
        assert_eq!(w.len(), 1);
        assert_eq!(w[0].start.hour(), 6);
    }

    #[test]
    fn split_has_no_leakage() {
        let spec = SplitSpec {
            train_days: 4,
            test_days: 3,
            slots: 24,
            day_start_hour: 0,
        };
        let s = build_windows(&table(10, 1), &spec, LagSpec::default()).unwrap();
        assert_eq!((s.train.len(), s.test.len()), (4, 3));
        let max_train = s.train.iter().flat_map(|w| &w.input.timestamps).max().unwrap();
        let min_test = s.test.iter().flat_map(|w| &w.input.timestamps).min().unwrap();
        assert!(max_train < min_test);
        assert!(check_no_leakage(&s.test, &s.train).is_err());
    }

    #[test]
    fn errors() {
        assert!(matches!(
            all_windows(&table(2, 1), 24, 0, LagSpec::default()),
            Err(DataError::InsufficientHistory { required: 72, available: 48 })
        ));
        let spec = SplitSpec {
            train_days: 5,
            test_days: 5,
            slots: 24,
            day_start_hour: 0,
        };
        assert!(matches!(
            build_windows(&table(5, 1), &spec, LagSpec::default()),
            Err(DataError::SplitTooLarge { required: 10, available: 3 })
        ));
    }
}
