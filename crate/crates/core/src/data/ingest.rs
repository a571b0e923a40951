//! CSV ingestion and timestamp join.

use std::path::{Path, PathBuf};

use chrono::{DateTime, Duration, NaiveDateTime, Timelike};

use crate::error::DataError;

pub const TIMESTAMP_COLUMN: &str = "timestamp";
pub const GENERATION_COLUMN: &str = "gen_kw";

/// Row counts of one ingestion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct IngestReport {
    pub generation_rows: usize,
    pub weather_rows: usize,
    pub rows_out: usize,
    pub imputed_rows: usize,
}

/// Hourly joined table of generation and weather features.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesTable {
    pub timestamps: Vec<NaiveDateTime>,
    /// kW per hour.
    pub generation: Vec<f64>,
    pub feature_names: Vec<String>,
    /// One column per feature.
    pub features: Vec<Vec<f64>>,
    /// Rows filled by carrying the previous observation forward.
    pub imputed: Vec<bool>,
    pub report: IngestReport,
}

impl SeriesTable {
    pub fn len(&self) -> usize {
        self.timestamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps.is_empty()
    }

    pub fn num_features(&self) -> usize {
        self.features.len()
    }

    /// Series `0` is generation, `1..=F` the features.
    pub fn series(&self, i: usize) -> &[f64] {
        if i == 0 {
            &self.generation
        } else {
            &self.features[i - 1]
        }
    }

    /// Keeps only the named features, in the given order.
    pub fn select_features(&self, names: &[String]) -> Result<SeriesTable, DataError> {
        let mut out = self.clone();
        out.feature_names.clear();
        out.features.clear();
        for n in names {
            let i = self
                .feature_names
                .iter()
                .position(|f| f == n)
                .ok_or_else(|| DataError::UnknownFeature(n.clone()))?;
            out.feature_names.push(n.clone());
            out.features.push(self.features[i].clone());
        }
        Ok(out)
    }
}

/// Parses ISO-8601 date-times (with or without offset) or integer epoch
/// hours.
pub fn parse_timestamp(raw: &str) -> Option<NaiveDateTime> {
    let s = raw.trim();
    if let Ok(h) = s.parse::<i64>() {
        return DateTime::from_timestamp(h.checked_mul(3600)?, 0).map(|d| d.naive_utc());
    }
    if let Ok(d) = DateTime::parse_from_rfc3339(s) {
        return Some(d.naive_utc());
    }
    const FORMATS: [&str; 4] = [
        "%Y-%m-%dT%H:%M:%S",
        "%Y-%m-%d %H:%M:%S",
        "%Y-%m-%dT%H:%M",
        "%Y-%m-%d %H:%M",
    ];
    FORMATS
        .iter()
        .find_map(|f| NaiveDateTime::parse_from_str(s, f).ok())
}

/// Timestamped rows of one file; `None` marks an empty cell.
struct RawSeries {
    path: PathBuf,
    columns: Vec<String>,
    times: Vec<NaiveDateTime>,
    rows: Vec<Vec<Option<f64>>>,
}

fn read_series(path: &Path, required: Option<&str>) -> Result<RawSeries, DataError> {
    let csv_err = |source| DataError::Csv {
        path: path.to_path_buf(),
        source,
    };
    let file = std::fs::File::open(path).map_err(|source| DataError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let headers = reader.headers().map_err(csv_err)?.clone();
    let ts_idx = headers
        .iter()
        .position(|h| h == TIMESTAMP_COLUMN)
        .ok_or_else(|| DataError::MissingColumn {
            path: path.to_path_buf(),
            column: TIMESTAMP_COLUMN.into(),
        })?;
    let value_idx: Vec<usize> = match required {
        Some(col) => vec![headers
            .iter()
            .position(|h| h == col)
            .ok_or_else(|| DataError::MissingColumn {
                path: path.to_path_buf(),
                column: col.into(),
            })?],
        None => (0..headers.len()).filter(|&i| i != ts_idx).collect(),
    };
    let columns = value_idx.iter().map(|&i| headers[i].to_string()).collect();

    let mut times = Vec::new();
    let mut rows = Vec::new();
    for (r, rec) in reader.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        let row_no = r + 2;
        let raw_ts = rec.get(ts_idx).unwrap_or("");
        let t = parse_timestamp(raw_ts)
            .filter(|t| t.minute() == 0 && t.second() == 0)
            .ok_or_else(|| DataError::BadTimestamp {
                path: path.to_path_buf(),
                row: row_no,
                value: raw_ts.to_string(),
            })?;
        if times.last().is_some_and(|&prev| t <= prev) {
            return Err(DataError::NonMonotonic {
                path: path.to_path_buf(),
                row: row_no,
            });
        }
        let mut vals = Vec::with_capacity(value_idx.len());
        for &i in &value_idx {
            let cell = rec.get(i).unwrap_or("");
            if cell.is_empty() || cell.eq_ignore_ascii_case("nan") {
                vals.push(None);
            } else {
                let v = cell
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| DataError::BadValue {
                        path: path.to_path_buf(),
                        row: row_no,
                        column: headers[i].to_string(),
                        value: cell.to_string(),
                    })?;
                vals.push(Some(v));
            }
        }
        times.push(t);
        rows.push(vals);
    }
    Ok(RawSeries {
        path: path.to_path_buf(),
        columns,
        times,
        rows,
    })
}

/// Values of `raw` on the hourly grid `first..=last`, carrying the last
/// observation forward over missing hours and empty cells. Returns the
/// columns and a per-row imputation flag.
fn align(
    raw: &RawSeries,
    first: NaiveDateTime,
    hours: usize,
) -> Result<(Vec<Vec<f64>>, Vec<bool>), DataError> {
    let ncol = raw.columns.len();
    let mut cols = vec![Vec::with_capacity(hours); ncol];
    let mut flags = Vec::with_capacity(hours);
    // last observation at or before the grid start
    let mut pos = raw.times.partition_point(|&t| t <= first);
    debug_assert!(pos > 0);
    pos -= 1;
    let mut last: Vec<Option<f64>> = raw.rows[pos].clone();
    for h in 0..hours {
        let t = first + Duration::hours(h as i64);
        let mut imputed = false;
        if raw.times[pos] == t {
            for (c, v) in raw.rows[pos].iter().enumerate() {
                match v {
                    Some(x) => last[c] = Some(*x),
                    None => imputed = true,
                }
            }
        } else {
            imputed = true;
        }
        for (c, col) in cols.iter_mut().enumerate() {
            let v = last[c].ok_or_else(|| DataError::BadValue {
                path: raw.path.clone(),
                row: pos + 2,
                column: raw.columns[c].clone(),
                value: String::new(),
            })?;
            col.push(v);
        }
        flags.push(imputed);
        if pos + 1 < raw.times.len() && raw.times[pos + 1] <= t + Duration::hours(1) {
            pos += 1;
        }
    }
    Ok((cols, flags))
}

/// Joins an hourly generation file (`timestamp,gen_kw`) with a weather file
/// (`timestamp,<features...>`) over their common time range. Interior gaps
/// on either side are forward-filled and counted.
pub fn ingest(generation_csv: &Path, weather_csv: &Path) -> Result<SeriesTable, DataError> {
    let gen = read_series(generation_csv, Some(GENERATION_COLUMN))?;
    let wx = read_series(weather_csv, None)?;
    let empty = || DataError::EmptyJoin {
        generation: generation_csv.to_path_buf(),
        weather: weather_csv.to_path_buf(),
    };
    let (Some(&g0), Some(&w0)) = (gen.times.first(), wx.times.first()) else {
        return Err(empty());
    };
    let first = g0.max(w0);
    let last = (*gen.times.last().unwrap()).min(*wx.times.last().unwrap());
    if first > last {
        return Err(empty());
    }
    let hours = ((last - first).num_hours() + 1) as usize;
    let (gcols, gflags) = align(&gen, first, hours)?;
    let (wcols, wflags) = align(&wx, first, hours)?;
    let imputed: Vec<bool> = gflags.iter().zip(&wflags).map(|(a, b)| *a || *b).collect();
    let report = IngestReport {
        generation_rows: gen.times.len(),
        weather_rows: wx.times.len(),
        rows_out: hours,
        imputed_rows: imputed.iter().filter(|&&b| b).count(),
    };
    if let Some(bad) = gcols[0].iter().position(|&g| g < 0.0) {
        return Err(DataError::BadValue {
            path: generation_csv.to_path_buf(),
            row: bad + 2,
            column: GENERATION_COLUMN.into(),
            value: gcols[0][bad].to_string(),
        });
    }
    Ok(SeriesTable {
        timestamps: (0..hours).map(|h| first + Duration::hours(h as i64)).collect(),
        generation: gcols.into_iter().next().unwrap(),
        feature_names: wx.columns.clone(),
        features: wcols,
        imputed,
        report,
    })
}

/// Writes `timestamp,gen_kw` and `timestamp,<features>` files for a table.
pub fn write_table(table: &SeriesTable, generation_csv: &Path, weather_csv: &Path) -> Result<(), DataError> {
    let io = |path: &Path| {
        let p = path.to_path_buf();
        move |source: csv::Error| DataError::Csv { path: p.clone(), source }
    };
    let mut g = csv::Writer::from_path(generation_csv).map_err(io(generation_csv))?;
    g.write_record([TIMESTAMP_COLUMN, GENERATION_COLUMN]).map_err(io(generation_csv))?;
    for (t, v) in table.timestamps.iter().zip(&table.generation) {
        g.write_record([t.format("%Y-%m-%dT%H:%M:%S").to_string(), format!("{v:?}")])
            .map_err(io(generation_csv))?;
    }
    g.flush().map_err(|source| DataError::Io {
        path: generation_csv.to_path_buf(),
        source,
    })?;

    let mut w = csv::Writer::from_path(weather_csv).map_err(io(weather_csv))?;
    let mut header = vec![TIMESTAMP_COLUMN.to_string()];
    header.extend(table.feature_names.iter().cloned());
    w.write_record(&header).map_err(io(weather_csv))?;
    for (r, t) in table.timestamps.iter().enumerate() {
        let mut rec = vec![t.format("%Y-%m-%dT%H:%M:%S").to_string()];
        rec.extend(table.features.iter().map(|c| format!("{:?}", c[r])));
        w.write_record(&rec).map_err(io(weather_csv))?;
    }
    w.flush().map_err(|source| DataError::Io {
        path: weather_csv.to_path_buf(),
        source,
    })?;
    Ok(())
}
