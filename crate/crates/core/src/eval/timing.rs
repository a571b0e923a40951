//! Wall-clock timing of scheduling methods.

use std::path::Path;
use std::time::Instant;

use serde::Serialize;

use super::gap::quantile;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimingRow {
    pub method: String,
    pub samples: usize,
    pub mean_ms: f64,
    pub p50_ms: f64,
    pub p95_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TimingTable {
    pub rows: Vec<TimingRow>,
}

impl TimingTable {
    pub fn method(&self, name: &str) -> Option<&TimingRow> {
        self.rows.iter().find(|r| r.method == name)
    }

    /// Mean time of `slow` over mean time of `fast`.
    pub fn ratio(&self, slow: &str, fast: &str) -> Option<f64> {
        let (s, f) = (self.method(slow)?, self.method(fast)?);
        (f.mean_ms > 0.0).then(|| s.mean_ms / f.mean_ms)
    }

    pub fn write_csv(&self, path: &Path) -> std::io::Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        for r in &self.rows {
            w.serialize(r)?;
        }
        w.flush()
    }

    /// Aligned console table.
    pub fn render(&self) -> String {
        let mut out = format!("{:<8} {:>8} {:>12} {:>12} {:>12}\n", "method", "samples", "mean_ms", "p50_ms", "p95_ms");
        for r in &self.rows {
            out.push_str(&format!(
                "{:<8} {:>8} {:>12.4} {:>12.4} {:>12.4}\n",
                r.method, r.samples, r.mean_ms, r.p50_ms, r.p95_ms
            ));
        }
        out
    }
}

/// Summary of per-call durations in milliseconds; `None` without samples.
pub fn summarize(method: &str, samples_ms: &[f64]) -> Option<TimingRow> {
    if samples_ms.is_empty() {
        return None;
    }
    let mut sorted = samples_ms.to_vec();
    sorted.sort_by(f64::total_cmp);
    Some(TimingRow {
        method: method.to_string(),
        samples: sorted.len(),
        mean_ms: sorted.iter().sum::<f64>() / sorted.len() as f64,
        p50_ms: quantile(&sorted, 0.5),
        p95_ms: quantile(&sorted, 0.95),
    })
}

/// A method under test: called once per window index.
pub type Timed<'a> = (&'a str, Box<dyn FnMut(usize) + 'a>);

/// Times every method on windows `0..windows`, `repetitions` times each,
/// after one untimed warm-up call per method.
pub fn timing_bench(methods: Vec<Timed<'_>>, windows: usize, repetitions: usize) -> TimingTable {
    let mut rows = Vec::new();
    if repetitions == 0 || windows == 0 {
        return TimingTable { rows };
    }
    for (name, mut f) in methods {
        f(0);
        let mut samples = Vec::with_capacity(windows * repetitions);
        for _ in 0..repetitions {
            for i in 0..windows {
                let t0 = Instant::now();
                f(i);
                samples.push(t0.elapsed().as_secs_f64() * 1e3);
            }
        }
        rows.extend(summarize(name, &samples));
    }
    TimingTable { rows }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_repetitions_give_empty_table() {
        let t = timing_bench(vec![("a", Box::new(|_| {}))], 3, 0);
        assert!(t.rows.is_empty());
        assert_eq!(t.ratio("a", "b"), None);
    }

    #[test]
    fn counts_samples() {
        let mut calls = 0;
        let t = timing_bench(vec![("a", Box::new(|_| calls += 1))], 3, 2);
        assert_eq!(t.rows[0].samples, 6);
        assert_eq!(calls, 7);
    }

    #[test]
    fn summary_percentiles() {
        let r = summarize("m", &[4.0, 1.0, 3.0, 2.0]).unwrap();
        assert_eq!((r.mean_ms, r.p50_ms), (2.5, 2.5));
        assert!(summarize("m", &[]).is_none());
    }
}
