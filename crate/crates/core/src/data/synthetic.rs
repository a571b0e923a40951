//! Synthetic PV generation and weather series.
//!
//! Clear-sky output is a half sine between sunrise and sunset, scaled by a
//! slow seasonal factor. Daily cloud cover follows a clamped AR(1) process
//! with hourly jitter, and attenuates output through the Kasten–Czeplak
//! relation `1 − 0.75·cc^3.4`.

use chrono::{Duration, NaiveDate};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::ingest::{IngestReport, SeriesTable};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticConfig {
    pub days: usize,
    pub start_date: NaiveDate,
    pub seed: u64,
    /// Clear-sky peak output, kW.
    pub peak_kw: f64,
    pub sunrise_hour: f64,
    pub sunset_hour: f64,
    /// Relative amplitude of the seasonal factor (period one year).
    pub seasonal_amplitude: f64,
    pub cloud_mean: f64,
    pub cloud_persistence: f64,
    pub cloud_sd: f64,
    pub hourly_cloud_sd: f64,
    /// Relative multiplicative noise on generation.
    pub generation_noise: f64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            days: 120,
            start_date: NaiveDate::from_ymd_opt(2016, 5, 1).expect("valid date"),
            seed: 7,
            peak_kw: 14.0,
            sunrise_hour: 5.0,
            sunset_hour: 21.0,
            seasonal_amplitude: 0.1,
            cloud_mean: 0.35,
            cloud_persistence: 0.6,
            cloud_sd: 0.2,
            hourly_cloud_sd: 0.1,
            generation_noise: 0.05,
        }
    }
}

impl SyntheticConfig {
    /// Noise-free, cloudless variant: every day repeats the same profile.
    pub fn periodic(days: usize, peak_kw: f64) -> Self {
        Self {
            days,
            peak_kw,
            seasonal_amplitude: 0.0,
            cloud_mean: 0.0,
            cloud_sd: 0.0,
            hourly_cloud_sd: 0.0,
            generation_noise: 0.0,
            ..Self::default()
        }
    }
}

/// Mean of the half-sine clear-sky shape over hour `[h, h + 1)`.
pub fn clear_sky(hour: f64, sunrise: f64, sunset: f64) -> f64 {
    let len = sunset - sunrise;
    let a = (hour - sunrise).clamp(0.0, len);
    let b = (hour + 1.0 - sunrise).clamp(0.0, len);
    if b <= a {
        return 0.0;
    }
    let k = std::f64::consts::PI / len;
    ((k * a).cos() - (k * b).cos()) / k
}

fn attenuation(cloud: f64) -> f64 {
    1.0 - 0.75 * cloud.clamp(0.0, 1.0).powf(3.4)
}

/// Hourly table with features `temperature_c`, `cloud_cover_pct` and
/// `uv_index`.
pub fn generate(cfg: &SyntheticConfig) -> SeriesTable {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let std_normal = Normal::new(0.0, 1.0).expect("unit normal");
    let mut draw = |sd: f64| if sd > 0.0 { sd * std_normal.sample(&mut rng) } else { 0.0 };

    let t0 = cfg.start_date.and_hms_opt(0, 0, 0).expect("midnight");
    let n = cfg.days * 24;
    let mut timestamps = Vec::with_capacity(n);
    let mut generation = Vec::with_capacity(n);
    let mut temperature = Vec::with_capacity(n);
    let mut cloud_cover = Vec::with_capacity(n);
    let mut uv = Vec::with_capacity(n);

    let mut cloud_day = cfg.cloud_mean;
    for d in 0..cfg.days {
        cloud_day = (cfg.cloud_mean + cfg.cloud_persistence * (cloud_day - cfg.cloud_mean) + draw(cfg.cloud_sd))
            .clamp(0.0, 1.0);
        let season = 1.0 + cfg.seasonal_amplitude * (2.0 * std::f64::consts::PI * d as f64 / 365.0).sin();
        for h in 0..24 {
            let hour = h as f64;
            let cc = (cloud_day + draw(cfg.hourly_cloud_sd)).clamp(0.0, 1.0);
            let shape = clear_sky(hour, cfg.sunrise_hour, cfg.sunset_hour);
            let g = cfg.peak_kw * season * shape * attenuation(cc) * (1.0 + draw(cfg.generation_noise));
            timestamps.push(t0 + Duration::hours((d * 24 + h) as i64));
            generation.push(g.max(0.0));
            let diurnal = (2.0 * std::f64::consts::PI * (hour - 9.0) / 24.0).sin();
            temperature.push(18.0 + 4.0 * season + 6.0 * diurnal - 4.0 * cc + draw(0.5));
            cloud_cover.push(100.0 * cc);
            uv.push((8.0 * season * shape * attenuation(cc) + draw(0.2)).max(0.0));
        }
    }
    SeriesTable {
        timestamps,
        generation,
        feature_names: vec!["temperature_c".into(), "cloud_cover_pct".into(), "uv_index".into()],
        features: vec![temperature, cloud_cover, uv],
        imputed: vec![false; n],
        report: IngestReport {
            generation_rows: n,
            weather_rows: n,
            rows_out: n,
            imputed_rows: 0,
        },
    }
}
