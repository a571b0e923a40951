//! Command implementations shared by the CLI and the integration tests.
//!
//! Every command writes its resolved config next to its outputs, and its
//! outputs depend only on the config, the seed and the data.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use chrono::NaiveDateTime;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::{RunConfig, ScenarioFile};
use crate::data::{build_windows, generate, ingest, write_table, IngestReport, ScenarioTemplate, SeriesTable, WindowSplit};
use crate::error::{FesError, ScheduleError, TrainError};
use crate::eval::{
    cost_gap, forecast_metrics, naive_forecast, timing_bench, DaySchedules, ForecastMetrics, GapReport, LinearRegression,
    MlpBaseline, Timed, TimingTable,
};
use crate::exact::solve_exact;
use crate::fes::{decode, stage2_train, FesModel, FesRunError, Stage2Sample};
use crate::ga::{ga_solve, write_history_csv, GaConfig};
use crate::nn::CheckpointError;
use crate::rtpnn::{param_checksum, stage1_train, write_forecast_csv, Normalization, RtpnnModel};
use crate::scenario::{write_schedule_csv, ScenarioWindow, Schedule};

pub const RTPNN_CHECKPOINT: &str = "rtpnn.ckpt";
pub const FES_CHECKPOINT: &str = "fes.ckpt";
pub const MLP_LEARNING_RATE: f64 = 1e-3;

impl From<FesRunError> for FesError {
    fn from(e: FesRunError) -> Self {
        match e {
            FesRunError::Nn(e) => FesError::Nn(e),
            FesRunError::Schedule(e) => FesError::Schedule(e),
        }
    }
}

fn checkpoint_error(e: CheckpointError) -> FesError {
    FesError::Checkpoint(e.to_string())
}

fn io_at(path: &Path) -> impl Fn(std::io::Error) -> FesError + '_ {
    move |e| FesError::io(path, e)
}

fn ensure_dir(dir: &Path) -> Result<(), FesError> {
    std::fs::create_dir_all(dir).map_err(io_at(dir))
}

fn require(path: PathBuf) -> Result<PathBuf, FesError> {
    if path.is_file() {
        Ok(path)
    } else {
        Err(FesError::MissingCheckpoint(path))
    }
}

/// Hourly table from the configured CSV pair, or synthetic data when no
/// files are configured.
pub fn load_table(cfg: &RunConfig) -> Result<SeriesTable, FesError> {
    let table = match (&cfg.paths.generation_csv, &cfg.paths.weather_csv) {
        (Some(g), Some(w)) => ingest(g, w)?,
        _ => generate(&cfg.data.synthetic),
    };
    match &cfg.data.features {
        Some(names) => Ok(table.select_features(names)?),
        None => Ok(table),
    }
}

pub struct Dataset {
    pub table: SeriesTable,
    pub split: WindowSplit,
    pub template: ScenarioTemplate,
}

pub fn load_dataset(cfg: &RunConfig) -> Result<Dataset, FesError> {
    let table = load_table(cfg)?;
    let split = build_windows(&table, &cfg.split, cfg.lags)?;
    let template = cfg.scenario_template()?;
    Ok(Dataset { table, split, template })
}

/// Ingests (or synthesizes) the dataset and writes the cleaned
/// `generation.csv` and `weather.csv`.
pub fn cmd_ingest(cfg: &RunConfig, out_dir: &Path) -> Result<IngestReport, FesError> {
    ensure_dir(out_dir)?;
    cfg.write_resolved(out_dir)?;
    let table = load_table(cfg)?;
    write_table(&table, &out_dir.join("generation.csv"), &out_dir.join("weather.csv"))?;
    Ok(table.report)
}

fn write_loss_csv(path: &Path, history: &[f64]) -> Result<(), FesError> {
    let run = || -> std::io::Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["epoch", "loss"])?;
        for (e, l) in history.iter().enumerate() {
            w.write_record([(e + 1).to_string(), format!("{l:?}")])?;
        }
        w.flush()
    };
    run().map_err(io_at(path))
}

fn write_key_values(path: &Path, rows: &[(&str, String)]) -> Result<(), FesError> {
    let run = || -> std::io::Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["key", "value"])?;
        for (k, v) in rows {
            w.write_record([*k, v.as_str()])?;
        }
        w.flush()
    };
    run().map_err(io_at(path))
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainSummary {
    pub train_windows: usize,
    pub label_days: usize,
    /// Training windows whose forecast scenario had no feasible schedule.
    pub skipped_days: Vec<NaiveDateTime>,
    pub stage1_final_loss: f64,
    pub stage2_final_loss: f64,
    pub rtpnn_checksum: u64,
    pub fes_checksum: u64,
}

fn is_infeasible(e: &ScheduleError) -> bool {
    matches!(e, ScheduleError::Infeasible | ScheduleError::InfeasibleDevice { .. })
}

/// Stage 1 on MSE, exact labels on the forecast generation of every
/// training window, then Stage 2 on cross-entropy.
pub fn cmd_train(cfg: &RunConfig, out_dir: &Path) -> Result<TrainSummary, FesError> {
    let ckpt_dir = cfg.checkpoint_dir(out_dir);
    ensure_dir(out_dir)?;
    ensure_dir(&ckpt_dir)?;
    cfg.write_resolved(out_dir)?;
    let ds = load_dataset(cfg)?;
    let train = &ds.split.train;
    let stage1 = |source| FesError::Training { stage: "stage 1", source };
    let stage2 = |source| FesError::Training { stage: "stage 2", source };

    let norm = Normalization::fit(train).map_err(stage1)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.component_seed("init"));
    let mut forecaster = RtpnnModel::new(cfg.split.slots, norm, cfg.rtpnn, &mut rng);
    let h1 = stage1_train(&mut forecaster, train, &cfg.stage1, cfg.component_seed("stage1")).map_err(stage1)?;
    write_loss_csv(&out_dir.join("stage1_loss.csv"), &h1)?;
    forecaster.save(&ckpt_dir.join(RTPNN_CHECKPOINT)).map_err(checkpoint_error)?;

    let battery = ds.template.params.battery_initial;
    let mut samples = Vec::with_capacity(train.len());
    let mut skipped = Vec::new();
    for w in train {
        let forecast = forecaster.forecast_window(&w.input)?;
        let scenario = ds.template.window_at(w.start, forecast, battery)?;
        match solve_exact(&scenario) {
            Ok((label, _)) => samples.push(Stage2Sample { scenario, label }),
            Err(e) if is_infeasible(&e) => {
                log::warn!("no feasible schedule for training window {}; skipped", w.start);
                skipped.push(w.start);
            }
            Err(e) => return Err(e.into()),
        }
    }
    if samples.is_empty() {
        return Err(stage2(TrainError::EmptyDataset));
    }
    let mut fes = FesModel::new(forecaster, ds.template.devices.len());
    let h2 = stage2_train(&mut fes, &samples, &cfg.stage2, cfg.component_seed("stage2")).map_err(stage2)?;
    write_loss_csv(&out_dir.join("stage2_loss.csv"), &h2)?;
    fes.save(&ckpt_dir.join(FES_CHECKPOINT)).map_err(checkpoint_error)?;

    let summary = TrainSummary {
        train_windows: train.len(),
        label_days: samples.len(),
        skipped_days: skipped,
        stage1_final_loss: h1.last().copied().unwrap_or(f64::NAN),
        stage2_final_loss: h2.last().copied().unwrap_or(f64::NAN),
        rtpnn_checksum: fes.forecaster.checksum(),
        fes_checksum: param_checksum(&fes.store),
    };
    let skipped_list: Vec<String> = summary.skipped_days.iter().map(|t| t.to_string()).collect();
    write_key_values(
        &out_dir.join("train_summary.csv"),
        &[
            ("train_windows", summary.train_windows.to_string()),
            ("label_days", summary.label_days.to_string()),
            ("skipped_days", summary.skipped_days.len().to_string()),
            ("skipped_windows", skipped_list.join(" ")),
            ("stage1_final_loss", format!("{:?}", summary.stage1_final_loss)),
            ("stage2_final_loss", format!("{:?}", summary.stage2_final_loss)),
            ("rtpnn_checksum", format!("{:016x}", summary.rtpnn_checksum)),
            ("fes_checksum", format!("{:016x}", summary.fes_checksum)),
        ],
    )?;
    Ok(summary)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Fes,
    Exact,
    Ga,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Fes, Method::Exact, Method::Ga];

    pub fn name(self) -> &'static str {
        match self {
            Method::Fes => "fes",
            Method::Exact => "exact",
            Method::Ga => "ga",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = FesError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| FesError::Config(format!("unknown method `{s}`; expected one of fes, exact, ga")))
    }
}

/// What `schedule` runs on: a test-split day or a standalone scenario file.
#[derive(Debug, Clone, PartialEq)]
pub enum ScheduleTarget {
    /// Zero-based index into the test windows.
    Day(usize),
    File(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScheduleOutcome {
    pub method: Method,
    pub scenario: ScenarioWindow,
    pub schedule: Schedule,
    pub objective: f64,
}

/// GA configuration of one test day.
pub fn ga_config_for_day(cfg: &RunConfig, day: usize) -> GaConfig {
    GaConfig {
        seed: cfg.component_seed("ga").wrapping_add(day as u64),
        ..cfg.ga
    }
}

fn load_fes(cfg: &RunConfig, out_dir: &Path) -> Result<FesModel, FesError> {
    let path = require(cfg.checkpoint_dir(out_dir).join(FES_CHECKPOINT))?;
    FesModel::load(&path).map_err(checkpoint_error)
}

fn load_forecaster(cfg: &RunConfig, out_dir: &Path) -> Result<RtpnnModel, FesError> {
    let path = require(cfg.checkpoint_dir(out_dir).join(RTPNN_CHECKPOINT))?;
    RtpnnModel::load(&path).map_err(checkpoint_error)
}

fn check_model_fits(fes: &FesModel, scenario: &ScenarioWindow) -> Result<(), FesError> {
    if fes.devices != scenario.num_devices() || fes.slots() != scenario.slots() {
        return Err(FesError::Checkpoint(format!(
            "model was trained for {} devices × {} slots, scenario has {} × {}",
            fes.devices,
            fes.slots(),
            scenario.num_devices(),
            scenario.slots()
        )));
    }
    Ok(())
}

/// Schedules one window with one method and writes `schedule.csv`,
/// `schedule_summary.csv` and method-specific extras.
pub fn cmd_schedule(
    cfg: &RunConfig,
    out_dir: &Path,
    target: &ScheduleTarget,
    method: Method,
) -> Result<ScheduleOutcome, FesError> {
    ensure_dir(out_dir)?;
    cfg.write_resolved(out_dir)?;
    let (scenario, day, label, fes) = match target {
        ScheduleTarget::Day(day) => {
            let ds = load_dataset(cfg)?;
            let n = ds.split.test.len();
            let w = ds.split.test.get(*day).ok_or_else(|| {
                FesError::Config(format!("day {day} outside the test split (0..{n})"))
            })?;
            let (forecaster, fes) = match method {
                Method::Fes => {
                    let fes = load_fes(cfg, out_dir)?;
                    (fes.forecaster.clone(), Some(fes))
                }
                _ => (load_forecaster(cfg, out_dir)?, None),
            };
            let forecast = forecaster.forecast_window(&w.input)?;
            let path = out_dir.join("forecast.csv");
            write_forecast_csv(&path, &w.input.timestamps, &forecast).map_err(io_at(&path))?;
            let scenario = ds.template.window_at(w.start, forecast, ds.template.params.battery_initial)?;
            (scenario, *day, w.start.to_string(), fes)
        }
        ScheduleTarget::File(path) => {
            let scenario = ScenarioFile::load(path)?.to_window()?;
            let fes = match method {
                Method::Fes => Some(load_fes(cfg, out_dir)?),
                _ => None,
            };
            (scenario, 0, path.display().to_string(), fes)
        }
    };
    let schedule = match method {
        Method::Fes => {
            let fes = fes.expect("loaded above");
            check_model_fits(&fes, &scenario)?;
            let soft = fes.effective_weights().soft_schedule(&scenario);
            let path = out_dir.join("soft_schedule.csv");
            soft.write_csv(&path, &scenario).map_err(io_at(&path))?;
            decode(&soft, &scenario)?
        }
        Method::Exact => solve_exact(&scenario)?.0,
        Method::Ga => {
            let r = ga_solve(&scenario, &ga_config_for_day(cfg, day))?;
            let path = out_dir.join("ga_history.csv");
            write_history_csv(&path, &r.history).map_err(io_at(&path))?;
            r.schedule
        }
    };
    let objective = scenario.objective(schedule.starts());
    let path = out_dir.join("schedule.csv");
    write_schedule_csv(&path, &schedule, &scenario).map_err(io_at(&path))?;
    write_key_values(
        &out_dir.join("schedule_summary.csv"),
        &[
            ("method", method.to_string()),
            ("target", label),
            ("objective", format!("{objective:?}")),
        ],
    )?;
    Ok(ScheduleOutcome {
        method,
        scenario,
        schedule,
        objective,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricRow {
    pub method: String,
    pub split: String,
    pub metrics: ForecastMetrics,
}

/// Cost gaps of one initial battery level.
#[derive(Debug, Clone, PartialEq)]
pub struct GapRun {
    pub battery_fraction: f64,
    pub test_days: usize,
    /// Days on which the exact solver found no feasible schedule.
    pub exact_infeasible: usize,
    /// Feasible days on which decoding stranded a device.
    pub fes_failed: usize,
    /// Feasible days on which the GA found no feasible seed.
    pub ga_failed: usize,
    pub report: GapReport,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalSummary {
    pub metrics: Vec<MetricRow>,
    pub gaps: Vec<GapRun>,
}

/// Maps `f` over `items` on all available cores, keeping order.
fn par_map<T: Sync, R: Send>(items: &[T], f: impl Fn(usize, &T) -> R + Sync) -> Vec<R> {
    let threads = std::thread::available_parallelism().map_or(1, |n| n.get()).min(items.len().max(1));
    let chunk = items.len().div_ceil(threads).max(1);
    std::thread::scope(|scope| {
        let handles: Vec<_> = items
            .chunks(chunk)
            .enumerate()
            .map(|(c, part)| {
                let f = &f;
                scope.spawn(move || {
                    part.iter()
                        .enumerate()
                        .map(|(i, x)| f(c * chunk + i, x))
                        .collect::<Vec<R>>()
                })
            })
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("worker thread panicked"))
            .collect()
    })
}

enum DayResult {
    Scheduled(ScenarioWindow, DaySchedules),
    ExactInfeasible,
    FesFailed,
    GaFailed,
}

fn gap_day(
    cfg: &RunConfig,
    fes: &FesModel,
    weights: &crate::fes::EffectiveWeights,
    template: &ScenarioTemplate,
    day: usize,
    start: NaiveDateTime,
    forecast: &[f64],
    battery: f64,
) -> Result<DayResult, FesError> {
    let scenario = template.window_at(start, forecast.to_vec(), battery)?;
    check_model_fits(fes, &scenario)?;
    let exact = match solve_exact(&scenario) {
        Ok((s, _)) => s,
        Err(e) if is_infeasible(&e) => return Ok(DayResult::ExactInfeasible),
        Err(e) => return Err(e.into()),
    };
    let fes_schedule = match decode(&weights.soft_schedule(&scenario), &scenario) {
        Ok(s) => s,
        Err(e) if is_infeasible(&e) => return Ok(DayResult::FesFailed),
        Err(e) => return Err(e.into()),
    };
    let ga = match ga_solve(&scenario, &ga_config_for_day(cfg, day)) {
        Ok(r) => r.schedule,
        Err(ScheduleError::NoFeasibleSeed(_)) => return Ok(DayResult::GaFailed),
        Err(e) => return Err(e.into()),
    };
    let schedules = vec![("fes".into(), fes_schedule), ("exact".into(), exact), ("ga".into(), ga)];
    Ok(DayResult::Scheduled(scenario, DaySchedules { day, schedules }))
}

fn write_metrics_csv(path: &Path, rows: &[MetricRow]) -> Result<(), FesError> {
    let run = || -> std::io::Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["method", "split", "count", "mse", "mae", "mape", "mape_skipped", "smape"])?;
        for r in rows {
            let m = &r.metrics;
            w.write_record([
                r.method.clone(),
                r.split.clone(),
                m.count.to_string(),
                format!("{:.6}", m.mse),
                format!("{:.6}", m.mae),
                m.mape.map_or(String::new(), |v| format!("{v:.6}")),
                m.mape_skipped.to_string(),
                format!("{:.6}", m.smape),
            ])?;
        }
        w.flush()
    };
    run().map_err(io_at(path))
}

fn write_gap_summary_csv(path: &Path, runs: &[GapRun]) -> Result<(), FesError> {
    let run = || -> std::io::Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record([
            "battery_fraction",
            "method",
            "days",
            "mean_abs",
            "mean_pct",
            "median_pct",
            "q1_pct",
            "q3_pct",
            "max_pct",
            "test_days",
            "exact_infeasible",
            "fes_failed",
            "ga_failed",
        ])?;
        for g in runs {
            for s in &g.report.summary {
                w.write_record([
                    format!("{}", g.battery_fraction),
                    s.method.clone(),
                    s.days.to_string(),
                    format!("{:.9}", s.mean_abs),
                    format!("{:.6}", s.mean_pct),
                    format!("{:.6}", s.median_pct),
                    format!("{:.6}", s.q1_pct),
                    format!("{:.6}", s.q3_pct),
                    format!("{:.6}", s.max_pct),
                    g.test_days.to_string(),
                    g.exact_infeasible.to_string(),
                    g.fes_failed.to_string(),
                    g.ga_failed.to_string(),
                ])?;
            }
        }
        w.flush()
    };
    run().map_err(io_at(path))
}

/// File name of the per-day gap CSV of one battery level.
pub fn gap_file_name(fraction: f64) -> String {
    format!("cost_gap_b{:03}.csv", (fraction * 100.0).round() as i64)
}

/// Forecast metrics of rTPNN and the baselines on both splits, and the cost
/// gaps of decoded and GA schedules against the exact optimum on every test
/// day, for each configured initial battery level.
pub fn cmd_evaluate(cfg: &RunConfig, out_dir: &Path) -> Result<EvalSummary, FesError> {
    ensure_dir(out_dir)?;
    let fes = load_fes(cfg, out_dir)?;
    cfg.write_resolved(out_dir)?;
    let ds = load_dataset(cfg)?;
    let forecaster = &fes.forecaster;
    let baseline = |source| FesError::Training { stage: "baseline", source };

    let linreg = LinearRegression::fit(&ds.split.train).map_err(baseline)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.component_seed("mlp-init"));
    let mut mlp = MlpBaseline::new(forecaster.norm.clone(), &mut rng);
    mlp.train(&ds.split.train, cfg.eval.baseline_epochs, MLP_LEARNING_RATE, cfg.component_seed("mlp"))
        .map_err(baseline)?;

    let mut metrics = Vec::new();
    let mut test_forecasts = Vec::new();
    for (split, windows) in [("train", &ds.split.train), ("test", &ds.split.test)] {
        let actual: Vec<f64> = windows.iter().flat_map(|w| w.actual.iter().copied()).collect();
        let rtpnn = windows
            .iter()
            .map(|w| forecaster.forecast_window(&w.input))
            .collect::<Result<Vec<_>, _>>()?;
        let mlp_out = windows.iter().map(|w| mlp.predict(&w.input)).collect::<Result<Vec<_>, _>>()?;
        let methods: [(&str, Vec<f64>); 4] = [
            ("rtpnn", rtpnn.concat()),
            ("naive", windows.iter().flat_map(|w| naive_forecast(&w.input)).collect()),
            ("linreg", windows.iter().flat_map(|w| linreg.predict(&w.input)).collect()),
            ("mlp", mlp_out.concat()),
        ];
        for (method, forecast) in methods {
            metrics.push(MetricRow {
                method: method.into(),
                split: split.into(),
                metrics: forecast_metrics(&actual, &forecast, cfg.eval.exclude_nights)?,
            });
        }
        if split == "test" {
            test_forecasts = rtpnn;
        }
    }
    write_metrics_csv(&out_dir.join("forecast_metrics.csv"), &metrics)?;

    let weights = fes.effective_weights();
    let mut gaps = Vec::new();
    let days: Vec<(NaiveDateTime, &Vec<f64>)> = ds.split.test.iter().map(|w| w.start).zip(&test_forecasts).collect();
    for &fraction in &cfg.eval.battery_fractions {
        let battery = fraction * ds.template.params.battery_max;
        let results = par_map(&days, |day, (start, forecast)| {
            gap_day(cfg, &fes, &weights, &ds.template, day, *start, forecast, battery)
        });
        let (mut scenarios, mut scheduled) = (Vec::new(), Vec::new());
        let (mut exact_infeasible, mut fes_failed, mut ga_failed) = (0, 0, 0);
        for r in results {
            match r? {
                DayResult::Scheduled(s, d) => {
                    scenarios.push(s);
                    scheduled.push(d);
                }
                DayResult::ExactInfeasible => exact_infeasible += 1,
                DayResult::FesFailed => fes_failed += 1,
                DayResult::GaFailed => ga_failed += 1,
            }
        }
        let report = cost_gap(&scenarios, &scheduled)?;
        let path = out_dir.join(gap_file_name(fraction));
        report.write_rows_csv(&path).map_err(io_at(&path))?;
        gaps.push(GapRun {
            battery_fraction: fraction,
            test_days: days.len(),
            exact_infeasible,
            fes_failed,
            ga_failed,
            report,
        });
    }
    write_gap_summary_csv(&out_dir.join("gap_summary.csv"), &gaps)?;
    Ok(EvalSummary { metrics, gaps })
}

/// Aligned console table of forecast metrics.
pub fn render_metrics(rows: &[MetricRow]) -> String {
    let mut out = format!(
        "{:<8} {:<6} {:>6} {:>10} {:>10} {:>10} {:>10}\n",
        "method", "split", "count", "mse", "mae", "mape_%", "smape_%"
    );
    for r in rows {
        let m = &r.metrics;
        let mape = m.mape.map_or("-".to_string(), |v| format!("{v:.3}"));
        out.push_str(&format!(
            "{:<8} {:<6} {:>6} {:>10.4} {:>10.4} {:>10} {:>10.3}\n",
            r.method, r.split, m.count, m.mse, m.mae, mape, m.smape
        ));
    }
    out
}

/// Aligned console table of cost-gap summaries.
pub fn render_gaps(runs: &[GapRun]) -> String {
    let mut out = format!(
        "{:>6} {:<6} {:>5} {:>10} {:>10} {:>10} {:>10} {:>10}\n",
        "B/Bmax", "method", "days", "mean_%", "median_%", "q1_%", "q3_%", "max_%"
    );
    for g in runs {
        for s in &g.report.summary {
            out.push_str(&format!(
                "{:>6.2} {:<6} {:>5} {:>10.4} {:>10.4} {:>10.4} {:>10.4} {:>10.4}\n",
                g.battery_fraction, s.method, s.days, s.mean_pct, s.median_pct, s.q1_pct, s.q3_pct, s.max_pct
            ));
        }
        out.push_str(&format!(
            "{:>6.2} skipped: {} infeasible, {} fes failures, {} ga failures of {} days\n",
            g.battery_fraction, g.exact_infeasible, g.fes_failed, g.ga_failed, g.test_days
        ));
    }
    out
}

/// Times forecast plus schedule per window for every method on the first
/// feasible test windows. Model loading and weight transforms stay outside
/// the timed section.
pub fn cmd_bench(
    cfg: &RunConfig,
    out_dir: &Path,
    windows: Option<usize>,
    repetitions: Option<usize>,
) -> Result<TimingTable, FesError> {
    ensure_dir(out_dir)?;
    let fes = load_fes(cfg, out_dir)?;
    cfg.write_resolved(out_dir)?;
    let ds = load_dataset(cfg)?;
    let want = windows.unwrap_or(cfg.eval.bench_windows);
    let repetitions = repetitions.unwrap_or(cfg.eval.bench_repetitions);
    let battery = ds.template.params.battery_initial;
    let mut chosen = Vec::new();
    for w in &ds.split.test {
        if chosen.len() == want {
            break;
        }
        let forecast = fes.forecaster.forecast_window(&w.input)?;
        let base = ds.template.window_at(w.start, forecast, battery)?;
        if solve_exact(&base).is_ok() {
            chosen.push((w, base));
        }
    }
    let weights = fes.effective_weights();
    let ga_cfg = ga_config_for_day(cfg, 0);
    let forecaster = &fes.forecaster;
    let methods: Vec<Timed<'_>> = vec![
        (
            "fes",
            Box::new(|i| {
                let (w, base) = &chosen[i];
                std::hint::black_box(fes.forecast_and_schedule(&weights, &w.input, base).ok());
            }),
        ),
        (
            "exact",
            Box::new(|i| {
                let (w, base) = &chosen[i];
                let forecast = forecaster.forecast_window(&w.input).expect("forecast succeeded before");
                let scenario = base.with_generation(forecast).expect("same shape");
                std::hint::black_box(solve_exact(&scenario).ok());
            }),
        ),
        (
            "ga",
            Box::new(|i| {
                let (w, base) = &chosen[i];
                let forecast = forecaster.forecast_window(&w.input).expect("forecast succeeded before");
                let scenario = base.with_generation(forecast).expect("same shape");
                std::hint::black_box(ga_solve(&scenario, &ga_cfg).ok());
            }),
        ),
    ];
    let table = timing_bench(methods, chosen.len(), repetitions);
    let path = out_dir.join("timing.csv");
    table.write_csv(&path).map_err(io_at(&path))?;
    Ok(table)
}
