//! Run configuration, seed forking and standalone scenario files.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::{
    load_device_file, table1_appliances, Appliance, LagSpec, ScenarioTemplate, SplitSpec,
    SyntheticConfig, BATTERY_UNITS, BATTERY_UNIT_KWH, INVERTER_KW,
};
use crate::error::FesError;
use crate::fes::Stage2Config;
use crate::ga::GaConfig;
use crate::rtpnn::{RtpnnConfig, Stage1Config};
use crate::scenario::{DeviceSpec, ScenarioParams, ScenarioWindow};

pub const RESOLVED_CONFIG_FILE: &str = "config.resolved.toml";

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsConfig {
    /// `timestamp,gen_kw`; synthetic data is used when absent.
    pub generation_csv: Option<PathBuf>,
    /// `timestamp,<features...>`; required with `generation_csv`.
    pub weather_csv: Option<PathBuf>,
    /// Appliance file; the reference household when absent.
    pub device_file: Option<PathBuf>,
    /// Where checkpoints are written and read; the output directory when
    /// absent.
    pub checkpoint_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    /// Weather columns to keep, in order; all of them when absent.
    pub features: Option<Vec<String>>,
    pub synthetic: SyntheticConfig,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            features: None,
            // Enough days for the default split.
            synthetic: SyntheticConfig {
                days: 664,
                ..SyntheticConfig::default()
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    /// Initial battery charge as a fraction of capacity.
    pub battery_fraction: f64,
    pub battery_max_kwh: f64,
    pub inverter_limit_kw: f64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            battery_fraction: 1.0,
            battery_max_kwh: BATTERY_UNITS * BATTERY_UNIT_KWH,
            inverter_limit_kw: INVERTER_KW,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    /// Drop slots with zero actual generation from the forecast metrics.
    pub exclude_nights: bool,
    /// Initial battery fractions swept by the cost-gap analysis.
    pub battery_fractions: Vec<f64>,
    /// Training epochs of the MLP baseline.
    pub baseline_epochs: usize,
    /// Test windows timed by `bench`.
    pub bench_windows: usize,
    pub bench_repetitions: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            exclude_nights: true,
            battery_fractions: vec![0.25, 0.5, 1.0],
            baseline_epochs: 40,
            bench_windows: 10,
            bench_repetitions: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub paths: PathsConfig,
    pub data: DataConfig,
    pub split: SplitSpec,
    pub lags: LagSpec,
    pub rtpnn: RtpnnConfig,
    pub stage1: Stage1Config,
    pub stage2: Stage2Config,
    pub ga: GaConfig,
    pub scenario: ScenarioConfig,
    pub eval: EvalConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 42,
            paths: PathsConfig::default(),
            data: DataConfig::default(),
            split: SplitSpec::default(),
            lags: LagSpec::default(),
            rtpnn: RtpnnConfig::default(),
            stage1: Stage1Config::default(),
            stage2: Stage2Config::default(),
            ga: GaConfig::default(),
            scenario: ScenarioConfig::default(),
            eval: EvalConfig::default(),
        }
    }
}

fn fraction_ok(f: f64) -> bool {
    (0.0..=1.0).contains(&f)
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, FesError> {
        let cfg: Self = toml::from_str(text).map_err(|e| FesError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, FesError> {
        let text = std::fs::read_to_string(path).map_err(|e| FesError::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            FesError::Config(m) => FesError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<(), FesError> {
        let bad = |m: String| Err(FesError::Config(m));
        if self.paths.generation_csv.is_some() != self.paths.weather_csv.is_some() {
            return bad("generation_csv and weather_csv must be given together".into());
        }
        if !fraction_ok(self.scenario.battery_fraction) {
            return bad(format!("battery_fraction {} outside [0, 1]", self.scenario.battery_fraction));
        }
        if let Some(f) = self.eval.battery_fractions.iter().find(|f| !fraction_ok(**f)) {
            return bad(format!("battery fraction {f} outside [0, 1]"));
        }
        if !(self.scenario.battery_max_kwh >= 0.0 && self.scenario.inverter_limit_kw >= 0.0) {
            return bad("battery capacity and inverter limit must be non-negative".into());
        }
        if !(self.stage1.learning_rate > 0.0 && self.stage2.learning_rate > 0.0) {
            return bad("learning rates must be positive".into());
        }
        if self.stage1.batch_size == 0 || self.stage2.batch_size == 0 {
            return bad("batch sizes must be positive".into());
        }
        if self.split.slots == 0 || self.split.slots > 24 {
            return bad(format!("window length {} outside 1..=24 slots", self.split.slots));
        }
        self.ga.validate().map_err(FesError::Config)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("run config serializes")
    }

    /// Writes the resolved configuration into `dir`.
    pub fn write_resolved(&self, dir: &Path) -> Result<PathBuf, FesError> {
        let path = dir.join(RESOLVED_CONFIG_FILE);
        std::fs::write(&path, self.to_toml()).map_err(|e| FesError::io(&path, e))?;
        Ok(path)
    }

    /// Seed of one component, derived from the run seed.
    pub fn component_seed(&self, component: &str) -> u64 {
        fork_seed(self.seed, component)
    }

    pub fn checkpoint_dir(&self, out_dir: &Path) -> PathBuf {
        self.paths.checkpoint_dir.clone().unwrap_or_else(|| out_dir.to_path_buf())
    }

    pub fn appliances(&self) -> Result<Vec<Appliance>, FesError> {
        match &self.paths.device_file {
            Some(p) => Ok(load_device_file(p)?),
            None => Ok(table1_appliances()),
        }
    }

    /// Device set and scenario parameters of every window.
    pub fn scenario_template(&self) -> Result<ScenarioTemplate, FesError> {
        let s = &self.scenario;
        let params = ScenarioParams {
            slots: self.split.slots,
            horizon_hours: self.split.slots as f64,
            battery_initial: s.battery_fraction * s.battery_max_kwh,
            battery_max: s.battery_max_kwh,
            inverter_limit: s.inverter_limit_kw,
        };
        Ok(ScenarioTemplate::from_appliances(params, self.split.day_start_hour, &self.appliances()?)?)
    }
}

/// SplitMix64 of the run seed mixed with an FNV-1a hash of the component
/// name.
pub fn fork_seed(seed: u64, component: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in component.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    let mut z = (seed ^ h).wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// One device of a scenario file: either an explicit cost row or a start
/// preference in clock hours.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioDevice {
    pub name: String,
    pub power_kw: f64,
    pub duration_slots: usize,
    /// One cost per slot; `inf` forbids a start.
    #[serde(default)]
    pub cost: Option<Vec<f64>>,
    #[serde(default)]
    pub desired_start: Option<f64>,
    #[serde(default)]
    pub sigma: Option<f64>,
    #[serde(default)]
    pub earliest: Option<f64>,
    #[serde(default)]
    pub latest: Option<f64>,
}

/// A complete scheduling instance in one file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub slots: usize,
    #[serde(default)]
    pub horizon_hours: Option<f64>,
    /// Clock hour of slot 1; used to place preference-based devices.
    #[serde(default = "default_start_hour")]
    pub day_start_hour: u32,
    pub battery_initial: f64,
    pub battery_max: f64,
    pub inverter_limit: f64,
    /// Generation per slot, kWh.
    pub generation: Vec<f64>,
    pub device: Vec<ScenarioDevice>,
}

fn default_start_hour() -> u32 {
    crate::data::DEFAULT_DAY_START_HOUR
}

impl ScenarioFile {
    pub fn load(path: &Path) -> Result<Self, FesError> {
        let text = std::fs::read_to_string(path).map_err(|e| FesError::io(path, e))?;
        toml::from_str(&text).map_err(|e| FesError::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_window(&self) -> Result<ScenarioWindow, FesError> {
        let params = ScenarioParams {
            slots: self.slots,
            horizon_hours: self.horizon_hours.unwrap_or(self.slots as f64),
            battery_initial: self.battery_initial,
            battery_max: self.battery_max,
            inverter_limit: self.inverter_limit,
        };
        let clock = crate::data::SlotClock {
            start_hour: self.day_start_hour as f64,
            slot_hours: params.slot_hours(),
            slots: self.slots,
        };
        let devices = self
            .device
            .iter()
            .map(|d| match (&d.cost, d.sigma) {
                (Some(cost), _) => Ok(DeviceSpec::new(d.name.clone(), d.power_kw, d.duration_slots, cost.clone())),
                (None, Some(sigma)) => Ok(Appliance {
                    name: d.name.clone(),
                    power_kw: d.power_kw,
                    duration_slots: d.duration_slots,
                    desired_start: d.desired_start,
                    sigma,
                    earliest: d.earliest,
                    latest: d.latest,
                }
                .to_device(&clock)?),
                (None, None) => Err(FesError::Config(format!("device `{}` needs either `cost` or `sigma`", d.name))),
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(ScenarioWindow::new(params, devices, self.generation.clone())?)
    }
}
