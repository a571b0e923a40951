//! Appliance descriptions in clock time and their mapping onto a window's
//! slot grid.

use std::path::Path;
use std::sync::Arc;

use chrono::NaiveDateTime;
use serde::{Deserialize, Serialize};

use super::cost::cost_profile;
use crate::error::DataError;
use crate::scenario::{DeviceSpec, ScenarioParams, ScenarioWindow, StartPreference};

const TABLE1: &str = include_str!("appliances.toml");

/// One appliance as written in a device file. Hours are clock hours
/// (0–24).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Appliance {
    pub name: String,
    pub power_kw: f64,
    pub duration_slots: usize,
    /// Desired start hour; absent means the first slot of the window.
    #[serde(default)]
    pub desired_start: Option<f64>,
    pub sigma: f64,
    #[serde(default)]
    pub earliest: Option<f64>,
    #[serde(default)]
    pub latest: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DeviceFile {
    device: Vec<Appliance>,
}

/// The reference appliance set (heater and AC listed once per daily run).
pub fn table1_appliances() -> Vec<Appliance> {
    parse_device_file(TABLE1).expect("embedded device file is valid")
}

pub fn parse_device_file(text: &str) -> Result<Vec<Appliance>, DataError> {
    let file: DeviceFile = toml::from_str(text)
        .map_err(|e| DataError::InvalidParameter(format!("device file: {e}")))?;
    Ok(file.device)
}

pub fn load_device_file(path: &Path) -> Result<Vec<Appliance>, DataError> {
    let text = std::fs::read_to_string(path).map_err(|source| DataError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_device_file(&text)
}

/// Window geometry: where slot 1 sits on the clock.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlotClock {
    pub start_hour: f64,
    pub slot_hours: f64,
    pub slots: usize,
}

impl SlotClock {
    /// Real-valued slot number (1-based) of a clock hour.
    pub fn slot_of(&self, hour: f64) -> f64 {
        (hour - self.start_hour).rem_euclid(24.0) / self.slot_hours + 1.0
    }

    fn slot_index(&self, hour: f64) -> usize {
        self.slot_of(hour).floor() as usize
    }
}

impl Appliance {
    /// Device entry for a window whose first slot starts at
    /// `clock.start_hour`.
    pub fn to_device(&self, clock: &SlotClock) -> Result<DeviceSpec, DataError> {
        let bad = |m: String| DataError::InvalidParameter(format!("{}: {m}", self.name));
        let desired = match self.desired_start {
            Some(h) => clock.slot_of(h),
            None => 1.0,
        };
        if desired > clock.slots as f64 {
            return Err(bad(format!("desired start falls outside the {}-slot window", clock.slots)));
        }
        let earliest = self.earliest.map(|h| clock.slot_index(h));
        let latest = self.latest.map(|h| clock.slot_index(h));
        if let (Some(e), Some(l)) = (earliest, latest) {
            if e > l {
                return Err(bad("earliest/latest interval wraps around the window start".into()));
            }
        }
        let pref = StartPreference {
            desired_start: desired,
            sigma: self.sigma,
            earliest,
            latest,
        };
        let cost = cost_profile(&pref, clock.slots).map_err(|e| bad(e.to_string()))?;
        Ok(DeviceSpec {
            name: self.name.clone(),
            power_kw: self.power_kw,
            duration: self.duration_slots,
            cost,
            preference: Some(pref),
        })
    }
}

/// Scenario parameters plus device set; produces one [`ScenarioWindow`] per
/// generation vector.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioTemplate {
    pub params: ScenarioParams,
    pub day_start_hour: u32,
    pub devices: Arc<[DeviceSpec]>,
}

impl ScenarioTemplate {
    pub fn from_appliances(
        params: ScenarioParams,
        day_start_hour: u32,
        appliances: &[Appliance],
    ) -> Result<Self, DataError> {
        let clock = SlotClock {
            start_hour: day_start_hour as f64,
            slot_hours: params.slot_hours(),
            slots: params.slots,
        };
        let devices = appliances
            .iter()
            .map(|a| a.to_device(&clock))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self {
            params,
            day_start_hour,
            devices: devices.into(),
        })
    }

    pub fn window(&self, generation: Vec<f64>) -> Result<ScenarioWindow, crate::error::ScheduleError> {
        ScenarioWindow::new(self.params.clone(), self.devices.clone(), generation)
    }

    pub fn window_at(
        &self,
        start: NaiveDateTime,
        generation: Vec<f64>,
        battery_initial: f64,
    ) -> Result<ScenarioWindow, crate::error::ScheduleError> {
        let mut params = self.params.clone();
        params.battery_initial = battery_initial;
        Ok(ScenarioWindow::new(params, self.devices.clone(), generation)?.with_start(start))
    }
}

pub const BATTERY_UNIT_KWH: f64 = 13.5;
pub const BATTERY_UNITS: f64 = 3.0;
pub const INVERTER_KW: f64 = 10.0;
/// Clock hour of the first slot. Windows run 06:00–06:00 so that the
/// vehicle charger (earliest start 18:00, eight hours) fits inside one window.
pub const DEFAULT_DAY_START_HOUR: u32 = 6;

/// Reference household: the embedded appliance set, three 13.5 kWh
/// batteries (full at window start), a 10 kW inverter and 24 hourly slots.
pub fn default_scenario() -> ScenarioTemplate {
    let bmax = BATTERY_UNITS * BATTERY_UNIT_KWH;
    let params = ScenarioParams {
        slots: 24,
        horizon_hours: 24.0,
        battery_initial: bmax,
        battery_max: bmax,
        inverter_limit: INVERTER_KW,
    };
    ScenarioTemplate::from_appliances(params, DEFAULT_DAY_START_HOUR, &table1_appliances())
        .expect("reference appliances map onto the default window")
}
