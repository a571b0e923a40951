//! Scheduling window, devices, schedules and the constraint checker.
//!
//! Slots are 0-based in code; the public slot *numbers* used in device files
//! and reports are 1-based.

use std::fmt;
use std::sync::Arc;

use chrono::{Duration, NaiveDateTime};
use serde::{Deserialize, Serialize};

use crate::error::ScheduleError;

/// Relative slack used by every capacity comparison.
pub const CAPACITY_TOL: f64 = 1e-9;

fn within(value: f64, limit: f64) -> bool {
    value <= limit + CAPACITY_TOL * limit.abs().max(1.0)
}

/// Gaussian start-time preference from which a cost row is derived.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StartPreference {
    /// Desired start slot number (1-based).
    pub desired_start: f64,
    pub sigma: f64,
    /// Earliest allowed start slot number (1-based, inclusive).
    pub earliest: Option<usize>,
    /// Latest allowed start slot number (1-based, inclusive).
    pub latest: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceSpec {
    pub name: String,
    /// Constant draw per active slot, kW.
    pub power_kw: f64,
    /// Number of consecutive active slots.
    pub duration: usize,
    /// Dissatisfaction cost of starting at each slot; `f64::INFINITY` marks a
    /// forbidden start.
    pub cost: Vec<f64>,
    pub preference: Option<StartPreference>,
}

impl DeviceSpec {
    pub fn new(name: impl Into<String>, power_kw: f64, duration: usize, cost: Vec<f64>) -> Self {
        Self {
            name: name.into(),
            power_kw,
            duration,
            cost,
            preference: None,
        }
    }

    /// Last admissible 0-based start index for a window of `slots`.
    pub fn last_start(&self, slots: usize) -> Option<usize> {
        slots.checked_sub(self.duration)
    }

    /// 0-based starts that fit in the window and have finite cost,
    /// ascending.
    pub fn admissible_starts(&self, slots: usize) -> Vec<usize> {
        match self.last_start(slots) {
            Some(last) => (0..=last).filter(|&s| self.cost[s].is_finite()).collect(),
            None => Vec::new(),
        }
    }

    /// Total energy drawn over one run, kWh per slot-unit.
    pub fn energy(&self) -> f64 {
        self.power_kw * self.duration as f64
    }
}

/// Battery, inverter and slot-grid parameters shared by every window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioParams {
    pub slots: usize,
    pub horizon_hours: f64,
    /// Stored energy at the window start, kWh.
    pub battery_initial: f64,
    pub battery_max: f64,
    /// Inverter supply limit, kW.
    pub inverter_limit: f64,
}

impl ScenarioParams {
    pub fn slot_hours(&self) -> f64 {
        self.horizon_hours / self.slots as f64
    }
}

/// One scheduling window.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioWindow {
    params: ScenarioParams,
    start: Option<NaiveDateTime>,
    generation: Vec<f64>,
    devices: Arc<[DeviceSpec]>,
}

impl ScenarioWindow {
    pub fn new(
        params: ScenarioParams,
        devices: impl Into<Arc<[DeviceSpec]>>,
        generation: Vec<f64>,
    ) -> Result<Self, ScheduleError> {
        let devices = devices.into();
        let bad = |m: String| Err(ScheduleError::InvalidScenario(m));
        let p = &params;
        if p.slots == 0 {
            return bad("slot count must be at least 1".into());
        }
        if !(p.horizon_hours > 0.0 && p.horizon_hours.is_finite()) {
            return bad(format!("horizon must be positive, got {}", p.horizon_hours));
        }
        if !(p.battery_max >= 0.0 && p.battery_max.is_finite()) {
            return bad(format!("battery capacity must be non-negative, got {}", p.battery_max));
        }
        if !(p.battery_initial >= 0.0 && p.battery_initial <= p.battery_max) {
            return bad(format!(
                "initial battery {} outside [0, {}]",
                p.battery_initial, p.battery_max
            ));
        }
        if !(p.inverter_limit >= 0.0 && p.inverter_limit.is_finite()) {
            return bad(format!("inverter limit must be non-negative, got {}", p.inverter_limit));
        }
        if generation.len() != p.slots {
            return bad(format!(
                "generation has {} values for {} slots",
                generation.len(),
                p.slots
            ));
        }
        if let Some(g) = generation.iter().find(|g| !(g.is_finite() && **g >= 0.0)) {
            return bad(format!("generation must be finite and non-negative, got {g}"));
        }
        for (i, d) in devices.iter().enumerate() {
            if d.duration == 0 || d.duration > p.slots {
                return bad(format!("device {i} duration {} outside [1, {}]", d.duration, p.slots));
            }
            if !(d.power_kw > 0.0 && d.power_kw.is_finite()) {
                return bad(format!("device {i} power must be positive, got {}", d.power_kw));
            }
            if d.cost.len() != p.slots {
                return bad(format!("device {i} cost row has {} entries", d.cost.len()));
            }
            if d.cost.iter().any(|c| c.is_nan() || *c < 0.0) {
                return bad(format!("device {i} cost row has negative or NaN entries"));
            }
        }
        Ok(Self {
            params,
            start: None,
            generation,
            devices,
        })
    }

    pub fn with_start(mut self, start: NaiveDateTime) -> Self {
        self.start = Some(start);
        self
    }

    /// Copy of this window with another generation vector (e.g. actual
    /// instead of forecast).
    pub fn with_generation(&self, generation: Vec<f64>) -> Result<Self, ScheduleError> {
        let mut w = ScenarioWindow::new(self.params.clone(), self.devices.clone(), generation)?;
        w.start = self.start;
        Ok(w)
    }

    pub fn with_params(&self, params: ScenarioParams) -> Result<Self, ScheduleError> {
        let mut w = ScenarioWindow::new(params, self.devices.clone(), self.generation.clone())?;
        w.start = self.start;
        Ok(w)
    }

    pub fn with_devices(&self, devices: Vec<DeviceSpec>) -> Result<Self, ScheduleError> {
        let mut w = ScenarioWindow::new(self.params.clone(), devices, self.generation.clone())?;
        w.start = self.start;
        Ok(w)
    }

    pub fn params(&self) -> &ScenarioParams {
        &self.params
    }

    pub fn slots(&self) -> usize {
        self.params.slots
    }

    pub fn generation(&self) -> &[f64] {
        &self.generation
    }

    pub fn devices(&self) -> &[DeviceSpec] {
        &self.devices
    }

    pub fn shared_devices(&self) -> Arc<[DeviceSpec]> {
        self.devices.clone()
    }

    pub fn num_devices(&self) -> usize {
        self.devices.len()
    }

    pub fn start(&self) -> Option<NaiveDateTime> {
        self.start
    }

    /// Start time of 0-based slot `s`, when the window is anchored.
    pub fn slot_time(&self, s: usize) -> Option<NaiveDateTime> {
        let secs = (self.params.slot_hours() * 3600.0 * s as f64).round() as i64;
        self.start.map(|t| t + Duration::seconds(secs))
    }

    pub fn capacity(&self) -> Capacity {
        Capacity::new(self)
    }

    /// Sum of the cost entries selected by `starts`, accumulated in device
    /// order. Every solver reports this exact value.
    pub fn objective(&self, starts: &[usize]) -> f64 {
        self.devices
            .iter()
            .zip(starts)
            .fold(0.0, |acc, (d, &s)| acc + d.cost[s])
    }
}

/// Per-slot capacities derived from a window: instantaneous limit
/// `min(Θ, g + B_max)` and cumulative energy `B + Σ g`.
#[derive(Debug, Clone)]
pub struct Capacity {
    inverter: f64,
    storage: Vec<f64>,
    cumulative: Vec<f64>,
}

impl Capacity {
    fn new(w: &ScenarioWindow) -> Self {
        let p = &w.params;
        let storage = w.generation.iter().map(|g| g + p.battery_max).collect();
        let mut acc = p.battery_initial;
        let cumulative = w
            .generation
            .iter()
            .map(|g| {
                acc += g;
                acc
            })
            .collect();
        Self {
            inverter: p.inverter_limit,
            storage,
            cumulative,
        }
    }

    pub fn slots(&self) -> usize {
        self.storage.len()
    }

    /// Instantaneous load limit of slot `s`.
    pub fn slot_limit(&self, s: usize) -> f64 {
        self.inverter.min(self.storage[s])
    }

    /// Energy available through the end of slot `s`.
    pub fn cumulative(&self, s: usize) -> f64 {
        self.cumulative[s]
    }

    /// Whether `value` is within `limit` under the shared tolerance.
    pub fn within(value: f64, limit: f64) -> bool {
        within(value, limit)
    }
}

/// Accumulated per-slot load and cumulative consumption of a partial
/// schedule.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadState {
    load: Vec<f64>,
    cum: Vec<f64>,
}

impl LoadState {
    pub fn new(slots: usize) -> Self {
        Self {
            load: vec![0.0; slots],
            cum: vec![0.0; slots],
        }
    }

    pub fn load(&self) -> &[f64] {
        &self.load
    }

    /// Consumption accumulated through each slot.
    pub fn cum(&self) -> &[f64] {
        &self.cum
    }

    pub fn reset(&mut self) {
        self.load.iter_mut().for_each(|x| *x = 0.0);
        self.cum.iter_mut().for_each(|x| *x = 0.0);
    }

    /// Whether adding a device of `power` kW running `duration` slots from
    /// `start` keeps every capacity constraint satisfied.
    pub fn fits(&self, cap: &Capacity, power: f64, duration: usize, start: usize) -> bool {
        let slots = self.load.len();
        let end = start + duration;
        if end > slots {
            return false;
        }
        for s in start..end {
            let l = self.load[s] + power;
            if !within(l, cap.inverter) || !within(l, cap.storage[s]) {
                return false;
            }
        }
        for s in start..slots {
            let active = (s - start + 1).min(duration) as f64;
            if !within(self.cum[s] + power * active, cap.cumulative[s]) {
                return false;
            }
        }
        true
    }

    pub fn place(&mut self, power: f64, duration: usize, start: usize) {
        let slots = self.load.len();
        for s in start..(start + duration).min(slots) {
            self.load[s] += power;
        }
        for s in start..slots {
            let active = (s - start + 1).min(duration) as f64;
            self.cum[s] += power * active;
        }
    }

    pub fn copy_from(&mut self, other: &LoadState) {
        self.load.copy_from_slice(&other.load);
        self.cum.copy_from_slice(&other.cum);
    }
}

/// Whether every start in `starts` can be placed together.
pub fn starts_feasible(scenario: &ScenarioWindow, starts: &[usize]) -> bool {
    let cap = scenario.capacity();
    let mut state = LoadState::new(scenario.slots());
    for (d, &s) in scenario.devices().iter().zip(starts) {
        if d.last_start(scenario.slots()).is_none_or(|last| s > last) || !d.cost[s].is_finite() {
            return false;
        }
        if !state.fits(&cap, d.power_kw, d.duration, s) {
            return false;
        }
        state.place(d.power_kw, d.duration, s);
    }
    true
}

/// Binary start assignment: one 0-based start slot per device.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Schedule {
    starts: Vec<usize>,
}

impl Schedule {
    pub fn new(starts: Vec<usize>) -> Self {
        Self { starts }
    }

    /// Reads an `N × S` 0/1 start matrix; each row must hold exactly one 1.
    pub fn from_matrix(matrix: &[Vec<u8>]) -> Result<Self, Vec<Violation>> {
        let mut starts = Vec::with_capacity(matrix.len());
        let mut violations = Vec::new();
        for (n, row) in matrix.iter().enumerate() {
            let ones: Vec<usize> = row
                .iter()
                .enumerate()
                .filter(|(_, &x)| x != 0)
                .map(|(s, _)| s)
                .collect();
            if ones.len() == 1 {
                starts.push(ones[0]);
            } else {
                violations.push(Violation::StartCount {
                    device: n,
                    count: ones.len(),
                });
            }
        }
        if violations.is_empty() {
            Ok(Self { starts })
        } else {
            Err(violations)
        }
    }

    pub fn starts(&self) -> &[usize] {
        &self.starts
    }

    pub fn len(&self) -> usize {
        self.starts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.starts.is_empty()
    }

    pub fn start_matrix(&self, slots: usize) -> Vec<Vec<u8>> {
        self.starts
            .iter()
            .map(|&s| {
                let mut row = vec![0u8; slots];
                if s < slots {
                    row[s] = 1;
                }
                row
            })
            .collect()
    }

    /// `activity[n][s]` is true iff device `n` runs during slot `s`.
    pub fn activity(&self, scenario: &ScenarioWindow) -> Vec<Vec<bool>> {
        let slots = scenario.slots();
        scenario
            .devices()
            .iter()
            .zip(&self.starts)
            .map(|(d, &st)| (0..slots).map(|s| s >= st && s < st + d.duration).collect())
            .collect()
    }

    /// Per-slot consumption `Σ_n E_n · activity(n, s)`, kW.
    pub fn consumption(&self, scenario: &ScenarioWindow) -> Vec<f64> {
        let mut out = vec![0.0; scenario.slots()];
        for (d, act) in scenario.devices().iter().zip(self.activity(scenario)) {
            for (o, a) in out.iter_mut().zip(act) {
                if a {
                    *o += d.power_kw;
                }
            }
        }
        out
    }
}

/// One violated constraint.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    /// Row of a start matrix without exactly one start.
    StartCount { device: usize, count: usize },
    /// Schedule and scenario disagree on the number of devices.
    DeviceCount { schedule: usize, scenario: usize },
    /// Start too late for the device to finish inside the window.
    BeyondHorizon { device: usize, start: usize },
    /// Start on a slot whose cost is infinite.
    ForbiddenStart { device: usize, start: usize },
    /// Slot load above the inverter limit.
    Inverter { slot: usize, load: f64, limit: f64 },
    /// Slot load above generation plus battery capacity.
    Storage { slot: usize, load: f64, limit: f64 },
    /// Cumulative consumption above initial storage plus cumulative generation.
    Cumulative { slot: usize, consumed: f64, available: f64 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::StartCount { device, count } => {
                write!(f, "device {device}: {count} starts (expected 1)")
            }
            Violation::DeviceCount { schedule, scenario } => {
                write!(f, "schedule has {schedule} devices, scenario has {scenario}")
            }
            Violation::BeyondHorizon { device, start } => {
                write!(f, "device {device}: start slot {} runs past the horizon", start + 1)
            }
            Violation::ForbiddenStart { device, start } => {
                write!(f, "device {device}: start slot {} is forbidden", start + 1)
            }
            Violation::Inverter { slot, load, limit } => {
                write!(f, "slot {}: load {load:.4} kW exceeds inverter limit {limit:.4}", slot + 1)
            }
            Violation::Storage { slot, load, limit } => {
                write!(f, "slot {}: load {load:.4} kW exceeds generation + storage {limit:.4}", slot + 1)
            }
            Violation::Cumulative {
                slot,
                consumed,
                available,
            } => write!(
                f,
                "slot {}: cumulative consumption {consumed:.4} exceeds available {available:.4}",
                slot + 1
            ),
        }
    }
}

/// Checks every constraint and returns all violations (empty when feasible).
pub fn validate(schedule: &Schedule, scenario: &ScenarioWindow) -> Vec<Violation> {
    let slots = scenario.slots();
    let devices = scenario.devices();
    let mut out = Vec::new();
    if schedule.len() != devices.len() {
        out.push(Violation::DeviceCount {
            schedule: schedule.len(),
            scenario: devices.len(),
        });
        return out;
    }
    for (n, (d, &s)) in devices.iter().zip(schedule.starts()).enumerate() {
        if d.last_start(slots).is_none_or(|last| s > last) {
            out.push(Violation::BeyondHorizon { device: n, start: s });
        } else if !d.cost[s].is_finite() {
            out.push(Violation::ForbiddenStart { device: n, start: s });
        }
    }
    let p = scenario.params();
    let load = schedule.consumption(scenario);
    let mut consumed = 0.0;
    let mut available = p.battery_initial;
    for s in 0..slots {
        let g = scenario.generation()[s];
        if !within(load[s], p.inverter_limit) {
            out.push(Violation::Inverter {
                slot: s,
                load: load[s],
                limit: p.inverter_limit,
            });
        }
        if !within(load[s], g + p.battery_max) {
            out.push(Violation::Storage {
                slot: s,
                load: load[s],
                limit: g + p.battery_max,
            });
        }
        consumed += load[s];
        available += g;
        if !within(consumed, available) {
            out.push(Violation::Cumulative {
                slot: s,
                consumed,
                available,
            });
        }
    }
    out
}

/// [`validate`] for a raw start matrix.
pub fn validate_matrix(matrix: &[Vec<u8>], scenario: &ScenarioWindow) -> Vec<Violation> {
    match Schedule::from_matrix(matrix) {
        Ok(s) => validate(&s, scenario),
        Err(v) => v,
    }
}

/// Writes `device_id,device_name,start_slot,start_time,duration_slots,power_kw`
/// with 1-based slot numbers. `start_time` is empty for unanchored windows.
pub fn write_schedule_csv(path: &std::path::Path, schedule: &Schedule, scenario: &ScenarioWindow) -> std::io::Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["device_id", "device_name", "start_slot", "start_time", "duration_slots", "power_kw"])?;
    for (n, (d, &s)) in scenario.devices().iter().zip(schedule.starts()).enumerate() {
        let time = scenario
            .slot_time(s)
            .map(|t| t.format("%Y-%m-%dT%H:%M:%S").to_string())
            .unwrap_or_default();
        w.write_record([
            n.to_string(),
            d.name.clone(),
            (s + 1).to_string(),
            time,
            d.duration.to_string(),
            format!("{}", d.power_kw),
        ])?;
    }
    w.flush()
}
