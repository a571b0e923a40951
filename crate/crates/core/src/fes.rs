//! Scheduling layer on top of the forecaster.
//!
//! Each device has one softmax head over the slots of the window. The score
//! of slot `s` for device `n` is
//!
//! ```text
//! w_gen·ĝ_s + w_battery·B/S − w_cost·c_ns − w_power·E_n − w_inverter·Θ − w_capacity·B_max
//! ```
//!
//! with a separate set of six weights per `(n, s)`, each the softplus of a
//! free parameter so that it stays strictly positive.

use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::NEURAL_COST_CAP;
use crate::error::{NnError, ScheduleError, TrainError};
use crate::nn::{softplus, Checkpoint, CheckpointError, Gradients, ParamStore, Tape, Tensor, Var};
use crate::rtpnn::{param_checksum, ForecastInput, RtpnnModel};
use crate::scenario::{Capacity, LoadState, ScenarioWindow, Schedule};

/// Free-parameter matrices, in score-term order.
pub const WEIGHT_NAMES: [&str; 6] = ["w_gen", "w_battery", "w_cost", "w_power", "w_inverter", "w_capacity"];

/// Positive weights of one `(device, slot)` head.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlotWeights {
    pub gen: f64,
    pub battery: f64,
    pub cost: f64,
    pub power: f64,
    pub inverter: f64,
    pub capacity: f64,
}

/// Scenario-level inputs of one device head.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeadInputs {
    pub battery_per_slot: f64,
    pub power: f64,
    pub inverter: f64,
    pub capacity: f64,
}

impl HeadInputs {
    pub fn new(scenario: &ScenarioWindow, device: usize) -> Self {
        let p = scenario.params();
        Self {
            battery_per_slot: p.battery_initial / p.slots as f64,
            power: scenario.devices()[device].power_kw,
            inverter: p.inverter_limit,
            capacity: p.battery_max,
        }
    }
}

/// Score of one slot.
pub fn slot_score(w: &SlotWeights, gen: f64, cost: f64, x: &HeadInputs) -> f64 {
    w.gen * gen + w.battery * x.battery_per_slot
        - w.cost * cost
        - w.power * x.power
        - w.inverter * x.inverter
        - w.capacity * x.capacity
}

/// Cost entry as fed to the network: infinite entries become the cap.
pub fn neural_cost(c: f64) -> f64 {
    if c.is_finite() {
        c.min(NEURAL_COST_CAP)
    } else {
        NEURAL_COST_CAP
    }
}

/// Row-wise softmax with max subtraction.
pub fn softmax(scores: &[f64]) -> Vec<f64> {
    let mut row = scores.to_vec();
    softmax_in_place(&mut row);
    row
}

pub fn softmax_in_place(row: &mut [f64]) {
    let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut z = 0.0;
    for x in row.iter_mut() {
        *x = (*x - m).exp();
        z += *x;
    }
    row.iter_mut().for_each(|x| *x /= z);
}

/// Start probabilities, one row per device.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftSchedule {
    pub rows: Vec<Vec<f64>>,
}

impl SoftSchedule {
    pub fn argmax(&self) -> Vec<usize> {
        self.rows.iter().map(|r| ranked_slots(r)[0]).collect()
    }

    /// `device_id,device_name,slot_1,…,slot_S`.
    pub fn write_csv(&self, path: &Path, scenario: &ScenarioWindow) -> std::io::Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        let mut header = vec!["device_id".to_string(), "device_name".to_string()];
        header.extend((1..=scenario.slots()).map(|s| format!("slot_{s}")));
        w.write_record(&header)?;
        for (n, (row, d)) in self.rows.iter().zip(scenario.devices()).enumerate() {
            let mut rec = vec![n.to_string(), d.name.clone()];
            rec.extend(row.iter().map(|p| format!("{p:.9e}")));
            w.write_record(&rec)?;
        }
        w.flush()
    }
}

/// Slots by descending probability, ties to the earlier slot.
fn ranked_slots(row: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..row.len()).collect();
    idx.sort_by(|&a, &b| row[b].total_cmp(&row[a]).then(a.cmp(&b)));
    idx
}

/// Effective (softplus-mapped) weights of every head.
#[derive(Debug, Clone, PartialEq)]
pub struct EffectiveWeights {
    /// `weights[n][s]`.
    pub weights: Vec<Vec<SlotWeights>>,
}

impl EffectiveWeights {
    pub fn slot_scores(&self, forecast: &[f64], scenario: &ScenarioWindow, device: usize) -> Vec<f64> {
        let x = HeadInputs::new(scenario, device);
        let cost = &scenario.devices()[device].cost;
        self.weights[device]
            .iter()
            .zip(forecast)
            .zip(cost)
            .map(|((w, &g), &c)| slot_score(w, g, neural_cost(c), &x))
            .collect()
    }

    /// Softmax heads over the generation vector carried by `scenario`.
    pub fn soft_schedule(&self, scenario: &ScenarioWindow) -> SoftSchedule {
        SoftSchedule {
            rows: (0..scenario.num_devices())
                .map(|n| {
                    let mut row = self.slot_scores(scenario.generation(), scenario, n);
                    softmax_in_place(&mut row);
                    row
                })
                .collect(),
        }
    }
}

/// Stage-2 optimizer settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Stage2Config {
    pub epochs: usize,
    pub learning_rate: f64,
    /// Windows per optimizer step.
    pub batch_size: usize,
}

impl Default for Stage2Config {
    fn default() -> Self {
        Self {
            epochs: 20,
            learning_rate: 1e-3,
            batch_size: 1,
        }
    }
}

/// One Stage-2 example: a window carrying the forecast generation and its
/// optimal schedule.
#[derive(Debug, Clone)]
pub struct Stage2Sample {
    pub scenario: ScenarioWindow,
    pub label: Schedule,
}

/// Reads a 0/1 start matrix as a training label.
pub fn label_from_matrix(matrix: &[Vec<u8>]) -> Result<Schedule, TrainError> {
    for (n, row) in matrix.iter().enumerate() {
        if row.iter().filter(|&&x| x != 0).count() != 1 || row.iter().any(|&x| x > 1) {
            return Err(TrainError::LabelNotOneHot { device: n });
        }
    }
    Schedule::from_matrix(matrix).map_err(|_| TrainError::LabelNotOneHot { device: 0 })
}

#[derive(Debug, Clone, PartialEq)]
pub struct FesModel {
    pub forecaster: RtpnnModel,
    /// `N × S` free parameters under [`WEIGHT_NAMES`].
    pub store: ParamStore,
    pub devices: usize,
}

impl FesModel {
    /// Every free parameter starts at 0 (effective weight `ln 2`).
    pub fn new(forecaster: RtpnnModel, devices: usize) -> Self {
        let slots = forecaster.slots;
        let mut store = ParamStore::new();
        for name in WEIGHT_NAMES {
            store.insert(name, Tensor::matrix(devices, slots, vec![0.0; devices * slots]));
        }
        Self {
            forecaster,
            store,
            devices,
        }
    }

    pub fn slots(&self) -> usize {
        self.forecaster.slots
    }

    pub fn effective_weights(&self) -> EffectiveWeights {
        let m: Vec<&Tensor> = WEIGHT_NAMES.iter().map(|n| self.store.expect(n)).collect();
        let weights = (0..self.devices)
            .map(|n| {
                (0..self.slots())
                    .map(|s| SlotWeights {
                        gen: softplus(m[0].get2(n, s)),
                        battery: softplus(m[1].get2(n, s)),
                        cost: softplus(m[2].get2(n, s)),
                        power: softplus(m[3].get2(n, s)),
                        inverter: softplus(m[4].get2(n, s)),
                        capacity: softplus(m[5].get2(n, s)),
                    })
                    .collect()
            })
            .collect();
        EffectiveWeights { weights }
    }

    fn check(&self, scenario: &ScenarioWindow) -> Result<(), NnError> {
        if scenario.num_devices() != self.devices || scenario.slots() != self.slots() {
            return Err(NnError::Shape {
                layer: "scheduling layer".into(),
                detail: format!(
                    "scenario has {} devices × {} slots, model {} × {}",
                    scenario.num_devices(),
                    scenario.slots(),
                    self.devices,
                    self.slots()
                ),
            });
        }
        Ok(())
    }

    pub fn slot_scores(&self, forecast: &[f64], scenario: &ScenarioWindow, device: usize) -> Vec<f64> {
        self.effective_weights().slot_scores(forecast, scenario, device)
    }

    /// Soft schedule of a window whose generation is the forecast.
    pub fn soft_schedule(&self, scenario: &ScenarioWindow) -> Result<SoftSchedule, NnError> {
        self.check(scenario)?;
        Ok(self.effective_weights().soft_schedule(scenario))
    }

    /// Forecast, soft schedule and decoded schedule of one window. The
    /// returned scenario carries the forecast generation.
    pub fn forecast_and_schedule(
        &self,
        weights: &EffectiveWeights,
        input: &ForecastInput,
        base: &ScenarioWindow,
    ) -> Result<(ScenarioWindow, SoftSchedule, Schedule), FesRunError> {
        self.check(base)?;
        let forecast = self.forecaster.forecast_window(input)?;
        let scenario = base.with_generation(forecast)?;
        let soft = weights.soft_schedule(&scenario);
        let schedule = decode(&soft, &scenario)?;
        Ok((scenario, soft, schedule))
    }

    /// Cross-entropy of one labelled window and its gradient with respect to
    /// the scheduling parameters only.
    pub fn sample_loss_grad(&self, sample: &Stage2Sample) -> Result<(f64, Gradients), NnError> {
        self.check(&sample.scenario)?;
        let scenario = &sample.scenario;
        let mut tape = Tape::new();
        let p = tape.params_from(&self.store, "");
        let pv: Vec<_> = WEIGHT_NAMES.iter().map(|n| &p[*n]).collect();
        let mut terms = Vec::with_capacity(self.devices);
        for n in 0..self.devices {
            let x = HeadInputs::new(scenario, n);
            let d = &scenario.devices()[n];
            let scores: Vec<Var> = (0..self.slots())
                .map(|s| {
                    let inputs = [
                        scenario.generation()[s],
                        x.battery_per_slot,
                        -neural_cost(d.cost[s]),
                        -x.power,
                        -x.inverter,
                        -x.capacity,
                    ];
                    let ws: Vec<Var> = pv.iter().map(|m| tape.softplus(m.at2(n, s))).collect();
                    let xs = tape.constants(&inputs);
                    tape.dot(&ws, &xs)
                })
                .collect();
            let lse = tape.log_sum_exp(&scores);
            let label = sample.label.starts()[n];
            terms.push(tape.sub(lse, scores[label]));
        }
        let loss = tape.sum(&terms);
        let value = tape.value(loss);
        Ok((value, tape.backward(loss, 1.0)?))
    }

    pub fn sample_loss(&self, sample: &Stage2Sample) -> Result<f64, NnError> {
        let soft = self.soft_schedule(&sample.scenario)?;
        Ok(soft
            .rows
            .iter()
            .zip(sample.label.starts())
            .map(|(row, &s)| -row[s].ln())
            .sum())
    }

    pub fn save(&self, path: &Path) -> Result<(), CheckpointError> {
        let mut ckpt = Checkpoint::new();
        ckpt.set_meta("kind", "fes");
        ckpt.set_meta("devices", self.devices);
        self.forecaster.write_checkpoint(&mut ckpt, "rtpnn.");
        ckpt.insert_store("fes.", &self.store);
        ckpt.save(path)
    }

    pub fn load(path: &Path) -> Result<Self, CheckpointError> {
        let ckpt = Checkpoint::load(path)?;
        if ckpt.meta("kind")? != "fes" {
            return Err(CheckpointError::Invalid(format!("{} is not a scheduling checkpoint", path.display())));
        }
        let devices: usize = ckpt.meta_parse("devices")?;
        let forecaster = RtpnnModel::read_checkpoint(&ckpt, "rtpnn.")?;
        let store = ckpt.extract_store("fes.");
        for name in WEIGHT_NAMES {
            match store.get(name) {
                Some(t) if t.shape() == [devices, forecaster.slots] => {}
                _ => return Err(CheckpointError::MissingTensor(format!("fes.{name}"))),
            }
        }
        Ok(Self {
            forecaster,
            store,
            devices,
        })
    }
}

/// Failure of the end-to-end forecast and schedule step.
#[derive(Debug, thiserror::Error)]
pub enum FesRunError {
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
}

/// Trains the scheduling heads on cross-entropy against the labels; the
/// forecaster is not touched. Returns the mean loss of every epoch.
pub fn stage2_train(
    model: &mut FesModel,
    samples: &[Stage2Sample],
    cfg: &Stage2Config,
    seed: u64,
) -> Result<Vec<f64>, TrainError> {
    if samples.is_empty() {
        return Err(TrainError::EmptyDataset);
    }
    for s in samples {
        if s.label.len() != model.devices {
            return Err(TrainError::LabelNotOneHot { device: s.label.len() });
        }
        if let Some(n) = s
            .label
            .starts()
            .iter()
            .position(|&x| x >= model.slots())
        {
            return Err(TrainError::LabelNotOneHot { device: n });
        }
    }
    let frozen = param_checksum(&model.forecaster.store);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut history = Vec::with_capacity(cfg.epochs);
    let per_batch = cfg.batch_size.max(1);
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for (batch, chunk) in order.chunks(per_batch).enumerate() {
            let mut acc: Gradients = BTreeMap::new();
            let mut loss = 0.0;
            for &i in chunk {
                let (l, g) = model.sample_loss_grad(&samples[i])?;
                loss += l;
                for (k, t) in g {
                    match acc.get_mut(&k) {
                        Some(a) => a.data_mut().iter_mut().zip(t.data()).for_each(|(x, y)| *x += y),
                        None => {
                            acc.insert(k, t);
                        }
                    }
                }
            }
            if !loss.is_finite() {
                return Err(TrainError::NanLoss { epoch, batch });
            }
            let k = 1.0 / chunk.len() as f64;
            for t in acc.values_mut() {
                t.data_mut().iter_mut().for_each(|x| *x *= k);
            }
            model.store.adam_step(&acc, cfg.learning_rate).map_err(|e| match e {
                NnError::NonFiniteGradient { .. } => TrainError::NanLoss { epoch, batch },
                other => TrainError::Nn(other),
            })?;
            total += loss;
        }
        let mean = total / samples.len() as f64;
        log::debug!("stage 2 epoch {epoch}: cross-entropy {mean:.6}");
        history.push(mean);
    }
    debug_assert_eq!(frozen, param_checksum(&model.forecaster.store));
    Ok(history)
}

/// Turns soft rows into a feasible schedule.
///
/// Devices are placed in descending order of energy `E·a` (ties by index),
/// each on its most probable admissible start that fits on the loads placed
/// so far, falling back to the next most probable one. If that greedy pass
/// strands a device, decoding restarts with a look-ahead that only accepts a
/// start when every still-unplaced device keeps at least one fitting start.
pub fn decode(soft: &SoftSchedule, scenario: &ScenarioWindow) -> Result<Schedule, ScheduleError> {
    let devices = scenario.devices();
    if soft.rows.len() != devices.len() {
        return Err(ScheduleError::InvalidScenario(format!(
            "soft schedule has {} rows for {} devices",
            soft.rows.len(),
            devices.len()
        )));
    }
    let mut order: Vec<usize> = (0..devices.len()).collect();
    order.sort_by(|&a, &b| devices[b].energy().total_cmp(&devices[a].energy()).then(a.cmp(&b)));
    match place_in_order(scenario, &order, &soft.rows, false) {
        Ok(s) => Ok(s),
        Err(_) => place_in_order(scenario, &order, &soft.rows, true),
    }
}

fn place_in_order(
    scenario: &ScenarioWindow,
    order: &[usize],
    rows: &[Vec<f64>],
    look_ahead: bool,
) -> Result<Schedule, ScheduleError> {
    let slots = scenario.slots();
    let devices = scenario.devices();
    let cap: Capacity = scenario.capacity();
    let admissible = |n: usize, s: usize| {
        let d = &devices[n];
        d.last_start(slots).is_some_and(|last| s <= last) && d.cost[s].is_finite()
    };
    let mut state = LoadState::new(slots);
    let mut trial = LoadState::new(slots);
    let mut starts = vec![0usize; devices.len()];
    let mut tried = vec![false; slots];
    for (k, &n) in order.iter().enumerate() {
        let d = &devices[n];
        let mut placed = false;
        tried.iter_mut().for_each(|t| *t = false);
        // Candidates in descending probability, ties to the earlier slot;
        // selected one at a time since the first usually fits.
        while let Some(s) = (0..slots)
            .filter(|&s| !tried[s])
            .reduce(|a, b| if rows[n][b] > rows[n][a] { b } else { a })
        {
            tried[s] = true;
            if !admissible(n, s) || !state.fits(&cap, d.power_kw, d.duration, s) {
                continue;
            }
            if look_ahead {
                trial.copy_from(&state);
                trial.place(d.power_kw, d.duration, s);
                let rest_ok = order[k + 1..].iter().all(|&m| {
                    let dm = &devices[m];
                    (0..slots).any(|t| admissible(m, t) && trial.fits(&cap, dm.power_kw, dm.duration, t))
                });
                if !rest_ok {
                    continue;
                }
            }
            state.place(d.power_kw, d.duration, s);
            starts[n] = s;
            placed = true;
            break;
        }
        if !placed {
            return Err(ScheduleError::InfeasibleDevice {
                device: n,
                name: d.name.clone(),
            });
        }
    }
    Ok(Schedule::new(starts))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::enumerate_bruteforce;
    use crate::rtpnn::{Normalization, RtpnnConfig};
    use crate::scenario::{validate, DeviceSpec, ScenarioParams};

    fn params(slots: usize, theta: f64, b: f64, bmax: f64) -> ScenarioParams {
        ScenarioParams {
            slots,
            horizon_hours: slots as f64,
            battery_initial: b,
            battery_max: bmax,
            inverter_limit: theta,
        }
    }

    fn forecaster(slots: usize) -> RtpnnModel {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        RtpnnModel::new(slots, Normalization::identity(1), RtpnnConfig::default(), &mut rng)
    }

    fn unit_weights() -> SlotWeights {
        SlotWeights {
            gen: 1.0,
            battery: 1.0,
            cost: 1.0,
            power: 1.0,
            inverter: 1.0,
            capacity: 1.0,
        }
    }

    #[test]
    fn score_example() {
        let d = DeviceSpec::new("d", 1.0, 1, vec![0.0, 0.0]);
        let w = ScenarioWindow::new(params(2, 1.0, 0.0, 1.0), vec![d], vec![5.0, 0.0]).unwrap();
        let ew = EffectiveWeights {
            weights: vec![vec![unit_weights(); 2]],
        };
        assert_eq!(ew.slot_scores(&[5.0, 0.0], &w, 0), vec![2.0, -3.0]);
    }

    #[test]
    fn softmax_uniform_and_shift() {
        assert_eq!(softmax(&[3.0; 4]), vec![0.25; 4]);
        let a = softmax(&[0.1, 2.0, -1.0]);
        let b = softmax(&[100.1, 102.0, 99.0]);
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn capped_cost_is_suppressed() {
        let mut w = unit_weights();
        w.cost = 0.1;
        let x = HeadInputs {
            battery_per_slot: 1.0,
            power: 1.0,
            inverter: 10.0,
            capacity: 40.5,
        };
        let row = softmax(&[slot_score(&w, 3.0, 0.0, &x), slot_score(&w, 3.0, neural_cost(f64::INFINITY), &x)]);
        assert!(row[1] / row[0] < 1e-3);
    }

    #[test]
    fn fresh_weights_are_positive() {
        let m = FesModel::new(forecaster(4), 3);
        let ew = m.effective_weights();
        assert!(ew.weights.iter().flatten().all(|w| w.gen > 0.0 && w.capacity > 0.0));
    }

    #[test]
    fn decode_one_hot_feasible_is_identity() {
        let d = DeviceSpec::new("d", 1.0, 1, vec![0.0; 4]);
        let w = ScenarioWindow::new(params(4, 5.0, 5.0, 5.0), vec![d.clone(), d], vec![1.0; 4]).unwrap();
        let soft = SoftSchedule {
            rows: vec![vec![0.0, 0.0, 1.0, 0.0], vec![1.0, 0.0, 0.0, 0.0]],
        };
        assert_eq!(decode(&soft, &w).unwrap().starts(), &[2, 0]);
    }

    #[test]
    fn decode_falls_back_to_second_choice() {
        let d = DeviceSpec::new("d", 1.0, 1, vec![0.0, 1.0, 2.0, 3.0]);
        let w = ScenarioWindow::new(params(4, 1.0, 0.0, 10.0), vec![d.clone(), d], vec![1.0, 1.0, 0.0, 0.0]).unwrap();
        let soft = SoftSchedule {
            rows: vec![vec![0.7, 0.2, 0.05, 0.05], vec![0.7, 0.2, 0.05, 0.05]],
        };
        let s = decode(&soft, &w).unwrap();
        assert_eq!(s.starts(), &[0, 1]);
        assert!(validate(&s, &w).is_empty());
        let (best, obj) = enumerate_bruteforce(&w, 100).unwrap();
        assert_eq!(best, s);
        assert_eq!(w.objective(s.starts()), obj);
    }

    #[test]
    fn decode_reports_overloaded_device() {
        let d = DeviceSpec::new("big", 2.0, 1, vec![0.0, 0.0]);
        let w = ScenarioWindow::new(params(2, 1.0, 5.0, 5.0), vec![d], vec![1.0; 2]).unwrap();
        let soft = SoftSchedule {
            rows: vec![vec![0.5, 0.5]],
        };
        assert!(matches!(decode(&soft, &w), Err(ScheduleError::InfeasibleDevice { device: 0, .. })));
    }

    #[test]
    fn stage2_learns_single_device_label() {
        let d = DeviceSpec::new("d", 1.0, 1, vec![0.3, 0.1, 0.9, 0.5]);
        let w = ScenarioWindow::new(params(4, 5.0, 5.0, 5.0), vec![d], vec![2.0, 0.0, 1.0, 3.0]).unwrap();
        let (label, _) = enumerate_bruteforce(&w, 100).unwrap();
        let mut m = FesModel::new(forecaster(4), 1);
        let before = m.forecaster.checksum();
        let sample = Stage2Sample {
            scenario: w.clone(),
            label: label.clone(),
        };
        let cfg = Stage2Config {
            epochs: 200,
            learning_rate: 0.05,
            batch_size: 1,
        };
        let hist = stage2_train(&mut m, std::slice::from_ref(&sample), &cfg, 1).unwrap();
        assert!(hist[..5].windows(2).all(|p| p[1] < p[0]));
        assert_eq!(m.soft_schedule(&w).unwrap().argmax(), label.starts());
        assert_eq!(before, m.forecaster.checksum());
    }

    #[test]
    fn stage2_gradient_matches_finite_differences() {
        let d0 = DeviceSpec::new("a", 1.0, 1, vec![0.3, 0.1, f64::INFINITY]);
        let d1 = DeviceSpec::new("b", 2.0, 2, vec![0.2, 0.4, 0.6]);
        let w = ScenarioWindow::new(params(3, 5.0, 2.0, 4.0), vec![d0, d1], vec![0.5, 1.5, 0.2]).unwrap();
        let mut m = FesModel::new(forecaster(3), 2);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for name in WEIGHT_NAMES {
            for x in m.store.get_mut(name).unwrap().data_mut() {
                *x = rand::Rng::random_range(&mut rng, -1.0..1.0);
            }
        }
        let sample = Stage2Sample {
            scenario: w,
            label: Schedule::new(vec![1, 0]),
        };
        let (l, g) = m.sample_loss_grad(&sample).unwrap();
        assert!((l - m.sample_loss(&sample).unwrap()).abs() < 1e-9);
        let h = 1e-6;
        for name in WEIGHT_NAMES {
            for i in 0..6 {
                let mut a = m.clone();
                a.store.get_mut(name).unwrap().data_mut()[i] += h;
                let mut b = m.clone();
                b.store.get_mut(name).unwrap().data_mut()[i] -= h;
                let fd = (a.sample_loss(&sample).unwrap() - b.sample_loss(&sample).unwrap()) / (2.0 * h);
                let an = g[name].data()[i];
                assert!((an - fd).abs() <= 1e-5 * an.abs().max(fd.abs()).max(1e-3), "{name}[{i}] {an} vs {fd}");
            }
        }
    }

    #[test]
    fn labels_must_be_one_hot() {
        assert!(label_from_matrix(&[vec![0, 1, 0]]).is_ok());
        assert!(matches!(
            label_from_matrix(&[vec![0, 1, 0], vec![1, 1, 0]]),
            Err(TrainError::LabelNotOneHot { device: 1 })
        ));
        assert!(label_from_matrix(&[vec![0, 0, 0]]).is_err());
    }

    #[test]
    fn checkpoint_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mut m = FesModel::new(forecaster(4), 2);
        m.store.get_mut("w_cost").unwrap().data_mut()[3] = 0.123456789;
        let path = dir.path().join("fes.ckpt");
        m.save(&path).unwrap();
        let back = FesModel::load(&path).unwrap();
        assert_eq!(back, m);
    }
}
