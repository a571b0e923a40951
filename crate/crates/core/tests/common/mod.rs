//! Random instance generators shared by the integration tests.
#![allow(dead_code)]

use chrono::{Duration, NaiveDate};
use fes_core::fes::{FesModel, WEIGHT_NAMES};
use fes_core::rtpnn::{ForecastInput, Normalization, RtpnnConfig, RtpnnModel};
use fes_core::scenario::{DeviceSpec, ScenarioParams, ScenarioWindow};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Small random window: up to `max_devices` devices over at most
/// `max_slots` slots, with random capacities and occasional forbidden
/// starts. Costs are drawn from a coarse grid so ties are common.
pub fn random_instance(seed: u64, max_devices: usize, max_slots: usize) -> ScenarioWindow {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let slots = rng.random_range(1..=max_slots);
    let n = rng.random_range(1..=max_devices);
    let devices: Vec<DeviceSpec> = (0..n)
        .map(|i| {
            let duration = rng.random_range(1..=slots.min(3));
            let power = rng.random_range(1..=6) as f64 * 0.5;
            let cost = (0..slots)
                .map(|_| {
                    if rng.random_bool(0.1) {
                        f64::INFINITY
                    } else {
                        rng.random_range(0..8) as f64 * 0.125
                    }
                })
                .collect();
            DeviceSpec::new(format!("d{i}"), power, duration, cost)
        })
        .collect();
    let battery_max = rng.random_range(0.0..8.0);
    let params = ScenarioParams {
        slots,
        horizon_hours: slots as f64,
        battery_initial: rng.random_range(0.0..=1.0) * battery_max,
        battery_max,
        inverter_limit: rng.random_range(0.5..6.0),
    };
    let generation = (0..slots).map(|_| rng.random_range(0.0..4.0)).collect();
    ScenarioWindow::new(params, devices, generation).expect("generated window is valid")
}

/// Two one-slot devices, both preferring slot 0, with an inverter that
/// admits only one of them at a time. The optimum costs 1.
pub fn toy() -> ScenarioWindow {
    let cost = vec![0.0, 1.0, 2.0, 3.0];
    let devices = vec![
        DeviceSpec::new("first", 1.0, 1, cost.clone()),
        DeviceSpec::new("second", 1.0, 1, cost),
    ];
    let params = ScenarioParams {
        slots: 4,
        horizon_hours: 4.0,
        battery_initial: 0.0,
        battery_max: 10.0,
        inverter_limit: 1.0,
    };
    ScenarioWindow::new(params, devices, vec![1.0, 1.0, 0.0, 0.0]).unwrap()
}

/// Forecaster with random dense weights over `units` series.
pub fn random_forecaster(seed: u64, slots: usize, units: usize) -> RtpnnModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut m = RtpnnModel::new(slots, Normalization::identity(units), RtpnnConfig::default(), &mut rng);
    let names: Vec<String> = m.store.names().map(str::to_string).collect();
    for name in names {
        for x in m.store.get_mut(&name).unwrap().data_mut() {
            *x = rng.random_range(-1.0..1.0);
        }
    }
    m
}

/// Random lagged input in the normalized range.
pub fn random_input(seed: u64, slots: usize, units: usize) -> ForecastInput {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let t0 = NaiveDate::from_ymd_opt(2021, 3, 1).unwrap().and_hms_opt(6, 0, 0).unwrap();
    ForecastInput {
        timestamps: (0..slots).map(|s| t0 + Duration::hours(s as i64)).collect(),
        lags: (0..slots)
            .map(|_| (0..units).map(|_| (rng.random::<f64>(), rng.random::<f64>())).collect())
            .collect(),
    }
}

/// Scheduling layer sized for `scenario` with free parameters drawn from
/// `±spread`.
pub fn random_fes(seed: u64, scenario: &ScenarioWindow, spread: f64) -> FesModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut m = FesModel::new(random_forecaster(seed, scenario.slots(), 1), scenario.num_devices());
    for name in WEIGHT_NAMES {
        for x in m.store.get_mut(name).unwrap().data_mut() {
            *x = rng.random_range(-spread..spread);
        }
    }
    m
}

/// Largest relative gap between analytic and central-difference gradients
/// of the window loss over every parameter scalar. Gradients below 1e-6
/// are compared on that floor, where the difference quotient is mostly
/// rounding noise.
pub fn max_gradient_error(m: &RtpnnModel, x: &ForecastInput, actual: &[f64]) -> f64 {
    let (_, grads) = m.window_loss_grad(x, actual).unwrap();
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for (name, t) in m.store.iter() {
        for i in 0..t.len() {
            let mut plus = m.clone();
            plus.store.get_mut(name).unwrap().data_mut()[i] += h;
            let mut minus = m.clone();
            minus.store.get_mut(name).unwrap().data_mut()[i] -= h;
            let fd = (plus.window_loss(x, actual).unwrap() - minus.window_loss(x, actual).unwrap()) / (2.0 * h);
            let an = grads[name].data()[i];
            worst = worst.max((an - fd).abs() / an.abs().max(fd.abs()).max(1e-6));
        }
    }
    worst
}
