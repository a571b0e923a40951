mod common;

use common::{random_fes, random_forecaster, random_input, random_instance, toy};
use fes_core::exact::solve_exact;
use fes_core::fes::decode;
use fes_core::ga::{ga_solve, GaConfig};
use fes_core::nn::{Gradients, Tensor};
use fes_core::rtpnn::RtpnnModel;
use fes_core::scenario::{validate, DeviceSpec, ScenarioParams, ScenarioWindow};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random window whose cost rows are finite and below the network cap.
fn finite_instance(seed: u64) -> ScenarioWindow {
    let w = random_instance(seed, 4, 8);
    let devices: Vec<DeviceSpec> = w
        .devices()
        .iter()
        .map(|d| {
            let cost = d.cost.iter().map(|c| if c.is_finite() { *c } else { 2.0 }).collect();
            DeviceSpec::new(d.name.clone(), d.power_kw, d.duration, cost)
        })
        .collect();
    w.with_devices(devices).unwrap()
}

fn fast_ga(seed: u64) -> GaConfig {
    GaConfig {
        initial_samples: 500,
        population: 20,
        generations: 40,
        offspring: 20,
        seed,
        ..GaConfig::default()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn soft_rows_are_distributions(seed in any::<u64>(), spread in 0.1f64..6.0) {
        let w = random_instance(seed, 4, 8);
        let m = random_fes(seed ^ 1, &w, spread);
        for row in m.soft_schedule(&w).unwrap().rows {
            let sum: f64 = row.iter().sum();
            prop_assert!((sum - 1.0).abs() <= 1e-9, "row sum {sum}");
            prop_assert!(row.iter().all(|&x| x > 0.0 && x <= 1.0));
        }
    }

    #[test]
    fn effective_weights_are_positive(seed in any::<u64>(), spread in 0.1f64..30.0) {
        let w = random_instance(seed, 4, 8);
        let m = random_fes(seed, &w, spread);
        for row in m.effective_weights().weights {
            for sw in row {
                let all = [sw.gen, sw.battery, sw.cost, sw.power, sw.inverter, sw.capacity];
                prop_assert!(all.iter().all(|&x| x > 0.0), "{sw:?}");
            }
        }
    }

    #[test]
    fn more_forecast_never_lowers_that_slot(seed in any::<u64>(), slot in 0usize..8, bump in 1e-3f64..5.0) {
        let w = random_instance(seed, 4, 8);
        let slot = slot % w.slots();
        let m = random_fes(seed ^ 2, &w, 3.0);
        let before = m.soft_schedule(&w).unwrap();
        let mut gen = w.generation().to_vec();
        gen[slot] += bump;
        let after = m.soft_schedule(&w.with_generation(gen).unwrap()).unwrap();
        for (b, a) in before.rows.iter().zip(&after.rows) {
            // One rounding step of slack.
            prop_assert!(a[slot] >= b[slot] * (1.0 - 4.0 * f64::EPSILON), "{} -> {}", b[slot], a[slot]);
        }
    }

    #[test]
    fn cost_shift_leaves_rows_unchanged(seed in any::<u64>(), device in 0usize..4, shift in 0.0f64..50.0) {
        let w = finite_instance(seed);
        let device = device % w.num_devices();
        let mut m = random_fes(seed ^ 3, &w, 3.0);
        // Weights are per slot, so a shift cancels only when the cost weight
        // is uniform along the row.
        let slots = w.slots();
        let row = &mut m.store.get_mut("w_cost").unwrap().data_mut()[device * slots..(device + 1) * slots];
        let first = row[0];
        row.fill(first);
        let before = m.soft_schedule(&w).unwrap();
        let mut devices = w.devices().to_vec();
        devices[device].cost.iter_mut().for_each(|c| *c += shift);
        let shifted = w.with_devices(devices).unwrap();
        let after = m.soft_schedule(&shifted).unwrap();
        for (x, y) in before.rows[device].iter().zip(&after.rows[device]) {
            prop_assert!((x - y).abs() <= 1e-9, "{x} vs {y}");
        }
        prop_assert_eq!(decode(&before, &w).ok(), decode(&after, &shifted).ok());
    }

    #[test]
    fn decoded_schedules_validate(seed in any::<u64>()) {
        let w = random_instance(seed, 4, 8);
        let m = random_fes(seed ^ 4, &w, 3.0);
        if let Ok(s) = decode(&m.soft_schedule(&w).unwrap(), &w) {
            prop_assert!(validate(&s, &w).is_empty());
        }
    }

    #[test]
    fn exact_schedules_validate(seed in any::<u64>()) {
        let w = random_instance(seed, 5, 10);
        if let Ok((s, obj)) = solve_exact(&w) {
            prop_assert!(validate(&s, &w).is_empty());
            prop_assert!((w.objective(s.starts()) - obj).abs() <= 1e-12);
        }
    }

    #[test]
    fn relaxing_capacity_never_raises_the_optimum(seed in any::<u64>(), extra_theta in 0.0f64..3.0, extra_b in 0.0f64..1.0) {
        let w = random_instance(seed, 4, 8);
        let Ok((_, base)) = solve_exact(&w) else { return Ok(()) };
        let mut p: ScenarioParams = w.params().clone();
        p.inverter_limit += extra_theta;
        p.battery_initial += extra_b * (p.battery_max - p.battery_initial);
        let relaxed = w.with_params(p).unwrap();
        let (_, obj) = solve_exact(&relaxed).expect("relaxation stays feasible");
        prop_assert!(obj <= base + 1e-12, "{obj} > {base}");
    }

    #[test]
    fn scaling_costs_keeps_the_argmin(seed in any::<u64>(), k in prop_oneof![Just(0.5f64), Just(2.0), Just(4.0), Just(0.25)]) {
        let w = random_instance(seed, 4, 8);
        let Ok((s, obj)) = solve_exact(&w) else { return Ok(()) };
        let devices: Vec<DeviceSpec> = w
            .devices()
            .iter()
            .map(|d| {
                let mut d = d.clone();
                d.cost.iter_mut().for_each(|c| *c *= k);
                d
            })
            .collect();
        let (t, scaled) = solve_exact(&w.with_devices(devices).unwrap()).unwrap();
        prop_assert_eq!(s, t);
        prop_assert!((scaled - k * obj).abs() <= 1e-9 * obj.abs().max(1.0));
    }

    #[test]
    fn ga_is_feasible_elitist_and_bounded_by_exact(seed in any::<u64>()) {
        let w = random_instance(seed, 4, 8);
        let Ok((_, best)) = solve_exact(&w) else { return Ok(()) };
        let Ok(r) = ga_solve(&w, &fast_ga(seed)) else { return Ok(()) };
        prop_assert!(validate(&r.schedule, &w).is_empty());
        prop_assert!(r.history.windows(2).all(|p| p[1] <= p[0]));
        prop_assert_eq!(*r.history.last().unwrap(), r.objective);
        prop_assert!(r.objective >= best - 1e-12);
    }

    #[test]
    fn checkpoints_round_trip(seed in any::<u64>(), units in 1usize..5, slots in 1usize..8) {
        let m = random_forecaster(seed, slots, units);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.ckpt");
        m.save(&path).unwrap();
        let back = RtpnnModel::load(&path).unwrap();
        let x = random_input(seed ^ 5, slots, units);
        prop_assert_eq!(m.forecast_window(&x).unwrap(), back.forecast_window(&x).unwrap());
        prop_assert_eq!(m.checksum(), back.checksum());
    }

    #[test]
    fn adam_is_deterministic_and_still_at_zero_gradient(seed in any::<u64>(), steps in 1usize..30) {
        let m = random_forecaster(seed, 3, 2);
        let x = random_input(seed ^ 6, 3, 2);
        let actual = [0.1, 0.5, 0.9];
        let run = || {
            let mut m = m.clone();
            for _ in 0..steps {
                let (_, g) = m.window_loss_grad(&x, &actual).unwrap();
                m.store.adam_step(&g, 1e-2).unwrap();
            }
            m
        };
        let (a, b) = (run(), run());
        prop_assert_eq!(&a.store, &b.store);

        // From fresh moments; warm moments keep moving on momentum alone.
        let mut still = a.clone();
        still.store.reset_optimizer();
        let zeros: Gradients = a.store.iter().map(|(n, t)| (n.to_string(), Tensor::zeros(t.shape()))).collect();
        still.store.adam_step(&zeros, 1e-2).unwrap();
        for ((_, x), (_, y)) in a.store.iter().zip(still.store.iter()) {
            prop_assert_eq!(x.data(), y.data());
        }
    }
}

#[test]
fn ga_reaches_the_toy_optimum_on_almost_every_seed() {
    let w = toy();
    let (_, best) = solve_exact(&w).unwrap();
    let hits = (0..100u64)
        .filter(|&seed| {
            let r = ga_solve(&w, &GaConfig { seed, ..GaConfig::default() }).unwrap();
            assert!(r.objective >= best);
            r.objective == best
        })
        .count();
    assert!(hits >= 95, "{hits}/100");
}

#[test]
fn forecaster_gradients_match_finite_differences_on_many_seeds() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for seed in 0..100u64 {
        let units = rng.random_range(1..=3);
        let m = random_forecaster(seed, 3, units);
        let x = random_input(seed + 1000, 3, units);
        let actual: Vec<f64> = (0..3).map(|_| rng.random()).collect();
        let worst = common::max_gradient_error(&m, &x, &actual);
        assert!(worst < 1e-4, "seed {seed}: relative error {worst}");
    }
}
