//! Elitist genetic algorithm over start vectors.
//!
//! A chromosome holds one start slot per device. Offspring come from
//! single-point crossover over the device index and a single-device
//! mutation; an offspring that breaks a constraint is repaired by redrawing,
//! device by device, every start that no longer fits among the starts that
//! do. Parents and offspring are pooled and the best `population` survive.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::ScheduleError;
use crate::scenario::{starts_feasible, Capacity, LoadState, ScenarioWindow, Schedule};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GaConfig {
    pub initial_samples: usize,
    pub population: usize,
    pub generations: usize,
    pub offspring: usize,
    pub mutation_probability: f64,
    /// Set by the caller; run configs derive it from the run seed.
    #[serde(skip)]
    pub seed: u64,
}

impl Default for GaConfig {
    fn default() -> Self {
        Self {
            initial_samples: 5000,
            population: 200,
            generations: 1000,
            offspring: 200,
            mutation_probability: 0.1,
            seed: 0,
        }
    }
}

impl GaConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(0.0..=1.0).contains(&self.mutation_probability) {
            return Err(format!("mutation probability {} outside [0, 1]", self.mutation_probability));
        }
        if self.population == 0 || self.initial_samples == 0 {
            return Err("population and initial sample size must be positive".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaResult {
    pub schedule: Schedule,
    pub objective: f64,
    /// Best objective after the initial sample and after every generation.
    pub history: Vec<f64>,
    /// Feasible chromosomes in the initial sample.
    pub feasible_seeds: usize,
}

#[derive(Debug, Clone, PartialEq)]
struct Individual {
    objective: f64,
    starts: Vec<usize>,
}

fn rank(a: &Individual, b: &Individual) -> std::cmp::Ordering {
    a.objective.total_cmp(&b.objective).then_with(|| a.starts.cmp(&b.starts))
}

struct Repairer<'a> {
    scenario: &'a ScenarioWindow,
    cap: Capacity,
    domains: Vec<Vec<usize>>,
    state: LoadState,
    fitting: Vec<usize>,
}

impl Repairer<'_> {
    /// Makes `starts` feasible in place; `false` when some device has no
    /// fitting start left.
    fn repair<R: Rng>(&mut self, starts: &mut [usize], rng: &mut R) -> bool {
        self.state.reset();
        for (n, d) in self.scenario.devices().iter().enumerate() {
            let (p, a) = (d.power_kw, d.duration);
            if !self.domains[n].contains(&starts[n]) || !self.state.fits(&self.cap, p, a, starts[n]) {
                self.fitting.clear();
                for &s in &self.domains[n] {
                    if self.state.fits(&self.cap, p, a, s) {
                        self.fitting.push(s);
                    }
                }
                if self.fitting.is_empty() {
                    return false;
                }
                starts[n] = self.fitting[rng.random_range(0..self.fitting.len())];
            }
            self.state.place(p, a, starts[n]);
        }
        true
    }
}

pub fn ga_solve(scenario: &ScenarioWindow, cfg: &GaConfig) -> Result<GaResult, ScheduleError> {
    cfg.validate().map_err(ScheduleError::InvalidScenario)?;
    let slots = scenario.slots();
    let n = scenario.num_devices();
    let domains: Vec<Vec<usize>> = scenario.devices().iter().map(|d| d.admissible_starts(slots)).collect();
    if domains.iter().any(Vec::is_empty) {
        return Err(ScheduleError::NoFeasibleSeed(cfg.initial_samples));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let mut population: Vec<Individual> = Vec::with_capacity(cfg.population + cfg.offspring);
    let mut feasible_seeds = 0;
    for _ in 0..cfg.initial_samples {
        let starts: Vec<usize> = domains.iter().map(|d| d[rng.random_range(0..d.len())]).collect();
        if starts_feasible(scenario, &starts) {
            feasible_seeds += 1;
            if population.len() < cfg.population {
                population.push(Individual {
                    objective: scenario.objective(&starts),
                    starts,
                });
            }
        }
    }
    if population.is_empty() {
        return Err(ScheduleError::NoFeasibleSeed(cfg.initial_samples));
    }
    population.sort_by(rank);
    let mut history = Vec::with_capacity(cfg.generations + 1);
    history.push(population[0].objective);

    let mut repairer = Repairer {
        scenario,
        cap: scenario.capacity(),
        domains,
        state: LoadState::new(slots),
        fitting: Vec::with_capacity(slots),
    };
    let keep = cfg.population;
    for _ in 0..cfg.generations {
        let parents = population.len();
        for _ in 0..cfg.offspring {
            let i = rng.random_range(0..parents);
            let j = rng.random_range(0..parents);
            let cut = if n > 1 { rng.random_range(1..n) } else { 0 };
            let mut child: Vec<usize> = population[i].starts[..cut]
                .iter()
                .chain(&population[j].starts[cut..])
                .copied()
                .collect();
            if n > 0 && rng.random_bool(cfg.mutation_probability) {
                let k = rng.random_range(0..n);
                let dom = &repairer.domains[k];
                child[k] = dom[rng.random_range(0..dom.len())];
            }
            if repairer.repair(&mut child, &mut rng) {
                population.push(Individual {
                    objective: scenario.objective(&child),
                    starts: child,
                });
            }
        }
        population.sort_by(rank);
        population.truncate(keep);
        history.push(population[0].objective);
    }
    let best = population.swap_remove(0);
    Ok(GaResult {
        schedule: Schedule::new(best.starts),
        objective: best.objective,
        history,
        feasible_seeds,
    })
}

/// Writes `generation,best_objective`.
pub fn write_history_csv(path: &Path, history: &[f64]) -> std::io::Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["generation", "best_objective"])?;
    for (g, v) in history.iter().enumerate() {
        w.write_record([g.to_string(), format!("{v:?}")])?;
    }
    w.flush()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::solve_exact;
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

    fn small(generations: usize, seed: u64) -> GaConfig {
        GaConfig {
            initial_samples: 200,
            population: 20,
            generations,
            offspring: 20,
            mutation_probability: 0.1,
            seed,
        }
    }

    #[test]
    fn single_feasible_slot() {
        let d = DeviceSpec::new("d", 1.0, 1, vec![f64::INFINITY, 0.4, f64::INFINITY]);
        let w = ScenarioWindow::new(params(3, 5.0, 5.0, 5.0), vec![d], vec![0.0; 3]).unwrap();
        let r = ga_solve(&w, &small(5, 1)).unwrap();
        assert_eq!(r.schedule.starts(), &[1]);
        assert_eq!(r.history[0], 0.4);
    }

    #[test]
    fn toy_reaches_exact_and_is_deterministic() {
        let d = DeviceSpec::new("d", 1.0, 1, vec![0.0, 1.0, 2.0, 3.0]);
        let w = ScenarioWindow::new(params(4, 1.0, 0.0, 10.0), vec![d.clone(), d], vec![1.0, 1.0, 0.0, 0.0]).unwrap();
        let (_, exact) = solve_exact(&w).unwrap();
        let a = ga_solve(&w, &small(30, 3)).unwrap();
        assert!(a.objective >= exact);
        assert!(validate(&a.schedule, &w).is_empty());
        assert_eq!(a, ga_solve(&w, &small(30, 3)).unwrap());
        assert!(a.history.windows(2).all(|p| p[1] <= p[0]));
        assert_eq!(a.history.len(), 31);
    }

    #[test]
    fn no_feasible_seed() {
        let d = DeviceSpec::new("d", 2.0, 1, vec![0.0, 0.0]);
        let w = ScenarioWindow::new(params(2, 1.0, 5.0, 5.0), vec![d], vec![0.0; 2]).unwrap();
        assert_eq!(ga_solve(&w, &small(5, 0)).unwrap_err(), ScheduleError::NoFeasibleSeed(200));
    }

    #[test]
    fn rejects_bad_probability() {
        let d = DeviceSpec::new("d", 1.0, 1, vec![0.0]);
        let w = ScenarioWindow::new(params(1, 5.0, 5.0, 5.0), vec![d], vec![0.0]).unwrap();
        let cfg = GaConfig {
            mutation_probability: 1.5,
            ..small(1, 0)
        };
        assert!(ga_solve(&w, &cfg).is_err());
    }
}
