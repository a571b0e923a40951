//! Exact dissatisfaction minimisation: depth-first branch-and-bound and an
//! exhaustive enumerator used as its oracle.
//!
//! Both solvers score candidates with [`ScenarioWindow::objective`] and
//! break ties towards the lexicographically smallest start vector (in device
//! order), so on any instance both can handle they return the same schedule.

use crate::error::ScheduleError;
use crate::scenario::{Capacity, LoadState, ScenarioWindow, Schedule};

/// Absolute slack on bound pruning; keeps tied branches alive so the
/// lexicographic tie-break sees every optimum.
const PRUNE_TOL: f64 = 1e-9;

/// Search statistics of one [`solve_exact`] call.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SearchStats {
    pub nodes: u64,
    pub leaves: u64,
}

#[derive(Debug, Clone)]
struct Incumbent {
    objective: f64,
    starts: Vec<usize>,
}

impl Incumbent {
    fn offer(slot: &mut Option<Incumbent>, objective: f64, starts: &[usize]) {
        let better = match slot {
            None => true,
            Some(inc) => {
                objective < inc.objective
                    || (objective == inc.objective && starts < inc.starts.as_slice())
            }
        };
        if better {
            *slot = Some(Incumbent {
                objective,
                starts: starts.to_vec(),
            });
        }
    }
}

struct Search<'a> {
    scenario: &'a ScenarioWindow,
    cap: Capacity,
    order: Vec<usize>,
    /// One load state per depth; `states[k]` holds the first `k` placements.
    states: Vec<LoadState>,
    starts: Vec<usize>,
    incumbent: Option<Incumbent>,
    stats: SearchStats,
    extra_load: Vec<f64>,
    extra_cum: Vec<f64>,
    /// Multipliers of the slot-load and cumulative limits, one pair per depth.
    mu: Vec<Vec<f64>>,
    lambda: Vec<Vec<f64>>,
    lag: LagScratch,
}

/// Scratch space of the Lagrangian bound.
#[derive(Default)]
struct LagScratch {
    mu_prefix: Vec<f64>,
    lambda_suffix2: Vec<f64>,
    grad_mu: Vec<f64>,
    grad_lambda: Vec<f64>,
    best_mu: Vec<f64>,
    best_lambda: Vec<f64>,
    argmin: Vec<usize>,
}

/// Outcome of the Lagrangian bound at one node.
struct LagBound {
    /// Lower bound on the cost of the unplaced devices.
    bound: f64,
    /// Bound terms of every unplaced device except the branched one.
    rest: f64,
    /// Penalized cost of each start of the branched device.
    first: Vec<f64>,
}

/// Subgradient iterations at the root and at every other node.
const ROOT_ITERATIONS: usize = 60;
const NODE_ITERATIONS: usize = 6;
/// Slack on Lagrangian pruning, which sums many more terms than the plain
/// bound.
const LAGRANGE_TOL: f64 = 1e-7;

/// Fitting window of one unplaced device during a filtering pass.
#[derive(Clone, Copy)]
struct Span {
    power: f64,
    duration: usize,
    earliest: usize,
    latest: usize,
}

impl Span {
    /// Load the device adds to slot `t` wherever it starts.
    fn compulsory(&self, t: usize) -> f64 {
        if self.latest <= t && t < self.earliest + self.duration {
            self.power
        } else {
            0.0
        }
    }

    /// Least energy the device has drawn by the end of slot `t`.
    fn min_cum(&self, t: usize) -> f64 {
        if t < self.latest {
            0.0
        } else {
            self.power * (t - self.latest + 1).min(self.duration) as f64
        }
    }
}

impl Search<'_> {
    /// Filters `candidates`, the starts of the unplaced devices
    /// `order[depth..]` that survived at the parent, on top of
    /// `states[depth]` until nothing changes. A start survives when it fits
    /// together with the loads every other unplaced device must add: its
    /// compulsory part and the least energy it draws by each slot. Returns
    /// the surviving starts in (cost, slot) order, or `None` when a device
    /// runs out of starts or the forced loads alone break a capacity.
    fn propagate(&mut self, depth: usize, candidates: &[Vec<usize>]) -> Option<Vec<Vec<usize>>> {
        let state = &self.states[depth];
        let devices = self.scenario.devices();
        let slots = self.cap.slots();
        let rest = &self.order[depth..];
        let mut doms: Vec<Vec<usize>> = rest
            .iter()
            .zip(candidates)
            .map(|(&n, cand)| {
                let d = &devices[n];
                cand.iter()
                    .copied()
                    .filter(|&s| state.fits(&self.cap, d.power_kw, d.duration, s))
                    .collect()
            })
            .collect();
        let mut spans: Vec<Span> = Vec::with_capacity(rest.len());
        loop {
            spans.clear();
            for (k, &n) in rest.iter().enumerate() {
                let dom = &doms[k];
                if dom.is_empty() {
                    return None;
                }
                let d = &devices[n];
                spans.push(Span {
                    power: d.power_kw,
                    duration: d.duration,
                    earliest: *dom.iter().min().expect("non-empty"),
                    latest: *dom.iter().max().expect("non-empty"),
                });
            }
            for t in 0..slots {
                self.extra_load[t] = spans.iter().map(|sp| sp.compulsory(t)).sum();
                self.extra_cum[t] = spans.iter().map(|sp| sp.min_cum(t)).sum();
                if !Capacity::within(state.load()[t] + self.extra_load[t], self.cap.slot_limit(t))
                    || !Capacity::within(state.cum()[t] + self.extra_cum[t], self.cap.cumulative(t))
                {
                    return None;
                }
            }
            let mut changed = false;
            for (k, sp) in spans.iter().enumerate() {
                let before = doms[k].len();
                let (load, cum) = (state.load(), state.cum());
                let (extra_load, extra_cum, cap) = (&self.extra_load, &self.extra_cum, &self.cap);
                doms[k].retain(|&s| {
                    let run_ok = (s..s + sp.duration).all(|t| {
                        Capacity::within(
                            load[t] + extra_load[t] - sp.compulsory(t) + sp.power,
                            cap.slot_limit(t),
                        )
                    });
                    run_ok
                        && (s..slots).all(|t| {
                            let drawn = sp.power * (t - s + 1).min(sp.duration) as f64;
                            Capacity::within(cum[t] + extra_cum[t] - sp.min_cum(t) + drawn, cap.cumulative(t))
                        })
                });
                changed |= doms[k].len() != before;
            }
            if !changed {
                return Some(doms);
            }
        }
    }

    /// Relaxes the slot-load and cumulative limits of the unplaced devices
    /// with non-negative multipliers, improved by Polyak subgradient steps
    /// towards `target` (the incumbent minus the placed cost). The relaxed
    /// problem splits per device; its value bounds the remaining cost from
    /// below for any multipliers. The best multipliers seed the children.
    fn lagrangian(&mut self, depth: usize, doms: &[Vec<usize>], target: f64, iterations: usize) -> LagBound {
        let slots = self.cap.slots();
        let devices = self.scenario.devices();
        let rest = &self.order[depth..];
        let state = &self.states[depth];
        let lag = &mut self.lag;
        let (mu, lambda) = (&mut self.mu[depth], &mut self.lambda[depth]);
        lag.best_mu.clone_from(mu);
        lag.best_lambda.clone_from(lambda);
        lag.argmin.resize(rest.len(), 0);
        let mut best = f64::NEG_INFINITY;
        let mut step_scale = 1.0;
        for _ in 0..iterations.max(1) {
            lag.mu_prefix.clear();
            lag.mu_prefix.push(0.0);
            for &m in mu.iter() {
                let last = *lag.mu_prefix.last().expect("seeded");
                lag.mu_prefix.push(last + m);
            }
            // lambda_suffix2[x] = sum over y >= x of (sum over t >= y of lambda[t]).
            lag.lambda_suffix2.clear();
            lag.lambda_suffix2.resize(slots + 1, 0.0);
            let mut suffix = 0.0;
            for x in (0..slots).rev() {
                suffix += lambda[x];
                lag.lambda_suffix2[x] = lag.lambda_suffix2[x + 1] + suffix;
            }
            let mut value = 0.0;
            for t in 0..slots {
                value -= mu[t] * (self.cap.slot_limit(t) - state.load()[t]);
                value -= lambda[t] * (self.cap.cumulative(t) - state.cum()[t]);
            }
            for (k, &n) in rest.iter().enumerate() {
                let d = &devices[n];
                let mut min = f64::INFINITY;
                for &s in &doms[k] {
                    let e = s + d.duration;
                    let v = d.cost[s]
                        + d.power_kw * (lag.mu_prefix[e] - lag.mu_prefix[s])
                        + d.power_kw * (lag.lambda_suffix2[s] - lag.lambda_suffix2[e]);
                    if v < min {
                        min = v;
                        lag.argmin[k] = s;
                    }
                }
                value += min;
            }
            if value > best {
                best = value;
                lag.best_mu.copy_from_slice(mu);
                lag.best_lambda.copy_from_slice(lambda);
            } else {
                step_scale *= 0.5;
            }
            if best > target + LAGRANGE_TOL {
                break;
            }
            lag.grad_mu.clear();
            lag.grad_mu.extend((0..slots).map(|t| state.load()[t] - self.cap.slot_limit(t)));
            lag.grad_lambda.clear();
            lag.grad_lambda.extend((0..slots).map(|t| state.cum()[t] - self.cap.cumulative(t)));
            for (k, &n) in rest.iter().enumerate() {
                let d = &devices[n];
                let s = lag.argmin[k];
                for t in s..s + d.duration {
                    lag.grad_mu[t] += d.power_kw;
                }
                for t in s..slots {
                    lag.grad_lambda[t] += d.power_kw * (t - s + 1).min(d.duration) as f64;
                }
            }
            // Projected gradient: components that would push a zero
            // multiplier negative do not move it.
            let mut norm2 = 0.0;
            for t in 0..slots {
                if mu[t] > 0.0 || lag.grad_mu[t] > 0.0 {
                    norm2 += lag.grad_mu[t] * lag.grad_mu[t];
                }
                if lambda[t] > 0.0 || lag.grad_lambda[t] > 0.0 {
                    norm2 += lag.grad_lambda[t] * lag.grad_lambda[t];
                }
            }
            if norm2 <= 1e-18 || !target.is_finite() {
                break;
            }
            let step = step_scale * (target - value).max(1e-6) / norm2;
            for t in 0..slots {
                mu[t] = (mu[t] + step * lag.grad_mu[t]).max(0.0);
                lambda[t] = (lambda[t] + step * lag.grad_lambda[t]).max(0.0);
            }
        }
        mu.copy_from_slice(&lag.best_mu);
        lambda.copy_from_slice(&lag.best_lambda);

        // Per-start terms under the best multipliers.
        lag.mu_prefix.clear();
        lag.mu_prefix.push(0.0);
        for &m in mu.iter() {
            let last = *lag.mu_prefix.last().expect("seeded");
            lag.mu_prefix.push(last + m);
        }
        lag.lambda_suffix2.clear();
        lag.lambda_suffix2.resize(slots + 1, 0.0);
        let mut suffix = 0.0;
        for x in (0..slots).rev() {
            suffix += lambda[x];
            lag.lambda_suffix2[x] = lag.lambda_suffix2[x + 1] + suffix;
        }
        let penalized = |n: usize, s: usize| {
            let d = &devices[n];
            let e = s + d.duration;
            d.cost[s]
                + d.power_kw * (lag.mu_prefix[e] - lag.mu_prefix[s])
                + d.power_kw * (lag.lambda_suffix2[s] - lag.lambda_suffix2[e])
        };
        let mut constant = 0.0;
        for t in 0..slots {
            constant -= mu[t] * (self.cap.slot_limit(t) - state.load()[t]);
            constant -= lambda[t] * (self.cap.cumulative(t) - state.cum()[t]);
        }
        let others: f64 = rest
            .iter()
            .enumerate()
            .skip(1)
            .map(|(k, &n)| doms[k].iter().map(|&s| penalized(n, s)).fold(f64::INFINITY, f64::min))
            .sum();
        let first: Vec<f64> = doms[0].iter().map(|&s| penalized(rest[0], s)).collect();
        let first_min = first.iter().cloned().fold(f64::INFINITY, f64::min);
        LagBound {
            bound: best.max(constant + others + first_min),
            rest: constant + others,
            first,
        }
    }

    fn dfs(&mut self, depth: usize, acc: f64, candidates: &[Vec<usize>]) {
        self.stats.nodes += 1;
        let n = self.order.len();
        if depth == n {
            self.stats.leaves += 1;
            let obj = self.scenario.objective(&self.starts);
            Incumbent::offer(&mut self.incumbent, obj, &self.starts);
            return;
        }

        let Some(doms) = self.propagate(depth, candidates) else {
            return;
        };
        let devices = self.scenario.devices();
        let cheapest = |k: usize| devices[self.order[depth + k]].cost[doms[k][0]];
        let tail: f64 = (1..doms.len()).map(cheapest).sum();
        if let Some(inc) = &self.incumbent {
            if acc + cheapest(0) + tail > inc.objective + PRUNE_TOL {
                return;
            }
        }

        let lag = match &self.incumbent {
            Some(inc) => {
                let target = inc.objective - acc;
                let iterations = if depth == 0 { ROOT_ITERATIONS } else { NODE_ITERATIONS };
                let lag = self.lagrangian(depth, &doms, target, iterations);
                if lag.bound > target + LAGRANGE_TOL {
                    return;
                }
                Some(lag)
            }
            None => None,
        };

        let device = self.order[depth];
        let (power, duration) = (devices[device].power_kw, devices[device].duration);
        for (i, &s) in doms[0].iter().enumerate() {
            let c = self.scenario.devices()[device].cost[s];
            if let Some(inc) = &self.incumbent {
                if acc + c + tail > inc.objective + PRUNE_TOL {
                    break;
                }
                if let Some(lag) = &lag {
                    if acc + lag.first[i] + lag.rest > inc.objective + LAGRANGE_TOL {
                        continue;
                    }
                }
            }
            let (parent, child) = self.states.split_at_mut(depth + 1);
            child[0].copy_from(&parent[depth]);
            child[0].place(power, duration, s);
            let (mp, mc) = self.mu.split_at_mut(depth + 1);
            mc[0].copy_from_slice(&mp[depth]);
            let (lp, lc) = self.lambda.split_at_mut(depth + 1);
            lc[0].copy_from_slice(&lp[depth]);
            self.starts[device] = s;
            self.dfs(depth + 1, acc + c, &doms[1..]);
        }
    }
}

/// Optimal schedule by branch-and-bound.
///
/// Devices are branched in order of fewest admissible starts. Each node
/// first filters the starts of every unplaced device against the current
/// loads and the loads the other unplaced devices must add, then bounds the
/// remainder by the cheapest surviving start of each device and prunes when
/// the bound exceeds the incumbent.
pub fn solve_exact(scenario: &ScenarioWindow) -> Result<(Schedule, f64), ScheduleError> {
    solve_exact_with_stats(scenario).map(|(s, o, _)| (s, o))
}

pub fn solve_exact_with_stats(
    scenario: &ScenarioWindow,
) -> Result<(Schedule, f64, SearchStats), ScheduleError> {
    let slots = scenario.slots();
    let devices = scenario.devices();
    let domains: Vec<Vec<usize>> = devices
        .iter()
        .map(|d| {
            let mut dom = d.admissible_starts(slots);
            dom.sort_by(|&a, &b| d.cost[a].total_cmp(&d.cost[b]).then(a.cmp(&b)));
            dom
        })
        .collect();
    if domains.iter().any(Vec::is_empty) {
        return Err(ScheduleError::Infeasible);
    }
    let mut order: Vec<usize> = (0..devices.len()).collect();
    order.sort_by(|&a, &b| devices[b].energy().total_cmp(&devices[a].energy()).then(a.cmp(&b)));

    let mut search = Search {
        scenario,
        cap: scenario.capacity(),
        order,
        states: vec![LoadState::new(slots); devices.len() + 1],
        starts: vec![0; devices.len()],
        incumbent: None,
        stats: SearchStats::default(),
        extra_load: vec![0.0; slots],
        extra_cum: vec![0.0; slots],
        mu: vec![vec![0.0; slots]; devices.len() + 1],
        lambda: vec![vec![0.0; slots]; devices.len() + 1],
        lag: LagScratch::default(),
    };
    // Admissible starts of each device in branching order, sorted by (cost, slot).
    let root: Vec<Vec<usize>> = search.order.iter().map(|&n| domains[n].clone()).collect();
    search.dfs(0, 0.0, &root);
    let stats = search.stats;
    match search.incumbent {
        Some(inc) => Ok((Schedule::new(inc.starts), inc.objective, stats)),
        None => Err(ScheduleError::Infeasible),
    }
}

/// Exhaustive search over every combination of admissible starts.
///
/// Refuses with [`ScheduleError::CapExceeded`] when the number of
/// combinations exceeds `cap`.
pub fn enumerate_bruteforce(
    scenario: &ScenarioWindow,
    cap: u128,
) -> Result<(Schedule, f64), ScheduleError> {
    let slots = scenario.slots();
    let devices = scenario.devices();
    let domains: Vec<Vec<usize>> = devices.iter().map(|d| d.admissible_starts(slots)).collect();
    let product = domains
        .iter()
        .try_fold(1u128, |acc, d| acc.checked_mul(d.len() as u128))
        .unwrap_or(u128::MAX);
    if product > cap {
        return Err(ScheduleError::CapExceeded(product));
    }
    if product == 0 {
        return Err(ScheduleError::Infeasible);
    }

    let capacity = scenario.capacity();
    let mut best: Option<Incumbent> = None;
    let mut idx = vec![0usize; devices.len()];
    let mut starts = vec![0usize; devices.len()];
    let mut state = LoadState::new(slots);
    loop {
        for (n, &i) in idx.iter().enumerate() {
            starts[n] = domains[n][i];
        }
        state.reset();
        let feasible = devices.iter().zip(&starts).all(|(d, &s)| {
            let ok = state.fits(&capacity, d.power_kw, d.duration, s);
            if ok {
                state.place(d.power_kw, d.duration, s);
            }
            ok
        });
        if feasible {
            Incumbent::offer(&mut best, scenario.objective(&starts), &starts);
        }
        // odometer increment, last device fastest
        let mut k = devices.len();
        loop {
            if k == 0 {
                return best
                    .map(|b| (Schedule::new(b.starts), b.objective))
                    .ok_or(ScheduleError::Infeasible);
            }
            k -= 1;
            idx[k] += 1;
            if idx[k] < domains[k].len() {
                break;
            }
            idx[k] = 0;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
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

    fn two_device_toy() -> ScenarioWindow {
        let d = DeviceSpec::new("d", 1.0, 1, vec![0.0, 1.0, 2.0, 3.0]);
        ScenarioWindow::new(params(4, 1.0, 0.0, 10.0), vec![d.clone(), d], vec![1.0, 1.0, 0.0, 0.0])
            .unwrap()
    }

    #[test]
    fn single_device_takes_row_minimum() {
        let d = DeviceSpec::new("d", 1.0, 1, vec![0.3, 0.1, 0.9]);
        let w = ScenarioWindow::new(params(3, 5.0, 5.0, 5.0), vec![d], vec![0.0; 3]).unwrap();
        let (s, obj) = solve_exact(&w).unwrap();
        assert_eq!(s.starts(), &[1]);
        assert_eq!(obj, 0.1);
    }

    #[test]
    fn two_device_toy_matches_enumeration() {
        let w = two_device_toy();
        let (s, obj) = solve_exact(&w).unwrap();
        assert_eq!(obj, 1.0);
        // lexicographic tie-break puts device 0 first
        assert_eq!(s.starts(), &[0, 1]);
        assert_eq!(enumerate_bruteforce(&w, 1000).unwrap(), (s.clone(), obj));
        assert!(validate(&s, &w).is_empty());
    }

    #[test]
    fn zero_inverter_is_infeasible_for_both() {
        let d = DeviceSpec::new("d", 1.0, 1, vec![0.0, 1.0]);
        let w = ScenarioWindow::new(params(2, 0.0, 5.0, 5.0), vec![d], vec![1.0; 2]).unwrap();
        assert_eq!(solve_exact(&w).unwrap_err(), ScheduleError::Infeasible);
        assert_eq!(enumerate_bruteforce(&w, 100).unwrap_err(), ScheduleError::Infeasible);
    }

    #[test]
    fn enumeration_cap() {
        let w = two_device_toy();
        assert_eq!(enumerate_bruteforce(&w, 10).unwrap_err(), ScheduleError::CapExceeded(16));
    }

    #[test]
    fn infinite_costs_are_excluded() {
        let d = DeviceSpec::new("d", 1.0, 1, vec![f64::INFINITY, 0.5, f64::INFINITY]);
        let w = ScenarioWindow::new(params(3, 5.0, 5.0, 5.0), vec![d], vec![0.0; 3]).unwrap();
        assert_eq!(solve_exact(&w).unwrap().0.starts(), &[1]);
        let d = DeviceSpec::new("d", 1.0, 1, vec![f64::INFINITY; 3]);
        let w = w.with_devices(vec![d]).unwrap();
        assert_eq!(solve_exact(&w).unwrap_err(), ScheduleError::Infeasible);
    }
}
