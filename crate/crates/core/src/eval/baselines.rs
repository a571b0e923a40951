//! Reference forecasters: one-day naive, ordinary least squares on the lag
//! values, and a stateless per-slot MLP.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::Window;
use crate::error::{NnError, TrainError};
use crate::nn::{dense_forward, dense_tape, Activation, Gradients, ParamStore, Tape, Tensor};
use crate::rtpnn::{ForecastInput, Normalization};

/// Generation one period back (the newer generation lag).
pub fn naive_forecast(input: &ForecastInput) -> Vec<f64> {
    input.lags.iter().map(|slot| slot[0].1).collect()
}

fn lag_row(slot: &[(f64, f64)]) -> impl Iterator<Item = f64> + '_ {
    slot.iter().flat_map(|&(a, b)| [a, b])
}

/// Least-squares fit of generation on every lag value plus an intercept.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearRegression {
    /// Intercept first, then one coefficient per lag value.
    pub coefficients: Vec<f64>,
}

impl LinearRegression {
    pub fn fit(windows: &[Window]) -> Result<Self, TrainError> {
        let first = windows.first().ok_or(TrainError::EmptyDataset)?;
        let cols = 1 + 2 * first.input.num_series();
        let rows: usize = windows.iter().map(|w| w.actual.len()).sum();
        let mut x = DMatrix::<f64>::zeros(rows, cols);
        let mut y = DVector::<f64>::zeros(rows);
        let mut r = 0;
        for w in windows {
            for (slot, &g) in w.input.lags.iter().zip(&w.actual) {
                x[(r, 0)] = 1.0;
                for (c, v) in lag_row(slot).enumerate() {
                    x[(r, c + 1)] = v;
                }
                y[r] = g;
                r += 1;
            }
        }
        let svd = x.svd(true, true);
        let beta = svd
            .solve(&y, 1e-10)
            .map_err(|e| TrainError::Nn(NnError::NonFiniteInput(format!("least squares: {e}"))))?;
        Ok(Self {
            coefficients: beta.iter().copied().collect(),
        })
    }

    pub fn predict(&self, input: &ForecastInput) -> Vec<f64> {
        input
            .lags
            .iter()
            .map(|slot| {
                let z = self.coefficients[0]
                    + lag_row(slot)
                        .zip(&self.coefficients[1..])
                        .map(|(v, c)| v * c)
                        .sum::<f64>();
                z.max(0.0)
            })
            .collect()
    }
}

/// Per-slot feed-forward network on the normalized lag values, without
/// recurrence.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpBaseline {
    pub store: ParamStore,
    pub norm: Normalization,
}

impl MlpBaseline {
    pub fn new<R: Rng + ?Sized>(norm: Normalization, rng: &mut R) -> Self {
        let inputs = 2 * norm.series.len();
        let hidden = norm.series.len() + 1;
        let mut store = ParamStore::new();
        for (name, rows, cols) in [("hidden", hidden, inputs), ("out", 1, hidden)] {
            let scale = 1.0 / (cols as f64).sqrt();
            let w = (0..rows * cols).map(|_| rng.random_range(-0.5..0.5) * scale).collect();
            store.insert(format!("{name}.w"), Tensor::matrix(rows, cols, w));
            store.insert(format!("{name}.b"), Tensor::vector(vec![0.0; rows]));
        }
        Self { store, norm }
    }

    fn features(&self, slot: &[(f64, f64)]) -> Vec<f64> {
        slot.iter()
            .zip(&self.norm.series)
            .flat_map(|(&(a, b), mm)| [mm.normalize(a), mm.normalize(b)])
            .collect()
    }

    pub fn predict(&self, input: &ForecastInput) -> Result<Vec<f64>, NnError> {
        let gen = self.norm.generation();
        input
            .lags
            .iter()
            .map(|slot| {
                let x = self.features(slot);
                let h = dense_forward("hidden", &x, self.store.expect("hidden.w"), self.store.expect("hidden.b"), Activation::Sigmoid)?;
                let y = dense_forward("out", &h, self.store.expect("out.w"), self.store.expect("out.b"), Activation::Sigmoid)?;
                Ok(gen.denormalize(y[0]).max(0.0))
            })
            .collect()
    }

    fn window_grad(&self, w: &Window) -> Result<(f64, Gradients), NnError> {
        let gen = self.norm.generation();
        let mut tape = Tape::new();
        let p = tape.params_from(&self.store, "");
        let mut terms = Vec::new();
        for (slot, &g) in w.input.lags.iter().zip(&w.actual) {
            let x = tape.constants(&self.features(slot));
            let h = dense_tape(&mut tape, "hidden", &x, &p["hidden.w"], &p["hidden.b"], Activation::Sigmoid)?;
            let y = dense_tape(&mut tape, "out", &h, &p["out.w"], &p["out.b"], Activation::Sigmoid)?;
            let t = tape.constant(gen.normalize(g));
            let e = tape.sub(y[0], t);
            terms.push(tape.square(e));
        }
        let s = tape.sum(&terms);
        let loss = tape.scale(s, 1.0 / terms.len() as f64);
        let value = tape.value(loss);
        Ok((value, tape.backward(loss, 1.0)?))
    }

    /// Adam on per-window MSE, one window per step.
    pub fn train(&mut self, windows: &[Window], epochs: usize, lr: f64, seed: u64) -> Result<Vec<f64>, TrainError> {
        if windows.is_empty() {
            return Err(TrainError::EmptyDataset);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut order: Vec<usize> = (0..windows.len()).collect();
        let mut history = Vec::with_capacity(epochs);
        for epoch in 0..epochs {
            order.shuffle(&mut rng);
            let mut total = 0.0;
            for (batch, &i) in order.iter().enumerate() {
                let (l, g) = self.window_grad(&windows[i])?;
                if !l.is_finite() {
                    return Err(TrainError::NanLoss { epoch, batch });
                }
                self.store.adam_step(&g, lr)?;
                total += l;
            }
            history.push(total / windows.len() as f64);
        }
        Ok(history)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::NaiveDate;

    fn window(lags: Vec<Vec<(f64, f64)>>, actual: Vec<f64>) -> Window {
        let t0 = NaiveDate::from_ymd_opt(2020, 1, 1).unwrap().and_hms_opt(0, 0, 0).unwrap();
        Window {
            start: t0,
            input: ForecastInput {
                timestamps: vec![t0; lags.len()],
                lags,
            },
            actual,
        }
    }

    #[test]
    fn naive_takes_newer_generation_lag() {
        let w = window(vec![vec![(1.0, 2.0), (9.0, 9.0)], vec![(3.0, 4.0), (9.0, 9.0)]], vec![0.0, 0.0]);
        assert_eq!(naive_forecast(&w.input), vec![2.0, 4.0]);
    }

    #[test]
    fn regression_recovers_linear_target() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let ws: Vec<Window> = (0..5)
            .map(|_| {
                let lags: Vec<Vec<(f64, f64)>> = (0..6)
                    .map(|_| vec![(rng.random::<f64>(), rng.random::<f64>())])
                    .collect();
                let actual = lags.iter().map(|s| 1.0 + 2.0 * s[0].0 + 3.0 * s[0].1).collect();
                window(lags, actual)
            })
            .collect();
        let lr = LinearRegression::fit(&ws).unwrap();
        for (c, e) in lr.coefficients.iter().zip([1.0, 2.0, 3.0]) {
            assert!((c - e).abs() < 1e-9);
        }
    }
}
