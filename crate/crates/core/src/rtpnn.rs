//! Recurrent trend-predictive forecaster.
//!
//! Every input series (generation first, then the weather features) passes
//! through a data-processing unit made of two linear recurrent cells: a trend
//! cell over the difference of the two lags and a level cell over the newer
//! lag. Their outputs and the newer lag of every series are concatenated and
//! fed to a small sigmoid network. One parameter set serves every slot of
//! the window; the recurrent state starts at zero for each window.

use std::collections::BTreeMap;
use std::path::Path;

use chrono::NaiveDateTime;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::Window;
use crate::error::{NnError, TrainError};
use crate::nn::{
    clip_grad_norm, dense_forward_into, dense_tape, Activation, Checkpoint, CheckpointError, Gradients, ParamStore,
    ParamVars, Tape, Tensor, Var,
};

pub const DP_ALPHA1: &str = "dp.alpha1";
pub const DP_ALPHA2: &str = "dp.alpha2";
pub const DP_BETA1: &str = "dp.beta1";
pub const DP_BETA2: &str = "dp.beta2";
const DP_NAMES: [&str; 4] = [DP_ALPHA1, DP_ALPHA2, DP_BETA1, DP_BETA2];

/// Lagged inputs of one window.
#[derive(Debug, Clone, PartialEq)]
pub struct ForecastInput {
    pub timestamps: Vec<NaiveDateTime>,
    /// `lags[slot][series]` is the `(older, newer)` pair; series 0 is
    /// generation.
    pub lags: Vec<Vec<(f64, f64)>>,
}

impl ForecastInput {
    pub fn slots(&self) -> usize {
        self.lags.len()
    }

    pub fn num_series(&self) -> usize {
        self.lags.first().map_or(0, Vec::len)
    }

    /// Same input with slots reordered by `perm`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        Self {
            timestamps: perm.iter().map(|&i| self.timestamps[i]).collect(),
            lags: perm.iter().map(|&i| self.lags[i].clone()).collect(),
        }
    }
}

/// Scalars of one data-processing unit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DpParams {
    pub alpha1: f64,
    pub alpha2: f64,
    pub beta1: f64,
    pub beta2: f64,
}

/// Previous trend and level of every unit.
#[derive(Debug, Clone, PartialEq)]
pub struct DpState {
    pub trend: Vec<f64>,
    pub level: Vec<f64>,
}

impl DpState {
    pub fn zeros(units: usize) -> Self {
        Self {
            trend: vec![0.0; units],
            level: vec![0.0; units],
        }
    }
}

/// One recurrence step: returns `(trend, level, newer)`.
pub fn dp_unit_step(pair: (f64, f64), state: (f64, f64), p: DpParams) -> Result<(f64, f64, f64), NnError> {
    let (older, newer) = pair;
    let (t_prev, l_prev) = state;
    if ![older, newer, t_prev, l_prev].iter().all(|x| x.is_finite()) {
        return Err(NnError::NonFiniteInput(format!(
            "lag pair ({older}, {newer}) with state ({t_prev}, {l_prev})"
        )));
    }
    let t = p.alpha1 * (newer - older) + p.alpha2 * t_prev;
    let l = p.beta1 * newer + p.beta2 * l_prev;
    Ok((t, l, newer))
}

/// Min-max scaling of one series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MinMax {
    pub min: f64,
    pub max: f64,
}

impl MinMax {
    fn range(&self) -> f64 {
        let r = self.max - self.min;
        if r > 0.0 {
            r
        } else {
            1.0
        }
    }

    pub fn normalize(&self, x: f64) -> f64 {
        (x - self.min) / self.range()
    }

    pub fn denormalize(&self, y: f64) -> f64 {
        y * self.range() + self.min
    }
}

/// Scaling of every series; index 0 is generation.
#[derive(Debug, Clone, PartialEq)]
pub struct Normalization {
    pub series: Vec<MinMax>,
}

impl Normalization {
    /// Fits on the lags and targets of `windows` (the training split).
    pub fn fit(windows: &[Window]) -> Result<Self, TrainError> {
        let first = windows.first().ok_or(TrainError::EmptyDataset)?;
        let n = first.input.num_series();
        let mut mm = vec![
            MinMax {
                min: f64::INFINITY,
                max: f64::NEG_INFINITY,
            };
            n
        ];
        let mut see = |i: usize, x: f64| {
            mm[i].min = mm[i].min.min(x);
            mm[i].max = mm[i].max.max(x);
        };
        for w in windows {
            for slot in &w.input.lags {
                for (i, &(a, b)) in slot.iter().enumerate() {
                    see(i, a);
                    see(i, b);
                }
            }
            for &g in &w.actual {
                see(0, g);
            }
        }
        Ok(Self { series: mm })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            series: vec![MinMax { min: 0.0, max: 1.0 }; n],
        }
    }

    pub fn generation(&self) -> MinMax {
        self.series[0]
    }
}

/// Architecture and regularization settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RtpnnConfig {
    /// L2 coefficient on the recurrent scalars.
    pub l2_dp: f64,
    pub output_activation: Activation,
}

impl Default for RtpnnConfig {
    fn default() -> Self {
        Self {
            l2_dp: 1e-4,
            output_activation: Activation::Sigmoid,
        }
    }
}

/// Hidden layer widths for `units` input series.
pub fn hidden_sizes(units: usize) -> (usize, usize) {
    (units, units.div_ceil(2))
}

#[derive(Debug, Clone, PartialEq)]
pub struct RtpnnModel {
    pub store: ParamStore,
    pub slots: usize,
    pub norm: Normalization,
    pub config: RtpnnConfig,
}

impl RtpnnModel {
    /// Fresh model: recurrent scalars at `α¹ = β¹ = 1`, `α² = β² = 0.1`,
    /// dense weights uniform in `±0.5/√fan_in`, zero biases.
    pub fn new<R: Rng + ?Sized>(slots: usize, norm: Normalization, config: RtpnnConfig, rng: &mut R) -> Self {
        let units = norm.series.len();
        let (h0, h1) = hidden_sizes(units);
        let mut store = ParamStore::new();
        store.insert(DP_ALPHA1, Tensor::vector(vec![1.0; units]));
        store.insert(DP_ALPHA2, Tensor::vector(vec![0.1; units]));
        store.insert(DP_BETA1, Tensor::vector(vec![1.0; units]));
        store.insert(DP_BETA2, Tensor::vector(vec![0.1; units]));
        for (name, rows, cols) in [("dense0", h0, 3 * units), ("dense1", h1, h0), ("out", 1, h1)] {
            let scale = 1.0 / (cols as f64).sqrt();
            let w = (0..rows * cols).map(|_| rng.random_range(-0.5..0.5) * scale).collect();
            store.insert(format!("{name}.w"), Tensor::matrix(rows, cols, w));
            store.insert(format!("{name}.b"), Tensor::vector(vec![0.0; rows]));
        }
        Self {
            store,
            slots,
            norm,
            config,
        }
    }

    pub fn units(&self) -> usize {
        self.norm.series.len()
    }

    pub fn dp_params(&self, unit: usize) -> DpParams {
        let g = |n: &str| self.store.expect(n).data()[unit];
        DpParams {
            alpha1: g(DP_ALPHA1),
            alpha2: g(DP_ALPHA2),
            beta1: g(DP_BETA1),
            beta2: g(DP_BETA2),
        }
    }

    fn check_input(&self, input: &ForecastInput) -> Result<(), NnError> {
        if input.slots() != self.slots {
            return Err(NnError::Shape {
                layer: "forecast window".into(),
                detail: format!("{} slots, model expects {}", input.slots(), self.slots),
            });
        }
        if let Some(row) = input.lags.iter().find(|r| r.len() != self.units()) {
            return Err(NnError::Shape {
                layer: "dp".into(),
                detail: format!("{} series in input, model has {} units", row.len(), self.units()),
            });
        }
        Ok(())
    }

    /// Normalized network output per slot.
    pub fn forward_normalized(&self, input: &ForecastInput) -> Result<Vec<f64>, NnError> {
        self.check_input(input)?;
        let units = self.units();
        let dp: Vec<DpParams> = (0..units).map(|u| self.dp_params(u)).collect();
        let mut state = DpState::zeros(units);
        let mut out = Vec::with_capacity(self.slots);
        let mut z = Vec::with_capacity(3 * units);
        let (mut h0, mut h1, mut y) = (Vec::new(), Vec::new(), Vec::new());
        let p = |n: &str| self.store.expect(n);
        let (w0, b0, w1, b1, wo, bo) = (p("dense0.w"), p("dense0.b"), p("dense1.w"), p("dense1.b"), p("out.w"), p("out.b"));
        for slot in &input.lags {
            z.clear();
            for (u, &(a, b)) in slot.iter().enumerate() {
                let mm = self.norm.series[u];
                let (t, l, v) = dp_unit_step(
                    (mm.normalize(a), mm.normalize(b)),
                    (state.trend[u], state.level[u]),
                    dp[u],
                )?;
                state.trend[u] = t;
                state.level[u] = l;
                z.extend([t, l, v]);
            }
            dense_forward_into("dense0", &z, w0, b0, Activation::Sigmoid, &mut h0)?;
            dense_forward_into("dense1", &h0, w1, b1, Activation::Sigmoid, &mut h1)?;
            dense_forward_into("out", &h1, wo, bo, self.config.output_activation, &mut y)?;
            out.push(y[0]);
        }
        Ok(out)
    }

    /// Forecast generation in kW per slot, clamped at zero.
    pub fn forecast_window(&self, input: &ForecastInput) -> Result<Vec<f64>, NnError> {
        let gen = self.norm.generation();
        Ok(self
            .forward_normalized(input)?
            .into_iter()
            .map(|y| gen.denormalize(y).max(0.0))
            .collect())
    }

    /// Records the normalized forward pass on `tape`.
    pub fn forward_tape(&self, tape: &mut Tape, input: &ForecastInput) -> Result<Vec<Var>, NnError> {
        self.check_input(input)?;
        let p: BTreeMap<String, ParamVars> = tape.params_from(&self.store, "");
        let units = self.units();
        let zero = tape.constant(0.0);
        let mut trend = vec![zero; units];
        let mut level = vec![zero; units];
        let mut out = Vec::with_capacity(self.slots);
        for slot in &input.lags {
            let mut z = Vec::with_capacity(3 * units);
            for (u, &(a, b)) in slot.iter().enumerate() {
                if !(a.is_finite() && b.is_finite()) {
                    return Err(NnError::NonFiniteInput(format!("lag pair ({a}, {b})")));
                }
                let mm = self.norm.series[u];
                let older = tape.constant(mm.normalize(a));
                let newer = tape.constant(mm.normalize(b));
                let diff = tape.sub(newer, older);
                let t1 = tape.mul(p[DP_ALPHA1].at(u), diff);
                let t2 = tape.mul(p[DP_ALPHA2].at(u), trend[u]);
                let t = tape.add(t1, t2);
                let l1 = tape.mul(p[DP_BETA1].at(u), newer);
                let l2 = tape.mul(p[DP_BETA2].at(u), level[u]);
                let l = tape.add(l1, l2);
                trend[u] = t;
                level[u] = l;
                z.extend([t, l, newer]);
            }
            let h0 = dense_tape(tape, "dense0", &z, &p["dense0.w"], &p["dense0.b"], Activation::Sigmoid)?;
            let h1 = dense_tape(tape, "dense1", &h0, &p["dense1.w"], &p["dense1.b"], Activation::Sigmoid)?;
            let y = dense_tape(tape, "out", &h1, &p["out.w"], &p["out.b"], self.config.output_activation)?;
            out.push(y[0]);
        }
        Ok(out)
    }

    /// L2 penalty on the recurrent scalars.
    pub fn penalty(&self) -> f64 {
        self.config.l2_dp
            * DP_NAMES
                .iter()
                .flat_map(|n| self.store.expect(n).data())
                .map(|x| x * x)
                .sum::<f64>()
    }

    /// Mean squared normalized error of one window plus the penalty.
    pub fn window_loss(&self, input: &ForecastInput, actual: &[f64]) -> Result<f64, NnError> {
        let gen = self.norm.generation();
        let y = self.forward_normalized(input)?;
        let mse = y
            .iter()
            .zip(actual)
            .map(|(p, a)| (p - gen.normalize(*a)).powi(2))
            .sum::<f64>()
            / y.len() as f64;
        Ok(mse + self.penalty())
    }

    /// Loss of one window and its gradient with respect to every parameter.
    pub fn window_loss_grad(&self, input: &ForecastInput, actual: &[f64]) -> Result<(f64, Gradients), NnError> {
        if actual.len() != self.slots {
            return Err(NnError::Shape {
                layer: "target".into(),
                detail: format!("{} targets for {} slots", actual.len(), self.slots),
            });
        }
        let gen = self.norm.generation();
        let mut tape = Tape::new();
        let y = self.forward_tape(&mut tape, input)?;
        let mut terms = Vec::with_capacity(y.len());
        for (&yv, &a) in y.iter().zip(actual) {
            let target = tape.constant(gen.normalize(a));
            let e = tape.sub(yv, target);
            terms.push(tape.square(e));
        }
        let sse = tape.sum(&terms);
        let mse = tape.scale(sse, 1.0 / y.len() as f64);
        let mut loss = mse;
        if self.config.l2_dp > 0.0 {
            let mut sq = Vec::new();
            for n in DP_NAMES {
                let pv = tape.param(n, self.store.expect(n));
                for &v in pv.vars() {
                    sq.push(tape.square(v));
                }
            }
            let s = tape.sum(&sq);
            let pen = tape.scale(s, self.config.l2_dp);
            loss = tape.add(mse, pen);
        }
        let value = tape.value(loss);
        let grads = tape.backward(loss, 1.0)?;
        Ok((value, grads))
    }

    /// Writes parameters and normalization under `prefix`.
    pub fn write_checkpoint(&self, ckpt: &mut Checkpoint, prefix: &str) {
        ckpt.set_meta(&format!("{prefix}slots"), self.slots);
        ckpt.set_meta(&format!("{prefix}units"), self.units());
        ckpt.set_meta(&format!("{prefix}l2_dp"), format!("{:?}", self.config.l2_dp));
        ckpt.set_meta(&format!("{prefix}output_activation"), self.config.output_activation.name());
        ckpt.insert_store(&format!("{prefix}param."), &self.store);
        let mins = self.norm.series.iter().map(|m| m.min).collect();
        let maxs = self.norm.series.iter().map(|m| m.max).collect();
        ckpt.tensors.insert(format!("{prefix}norm.min"), Tensor::vector(mins));
        ckpt.tensors.insert(format!("{prefix}norm.max"), Tensor::vector(maxs));
    }

    pub fn read_checkpoint(ckpt: &Checkpoint, prefix: &str) -> Result<Self, CheckpointError> {
        let slots: usize = ckpt.meta_parse(&format!("{prefix}slots"))?;
        let units: usize = ckpt.meta_parse(&format!("{prefix}units"))?;
        let l2_dp: f64 = ckpt.meta_parse(&format!("{prefix}l2_dp"))?;
        let act_name = ckpt.meta(&format!("{prefix}output_activation"))?;
        let output_activation = Activation::parse(act_name)
            .ok_or_else(|| CheckpointError::Invalid(format!("unknown activation `{act_name}`")))?;
        let mins = ckpt.tensor(&format!("{prefix}norm.min"))?.data();
        let maxs = ckpt.tensor(&format!("{prefix}norm.max"))?.data();
        if mins.len() != units || maxs.len() != units {
            return Err(CheckpointError::Invalid("normalization length disagrees with unit count".into()));
        }
        let norm = Normalization {
            series: mins.iter().zip(maxs).map(|(&min, &max)| MinMax { min, max }).collect(),
        };
        let store = ckpt.extract_store(&format!("{prefix}param."));
        let (h0, h1) = hidden_sizes(units);
        let expected: [(&str, Vec<usize>); 10] = [
            (DP_ALPHA1, vec![units]),
            (DP_ALPHA2, vec![units]),
            (DP_BETA1, vec![units]),
            (DP_BETA2, vec![units]),
            ("dense0.w", vec![h0, 3 * units]),
            ("dense0.b", vec![h0]),
            ("dense1.w", vec![h1, h0]),
            ("dense1.b", vec![h1]),
            ("out.w", vec![1, h1]),
            ("out.b", vec![1]),
        ];
        for (name, shape) in &expected {
            match store.get(name) {
                Some(t) if t.shape() == shape.as_slice() => {}
                Some(t) => {
                    return Err(CheckpointError::Invalid(format!(
                        "parameter `{name}` has shape {:?}, expected {shape:?}",
                        t.shape()
                    )))
                }
                None => return Err(CheckpointError::MissingTensor(format!("{prefix}param.{name}"))),
            }
        }
        Ok(Self {
            store,
            slots,
            norm,
            config: RtpnnConfig {
                l2_dp,
                output_activation,
            },
        })
    }

    pub fn save(&self, path: &Path) -> Result<(), CheckpointError> {
        let mut ckpt = Checkpoint::new();
        ckpt.set_meta("kind", "rtpnn");
        self.write_checkpoint(&mut ckpt, "");
        ckpt.save(path)
    }

    pub fn load(path: &Path) -> Result<Self, CheckpointError> {
        let ckpt = Checkpoint::load(path)?;
        Self::read_checkpoint(&ckpt, "")
    }

    /// Order-independent checksum of every parameter bit pattern.
    pub fn checksum(&self) -> u64 {
        param_checksum(&self.store)
    }
}

/// FNV-1a over parameter names and value bits.
pub fn param_checksum(store: &ParamStore) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    let mut eat = |bytes: &[u8]| {
        for b in bytes {
            h ^= *b as u64;
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
    };
    for (name, t) in store.iter() {
        eat(name.as_bytes());
        for x in t.data() {
            eat(&x.to_bits().to_le_bytes());
        }
    }
    h
}

/// Stage-1 optimizer settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Stage1Config {
    pub epochs: usize,
    pub learning_rate: f64,
    /// Batch size in slots; a batch holds `max(1, batch_size / S)` windows.
    pub batch_size: usize,
    pub max_grad_norm: Option<f64>,
}

impl Default for Stage1Config {
    fn default() -> Self {
        Self {
            epochs: 40,
            learning_rate: 1e-3,
            batch_size: 24,
            max_grad_norm: None,
        }
    }
}

/// Trains on MSE with Adam; window order is reshuffled every epoch from
/// `seed`. Returns the mean training loss of every epoch.
pub fn stage1_train(
    model: &mut RtpnnModel,
    windows: &[Window],
    cfg: &Stage1Config,
    seed: u64,
) -> Result<Vec<f64>, TrainError> {
    if windows.is_empty() {
        return Err(TrainError::EmptyDataset);
    }
    let per_batch = (cfg.batch_size / model.slots).max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..windows.len()).collect();
    let mut history = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for (batch, chunk) in order.chunks(per_batch).enumerate() {
            let mut acc: Gradients = BTreeMap::new();
            let mut loss = 0.0;
            for &i in chunk {
                let w = &windows[i];
                let (l, g) = model.window_loss_grad(&w.input, &w.actual)?;
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
            if let Some(max) = cfg.max_grad_norm {
                clip_grad_norm(&mut acc, max);
            }
            model.store.adam_step(&acc, cfg.learning_rate).map_err(|e| match e {
                NnError::NonFiniteGradient { .. } => TrainError::NanLoss { epoch, batch },
                other => TrainError::Nn(other),
            })?;
            total += loss;
        }
        let mean = total / windows.len() as f64;
        log::debug!("stage 1 epoch {epoch}: loss {mean:.6}");
        history.push(mean);
    }
    Ok(history)
}

/// Writes `timestamp,gen_forecast_kw`.
pub fn write_forecast_csv(path: &Path, timestamps: &[NaiveDateTime], forecast: &[f64]) -> std::io::Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["timestamp", "gen_forecast_kw"])?;
    for (t, g) in timestamps.iter().zip(forecast) {
        w.write_record([t.format("%Y-%m-%dT%H:%M:%S").to_string(), format!("{g:.6}")])?;
    }
    w.flush()
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::NaiveDate;

    fn input(slots: usize, units: usize, seed: u64) -> ForecastInput {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let t0 = NaiveDate::from_ymd_opt(2020, 1, 1).unwrap().and_hms_opt(0, 0, 0).unwrap();
        ForecastInput {
            timestamps: (0..slots).map(|s| t0 + chrono::Duration::hours(s as i64)).collect(),
            lags: (0..slots)
                .map(|_| (0..units).map(|_| (rng.random::<f64>(), rng.random::<f64>())).collect())
                .collect(),
        }
    }

    fn model(slots: usize, units: usize, seed: u64) -> RtpnnModel {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        RtpnnModel::new(slots, Normalization::identity(units), RtpnnConfig::default(), &mut rng)
    }

    fn p(a1: f64, a2: f64, b1: f64, b2: f64) -> DpParams {
        DpParams {
            alpha1: a1,
            alpha2: a2,
            beta1: b1,
            beta2: b2,
        }
    }

    #[test]
    fn dp_step_examples() {
        assert_eq!(dp_unit_step((1.0, 3.0), (4.0, 0.0), p(1.0, 0.5, 1.0, 0.0)).unwrap().0, 4.0);
        assert_eq!(dp_unit_step((0.0, 7.0), (0.0, 123.0), p(1.0, 0.0, 1.0, 0.0)).unwrap().1, 7.0);
        let (t, _, v) = dp_unit_step((2.5, 2.5), (3.0, 0.0), p(9.0, 0.25, 1.0, 0.0)).unwrap();
        assert_eq!((t, v), (0.75, 2.5));
        assert!(dp_unit_step((f64::NAN, 1.0), (0.0, 0.0), p(1.0, 0.0, 1.0, 0.0)).is_err());
    }

    #[test]
    fn layer_shapes_follow_unit_count() {
        let m = model(24, 4, 1);
        assert_eq!(m.store.expect("dense0.w").shape(), &[4, 12]);
        assert_eq!(m.store.expect("dense1.w").shape(), &[2, 4]);
        assert_eq!(m.store.expect("out.w").shape(), &[1, 2]);
        assert_eq!(hidden_sizes(5), (5, 3));
        assert_eq!(m.dp_params(2), p(1.0, 0.1, 1.0, 0.1));
    }

    #[test]
    fn zero_network_is_constant() {
        let mut m = model(6, 2, 1);
        for name in ["dense0.w", "dense1.w", "out.w"] {
            m.store.get_mut(name).unwrap().data_mut().fill(0.0);
        }
        m.norm = Normalization {
            series: vec![MinMax { min: 0.0, max: 10.0 }; 2],
        };
        let f = m.forecast_window(&input(6, 2, 3)).unwrap();
        assert!(f.iter().all(|&x| x == 5.0));
    }

    #[test]
    fn window_length_is_checked() {
        let m = model(24, 2, 1);
        assert!(matches!(m.forecast_window(&input(23, 2, 1)), Err(NnError::Shape { .. })));
        assert!(matches!(m.forecast_window(&input(24, 3, 1)), Err(NnError::Shape { .. })));
    }

    #[test]
    fn slot_order_matters() {
        let m = model(5, 2, 4);
        let x = input(5, 2, 9);
        let ident: Vec<usize> = (0..5).collect();
        assert_eq!(m.forecast_window(&x).unwrap(), m.forecast_window(&x.permuted(&ident)).unwrap());
        let rev: Vec<usize> = (0..5).rev().collect();
        let a = m.forecast_window(&x).unwrap();
        let mut b = m.forecast_window(&x.permuted(&rev)).unwrap();
        b.reverse();
        assert_ne!(a, b);
    }

    #[test]
    fn stateless_when_memory_is_off() {
        let mut m = model(6, 3, 5);
        m.store.get_mut(DP_ALPHA2).unwrap().data_mut().fill(0.0);
        m.store.get_mut(DP_BETA2).unwrap().data_mut().fill(0.0);
        let x = input(6, 3, 2);
        let whole = m.forward_normalized(&x).unwrap();
        let mut single = m.clone();
        single.slots = 1;
        for s in 0..6 {
            let one = x.permuted(&[s]);
            assert_eq!(single.forward_normalized(&one).unwrap()[0], whole[s]);
        }
    }

    #[test]
    fn tape_matches_plain_forward() {
        let m = model(7, 3, 8);
        let x = input(7, 3, 8);
        let mut tape = Tape::new();
        let vars = m.forward_tape(&mut tape, &x).unwrap();
        let plain = m.forward_normalized(&x).unwrap();
        for (v, p) in vars.iter().zip(&plain) {
            assert_eq!(tape.value(*v), *p);
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let m = model(3, 2, 11);
        let x = input(3, 2, 12);
        let actual = vec![0.2, 0.7, 0.4];
        let (_, grads) = m.window_loss_grad(&x, &actual).unwrap();
        let h = 1e-5;
        for (name, t) in m.store.iter() {
            for i in 0..t.len() {
                let mut plus = m.clone();
                plus.store.get_mut(name).unwrap().data_mut()[i] += h;
                let mut minus = m.clone();
                minus.store.get_mut(name).unwrap().data_mut()[i] -= h;
                let fd = (plus.window_loss(&x, &actual).unwrap() - minus.window_loss(&x, &actual).unwrap()) / (2.0 * h);
                let an = grads[name].data()[i];
                let rel = (an - fd).abs() / an.abs().max(fd.abs()).max(1e-8);
                assert!(rel < 1e-4, "{name}[{i}]: analytic {an} vs fd {fd}");
            }
        }
    }

    #[test]
    fn normalization_round_trip() {
        let mm = MinMax { min: -3.0, max: 17.5 };
        for x in [-3.0, 0.0, 4.25, 17.5, 1e3] {
            assert!((mm.denormalize(mm.normalize(x)) - x).abs() <= 1e-12 * x.abs().max(1.0));
        }
        let flat = MinMax { min: 2.0, max: 2.0 };
        assert_eq!(flat.denormalize(flat.normalize(2.0)), 2.0);
    }

    #[test]
    fn checkpoint_round_trip_is_bit_exact() {
        let m = model(4, 3, 21);
        let mut ckpt = Checkpoint::new();
        m.write_checkpoint(&mut ckpt, "rtpnn.");
        let back = RtpnnModel::read_checkpoint(&Checkpoint::from_text(&ckpt.to_text()).unwrap(), "rtpnn.").unwrap();
        let x = input(4, 3, 1);
        assert_eq!(m.forecast_window(&x).unwrap(), back.forecast_window(&x).unwrap());
        assert_eq!(m.checksum(), back.checksum());
    }
}
