use std::collections::BTreeMap;

use super::tensor::Tensor;
use crate::error::NnError;

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
struct Slot {
    value: Tensor,
    m: Vec<f64>,
    v: Vec<f64>,
}

/// Named parameter tensors with their Adam moment buffers.
///
/// One store is one optimizer instance: the step counter is shared by every
/// parameter and advances once per [`ParamStore::adam_step`] call.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParamStore {
    slots: BTreeMap<String, Slot>,
    step: u64,
}

/// Gradients keyed by parameter name.
pub type Gradients = BTreeMap<String, Tensor>;

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Inserts or replaces a parameter; its moments are reset.
    pub fn insert(&mut self, name: impl Into<String>, value: Tensor) {
        let n = value.len();
        self.slots.insert(
            name.into(),
            Slot {
                value,
                m: vec![0.0; n],
                v: vec![0.0; n],
            },
        );
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.slots.get(name).map(|s| &s.value)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Tensor> {
        self.slots.get_mut(name).map(|s| &mut s.value)
    }

    /// Parameter lookup that panics on a missing name; for internal model
    /// code where the key set is fixed at construction.
    pub fn expect(&self, name: &str) -> &Tensor {
        self.get(name)
            .unwrap_or_else(|| panic!("parameter `{name}` missing from store"))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.slots.keys().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.slots.iter().map(|(k, s)| (k.as_str(), &s.value))
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    pub fn num_scalars(&self) -> usize {
        self.slots.values().map(|s| s.value.len()).sum()
    }

    pub fn moments(&self, name: &str) -> Option<(&[f64], &[f64])> {
        self.slots.get(name).map(|s| (s.m.as_slice(), s.v.as_slice()))
    }

    /// Clears moments and the step counter, keeping parameter values.
    pub fn reset_optimizer(&mut self) {
        self.step = 0;
        for s in self.slots.values_mut() {
            s.m.iter_mut().for_each(|x| *x = 0.0);
            s.v.iter_mut().for_each(|x| *x = 0.0);
        }
    }

    /// One bias-corrected Adam update. Parameters without an entry in
    /// `grads` are left untouched, moments included.
    ///
    /// The whole gradient map is validated before anything is written, so a
    /// rejected call leaves the store unchanged.
    pub fn adam_step(&mut self, grads: &Gradients, lr: f64) -> Result<(), NnError> {
        for (name, g) in grads {
            let slot = self
                .slots
                .get(name)
                .ok_or_else(|| NnError::UnknownParameter(name.clone()))?;
            if slot.value.shape() != g.shape() {
                return Err(NnError::Shape {
                    layer: name.clone(),
                    detail: format!(
                        "gradient shape {:?} vs parameter shape {:?}",
                        g.shape(),
                        slot.value.shape()
                    ),
                });
            }
            if g.data().iter().any(|x| !x.is_finite()) {
                return Err(NnError::NonFiniteGradient {
                    param: name.clone(),
                });
            }
        }

        self.step += 1;
        let t = self.step as i32;
        let bc1 = 1.0 - ADAM_BETA1.powi(t);
        let bc2 = 1.0 - ADAM_BETA2.powi(t);
        for (name, g) in grads {
            let slot = self.slots.get_mut(name).expect("validated above");
            let Slot { value, m, v } = slot;
            for (((p, m), v), &g) in value
                .data_mut()
                .iter_mut()
                .zip(m.iter_mut())
                .zip(v.iter_mut())
                .zip(g.data())
            {
                *m = ADAM_BETA1 * *m + (1.0 - ADAM_BETA1) * g;
                *v = ADAM_BETA2 * *v + (1.0 - ADAM_BETA2) * g * g;
                let m_hat = *m / bc1;
                let v_hat = *v / bc2;
                *p -= lr * m_hat / (v_hat.sqrt() + ADAM_EPS);
            }
        }
        Ok(())
    }
}

/// Global L2 norm of a gradient map.
pub fn grad_norm(grads: &Gradients) -> f64 {
    grads
        .values()
        .flat_map(|t| t.data().iter())
        .map(|g| g * g)
        .sum::<f64>()
        .sqrt()
}

/// Rescales `grads` in place so their global norm is at most `max_norm`.
pub fn clip_grad_norm(grads: &mut Gradients, max_norm: f64) {
    let norm = grad_norm(grads);
    if norm > max_norm && norm > 0.0 {
        let scale = max_norm / norm;
        for t in grads.values_mut() {
            t.data_mut().iter_mut().for_each(|g| *g *= scale);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn store() -> ParamStore {
        let mut s = ParamStore::new();
        s.insert("a", Tensor::vector(vec![1.0, -2.0]));
        s.insert("b", Tensor::matrix(1, 2, vec![0.5, 0.25]));
        s
    }

    #[test]
    fn first_step_moves_by_lr() {
        let mut s = store();
        let mut g = Gradients::new();
        g.insert("a".into(), Tensor::vector(vec![1.0, -3.0]));
        s.adam_step(&g, 0.001).unwrap();
        let a = s.expect("a").data();
        assert!((a[0] - (1.0 - 0.001)).abs() < 1e-10);
        assert!((a[1] - (-2.0 + 0.001)).abs() < 1e-10);
        assert_eq!(s.step(), 1);
    }

    #[test]
    fn zero_gradient_is_fixed_point() {
        let mut s = store();
        let before = s.clone();
        let mut g = Gradients::new();
        g.insert("a".into(), Tensor::vector(vec![0.0, 0.0]));
        g.insert("b".into(), Tensor::matrix(1, 2, vec![0.0, 0.0]));
        for _ in 0..10 {
            s.adam_step(&g, 0.1).unwrap();
        }
        assert_eq!(s.expect("a"), before.expect("a"));
        assert_eq!(s.expect("b"), before.expect("b"));
    }

    #[test]
    fn absent_parameters_are_bit_identical() {
        let mut s = store();
        let b_before = s.expect("b").clone();
        let mut g = Gradients::new();
        g.insert("a".into(), Tensor::vector(vec![0.3, 0.7]));
        s.adam_step(&g, 0.01).unwrap();
        assert_eq!(s.expect("b").data(), b_before.data());
        assert_eq!(s.moments("b").unwrap().0, &[0.0, 0.0]);
    }

    #[test]
    fn nan_gradient_names_parameter() {
        let mut s = store();
        let before = s.clone();
        let mut g = Gradients::new();
        g.insert("b".into(), Tensor::matrix(1, 2, vec![f64::NAN, 0.0]));
        let err = s.adam_step(&g, 0.01).unwrap_err();
        assert_eq!(err, NnError::NonFiniteGradient { param: "b".into() });
        assert_eq!(s, before);
    }

    #[test]
    fn shape_and_unknown_errors() {
        let mut s = store();
        let mut g = Gradients::new();
        g.insert("a".into(), Tensor::vector(vec![0.0; 3]));
        assert!(matches!(s.adam_step(&g, 0.1), Err(NnError::Shape { .. })));
        let mut g = Gradients::new();
        g.insert("zzz".into(), Tensor::vector(vec![0.0]));
        assert!(matches!(
            s.adam_step(&g, 0.1),
            Err(NnError::UnknownParameter(_))
        ));
    }

    #[test]
    fn clipping_caps_norm() {
        let mut g = Gradients::new();
        g.insert("a".into(), Tensor::vector(vec![3.0, 4.0]));
        clip_grad_norm(&mut g, 1.0);
        assert!((grad_norm(&g) - 1.0).abs() < 1e-12);
    }
}
