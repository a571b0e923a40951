//! Scalar reverse-mode tape.
//!
//! Every primitive executed during a forward pass appends one node holding
//! its value and the indices of its operands. [`Tape::backward`] walks the
//! node list once, last to first, accumulating adjoints, and folds the
//! adjoints of parameter leaves back into named tensors.

use std::collections::BTreeMap;

use super::activation::{sigmoid, softplus};
use super::params::{Gradients, ParamStore};
use super::tensor::Tensor;
use crate::error::NnError;

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    Neg(Var),
    Sigmoid(Var),
    Softplus(Var),
    Exp(Var),
    Ln(Var),
    Square(Var),
    Sum(Vec<Var>),
    Dot(Vec<(Var, Var)>),
    LogSumExp(Vec<Var>),
}

#[derive(Debug, Clone)]
struct Node {
    value: f64,
    op: Op,
}

/// A parameter tensor materialised as tape leaves.
#[derive(Debug, Clone)]
pub struct ParamVars {
    shape: Vec<usize>,
    vars: Vec<Var>,
}

impl ParamVars {
    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn vars(&self) -> &[Var] {
        &self.vars
    }

    pub fn at(&self, i: usize) -> Var {
        self.vars[i]
    }

    pub fn at2(&self, r: usize, c: usize) -> Var {
        self.vars[r * self.shape[1] + c]
    }

    pub fn rows(&self) -> usize {
        self.shape[0]
    }

    pub fn cols(&self) -> usize {
        if self.shape.len() == 2 {
            self.shape[1]
        } else {
            1
        }
    }
}

/// Record of the primitive operations of one forward pass.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
    params: BTreeMap<String, ParamVars>,
    consumed: bool,
    visited: usize,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Number of nodes visited by the last backward pass.
    pub fn visited(&self) -> usize {
        self.visited
    }

    pub fn value(&self, v: Var) -> f64 {
        self.nodes[v.0].value
    }

    fn push(&mut self, value: f64, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    pub fn constant(&mut self, value: f64) -> Var {
        self.push(value, Op::Leaf)
    }

    pub fn constants(&mut self, values: &[f64]) -> Vec<Var> {
        values.iter().map(|&x| self.constant(x)).collect()
    }

    /// Registers a named parameter tensor as leaves whose adjoints are
    /// returned by [`Tape::backward`]. Registering the same name twice returns
    /// the existing leaves.
    pub fn param(&mut self, name: &str, value: &Tensor) -> ParamVars {
        if let Some(p) = self.params.get(name) {
            return p.clone();
        }
        let vars = value.data().iter().map(|&x| self.constant(x)).collect();
        let p = ParamVars {
            shape: value.shape().to_vec(),
            vars,
        };
        self.params.insert(name.to_string(), p.clone());
        p
    }

    /// Registers every parameter of `store` whose name starts with `prefix`.
    pub fn params_from(&mut self, store: &ParamStore, prefix: &str) -> BTreeMap<String, ParamVars> {
        store
            .iter()
            .filter(|(k, _)| k.starts_with(prefix))
            .map(|(k, t)| (k.to_string(), self.param(k, t)))
            .collect()
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a) + self.value(b);
        self.push(v, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a) - self.value(b);
        self.push(v, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a) * self.value(b);
        self.push(v, Op::Mul(a, b))
    }

    pub fn scale(&mut self, a: Var, k: f64) -> Var {
        let v = self.value(a) * k;
        self.push(v, Op::Scale(a, k))
    }

    pub fn neg(&mut self, a: Var) -> Var {
        let v = -self.value(a);
        self.push(v, Op::Neg(a))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let v = sigmoid(self.value(a));
        self.push(v, Op::Sigmoid(a))
    }

    pub fn softplus(&mut self, a: Var) -> Var {
        let v = softplus(self.value(a));
        self.push(v, Op::Softplus(a))
    }

    pub fn exp(&mut self, a: Var) -> Var {
        let v = self.value(a).exp();
        self.push(v, Op::Exp(a))
    }

    pub fn ln(&mut self, a: Var) -> Var {
        let v = self.value(a).ln();
        self.push(v, Op::Ln(a))
    }

    pub fn square(&mut self, a: Var) -> Var {
        let x = self.value(a);
        self.push(x * x, Op::Square(a))
    }

    pub fn sum(&mut self, xs: &[Var]) -> Var {
        let v = xs.iter().map(|&x| self.value(x)).sum();
        self.push(v, Op::Sum(xs.to_vec()))
    }

    pub fn dot(&mut self, a: &[Var], b: &[Var]) -> Var {
        debug_assert_eq!(a.len(), b.len());
        let pairs: Vec<(Var, Var)> = a.iter().copied().zip(b.iter().copied()).collect();
        let v = pairs
            .iter()
            .map(|&(x, y)| self.value(x) * self.value(y))
            .sum();
        self.push(v, Op::Dot(pairs))
    }

    /// `ln Σ exp(x_i)` with max subtraction.
    pub fn log_sum_exp(&mut self, xs: &[Var]) -> Var {
        let m = xs
            .iter()
            .map(|&x| self.value(x))
            .fold(f64::NEG_INFINITY, f64::max);
        let s: f64 = xs.iter().map(|&x| (self.value(x) - m).exp()).sum();
        self.push(m + s.ln(), Op::LogSumExp(xs.to_vec()))
    }

    /// Reverse pass seeded with `d output / d output = seed`.
    pub fn backward(&mut self, output: Var, seed: f64) -> Result<Gradients, NnError> {
        self.backward_multi(&[(output, seed)])
    }

    /// Reverse pass for a vector-valued output: each `(var, g)` seeds the
    /// adjoint of `var` with `g`.
    ///
    /// A tape can be consumed once; a second call fails with
    /// [`NnError::TapeConsumed`].
    pub fn backward_multi(&mut self, seeds: &[(Var, f64)]) -> Result<Gradients, NnError> {
        if self.consumed {
            return Err(NnError::TapeConsumed);
        }
        self.consumed = true;
        let mut adj = vec![0.0; self.nodes.len()];
        for &(v, g) in seeds {
            adj[v.0] += g;
        }
        let mut visited = 0;
        for i in (0..self.nodes.len()).rev() {
            visited += 1;
            let g = adj[i];
            if g == 0.0 {
                continue;
            }
            let node_value = self.nodes[i].value;
            match &self.nodes[i].op {
                Op::Leaf => {}
                Op::Add(a, b) => {
                    adj[a.0] += g;
                    adj[b.0] += g;
                }
                Op::Sub(a, b) => {
                    adj[a.0] += g;
                    adj[b.0] -= g;
                }
                Op::Mul(a, b) => {
                    let (va, vb) = (self.nodes[a.0].value, self.nodes[b.0].value);
                    adj[a.0] += g * vb;
                    adj[b.0] += g * va;
                }
                Op::Scale(a, k) => adj[a.0] += g * k,
                Op::Neg(a) => adj[a.0] -= g,
                Op::Sigmoid(a) => adj[a.0] += g * node_value * (1.0 - node_value),
                Op::Softplus(a) => adj[a.0] += g * sigmoid(self.nodes[a.0].value),
                Op::Exp(a) => adj[a.0] += g * node_value,
                Op::Ln(a) => adj[a.0] += g / self.nodes[a.0].value,
                Op::Square(a) => adj[a.0] += g * 2.0 * self.nodes[a.0].value,
                Op::Sum(xs) => {
                    for x in xs {
                        adj[x.0] += g;
                    }
                }
                Op::Dot(pairs) => {
                    for &(x, y) in pairs {
                        let (vx, vy) = (self.nodes[x.0].value, self.nodes[y.0].value);
                        adj[x.0] += g * vy;
                        adj[y.0] += g * vx;
                    }
                }
                Op::LogSumExp(xs) => {
                    for x in xs {
                        adj[x.0] += g * (self.nodes[x.0].value - node_value).exp();
                    }
                }
            }
        }
        self.visited = visited;

        let mut grads = Gradients::new();
        for (name, p) in &self.params {
            let data = p.vars.iter().map(|v| adj[v.0]).collect();
            let t = Tensor::from_shape(p.shape.clone(), data).expect("shape recorded at registration");
            grads.insert(name.clone(), t);
        }
        Ok(grads)
    }
}
