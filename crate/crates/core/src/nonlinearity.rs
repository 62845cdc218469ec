//! Nonlinear terms `f : X × Y → X`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::norm;

pub trait Nonlinearity: Send + Sync + fmt::Debug {
    fn x_dim(&self) -> usize;
    fn y_dim(&self) -> usize;

    /// Writes `f(x, y)` into `out` (length `x_dim`).
    fn eval_into(&self, x: &[f64], y: &[f64], out: &mut [f64]);

    fn eval(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.x_dim()];
        self.eval_into(x, y, &mut out);
        out
    }

    /// True when `f ≡ 0`; lets flows skip fixed-point iterations entirely.
    fn is_zero(&self) -> bool {
        false
    }
}

#[derive(Clone, Debug)]
pub struct Zero {
    pub x_dim: usize,
    pub y_dim: usize,
}

impl Nonlinearity for Zero {
    fn x_dim(&self) -> usize {
        self.x_dim
    }
    fn y_dim(&self) -> usize {
        self.y_dim
    }
    fn eval_into(&self, _x: &[f64], _y: &[f64], out: &mut [f64]) {
        out.fill(0.0);
    }
    fn is_zero(&self) -> bool {
        true
    }
}

/// `f(x, y) = c`.
#[derive(Clone, Debug)]
pub struct Constant {
    pub value: Vec<f64>,
    pub y_dim: usize,
}

impl Nonlinearity for Constant {
    fn x_dim(&self) -> usize {
        self.value.len()
    }
    fn y_dim(&self) -> usize {
        self.y_dim
    }
    fn eval_into(&self, _x: &[f64], _y: &[f64], out: &mut [f64]) {
        out.copy_from_slice(&self.value);
    }
    fn is_zero(&self) -> bool {
        self.value.iter().all(|v| *v == 0.0)
    }
}

/// One term `scale · tanh(⟨a, x⟩ + ⟨b, y⟩ + shift) · output`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SaturationTerm {
    pub scale: f64,
    pub coupling_x: Vec<f64>,
    pub coupling_y: Vec<f64>,
    #[serde(default)]
    pub shift: f64,
    pub output: Vec<f64>,
}

impl SaturationTerm {
    /// Zero couplings are skipped, so coordinates that have overflowed to
    /// `±∞` never contaminate the argument through `0 · ∞`.
    #[inline]
    fn argument(&self, x: &[f64], y: &[f64]) -> f64 {
        let mut s = self.shift;
        for (a, xi) in self.coupling_x.iter().zip(x) {
            if *a != 0.0 {
                s += a * xi;
            }
        }
        for (b, yi) in self.coupling_y.iter().zip(y) {
            if *b != 0.0 {
                s += b * yi;
            }
        }
        s
    }

    pub fn sup_bound(&self) -> f64 {
        self.scale.abs() * norm(&self.output)
    }

    /// Lipschitz constant with respect to `|Δx| + |Δy|`.
    pub fn lip_bound(&self) -> f64 {
        self.scale.abs() * norm(&self.coupling_x).max(norm(&self.coupling_y)) * norm(&self.output)
    }
}

/// Sum of smooth saturations: bounded and globally Lipschitz.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Saturation {
    pub terms: Vec<SaturationTerm>,
}

impl Saturation {
    pub fn new(terms: Vec<SaturationTerm>) -> Result<Self> {
        let first = terms
            .first()
            .ok_or_else(|| Error::Config("saturation needs at least one term".into()))?;
        let (xd, yd) = (first.output.len(), first.coupling_y.len());
        for t in &terms {
            if t.coupling_x.len() != xd || t.output.len() != xd || t.coupling_y.len() != yd {
                return Err(Error::Config(
                    "saturation terms disagree on state dimensions".into(),
                ));
            }
        }
        Ok(Self { terms })
    }

    pub fn sup_bound(&self) -> f64 {
        self.terms.iter().map(SaturationTerm::sup_bound).sum()
    }

    pub fn lip_bound(&self) -> f64 {
        self.terms.iter().map(SaturationTerm::lip_bound).sum()
    }
}

impl Nonlinearity for Saturation {
    fn x_dim(&self) -> usize {
        self.terms[0].output.len()
    }
    fn y_dim(&self) -> usize {
        self.terms[0].coupling_y.len()
    }
    fn eval_into(&self, x: &[f64], y: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        for term in &self.terms {
            let s = term.scale * term.argument(x, y).tanh();
            if s != 0.0 {
                for (o, c) in out.iter_mut().zip(&term.output) {
                    *o += s * c;
                }
            }
        }
    }
    fn is_zero(&self) -> bool {
        self.terms.iter().all(|t| t.scale == 0.0)
    }
}

/// `c·(x₀² + y₀²)·e`: vanishes to second order at the origin and is only
/// locally Lipschitz, with modulus `2c·max(|x|, |y|)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Quadratic {
    pub coefficient: f64,
    pub output: Vec<f64>,
    pub y_dim: usize,
}

impl Nonlinearity for Quadratic {
    fn x_dim(&self) -> usize {
        self.output.len()
    }
    fn y_dim(&self) -> usize {
        self.y_dim
    }
    fn eval_into(&self, x: &[f64], y: &[f64], out: &mut [f64]) {
        let x0 = x.first().copied().unwrap_or(0.0);
        let y0 = y.first().copied().unwrap_or(0.0);
        let s = self.coefficient * (x0 * x0 + y0 * y0);
        for (o, e) in out.iter_mut().zip(&self.output) {
            *o = s * e;
        }
    }
    fn is_zero(&self) -> bool {
        self.coefficient == 0.0
    }
}

type BoxedFn = Box<dyn Fn(&[f64], &[f64], &mut [f64]) + Send + Sync>;

/// Closure-backed nonlinearity, mostly for experiments and tests.
pub struct FnNonlinearity {
    x_dim: usize,
    y_dim: usize,
    f: BoxedFn,
}

impl FnNonlinearity {
    pub fn new(
        x_dim: usize,
        y_dim: usize,
        f: impl Fn(&[f64], &[f64], &mut [f64]) + Send + Sync + 'static,
    ) -> Self {
        Self {
            x_dim,
            y_dim,
            f: Box::new(f),
        }
    }
}

impl fmt::Debug for FnNonlinearity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FnNonlinearity")
            .field("x_dim", &self.x_dim)
            .field("y_dim", &self.y_dim)
            .finish_non_exhaustive()
    }
}

impl Nonlinearity for FnNonlinearity {
    fn x_dim(&self) -> usize {
        self.x_dim
    }
    fn y_dim(&self) -> usize {
        self.y_dim
    }
    fn eval_into(&self, x: &[f64], y: &[f64], out: &mut [f64]) {
        (self.f)(x, y, out)
    }
}
