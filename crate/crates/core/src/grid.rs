//! Uniform time grids and exponentially weighted Simpson quadrature.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform grid `t_k = k·step` for `k = lo..=hi`, with `lo ≤ 0 ≤ hi`, so the
/// grid always contains `t = 0`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    step: f64,
    lo: i64,
    hi: i64,
}

impl TimeGrid {
    pub fn new(step: f64, lo: i64, hi: i64) -> Result<Self> {
        if !(step > 0.0) || !step.is_finite() {
            return Err(Error::Input(format!("grid step {step} must be positive")));
        }
        if lo > 0 || hi < 0 {
            return Err(Error::Input(format!("grid index range {lo}..={hi} must contain 0")));
        }
        Ok(Self { step, lo, hi })
    }

    /// Smallest grid with the given step covering `[t_min, t_max]`.
    pub fn covering(t_min: f64, t_max: f64, step: f64) -> Result<Self> {
        if t_min > 0.0 || t_max < 0.0 {
            return Err(Error::Input(format!(
                "interval [{t_min}, {t_max}] must contain 0"
            )));
        }
        let lo = -((-t_min / step) - 1e-9).ceil().max(0.0) as i64;
        let hi = ((t_max / step) - 1e-9).ceil().max(0.0) as i64;
        Self::new(step, lo, hi)
    }

    pub fn step(&self) -> f64 {
        self.step
    }
    pub fn lo(&self) -> i64 {
        self.lo
    }
    pub fn hi(&self) -> i64 {
        self.hi
    }
    pub fn len(&self) -> usize {
        (self.hi - self.lo + 1) as usize
    }
    pub fn is_empty(&self) -> bool {
        false
    }

    /// Position of `t = 0` in [`times`](Self::times).
    pub fn zero_index(&self) -> usize {
        (-self.lo) as usize
    }

    pub fn time(&self, index: usize) -> f64 {
        (self.lo + index as i64) as f64 * self.step
    }

    pub fn times(&self) -> Vec<f64> {
        (self.lo..=self.hi).map(|k| k as f64 * self.step).collect()
    }

    /// Index of the node equal to `t`, if `t` is a node to within `1e-9·step`.
    pub fn index_of(&self, t: f64) -> Option<usize> {
        let k = (t / self.step).round();
        if (k * self.step - t).abs() > 1e-9 * self.step.max(t.abs()) {
            return None;
        }
        let k = k as i64;
        (self.lo..=self.hi).contains(&k).then(|| (k - self.lo) as usize)
    }

    /// Same step, index range extended to include `[lo, hi]`.
    pub fn extended(&self, lo: i64, hi: i64) -> Self {
        Self {
            step: self.step,
            lo: self.lo.min(lo),
            hi: self.hi.max(hi),
        }
    }
}

/// Cumulative exponentially weighted integrals
/// `c[k] = ∫_0^{τ_k} e^{μ(τ_k − σ)} f(σ) dσ` on a uniform grid `τ_k = k·h`.
///
/// Nodes `2..` use the two-panel Simpson recursion
/// `c[k] = e^{2μh} c[k−2] + h/3 (e^{2μh} f[k−2] + 4 e^{μh} f[k−1] + f[k])`;
/// the first panel uses the cubic rule `h/24 (9 g₀ + 19 g₁ − 5 g₂ + g₃)`.
/// Entries below `from` are taken as already final.
pub(crate) fn exp_cumulative(mu: f64, h: f64, f: &[f64], c: &mut [f64], from: usize) {
    let n = f.len();
    debug_assert_eq!(c.len(), n);
    if n == 0 {
        return;
    }
    let e1 = (mu * h).exp();
    let e2 = e1 * e1;
    if from == 0 {
        c[0] = 0.0;
    }
    if n >= 2 && from <= 1 {
        c[1] = if n >= 4 {
            h / 24.0 * (9.0 * e1 * f[0] + 19.0 * f[1] - 5.0 * f[2] / e1 + f[3] / e2)
        } else if n == 3 {
            h / 12.0 * (5.0 * e1 * f[0] + 8.0 * f[1] - f[2] / e1)
        } else {
            0.5 * h * (e1 * f[0] + f[1])
        };
    }
    for k in from.max(2)..n {
        c[k] = e2 * c[k - 2] + h / 3.0 * (e2 * f[k - 2] + 4.0 * e1 * f[k - 1] + f[k]);
    }
}

/// Composite Simpson weights for `n` nodes with spacing `h` (`n` odd gives
/// the classic rule; for even `n` the last panel is closed with the
/// three-point end correction).
pub(crate) fn simpson_weights(n: usize, h: f64) -> Vec<f64> {
    let mut w = vec![0.0; n];
    match n {
        0 | 1 => {}
        2 => {
            w[0] = 0.5 * h;
            w[1] = 0.5 * h;
        }
        _ => {
            let m = if n % 2 == 1 { n } else { n - 1 };
            for i in 0..m {
                w[i] = if i == 0 || i == m - 1 {
                    h / 3.0
                } else if i % 2 == 1 {
                    4.0 * h / 3.0
                } else {
                    2.0 * h / 3.0
                };
            }
            if m < n {
                // last panel from the parabola through the final three nodes
                w[n - 3] -= h / 12.0;
                w[n - 2] += 8.0 * h / 12.0;
                w[n - 1] += 5.0 * h / 12.0;
            }
        }
    }
    w
}
