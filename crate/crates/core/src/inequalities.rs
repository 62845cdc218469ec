//! Dichotomy-type integral inequalities and the Bellman growth bound.
//!
//! Forward form, for `t ∈ [0, s]`:
//! ```text
//! T(t) ≤ a₁ + a₂e^{−αt} + a₃∫₀ᵗ e^{−α(t−τ)}T(τ)dτ + a₄∫ₜˢ e^{−α(τ−t)}T(τ)dτ
//!   ⇒  T(t) ≤ (1−ϖ)⁻¹(a₁ + a₂e^{−α₁t}),   ϖ = (a₃+a₄)/α,  α₁ = α − a₃/(1−ϖ).
//! ```
//! The backward form on `[s, 0]` is its reflection `t ↦ −t`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operators::GrowthBounds;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DichotomyIneqParams {
    pub a1: f64,
    pub a2: f64,
    pub a3: f64,
    pub a4: f64,
    pub alpha: f64,
    /// `|s|`; `None` stands for an infinite horizon.
    #[serde(default)]
    pub horizon: Option<f64>,
}

impl DichotomyIneqParams {
    pub fn new(a1: f64, a2: f64, a3: f64, a4: f64, alpha: f64) -> Result<Self> {
        let p = Self {
            a1,
            a2,
            a3,
            a4,
            alpha,
            horizon: None,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_horizon(mut self, s: f64) -> Self {
        self.horizon = Some(s.abs());
        self
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.a1, self.a2, self.a3, self.a4];
        if all.iter().any(|a| !(*a >= 0.0 && a.is_finite())) {
            return Err(Error::Input(format!("a_i must be finite and non-negative: {all:?}")));
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::Input(format!("alpha = {} must be positive", self.alpha)));
        }
        if let Some(s) = self.horizon {
            if !(s > 0.0) {
                return Err(Error::Input(format!("horizon {s} must be positive")));
            }
        }
        Ok(())
    }

    /// `ϖ = (a₃ + a₄)/α`.
    pub fn varpi(&self) -> f64 {
        (self.a3 + self.a4) / self.alpha
    }

    /// `α₁ = α − a₃(1−ϖ)⁻¹`.
    pub fn alpha1(&self) -> f64 {
        self.alpha - self.a3 / (1.0 - self.varpi())
    }

    pub fn in_regime(&self) -> bool {
        self.a3 + self.a4 < self.alpha
    }

    /// Set when `α₁ ≤ 0`: the bound is still evaluated but no longer decays.
    pub fn alpha1_flagged(&self) -> bool {
        self.alpha1() <= 0.0
    }

    fn require_regime(&self) -> Result<()> {
        self.validate()?;
        if self.in_regime() {
            Ok(())
        } else {
            Err(Error::Precondition(format!(
                "a3 + a4 < alpha fails: {} + {} >= {}",
                self.a3, self.a4, self.alpha
            )))
        }
    }

    fn bound(&self, t_abs: f64) -> f64 {
        (self.a1 + self.a2 * (-self.alpha1() * t_abs).exp()) / (1.0 - self.varpi())
    }
}

/// `(1−ϖ)⁻¹(a₁ + a₂e^{−α₁t})` for `t ≥ 0`.
pub fn dichotomy_bound_forward(p: &DichotomyIneqParams, t: f64) -> Result<f64> {
    p.require_regime()?;
    if t < 0.0 || p.horizon.is_some_and(|s| t > s * (1.0 + 1e-12)) {
        return Err(Error::Input(format!("t = {t} outside [0, s]")));
    }
    Ok(p.bound(t))
}

/// `(1−ϖ)⁻¹(a₁ + a₂e^{α₁t})` for `t ≤ 0`.
pub fn dichotomy_bound_backward(p: &DichotomyIneqParams, t: f64) -> Result<f64> {
    p.require_regime()?;
    if t > 0.0 || p.horizon.is_some_and(|s| -t > s * (1.0 + 1e-12)) {
        return Err(Error::Input(format!("t = {t} outside [s, 0]")));
    }
    Ok(p.bound(-t))
}

/// `M_c (du + dv) e^{(M_c|f|_Lip + ω_c)t}`.
pub fn bellman_growth_bound(growth: &GrowthBounds, f_lip: f64, du: f64, dv: f64, t: f64) -> Result<f64> {
    if t < 0.0 {
        return Err(Error::Input(format!("t = {t} must be non-negative")));
    }
    Ok(growth.m_c * (du + dv) * ((growth.m_c * f_lip + growth.omega_c) * t).exp())
}

/// Weights of `∫₀ʰ e^{−α(h−σ)} T(σ) dσ ≈ w₀T(0) + w₁T(h)`, exact for linear `T`.
fn fitted_weights(alpha: f64, h: f64) -> (f64, f64, f64) {
    let x = alpha * h;
    let decay = (-x).exp();
    // (1 − e^{−x})/x, with a series near 0.
    let phi = if x < 1e-6 { 1.0 - x / 2.0 + x * x / 6.0 } else { (1.0 - decay) / x };
    let w1 = (1.0 - phi) / alpha;
    let w0 = (phi - decay) / alpha;
    (decay, w0, w1)
}

/// Right side of the forward hypothesis on the sample grid `0 = t₀ < … < t_N`
/// (the last node is taken as `s`). Integrals use the exponentially fitted
/// trapezoid rule, exact for piecewise linear `T`.
pub fn hypothesis_rhs(times: &[f64], values: &[f64], p: &DichotomyIneqParams) -> Result<Vec<f64>> {
    check_grid(times, values)?;
    let n = times.len();
    let mut past = vec![0.0; n];
    let mut future = vec![0.0; n];
    for k in 1..n {
        let (d, w0, w1) = fitted_weights(p.alpha, times[k] - times[k - 1]);
        past[k] = d * past[k - 1] + w0 * values[k - 1] + w1 * values[k];
    }
    for k in (0..n.saturating_sub(1)).rev() {
        let (d, w0, w1) = fitted_weights(p.alpha, times[k + 1] - times[k]);
        future[k] = d * future[k + 1] + w1 * values[k] + w0 * values[k + 1];
    }
    Ok((0..n)
        .map(|k| p.a1 + p.a2 * (-p.alpha * times[k]).exp() + p.a3 * past[k] + p.a4 * future[k])
        .collect())
}

fn check_grid(times: &[f64], values: &[f64]) -> Result<()> {
    if times.is_empty() || times.len() != values.len() {
        return Err(Error::Input("sample grid and values must be nonempty and of equal length".into()));
    }
    if times[0] != 0.0 {
        return Err(Error::Input("forward sample grid must start at t = 0".into()));
    }
    if times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Input("sample grid must be strictly increasing".into()));
    }
    Ok(())
}

/// Extremal test function: Picard iteration of the hypothesis' right side
/// from `T ≡ 0`. Converges because the integral part contracts by `ϖ < 1`.
pub fn synthesize_extremal(times: &[f64], p: &DichotomyIneqParams, tol: f64) -> Result<Vec<f64>> {
    p.require_regime()?;
    let mut t = vec![0.0; times.len()];
    let mut history = Vec::new();
    loop {
        let next = hypothesis_rhs(times, &t, p)?;
        let diff = next
            .iter()
            .zip(&t)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        t = next;
        history.push(diff);
        if diff < tol {
            return Ok(t);
        }
        if history.len() >= 10_000 {
            return Err(Error::Convergence {
                iterations: history.len(),
                residual: diff,
                history,
            });
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImplicationReport {
    /// `min (rhs − T)` over the grid; the hypothesis holds when this is `≥ −tol`.
    pub hypothesis_slack: f64,
    /// `min (bound − T)` over the grid.
    pub conclusion_slack: f64,
    pub hypothesis_holds: bool,
    pub conclusion_holds: bool,
    /// Hypothesis true but conclusion false: a counterexample to the implication.
    pub refuted: bool,
    /// Hypothesis false, so the conclusion carries no information.
    pub vacuous: bool,
    pub alpha1_flagged: bool,
}

/// Checks hypothesis and conclusion of the forward inequality on samples
/// `T(t_k)` with `0 = t₀ < … < t_N = s`. The hypothesis is accepted up to a
/// relative tolerance `tol·(1 + |rhs|)`, the conclusion up to `tol·(1 + bound)`.
pub fn check_implication(
    times: &[f64],
    values: &[f64],
    p: &DichotomyIneqParams,
    tol: f64,
) -> Result<ImplicationReport> {
    p.require_regime()?;
    let rhs = hypothesis_rhs(times, values, p)?;
    let (mut hyp, mut con) = (f64::INFINITY, f64::INFINITY);
    let (mut hyp_ok, mut con_ok) = (true, true);
    for k in 0..times.len() {
        let hs = rhs[k] - values[k];
        let b = p.bound(times[k]);
        let cs = b - values[k];
        hyp = hyp.min(hs);
        con = con.min(cs);
        hyp_ok &= hs >= -tol * (1.0 + rhs[k].abs());
        con_ok &= cs >= -tol * (1.0 + b.abs());
    }
    Ok(ImplicationReport {
        hypothesis_slack: hyp,
        conclusion_slack: con,
        hypothesis_holds: hyp_ok,
        conclusion_holds: con_ok,
        refuted: hyp_ok && !con_ok,
        vacuous: !hyp_ok,
        alpha1_flagged: p.alpha1_flagged(),
    })
}

fn reflect(times: &[f64], values: &[f64]) -> (Vec<f64>, Vec<f64>) {
    (
        times.iter().rev().map(|t| -t).collect(),
        values.iter().rev().cloned().collect(),
    )
}

/// Backward counterpart on samples `s = t₀ < … < t_N = 0`.
pub fn check_implication_backward(
    times: &[f64],
    values: &[f64],
    p: &DichotomyIneqParams,
    tol: f64,
) -> Result<ImplicationReport> {
    let (t, v) = reflect(times, values);
    check_implication(&t, &v, p, tol)
}

/// Backward extremal function on `s = t₀ < … < t_N = 0`.
pub fn synthesize_extremal_backward(times: &[f64], p: &DichotomyIneqParams, tol: f64) -> Result<Vec<f64>> {
    let (t, _) = reflect(times, &vec![0.0; times.len()]);
    let mut v = synthesize_extremal(&t, p, tol)?;
    v.reverse();
    Ok(v)
}

/// One CSV record of an implication sweep.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ImplicationRow {
    pub a1: f64,
    pub a2: f64,
    pub a3: f64,
    pub a4: f64,
    pub alpha: f64,
    pub horizon: f64,
    pub direction: String,
    pub hypothesis_slack: f64,
    pub conclusion_slack: f64,
    pub pass: bool,
}

impl ImplicationRow {
    pub fn new(p: &DichotomyIneqParams, direction: &str, r: &ImplicationReport) -> Self {
        Self {
            a1: p.a1,
            a2: p.a2,
            a3: p.a3,
            a4: p.a4,
            alpha: p.alpha,
            horizon: p.horizon.unwrap_or(f64::INFINITY),
            direction: direction.into(),
            hypothesis_slack: r.hypothesis_slack,
            conclusion_slack: r.conclusion_slack,
            pass: !r.refuted,
        }
    }
}
