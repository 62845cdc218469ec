//! Semilinear systems, their mild solutions, and bounded solutions on half
//! lines and on the whole line.
//!
//! All Duhamel integrals are evaluated by exponentially weighted composite
//! Simpson quadrature on a uniform grid whose step never exceeds
//! `0.01 / max(α, ω_c)`. Fixed points are found by Picard iteration.

use std::fmt::Write as _;
use std::io;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{exp_cumulative, TimeGrid};
use crate::nonlinearity::Nonlinearity;
use crate::operators::{exp_scale, DichotomySpec, GrowthBounds, Side, SpectralGenerator};
use crate::{dist, norm};

/// Tail tolerance used for the horizon of half-axis fixed points.
pub const HALFAXIS_TAIL_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PicardOptions {
    /// Stop once successive iterates differ by less than this in sup norm.
    pub tol: f64,
    pub max_iter: usize,
    /// Constant added to every coordinate of the starting guess.
    #[serde(default)]
    pub start_offset: f64,
}

impl Default for PicardOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 200,
            start_offset: 0.0,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SolveStats {
    /// Largest iteration count over all fixed-point solves involved.
    pub iterations: usize,
    /// Largest final residual.
    pub residual: f64,
    /// Residual history of the first solve.
    pub history: Vec<f64>,
}

impl SolveStats {
    fn absorb(&mut self, iterations: usize, residual: f64, history: &[f64]) {
        if self.history.is_empty() {
            self.history = history.to_vec();
        }
        self.iterations = self.iterations.max(iterations);
        self.residual = self.residual.max(residual);
    }
}

/// `u₁' = A u₁ + f(u₁, u₂)`, `u₂' = B u₂` together with its linear part.
#[derive(Clone, Debug)]
pub struct SemilinearSystem {
    name: String,
    gen_a: SpectralGenerator,
    dichotomy: DichotomySpec,
    gen_b: SpectralGenerator,
    y_stable: Vec<usize>,
    f: Arc<dyn Nonlinearity>,
    f_sup: f64,
    f_lip: f64,
    growth: GrowthBounds,
    gate: GateRule,
    tags: Vec<String>,
}

/// How the spectral-gap gate is evaluated.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GateRule {
    /// `4 k |f|_Lip / α < 1`.
    #[default]
    Standard,
    /// `|f|_Lip < 1`, for systems normalized so that `4kα⁻¹ = 1`.
    Normalized,
}

impl SemilinearSystem {
    /// The stable part of `Y` defaults to the coordinates with `λ_B ≤ 0`.
    pub fn new(
        name: impl Into<String>,
        gen_a: SpectralGenerator,
        dichotomy: DichotomySpec,
        gen_b: SpectralGenerator,
        f: Arc<dyn Nonlinearity>,
        f_sup: f64,
        f_lip: f64,
    ) -> Result<Self> {
        Error::check_dim(gen_a.dimension(), dichotomy.dimension())?;
        Error::check_dim(gen_a.dimension(), f.x_dim())?;
        Error::check_dim(gen_b.dimension(), f.y_dim())?;
        dichotomy.consistent_with(&gen_a)?;
        if !(f_sup >= 0.0 && f_sup.is_finite() && f_lip >= 0.0 && f_lip.is_finite()) {
            return Err(Error::Input(format!(
                "f_sup = {f_sup} and f_lip = {f_lip} must be finite and non-negative"
            )));
        }
        let y_stable = (0..gen_b.dimension())
            .filter(|&i| gen_b.eigenvalues()[i] <= 0.0)
            .collect();
        let growth = GrowthBounds::from_generators(&gen_a, &gen_b);
        Ok(Self {
            name: name.into(),
            gen_a,
            dichotomy,
            gen_b,
            y_stable,
            f,
            f_sup,
            f_lip,
            growth,
            gate: GateRule::Standard,
            tags: Vec::new(),
        })
    }

    pub fn with_y_stable(mut self, mut indices: Vec<usize>) -> Result<Self> {
        indices.sort_unstable();
        indices.dedup();
        if let Some(&bad) = indices.iter().find(|&&i| i >= self.gen_b.dimension()) {
            return Err(Error::Input(format!("Y index {bad} out of range")));
        }
        self.y_stable = indices;
        Ok(self)
    }

    pub fn with_gate_rule(mut self, gate: GateRule) -> Self {
        self.gate = gate;
        self
    }

    pub fn gate_rule(&self) -> GateRule {
        self.gate
    }

    pub fn with_tag(mut self, tag: impl Into<String>) -> Self {
        self.tags.push(tag.into());
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }
    pub fn gen_a(&self) -> &SpectralGenerator {
        &self.gen_a
    }
    pub fn dichotomy(&self) -> &DichotomySpec {
        &self.dichotomy
    }
    pub fn gen_b(&self) -> &SpectralGenerator {
        &self.gen_b
    }
    pub fn nonlinearity(&self) -> &Arc<dyn Nonlinearity> {
        &self.f
    }
    pub fn f_sup(&self) -> f64 {
        self.f_sup
    }
    pub fn f_lip(&self) -> f64 {
        self.f_lip
    }
    pub fn growth(&self) -> &GrowthBounds {
        &self.growth
    }
    pub fn tags(&self) -> &[String] {
        &self.tags
    }
    pub fn x_dim(&self) -> usize {
        self.gen_a.dimension()
    }
    pub fn y_dim(&self) -> usize {
        self.gen_b.dimension()
    }
    pub fn k(&self) -> f64 {
        self.dichotomy.k()
    }
    pub fn alpha(&self) -> f64 {
        self.dichotomy.alpha()
    }

    /// Coordinates of `P₊Y` (stable side) or `P₋Y` (unstable side).
    pub fn y_indices(&self, side: Side) -> Vec<usize> {
        match side {
            Side::Stable => self.y_stable.clone(),
            Side::Unstable => (0..self.y_dim())
                .filter(|i| !self.y_stable.contains(i))
                .collect(),
        }
    }

    /// `sup |e^{Bt}|` on `P₊Y` over `t ≥ 0` (resp. on `P₋Y` over `t ≤ 0`).
    pub fn m_b(&self, side: Side) -> f64 {
        let ev = self.gen_b.eigenvalues();
        let bounded = self.y_indices(side).iter().all(|&i| match side {
            Side::Stable => ev[i] <= 0.0,
            Side::Unstable => ev[i] >= 0.0,
        });
        if bounded {
            1.0
        } else {
            f64::INFINITY
        }
    }

    /// `4 k |f|_Lip / α` (or `|f|_Lip` under the normalized rule); the
    /// conjugacy needs this below 1.
    pub fn gap_ratio(&self) -> f64 {
        match self.gate {
            GateRule::Standard => 4.0 * self.k() * self.f_lip / self.alpha(),
            GateRule::Normalized => self.f_lip,
        }
    }

    /// Half the gap ratio: `2 k |f|_Lip / α`, the contraction factor of the
    /// Green convolution.
    pub fn contraction_ratio(&self) -> f64 {
        self.gap_ratio() / 2.0
    }

    pub fn gate_inequality(&self) -> &'static str {
        match self.gate {
            GateRule::Standard => "4·k·f_lip/alpha < 1",
            GateRule::Normalized => "f_lip < 1 (normalized 4·k/alpha = 1)",
        }
    }

    pub fn check_gap(&self) -> Result<()> {
        let g = self.gap_ratio();
        if g < 1.0 {
            Ok(())
        } else {
            Err(Error::Precondition(format!(
                "spectral gap {} fails for {}: k = {}, f_lip = {}, alpha = {}, ratio = {g}",
                self.gate_inequality(),
                self.name,
                self.k(),
                self.f_lip,
                self.alpha()
            )))
        }
    }

    /// `2·k·f_lip/α < 1`, needed by the half-axis fixed points.
    pub fn check_half_gap(&self) -> Result<()> {
        let g = self.contraction_ratio();
        if g < 1.0 {
            Ok(())
        } else {
            Err(Error::Precondition(format!(
                "2·k·f_lip/alpha < 1 fails for {}: {g}",
                self.name
            )))
        }
    }

    /// Largest admissible quadrature step, `0.01 / max(α, ω_c)`.
    pub fn default_step(&self) -> f64 {
        0.01 / self.alpha().max(self.growth.omega_c)
    }

    /// `T* = α⁻¹ ln(2k|f|_∞ / (α·tail))`, beyond which Green-kernel tails
    /// are below `tail`. `None` when `f ≡ 0` (nothing to truncate).
    pub fn tail_horizon(&self, tail: f64) -> Option<f64> {
        if self.f_sup == 0.0 || self.f.is_zero() {
            return None;
        }
        let a = self.alpha();
        Some((2.0 * self.k() * self.f_sup / (a * tail)).ln().max(0.0) / a)
    }

    /// Stable identifier of the system definition (FNV-1a of its description).
    pub fn fingerprint(&self) -> String {
        let text = self.describe().to_string();
        let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
        for b in text.bytes() {
            hash ^= b as u64;
            hash = hash.wrapping_mul(0x0100_0000_01b3);
        }
        format!("{hash:016x}")
    }

    pub fn describe(&self) -> serde_json::Value {
        serde_json::json!({
            "name": self.name,
            "eigenvalues_a": self.gen_a.eigenvalues(),
            "stable_indices": self.dichotomy.stable_indices(),
            "k": self.k(),
            "alpha": self.alpha(),
            "eigenvalues_b": self.gen_b.eigenvalues(),
            "y_stable_indices": self.y_stable,
            "f_sup": self.f_sup,
            "f_lip": self.f_lip,
            "growth": self.growth,
            "gate_rule": self.gate,
            "tags": self.tags,
        })
    }

    /// Samples `|f|` and difference quotients of `f` in a ball of the given
    /// radius. Returns `(max |f|, max quotient)`.
    pub fn spot_check(&self, samples: usize, radius: f64, seed: u64) -> (f64, f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let draw = |n: usize, rng: &mut ChaCha8Rng| -> Vec<f64> {
            (0..n).map(|_| rng.gen_range(-radius..=radius)).collect()
        };
        let (mut sup, mut lip) = (0.0f64, 0.0f64);
        for _ in 0..samples {
            let (x1, y1) = (draw(self.x_dim(), &mut rng), draw(self.y_dim(), &mut rng));
            let (x2, y2) = (draw(self.x_dim(), &mut rng), draw(self.y_dim(), &mut rng));
            let f1 = self.f.eval(&x1, &y1);
            let f2 = self.f.eval(&x2, &y2);
            sup = sup.max(norm(&f1)).max(norm(&f2));
            let d = dist(&x1, &x2) + dist(&y1, &y2);
            if d > 0.0 {
                lip = lip.max(dist(&f1, &f2) / d);
            }
        }
        (sup, lip)
    }

    /// Internal step dividing `outer` evenly and not exceeding the default step.
    pub(crate) fn refine(&self, outer: f64) -> (usize, f64) {
        let m = ((outer / self.default_step()) - 1e-9).ceil().max(1.0) as usize;
        (m, outer / m as f64)
    }
}

/// Sampled solution `(x(t), y(t))`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub x_states: Vec<Vec<f64>>,
    pub y_states: Vec<Vec<f64>>,
    #[serde(default)]
    pub stats: SolveStats,
}

impl Trajectory {
    pub fn new(times: Vec<f64>, x_states: Vec<Vec<f64>>, y_states: Vec<Vec<f64>>) -> Result<Self> {
        if x_states.len() != times.len() || y_states.len() != times.len() {
            return Err(Error::Input("trajectory columns differ in length".into()));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Input("trajectory times must be strictly increasing".into()));
        }
        Ok(Self {
            times,
            x_states,
            y_states,
            stats: SolveStats::default(),
        })
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }
    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// State at the node with time `t`, if present.
    pub fn at(&self, t: f64) -> Option<(&[f64], &[f64])> {
        let i = self
            .times
            .iter()
            .position(|s| (s - t).abs() <= 1e-9 * (1.0 + t.abs()))?;
        Some((&self.x_states[i], &self.y_states[i]))
    }

    /// CSV with columns `t, x_0…x_{m−1}, y_0…y_{n−1}`.
    pub fn write_csv<W: io::Write>(&self, mut w: W) -> io::Result<()> {
        w.write_all(self.to_csv_string().as_bytes())
    }

    pub fn to_csv_string(&self) -> String {
        let m = self.x_states.first().map_or(0, Vec::len);
        let n = self.y_states.first().map_or(0, Vec::len);
        let mut s = String::from("t");
        for i in 0..m {
            let _ = write!(s, ",x_{i}");
        }
        for j in 0..n {
            let _ = write!(s, ",y_{j}");
        }
        s.push('\n');
        for (k, t) in self.times.iter().enumerate() {
            let _ = write!(s, "{t}");
            for v in self.x_states[k].iter().chain(&self.y_states[k]) {
                let _ = write!(s, ",{v}");
            }
            s.push('\n');
        }
        s
    }

    pub fn bundle(&self, sys: &SemilinearSystem, picard: &PicardOptions) -> TrajectoryBundle {
        TrajectoryBundle {
            system: sys.name().to_string(),
            fingerprint: sys.fingerprint(),
            picard_tol: picard.tol,
            quadrature_step: sys.default_step(),
            iterations: self.stats.iterations,
            residual: self.stats.residual,
            trajectory: self.clone(),
        }
    }
}

/// JSON export of a trajectory with solver metadata.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrajectoryBundle {
    pub system: String,
    pub fingerprint: String,
    pub picard_tol: f64,
    pub quadrature_step: f64,
    pub iterations: usize,
    pub residual: f64,
    pub trajectory: Trajectory,
}

/// Exact linear flow `(e^{At} v₁₀, e^{Bt} v₂₀)` on the grid.
pub fn linear_flow(
    sys: &SemilinearSystem,
    v10: &[f64],
    v20: &[f64],
    grid: &TimeGrid,
) -> Result<Trajectory> {
    Error::check_dim(sys.x_dim(), v10.len())?;
    Error::check_dim(sys.y_dim(), v20.len())?;
    let times = grid.times();
    let xs = times
        .iter()
        .map(|&t| sys.gen_a.apply(t, v10))
        .collect::<Result<Vec<_>>>()?;
    let ys = times
        .iter()
        .map(|&t| sys.gen_b.apply(t, v20))
        .collect::<Result<Vec<_>>>()?;
    Trajectory::new(times, xs, ys)
}

/// Mild solution on one half line `t = dir·τ`, `τ = 0, h, …, n·h`, stored
/// component-major. `f[i][k]` holds the converged forcing `f(U(t_k))`.
pub(crate) struct HalfLine {
    pub x: Vec<Vec<f64>>,
    pub y: Vec<Vec<f64>>,
    pub f: Vec<Vec<f64>>,
    pub stats: SolveStats,
}

fn non_finite(what: &str) -> Error {
    Error::Input(format!("{what} produced a non-finite value"))
}

/// Picard iteration for
/// `U(τ) = e^{μτ}u + dir·∫₀^τ e^{μ(τ−σ)} f(U(σ), e^{B dir σ}v) dσ`, `μ = dir·λ`,
/// advanced window by window. Each window is short enough that the integral
/// operator contracts by 1/4 even on growing modes. Convergence is measured
/// on the forcing, which stays bounded when some modes overflow.
pub(crate) fn half_line(
    sys: &SemilinearSystem,
    u: &[f64],
    v: &[f64],
    dir: f64,
    n: usize,
    h: f64,
    opts: &PicardOptions,
) -> Result<HalfLine> {
    let m = sys.x_dim();
    let mu: Vec<f64> = sys.gen_a.eigenvalues().iter().map(|l| dir * l).collect();
    let y: Vec<Vec<f64>> = sys
        .gen_b
        .eigenvalues()
        .iter()
        .zip(v)
        .map(|(&l, &vj)| (0..=n).map(|k| exp_scale(l, dir * k as f64 * h, vj)).collect())
        .collect();
    let lin: Vec<Vec<f64>> = (0..m)
        .map(|i| (0..=n).map(|k| exp_scale(mu[i], k as f64 * h, u[i])).collect())
        .collect();
    let mut x = lin.clone();
    let mut f = vec![vec![0.0; n + 1]; m];
    let mut stats = SolveStats::default();
    if sys.f.is_zero() {
        return Ok(HalfLine { x, y, f, stats });
    }

    let mut xb = vec![0.0; m];
    let mut yb = vec![0.0; y.len()];
    let mut fb = vec![0.0; m];
    let mut eval = |k: usize, x: &[Vec<f64>], f: &mut [Vec<f64>]| -> Result<f64> {
        for i in 0..m {
            xb[i] = x[i][k];
        }
        for (j, yj) in y.iter().enumerate() {
            yb[j] = yj[k];
        }
        sys.f.eval_into(&xb, &yb, &mut fb);
        let mut diff = 0.0f64;
        for i in 0..m {
            if !fb[i].is_finite() {
                return Err(non_finite("nonlinearity"));
            }
            diff = diff.max((fb[i] - f[i][k]).abs());
            f[i][k] = fb[i];
        }
        Ok(diff)
    };
    eval(0, &x, &mut f)?;
    if n == 0 {
        return Ok(HalfLine { x, y, f, stats });
    }

    let mu_plus = mu.iter().cloned().fold(0.0f64, f64::max);
    let window = if sys.f_lip == 0.0 {
        f64::INFINITY
    } else if mu_plus > 0.0 {
        (1.0 + mu_plus / (4.0 * sys.f_lip)).ln() / mu_plus
    } else {
        1.0 / (4.0 * sys.f_lip)
    };
    let ws = ((window / h).floor().min(n as f64) as usize).max(3);
    let mut c = vec![vec![0.0; n + 1]; m];
    let mut k0 = 0usize;
    while k0 < n {
        let k1 = (k0 + ws).min(n);
        let first = if k0 == 0 { 1 } else { k0 };
        let mut history = Vec::new();
        loop {
            let mut diff = 0.0f64;
            for k in first..=k1 {
                diff = diff.max(eval(k, &x, &mut f)?);
            }
            for i in 0..m {
                exp_cumulative(mu[i], h, &f[i][..=k1], &mut c[i][..=k1], first);
                for k in first..=k1 {
                    x[i][k] = lin[i][k] + dir * c[i][k];
                }
            }
            history.push(diff);
            if diff < opts.tol {
                break;
            }
            if history.len() >= opts.max_iter {
                return Err(Error::Convergence {
                    iterations: history.len(),
                    residual: diff,
                    history,
                });
            }
        }
        stats.absorb(history.len(), *history.last().unwrap_or(&0.0), &history);
        k0 = k1;
    }
    Ok(HalfLine { x, y, f, stats })
}

/// Variation-of-constants solution
/// `U₁(t) = e^{At}u₁₀ + ∫₀ᵗ e^{A(t−s)} f(U₁(s), U₂(s)) ds`, `U₂(t) = e^{Bt}u₂₀`
/// sampled on `grid`. The grid is refined internally when its step exceeds
/// the default quadrature step.
pub fn mild_solution(
    sys: &SemilinearSystem,
    u10: &[f64],
    u20: &[f64],
    grid: &TimeGrid,
    opts: &PicardOptions,
) -> Result<Trajectory> {
    Error::check_dim(sys.x_dim(), u10.len())?;
    Error::check_dim(sys.y_dim(), u20.len())?;
    let (r, h) = sys.refine(grid.step());
    let mut times = Vec::with_capacity(grid.len());
    let mut xs = Vec::with_capacity(grid.len());
    let mut ys = Vec::with_capacity(grid.len());
    let mut stats = SolveStats::default();
    let pick = |hl: &HalfLine, k: usize| -> (Vec<f64>, Vec<f64>) {
        (
            hl.x.iter().map(|c| c[k]).collect(),
            hl.y.iter().map(|c| c[k]).collect(),
        )
    };
    if grid.lo() < 0 {
        let steps = (-grid.lo()) as usize;
        let hl = half_line(sys, u10, u20, -1.0, steps * r, h, opts)?;
        stats.absorb(hl.stats.iterations, hl.stats.residual, &hl.stats.history);
        for j in (1..=steps).rev() {
            let (x, y) = pick(&hl, j * r);
            times.push(-(j as f64) * grid.step());
            xs.push(x);
            ys.push(y);
        }
    }
    let steps = grid.hi() as usize;
    let hl = half_line(sys, u10, u20, 1.0, steps * r, h, opts)?;
    stats.absorb(hl.stats.iterations, hl.stats.residual, &hl.stats.history);
    for j in 0..=steps {
        let (x, y) = pick(&hl, j * r);
        times.push(j as f64 * grid.step());
        xs.push(x);
        ys.push(y);
    }
    let mut traj = Trajectory::new(times, xs, ys)?;
    traj.stats = stats;
    Ok(traj)
}

/// Green convolution of one coordinate on a grid of `f.len()` nodes.
///
/// With `decaying`, writes `dir·∫_{τ₀}^{τ} e^{μ(τ−σ)} f(σ) dσ`; otherwise
/// `−dir·∫_{τ}^{τ_end} e^{μ(τ−σ)} f(σ) dσ`. Both kernels decay in the
/// direction of integration, so neither sweep overflows.
pub(crate) fn convolve(mu: f64, decaying: bool, dir: f64, h: f64, f: &[f64], out: &mut [f64]) {
    let n = f.len();
    if decaying {
        exp_cumulative(mu, h, f, out, 0);
        if dir != 1.0 {
            out.iter_mut().for_each(|v| *v *= dir);
        }
    } else {
        let rev: Vec<f64> = f.iter().rev().cloned().collect();
        let mut c = vec![0.0; n];
        exp_cumulative(-mu, h, &rev, &mut c, 0);
        for k in 0..n {
            out[k] = -dir * c[n - 1 - k];
        }
    }
}

/// Bounded solution of the `x`-equation on a half line: the fixed point of
/// ```text
/// U₁(t) = e^{At}ξ + ∫₀ᵗ e^{A(t−s)}P₊F ds − ∫_t^∞ e^{A(t−s)}P₋F ds,  U₂(t) = e^{Bt}η
/// ```
/// for `t ≥ 0` (`side = Stable`, `ξ ∈ P₊X`, `η ∈ P₊Y`), and the mirror
/// image for `t ≤ 0`. The infinite integral is cut at the larger of the
/// grid end and `T* = α⁻¹ ln(2k|f|_∞/(α·10⁻¹⁰))`. Only grid nodes on the
/// requested side are returned.
pub fn bounded_solution_halfaxis(
    sys: &SemilinearSystem,
    xi: &[f64],
    eta: &[f64],
    side: Side,
    grid: &TimeGrid,
    opts: &PicardOptions,
) -> Result<Trajectory> {
    Error::check_dim(sys.x_dim(), xi.len())?;
    Error::check_dim(sys.y_dim(), eta.len())?;
    sys.check_half_gap()?;
    let in_range = |v: &[f64], keep: &[usize], what: &str| -> Result<()> {
        let off = v
            .iter()
            .enumerate()
            .filter(|(i, _)| !keep.contains(i))
            .map(|(_, x)| x.abs())
            .fold(0.0, f64::max);
        if off > 1e-12 * (1.0 + norm(v)) {
            return Err(Error::Input(format!("{what} has components outside the {side:?} subspace")));
        }
        Ok(())
    };
    in_range(xi, sys.dichotomy.indices(side), "xi")?;
    in_range(eta, &sys.y_indices(side), "eta")?;

    let dir = match side {
        Side::Stable => 1.0,
        Side::Unstable => -1.0,
    };
    let outer = match side {
        Side::Stable => grid.hi() as usize,
        Side::Unstable => (-grid.lo()) as usize,
    };
    let (r, h) = sys.refine(grid.step());
    let horizon = sys
        .tail_horizon(HALFAXIS_TAIL_TOL)
        .unwrap_or(0.0)
        .max(outer as f64 * grid.step());
    let n = ((horizon / h).ceil() as usize).max(outer * r).max(2);

    let m = sys.x_dim();
    let mu: Vec<f64> = sys.gen_a.eigenvalues().iter().map(|l| dir * l).collect();
    let decaying: Vec<bool> = (0..m).map(|i| sys.dichotomy.indices(side).contains(&i)).collect();
    let base: Vec<Vec<f64>> = (0..m)
        .map(|i| {
            (0..=n)
                .map(|k| if decaying[i] { exp_scale(mu[i], k as f64 * h, xi[i]) } else { 0.0 })
                .collect()
        })
        .collect();
    let y: Vec<Vec<f64>> = sys
        .gen_b
        .eigenvalues()
        .iter()
        .zip(eta)
        .map(|(&l, &e)| (0..=n).map(|k| exp_scale(l, dir * k as f64 * h, e)).collect())
        .collect();
    let mut x: Vec<Vec<f64>> = base
        .iter()
        .map(|c| c.iter().map(|v| v + opts.start_offset).collect())
        .collect();
    let mut stats = SolveStats::default();
    if !sys.f.is_zero() {
        let mut f = vec![vec![0.0; n + 1]; m];
        let mut conv = vec![0.0; n + 1];
        let (mut xb, mut yb, mut fb) = (vec![0.0; m], vec![0.0; y.len()], vec![0.0; m]);
        let mut history = Vec::new();
        loop {
            for k in 0..=n {
                for i in 0..m {
                    xb[i] = x[i][k];
                }
                for (j, yj) in y.iter().enumerate() {
                    yb[j] = yj[k];
                }
                sys.f.eval_into(&xb, &yb, &mut fb);
                for i in 0..m {
                    f[i][k] = fb[i];
                }
            }
            let mut diff = 0.0f64;
            for i in 0..m {
                convolve(mu[i], decaying[i], dir, h, &f[i], &mut conv);
                for k in 0..=n {
                    let new = base[i][k] + conv[k];
                    if !new.is_finite() {
                        return Err(non_finite("half-axis fixed point"));
                    }
                    diff = diff.max((new - x[i][k]).abs());
                    x[i][k] = new;
                }
            }
            history.push(diff);
            if diff < opts.tol {
                break;
            }
            if history.len() >= opts.max_iter {
                return Err(Error::Convergence {
                    iterations: history.len(),
                    residual: diff,
                    history,
                });
            }
        }
        stats.absorb(history.len(), *history.last().unwrap_or(&0.0), &history);
    }

    let nodes: Vec<usize> = match side {
        Side::Stable => (0..=outer).collect(),
        Side::Unstable => (0..=outer).rev().collect(),
    };
    let times = nodes.iter().map(|&j| dir * j as f64 * grid.step()).collect();
    let xs = nodes.iter().map(|&j| x.iter().map(|c| c[j * r]).collect()).collect();
    let ys = nodes.iter().map(|&j| y.iter().map(|c| c[j * r]).collect()).collect();
    let mut traj = Trajectory::new(times, xs, ys)?;
    traj.stats = stats;
    Ok(traj)
}

/// One node of a decay-envelope check.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayRow {
    pub pair: usize,
    pub t: f64,
    /// `|ΔU₁(t)| + |ΔU₂(t)|`.
    pub omega: f64,
    pub envelope: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayReport {
    pub side: Side,
    pub varpi: f64,
    pub alpha1: f64,
    pub m_b: f64,
    /// `min (envelope − Ω)` over all pairs and nodes.
    pub min_slack: f64,
    pub rows: Vec<DecayRow>,
}

impl DecayReport {
    pub fn rows_csv(&self) -> String {
        let mut s = String::from("pair,t,omega,envelope,slack\n");
        for r in &self.rows {
            let _ = writeln!(s, "{},{},{},{},{}", r.pair, r.t, r.omega, r.envelope, r.envelope - r.omega);
        }
        s
    }
}

/// Two initial points `((x, y), (x̄, ȳ))`.
pub type FiberPair = ((Vec<f64>, Vec<f64>), (Vec<f64>, Vec<f64>));

/// Random pairs of initial data in `P X × P Y` for the given side.
pub fn fiber_pairs(
    sys: &SemilinearSystem,
    side: Side,
    count: usize,
    radius: f64,
    seed: u64,
) -> Vec<FiberPair> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let xs = sys.dichotomy.indices(side).to_vec();
    let ys = sys.y_indices(side);
    let mut draw = |idx: &[usize], dim: usize| -> Vec<f64> {
        let mut v = vec![0.0; dim];
        idx.iter().for_each(|&i| v[i] = rng.gen_range(-radius..=radius));
        v
    };
    (0..count)
        .map(|_| {
            let a = (draw(&xs, sys.x_dim()), draw(&ys, sys.y_dim()));
            let b = (draw(&xs, sys.x_dim()), draw(&ys, sys.y_dim()));
            (a, b)
        })
        .collect()
}

/// Compares differences of half-axis bounded solutions with the envelope
/// `(1−ϖ)⁻¹(k e^{−α₁|t|}|Δξ| + M_B|Δη|)`, where `ϖ = 2k|f|_Lip/α` and
/// `α₁ = α − k|f|_Lip/(1−ϖ)`.
pub fn decay_estimate(
    sys: &SemilinearSystem,
    pairs: &[FiberPair],
    side: Side,
    grid: &TimeGrid,
    opts: &PicardOptions,
) -> Result<DecayReport> {
    sys.check_half_gap()?;
    let (k, alpha, lip) = (sys.k(), sys.alpha(), sys.f_lip());
    let varpi = 2.0 * k * lip / alpha;
    let alpha1 = alpha - k * lip / (1.0 - varpi);
    let m_b = sys.m_b(side);
    let mut rows = Vec::new();
    let mut min_slack = f64::INFINITY;
    for (id, ((xi, eta), (xb, eb))) in pairs.iter().enumerate() {
        let a = bounded_solution_halfaxis(sys, xi, eta, side, grid, opts)?;
        let b = bounded_solution_halfaxis(sys, xb, eb, side, grid, opts)?;
        let (dx, dy) = (dist(xi, xb), dist(eta, eb));
        for (j, &t) in a.times.iter().enumerate() {
            let omega = dist(&a.x_states[j], &b.x_states[j]) + dist(&a.y_states[j], &b.y_states[j]);
            let envelope = (k * (-alpha1 * t.abs()).exp() * dx + m_b * dy) / (1.0 - varpi);
            min_slack = min_slack.min(envelope - omega);
            rows.push(DecayRow { pair: id, t, omega, envelope });
        }
    }
    Ok(DecayReport {
        side,
        varpi,
        alpha1,
        m_b,
        min_slack,
        rows,
    })
}

/// Bounded solution `w` of `w' = Aw + F(t, w)` on `[−T, T]`, i.e. the fixed
/// point of `w(t) = ∫ G_A(t − s) F(s, w(s)) ds`, on a uniform grid.
#[derive(Clone, Debug)]
pub struct WholeLine {
    pub grid: TimeGrid,
    /// Component-major values `w[i][k]` at `grid.time(k)`.
    pub w: Vec<Vec<f64>>,
    pub stats: SolveStats,
}

impl WholeLine {
    /// Linear interpolation between grid nodes; `None` outside the grid.
    pub fn value_at(&self, t: f64) -> Option<Vec<f64>> {
        let h = self.grid.step();
        let pos = t / h - self.grid.lo() as f64;
        let last = (self.grid.len() - 1) as f64;
        if !(-1e-9..=last + 1e-9).contains(&pos) {
            return None;
        }
        let pos = pos.clamp(0.0, last);
        let k = (pos.floor() as usize).min(self.grid.len().saturating_sub(2));
        let s = pos - k as f64;
        Some(
            self.w
                .iter()
                .map(|c| if c.len() == 1 { c[0] } else { (1.0 - s) * c[k] + s * c[k + 1] })
                .collect(),
        )
    }
}

/// Whole-line Green fixed point on `[−horizon, horizon]` with the given step.
/// `forcing(k, w, out)` evaluates `F(t_k, w)` at node `k`.
pub fn bounded_solution_whole_line(
    sys: &SemilinearSystem,
    forcing: &mut dyn FnMut(usize, &[f64], &mut [f64]),
    horizon: f64,
    step: f64,
    opts: &PicardOptions,
) -> Result<WholeLine> {
    let half = ((horizon / step - 1e-9).ceil() as i64).max(1);
    let grid = TimeGrid::new(step, -half, half)?;
    let n = grid.len();
    let m = sys.x_dim();
    let ev = sys.gen_a.eigenvalues();
    let decaying: Vec<bool> = (0..m).map(|i| sys.dichotomy.is_stable(i)).collect();
    let mut w = vec![vec![opts.start_offset; n]; m];
    let mut f = vec![vec![0.0; n]; m];
    let mut conv = vec![0.0; n];
    let (mut wb, mut fb) = (vec![0.0; m], vec![0.0; m]);
    let mut history = Vec::new();
    loop {
        for k in 0..n {
            for i in 0..m {
                wb[i] = w[i][k];
            }
            forcing(k, &wb, &mut fb);
            for i in 0..m {
                f[i][k] = fb[i];
            }
        }
        let mut diff = 0.0f64;
        for i in 0..m {
            convolve(ev[i], decaying[i], 1.0, step, &f[i], &mut conv);
            for k in 0..n {
                if !conv[k].is_finite() {
                    return Err(non_finite("whole-line fixed point"));
                }
                diff = diff.max((conv[k] - w[i][k]).abs());
                w[i][k] = conv[k];
            }
        }
        history.push(diff);
        if diff < opts.tol {
            break;
        }
        if history.len() >= opts.max_iter {
            return Err(Error::Convergence {
                iterations: history.len(),
                residual: diff,
                history,
            });
        }
    }
    let stats = SolveStats {
        iterations: history.len(),
        residual: *history.last().unwrap_or(&0.0),
        history,
    };
    Ok(WholeLine { grid, w, stats })
}

/// Largest defect of the variation-of-constants identity
/// `x(t) = e^{At}x(0) + ∫₀ᵗ e^{A(t−s)} f(x(s), e^{Bs}y(0)) ds` along a
/// forward trajectory on a uniform grid starting at `t = 0`.
///
/// The integral is recomputed independently of the solver: 4-point
/// Gauss-Legendre on every panel, with the state between nodes taken from
/// the cubic Lagrange interpolant through the four nearest nodes.
pub fn duhamel_residual(sys: &SemilinearSystem, traj: &Trajectory) -> Result<f64> {
    let n = traj.len();
    if n < 4 || traj.times[0] != 0.0 {
        return Err(Error::Input("need a forward trajectory with at least 4 nodes starting at t = 0".into()));
    }
    let h = traj.times[1] - traj.times[0];
    if traj
        .times
        .windows(2)
        .any(|w| ((w[1] - w[0]) - h).abs() > 1e-9 * h)
    {
        return Err(Error::Input("duhamel_residual needs a uniform grid".into()));
    }
    const X: [f64; 4] = [-0.861_136_311_594_052_6, -0.339_981_043_584_856_3, 0.339_981_043_584_856_3, 0.861_136_311_594_052_6];
    const W: [f64; 4] = [0.347_854_845_137_453_9, 0.652_145_154_862_546_1, 0.652_145_154_862_546_1, 0.347_854_845_137_453_9];
    let m = sys.x_dim();
    let ev = sys.gen_a.eigenvalues();
    let (x0, y0) = (&traj.x_states[0], &traj.y_states[0]);
    let mut acc = vec![0.0; m];
    let mut worst = 0.0f64;
    let mut xs = vec![0.0; m];
    let mut fb = vec![0.0; m];
    for j in 0..n - 1 {
        let s0 = (j.saturating_sub(1)).min(n - 4);
        let nodes: Vec<f64> = (0..4).map(|q| (s0 + q) as f64).collect();
        let mut panel = vec![0.0; m];
        for (gx, gw) in X.iter().zip(W) {
            let pos = j as f64 + 0.5 * (gx + 1.0);
            let s = pos * h;
            for (q, xq) in nodes.iter().enumerate() {
                let mut l = 1.0;
                for (r, xr) in nodes.iter().enumerate() {
                    if r != q {
                        l *= (pos - xr) / (xq - xr);
                    }
                }
                if q == 0 {
                    xs.iter_mut().zip(&traj.x_states[s0]).for_each(|(a, b)| *a = l * b);
                } else {
                    xs.iter_mut().zip(&traj.x_states[s0 + q]).for_each(|(a, b)| *a += l * b);
                }
            }
            let ys = sys.gen_b.apply(s, y0)?;
            sys.f.eval_into(&xs, &ys, &mut fb);
            let t1 = (j + 1) as f64 * h;
            for i in 0..m {
                panel[i] += 0.5 * h * gw * exp_scale(ev[i], t1 - s, fb[i]);
            }
        }
        let t1 = (j + 1) as f64 * h;
        for i in 0..m {
            acc[i] = exp_scale(ev[i], h, acc[i]) + panel[i];
            let d = traj.x_states[j + 1][i] - exp_scale(ev[i], t1, x0[i]) - acc[i];
            worst = worst.max(d.abs());
        }
    }
    Ok(worst)
}
