//! Closed-form regularity constants of `H`, `G` and empirical exponent fits.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flows::SemilinearSystem;
use crate::operators::Side;
use crate::{dist, norm};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Fiber {
    Stable,
    Unstable,
    Full,
}

/// Coordinates along which perturbations are drawn.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FiberMask {
    pub x: Vec<usize>,
    pub y: Vec<usize>,
}

impl FiberMask {
    pub fn of(sys: &SemilinearSystem, fiber: Fiber) -> Self {
        match fiber {
            Fiber::Stable | Fiber::Unstable => {
                let side = if fiber == Fiber::Stable { Side::Stable } else { Side::Unstable };
                Self {
                    x: sys.dichotomy().indices(side).to_vec(),
                    y: sys.y_indices(side),
                }
            }
            Fiber::Full => Self::full(sys.x_dim(), sys.y_dim()),
        }
    }

    pub fn full(x_dim: usize, y_dim: usize) -> Self {
        Self {
            x: (0..x_dim).collect(),
            y: (0..y_dim).collect(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty() && self.y.is_empty()
    }
}

/// `p₁ = 1 + max{2k²L/((α₁+α)(1−ϖ)), 2kL·M_B/(α(1−ϖ))}` with
/// `ϖ = 2kL/α`, `α₁ = α − kL/(1−ϖ)`, `L = |f|_Lip`.
pub fn p1_from(k: f64, alpha: f64, f_lip: f64, m_b: f64) -> Result<f64> {
    let varpi = 2.0 * k * f_lip / alpha;
    if varpi >= 1.0 {
        return Err(Error::Precondition(format!("2·k·f_lip/alpha < 1 fails: {varpi}")));
    }
    let alpha1 = alpha - k * f_lip / (1.0 - varpi);
    if alpha1 <= 0.0 {
        return Err(Error::Precondition(format!(
            "alpha1 = alpha - k·f_lip/(1 - varpi) > 0 fails: {alpha1}"
        )));
    }
    let a = 2.0 * k * k * f_lip / ((alpha1 + alpha) * (1.0 - varpi));
    let b = 2.0 * k * f_lip * m_b / (alpha * (1.0 - varpi));
    Ok(1.0 + a.max(b))
}

/// Lipschitz constant of `H` on stable fibers.
pub fn theory_lipschitz_p1(sys: &SemilinearSystem) -> Result<f64> {
    p1_from(sys.k(), sys.alpha(), sys.f_lip(), sys.m_b(Side::Stable))
}

/// `α/(ω_c + M_c L)`.
pub fn q_tilde_from(alpha: f64, omega_c: f64, m_c: f64, f_lip: f64) -> Result<f64> {
    let denom = omega_c + m_c * f_lip;
    if denom < alpha {
        return Err(Error::Precondition(format!(
            "omega_c + M_c·f_lip >= alpha fails: {denom} < {alpha}"
        )));
    }
    Ok(alpha / denom)
}

/// Hölder exponent of `G` (and of `H` off the fibers).
pub fn theory_holder_exponent(sys: &SemilinearSystem) -> Result<f64> {
    let g = sys.growth();
    q_tilde_from(sys.alpha(), g.omega_c, g.m_c, sys.f_lip())
}

/// Lower bound `(8k/α)|f|_∞ + 4kL·M_c/(ω_c − α)` on the constant `p` in
/// `p₂ = 1 + p`; only defined when `ω_c > α`.
pub fn theory_p2_lower_bound(sys: &SemilinearSystem) -> Option<f64> {
    let (k, a, g) = (sys.k(), sys.alpha(), sys.growth());
    (g.omega_c > a).then(|| 8.0 * k / a * sys.f_sup() + 4.0 * k * sys.f_lip() * g.m_c / (g.omega_c - a))
}

/// Time-splitting thresholds `τ₁ = ln(1/d)/(ω_c + M_c L)` and
/// `τ₂ = ln(1/d)/ω_c` for an initial distance `d < 1`.
pub fn time_split_thresholds(sys: &SemilinearSystem, d: f64) -> (f64, f64) {
    let g = sys.growth();
    let l = (1.0 / d).ln();
    (l / (g.omega_c + g.m_c * sys.f_lip()), l / g.omega_c)
}

/// `n` scales log-spaced from `hi` down to `lo`.
pub fn log_scales(hi: f64, lo: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![hi];
    }
    let (a, b) = (hi.ln(), lo.ln());
    (0..n)
        .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplingPlan {
    pub base_points: usize,
    /// Base points are drawn uniformly from `[−r, r]` in every coordinate.
    pub base_radius: f64,
    pub scales: Vec<f64>,
    pub directions: usize,
    /// Output distances below this are excluded from the fit.
    pub noise_floor: f64,
    pub seed: u64,
}

impl Default for SamplingPlan {
    fn default() -> Self {
        Self {
            base_points: 20,
            base_radius: 1.0,
            scales: log_scales(1e-1, 1e-4, 12),
            directions: 5,
            noise_floor: 100.0 * (1e-8 + 1e-10),
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegularitySample {
    pub base_id: usize,
    pub direction_id: usize,
    pub scale: f64,
    pub d_in: f64,
    pub d_out: f64,
    pub fiber: Fiber,
    pub used: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegularityEstimate {
    /// Slope of the pooled regression of `log d_out` on `log d_in`.
    pub fitted_exponent: f64,
    /// `exp(intercept)`.
    pub fitted_constant: f64,
    pub theory_p1: Option<f64>,
    pub theory_q_tilde: Option<f64>,
    pub fiber: Fiber,
    pub points_used: usize,
    pub points_excluded: usize,
    pub noise_floor: f64,
    /// Largest `d_out / d_in` among fitted points.
    pub max_ratio: f64,
    /// RMS of the regression residuals.
    pub residual_rms: f64,
    pub samples: Vec<RegularitySample>,
}

impl RegularityEstimate {
    pub fn samples_csv(&self) -> String {
        let mut s = String::from("base_id,direction_id,scale,d_in,d_out,fiber,used\n");
        for r in &self.samples {
            let fiber = match r.fiber {
                Fiber::Stable => "stable",
                Fiber::Unstable => "unstable",
                Fiber::Full => "full",
            };
            s.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                r.base_id, r.direction_id, r.scale, r.d_in, r.d_out, fiber, r.used
            ));
        }
        s
    }
}

pub type Point = (Vec<f64>, Vec<f64>);

/// Random base points in the box of radius `plan.base_radius`.
pub fn base_points(x_dim: usize, y_dim: usize, plan: &SamplingPlan) -> Vec<Point> {
    let mut rng = ChaCha8Rng::seed_from_u64(plan.seed);
    let r = plan.base_radius;
    (0..plan.base_points)
        .map(|_| {
            let x = (0..x_dim).map(|_| if r > 0.0 { rng.gen_range(-r..=r) } else { 0.0 }).collect();
            let y = (0..y_dim).map(|_| if r > 0.0 { rng.gen_range(-r..=r) } else { 0.0 }).collect();
            (x, y)
        })
        .collect()
}

/// Random unit directions (in `|x| + |y|`) supported on the mask.
fn directions(x_dim: usize, y_dim: usize, mask: &FiberMask, count: usize, seed: u64) -> Vec<Point> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let mut x = vec![0.0; x_dim];
        let mut y = vec![0.0; y_dim];
        for &i in &mask.x {
            x[i] = rng.gen_range(-1.0..=1.0);
        }
        for &j in &mask.y {
            y[j] = rng.gen_range(-1.0..=1.0);
        }
        let n = norm(&x) + norm(&y);
        if n > 1e-3 {
            x.iter_mut().chain(y.iter_mut()).for_each(|v| *v /= n);
            out.push((x, y));
        }
    }
    out
}

/// Probes `map` around each base point along random directions of the
/// fiber, then fits `log d_out ≈ log C + β log d_in` over all pairs whose
/// output distance clears the noise floor.
pub fn estimate_exponent<M>(
    map: M,
    bases: &[Point],
    mask: &FiberMask,
    fiber: Fiber,
    plan: &SamplingPlan,
) -> Result<RegularityEstimate>
where
    M: Fn(&[f64], &[f64]) -> Result<Point> + Sync,
{
    if bases.is_empty() {
        return Err(Error::Input("no base points".into()));
    }
    if mask.is_empty() {
        return Err(Error::Input(format!("the {fiber:?} fiber has no coordinates")));
    }
    if plan.scales.len() < 2 || plan.directions == 0 {
        return Err(Error::Input("need at least two scales and one direction".into()));
    }
    let (x_dim, y_dim) = (bases[0].0.len(), bases[0].1.len());
    let dirs = directions(x_dim, y_dim, mask, plan.directions, plan.seed);
    let images = bases
        .par_iter()
        .map(|(x, y)| map(x, y))
        .collect::<Result<Vec<_>>>()?;
    let jobs: Vec<(usize, usize, f64)> = (0..bases.len())
        .flat_map(|b| (0..dirs.len()).flat_map(move |d| (0..plan.scales.len()).map(move |s| (b, d, s))))
        .map(|(b, d, s)| (b, d, plan.scales[s]))
        .collect();
    let samples = jobs
        .par_iter()
        .map(|&(b, d, scale)| {
            let (bx, by) = &bases[b];
            let (dx, dy) = &dirs[d];
            let px: Vec<f64> = bx.iter().zip(dx).map(|(a, v)| a + scale * v).collect();
            let py: Vec<f64> = by.iter().zip(dy).map(|(a, v)| a + scale * v).collect();
            let (ox, oy) = map(&px, &py)?;
            let d_in = dist(&px, bx) + dist(&py, by);
            let d_out = dist(&ox, &images[b].0) + dist(&oy, &images[b].1);
            Ok(RegularitySample {
                base_id: b,
                direction_id: d,
                scale,
                d_in,
                d_out,
                fiber,
                used: d_out >= plan.noise_floor && d_in > 0.0,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let pts: Vec<(f64, f64)> = samples
        .iter()
        .filter(|s| s.used)
        .map(|s| (s.d_in.ln(), s.d_out.ln()))
        .collect();
    if pts.len() < 3 {
        return Err(Error::Estimation(format!(
            "only {} of {} output distances exceed the noise floor {:e}",
            pts.len(),
            samples.len(),
            plan.noise_floor
        )));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx <= 0.0 {
        return Err(Error::Estimation("input distances span no range".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = pts.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    let max_ratio = samples
        .iter()
        .filter(|s| s.used)
        .map(|s| s.d_out / s.d_in)
        .fold(0.0, f64::max);
    Ok(RegularityEstimate {
        fitted_exponent: slope,
        fitted_constant: intercept.exp(),
        theory_p1: None,
        theory_q_tilde: None,
        fiber,
        points_used: pts.len(),
        points_excluded: samples.len() - pts.len(),
        noise_floor: plan.noise_floor,
        max_ratio,
        residual_rms: (rss / n).sqrt(),
        samples,
    })
}

/// `u ↦ sign(u)|u|^β` coordinatewise on `x`, identity on `y`: a map with
/// known Hölder exponent `β` at the origin.
pub fn calibration_map(beta: f64) -> impl Fn(&[f64], &[f64]) -> Result<Point> + Sync {
    move |x: &[f64], y: &[f64]| {
        Ok((
            x.iter().map(|v| v.signum() * v.abs().powf(beta)).collect(),
            y.to_vec(),
        ))
    }
}
