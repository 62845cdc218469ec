//! Smooth cutoff `ψ` and the localized nonlinearity
//! `f_δ(u₁, u₂) = f(ψ(|u₁|²/δ²)u₁, ψ(|u₂|²/δ²)u₂)`.

use std::sync::{Arc, OnceLock};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nonlinearity::Nonlinearity;
use crate::{dist, norm};

const NODES: usize = 4096;

/// Gauss-Legendre nodes and weights on `[−1, 1]`, 8 points.
const GL_X: [f64; 8] = [
    -0.960_289_856_497_536_3,
    -0.796_666_477_413_626_7,
    -0.525_532_409_916_329_0,
    -0.183_434_642_495_649_8,
    0.183_434_642_495_649_8,
    0.525_532_409_916_329_0,
    0.796_666_477_413_626_7,
    0.960_289_856_497_536_3,
];
const GL_W: [f64; 8] = [
    0.101_228_536_290_376_3,
    0.222_381_034_453_374_5,
    0.313_706_645_877_887_3,
    0.362_683_783_378_362_0,
    0.362_683_783_378_362_0,
    0.313_706_645_877_887_3,
    0.222_381_034_453_374_5,
    0.101_228_536_290_376_3,
];

/// Unnormalized transition density on `(1, 2)`: `exp(−1/(1 − y²))`, `y = 2t − 3`.
fn kernel(t: f64) -> f64 {
    let y = 2.0 * t - 3.0;
    let q = 1.0 - y * y;
    if q <= 0.0 {
        0.0
    } else {
        (-1.0 / q).exp()
    }
}

fn gl(a: f64, b: f64) -> f64 {
    let (m, r) = (0.5 * (a + b), 0.5 * (b - a));
    GL_X.iter().zip(GL_W).map(|(x, w)| w * kernel(m + r * x)).sum::<f64>() * r
}

/// The cutoff profile: cumulative integrals of the kernel on a dense grid
/// over `[1, 2]`, built once.
#[derive(Debug)]
pub struct BumpProfile {
    cumulative: Vec<f64>,
    total: f64,
    max_slope: f64,
}

impl BumpProfile {
    fn build() -> Self {
        let h = 1.0 / NODES as f64;
        let mut cumulative = vec![0.0; NODES + 1];
        for i in 0..NODES {
            let a = 1.0 + i as f64 * h;
            cumulative[i + 1] = cumulative[i] + gl(a, a + h);
        }
        let total = cumulative[NODES];
        let max_slope = (0..=NODES * 4)
            .map(|i| kernel(1.0 + i as f64 / (NODES * 4) as f64))
            .fold(0.0, f64::max)
            / total;
        Self {
            cumulative,
            total,
            max_slope,
        }
    }

    /// Shared instance; fails loudly if the profile's slope exceeds 2.
    pub fn get() -> &'static BumpProfile {
        static PROFILE: OnceLock<BumpProfile> = OnceLock::new();
        let p = PROFILE.get_or_init(Self::build);
        assert!(p.max_slope <= 2.0, "bump profile slope {} exceeds 2", p.max_slope);
        p
    }

    /// Largest sampled `|ψ′|`.
    pub fn max_slope(&self) -> f64 {
        self.max_slope
    }

    fn value(&self, t: f64) -> f64 {
        if t <= 1.0 {
            return 1.0;
        }
        if t >= 2.0 {
            return 0.0;
        }
        let pos = (t - 1.0) * NODES as f64;
        let i = (pos.floor() as usize).min(NODES - 1);
        let a = 1.0 + i as f64 / NODES as f64;
        let partial = self.cumulative[i] + gl(a, t);
        (1.0 - partial / self.total).clamp(0.0, 1.0)
    }

    fn slope(&self, t: f64) -> f64 {
        -kernel(t) / self.total
    }
}

/// `ψ(t)`: 1 on `[0, 1]`, strictly decreasing on `(1, 2)`, 0 on `[2, ∞)`.
pub fn bump(t: f64) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(Error::Input(format!("bump argument {t} must be non-negative")));
    }
    Ok(BumpProfile::get().value(t))
}

/// `ψ′(t)`.
pub fn bump_derivative(t: f64) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(Error::Input(format!("bump argument {t} must be non-negative")));
    }
    Ok(BumpProfile::get().slope(t))
}

/// `ψ(|u|²/δ²) u`.
pub fn rescale(u: &[f64], delta: f64) -> Vec<f64> {
    let s = BumpProfile::get().value(norm(u).powi(2) / (delta * delta));
    u.iter().map(|v| s * v).collect()
}

/// Modulus `L(a, b)` bounding the Lipschitz constant of `f` on
/// `{|u₁| ≤ a, |u₂| ≤ b}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Modulus {
    /// `c·max(a, b)^p`.
    Power { coefficient: f64, exponent: f64 },
}

impl Modulus {
    pub fn linear(coefficient: f64) -> Self {
        Modulus::Power {
            coefficient,
            exponent: 1.0,
        }
    }

    pub fn eval(&self, a: f64, b: f64) -> f64 {
        match *self {
            Modulus::Power { coefficient, exponent } => coefficient * a.max(b).powf(exponent),
        }
    }

    /// Radius where `36kL(√2δ, √2δ)/α = 1`, in closed form.
    pub fn critical_delta_exact(&self, k: f64, alpha: f64) -> Option<f64> {
        match *self {
            Modulus::Power { coefficient, exponent } if coefficient > 0.0 && exponent > 0.0 => {
                Some((alpha / (36.0 * k * coefficient)).powf(1.0 / exponent) / std::f64::consts::SQRT_2)
            }
            _ => None,
        }
    }

    /// `L(√2δ, √2δ)`.
    pub fn at_delta(&self, delta: f64) -> f64 {
        let r = std::f64::consts::SQRT_2 * delta;
        self.eval(r, r)
    }
}

/// `36 k L / α < 1`.
pub fn local_gate(k: f64, alpha: f64, l_value: f64) -> bool {
    36.0 * k * l_value / alpha < 1.0
}

/// `36 k L(√2δ, √2δ) / α`.
pub fn local_gate_ratio(k: f64, alpha: f64, modulus: &Modulus, delta: f64) -> f64 {
    36.0 * k * modulus.at_delta(delta) / alpha
}

/// Radius at which the local gate flips, found by bisection to `tol`.
pub fn critical_delta(k: f64, alpha: f64, modulus: &Modulus, tol: f64) -> Result<f64> {
    let ratio = |d: f64| local_gate_ratio(k, alpha, modulus, d);
    let mut hi = 1.0;
    let mut guard = 0;
    while ratio(hi) < 1.0 {
        hi *= 2.0;
        guard += 1;
        if guard > 200 {
            return Err(Error::Input("local gate never fails: modulus does not grow".into()));
        }
    }
    let mut lo = 0.0;
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if ratio(mid) < 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// `f_δ` for a base `f` with `f(0, 0) = 0`.
#[derive(Clone, Debug)]
pub struct LocalNonlinearity {
    base: Arc<dyn Nonlinearity>,
    delta: f64,
    modulus: Modulus,
}

impl LocalNonlinearity {
    pub fn new(base: Arc<dyn Nonlinearity>, delta: f64, modulus: Modulus) -> Result<Self> {
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(Error::Input(format!("delta = {delta} must be positive")));
        }
        let f0 = base.eval(&vec![0.0; base.x_dim()], &vec![0.0; base.y_dim()]);
        if norm(&f0) != 0.0 {
            return Err(Error::Input("localization requires f(0, 0) = 0".into()));
        }
        BumpProfile::get();
        Ok(Self { base, delta, modulus })
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }
    pub fn modulus(&self) -> &Modulus {
        &self.modulus
    }

    /// `9 L(√2δ, √2δ)`.
    pub fn lip_bound(&self) -> f64 {
        9.0 * self.modulus.at_delta(self.delta)
    }

    /// `2√2 δ L(√2δ, √2δ)`.
    pub fn sup_bound(&self) -> f64 {
        2.0 * std::f64::consts::SQRT_2 * self.delta * self.modulus.at_delta(self.delta)
    }
}

impl Nonlinearity for LocalNonlinearity {
    fn x_dim(&self) -> usize {
        self.base.x_dim()
    }
    fn y_dim(&self) -> usize {
        self.base.y_dim()
    }
    fn eval_into(&self, x: &[f64], y: &[f64], out: &mut [f64]) {
        let xs = rescale(x, self.delta);
        let ys = rescale(y, self.delta);
        self.base.eval_into(&xs, &ys, out);
    }
    fn is_zero(&self) -> bool {
        self.base.is_zero()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalizationReport {
    pub delta: f64,
    pub ball_points: usize,
    /// Largest `|f_δ − f|` on the ball grid; exactly 0 when the cutoff is exact.
    pub max_ball_mismatch: f64,
    pub outside_points: usize,
    /// Largest `|f_δ|` with both components beyond `√2δ`.
    pub max_outside: f64,
    pub lip_quotient: f64,
    pub lip_bound: f64,
    pub gate_ratio: f64,
    pub gate_holds: bool,
    pub critical_delta: f64,
    pub critical_delta_exact: Option<f64>,
    pub passed: bool,
}

fn unit(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..=1.0)).collect();
        let s = norm(&v);
        if s > 1e-3 {
            return v.iter().map(|a| a / s).collect();
        }
    }
}

/// Checks `f_δ` against its base: equality on a 10 × 10 × 10 grid of radii,
/// `x`/`y` splits and directions inside `|x| + |y| ≤ δ`, vanishing once both
/// components exceed `√2δ`, sampled Lipschitz quotients against `9L`, and
/// the bisected gate radius against its closed form.
pub fn verify_localization(
    base: &dyn Nonlinearity,
    local: &LocalNonlinearity,
    k: f64,
    alpha: f64,
    seed: u64,
) -> Result<LocalizationReport> {
    let (m, n) = (base.x_dim(), base.y_dim());
    let delta = local.delta();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let dirs: Vec<(Vec<f64>, Vec<f64>)> = (0..10).map(|_| (unit(&mut rng, m), unit(&mut rng, n.max(1)))).collect();
    let mut mismatch = 0.0f64;
    let mut ball_points = 0;
    for i in 1..=10 {
        let r = delta * i as f64 / 10.0;
        for j in 0..10 {
            let split = if n == 0 { 1.0 } else { j as f64 / 9.0 };
            for (dx, dy) in &dirs {
                let x: Vec<f64> = dx.iter().map(|v| v * r * split).collect();
                let y: Vec<f64> = dy.iter().take(n).map(|v| v * r * (1.0 - split)).collect();
                mismatch = mismatch.max(dist(&local.eval(&x, &y), &base.eval(&x, &y)));
                ball_points += 1;
            }
        }
    }

    let far = std::f64::consts::SQRT_2 * delta;
    let mut outside = 0.0f64;
    let outside_points = if n == 0 { 0 } else { 1000 };
    for _ in 0..outside_points {
        let sx = far * rng.gen_range(1.0..5.0);
        let sy = far * rng.gen_range(1.0..5.0);
        let x: Vec<f64> = unit(&mut rng, m).iter().map(|v| v * sx).collect();
        let y: Vec<f64> = unit(&mut rng, n).iter().map(|v| v * sy).collect();
        outside = outside.max(norm(&local.eval(&x, &y)));
    }

    let mut quotient = 0.0f64;
    for i in 0..20_000 {
        let spread = if i % 2 == 0 { 3.0 * delta } else { 1e-3 * delta };
        let x: Vec<f64> = (0..m).map(|_| rng.gen_range(-2.0 * delta..2.0 * delta)).collect();
        let y: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0 * delta..2.0 * delta)).collect();
        let x2: Vec<f64> = x.iter().map(|a| a + rng.gen_range(-spread..spread)).collect();
        let y2: Vec<f64> = y.iter().map(|a| a + rng.gen_range(-spread..spread)).collect();
        let d = dist(&x, &x2) + dist(&y, &y2);
        if d > 0.0 {
            quotient = quotient.max(dist(&local.eval(&x, &y), &local.eval(&x2, &y2)) / d);
        }
    }

    let modulus = local.modulus();
    let gate_ratio = local_gate_ratio(k, alpha, modulus, delta);
    let star = critical_delta(k, alpha, modulus, 1e-9)?;
    let exact = modulus.critical_delta_exact(k, alpha);
    let lip_bound = local.lip_bound();
    let passed = mismatch == 0.0
        && outside == 0.0
        && quotient <= lip_bound * (1.0 + 1e-6)
        && exact.is_none_or(|e| (e - star).abs() <= 1e-6);
    Ok(LocalizationReport {
        delta,
        ball_points,
        max_ball_mismatch: mismatch,
        outside_points,
        max_outside: outside,
        lip_quotient: quotient,
        lip_bound,
        gate_ratio,
        gate_holds: gate_ratio < 1.0,
        critical_delta: star,
        critical_delta_exact: exact,
        passed,
    })
}
