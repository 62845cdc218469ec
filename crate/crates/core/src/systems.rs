//! Factories for the toy systems, the spectral heat system, a
//! Hodgkin-Huxley cable system and localized systems.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flows::{GateRule, SemilinearSystem};
use crate::localization::{rescale, LocalNonlinearity, Modulus};
use crate::nonlinearity::{Nonlinearity, Quadratic, Saturation, SaturationTerm, Zero};
use crate::operators::{DichotomySpec, SpectralGenerator};
use crate::norm;

fn unit_ones(n: usize) -> Vec<f64> {
    vec![1.0 / (n as f64).sqrt(); n]
}

fn default_alpha() -> f64 {
    1.0
}

/// Diagonal toy system: `x` eigenvalues `−(α + margin·i)` (stable block)
/// followed by `+(α + margin·j)`, and
/// `f(u, v) = scale·tanh(⟨w, (u, v)⟩ + shift)·b`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ToyConfig {
    pub dim_stable: usize,
    pub dim_unstable: usize,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default)]
    pub gap_margin: f64,
    pub b_eigenvalues: Vec<f64>,
    pub scale: f64,
    #[serde(default)]
    pub shift: f64,
    /// `w` over `(x, y)`; defaults to the first `x` coordinate.
    #[serde(default)]
    pub coupling: Option<Vec<f64>>,
    /// `b`; defaults to the normalized all-ones vector.
    #[serde(default)]
    pub output: Option<Vec<f64>>,
}

impl ToyConfig {
    pub fn new(dim_stable: usize, dim_unstable: usize, scale: f64) -> Self {
        Self {
            dim_stable,
            dim_unstable,
            alpha: 1.0,
            gap_margin: 0.0,
            b_eigenvalues: vec![-0.5, 0.5],
            scale,
            shift: 0.0,
            coupling: None,
            output: None,
        }
    }

    fn parts(&self) -> Result<(Vec<f64>, Vec<f64>)> {
        let m = self.dim_stable + self.dim_unstable;
        let n = self.b_eigenvalues.len();
        let w = match &self.coupling {
            Some(w) if w.len() == m + n => w.clone(),
            Some(w) => {
                return Err(Error::Config(format!(
                    "coupling has length {}, expected {}",
                    w.len(),
                    m + n
                )))
            }
            None => {
                let mut w = vec![0.0; m + n];
                w[0] = 1.0;
                w
            }
        };
        let b = match &self.output {
            Some(b) if b.len() == m => b.clone(),
            Some(b) => {
                return Err(Error::Config(format!("output has length {}, expected {m}", b.len())))
            }
            None => unit_ones(m),
        };
        Ok((w, b))
    }

    /// Scale that makes the recorded Lipschitz constant equal `f_lip`.
    pub fn scale_for_lip(&self, f_lip: f64) -> Result<f64> {
        let (w, b) = self.parts()?;
        let m = self.dim_stable + self.dim_unstable;
        let per_unit = norm(&w[..m]).max(norm(&w[m..])) * norm(&b);
        if per_unit == 0.0 {
            return Err(Error::Config("toy nonlinearity has zero coupling".into()));
        }
        Ok(f_lip / per_unit)
    }
}

pub fn make_toy(cfg: &ToyConfig) -> Result<SemilinearSystem> {
    let m = cfg.dim_stable + cfg.dim_unstable;
    if m == 0 {
        return Err(Error::Config("toy system needs at least one x mode".into()));
    }
    if !(cfg.alpha > 0.0) || cfg.gap_margin < 0.0 {
        return Err(Error::Config("toy alpha must be positive and gap_margin non-negative".into()));
    }
    let mut ev: Vec<f64> = (0..cfg.dim_stable)
        .map(|i| -(cfg.alpha + cfg.gap_margin * i as f64))
        .collect();
    ev.extend((0..cfg.dim_unstable).map(|j| cfg.alpha + cfg.gap_margin * j as f64));
    let gen_a = SpectralGenerator::new(ev)?;
    let spec = DichotomySpec::new(m, (0..cfg.dim_stable).collect(), 1.0, cfg.alpha)?;
    let gen_b = SpectralGenerator::new(cfg.b_eigenvalues.clone())?;
    let (w, b) = cfg.parts()?;
    let term = SaturationTerm {
        scale: cfg.scale,
        coupling_x: w[..m].to_vec(),
        coupling_y: w[m..].to_vec(),
        shift: cfg.shift,
        output: b,
    };
    let sat = Saturation::new(vec![term])?;
    let (f_sup, f_lip) = (sat.sup_bound(), sat.lip_bound());
    let f: Arc<dyn Nonlinearity> = if cfg.scale == 0.0 {
        Arc::new(Zero {
            x_dim: m,
            y_dim: gen_b.dimension(),
        })
    } else {
        Arc::new(sat)
    };
    let name = format!("toy-{}-{}", cfg.dim_stable, cfg.dim_unstable);
    SemilinearSystem::new(name, gen_a, spec, gen_b, f, f_sup, f_lip)
}

/// Spectral truncation of `u_t = u_xx + f(u, e^{Bt}v₀)` on `(0, π)` with
/// Dirichlet conditions: `x` eigenvalues `−n²`, `n = 1…n_modes`, and
/// `f(u, v) = f_lip·tanh(u₁ + v₁ + shift)·b` acting through the
/// fundamental mode.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeatConfig {
    pub n_modes: usize,
    pub b_eigenvalues: Vec<f64>,
    pub f_lip: f64,
    #[serde(default)]
    pub shift: f64,
}

impl HeatConfig {
    pub fn new(n_modes: usize) -> Self {
        Self {
            n_modes,
            b_eigenvalues: vec![-0.5],
            f_lip: 0.5,
            shift: 0.0,
        }
    }
}

/// All modes are stable with `k = 1` and `α = 1` (the slowest mode). The
/// gate is the normalized one, `|f|_Lip < 1`.
pub fn make_heat(cfg: &HeatConfig) -> Result<SemilinearSystem> {
    if cfg.n_modes == 0 {
        return Err(Error::Config("heat system needs n_modes >= 1".into()));
    }
    let m = cfg.n_modes;
    let gen_a = SpectralGenerator::new((1..=m).map(|n| -((n * n) as f64)).collect())?;
    let spec = DichotomySpec::new(m, (0..m).collect(), 1.0, 1.0)?;
    let gen_b = SpectralGenerator::new(cfg.b_eigenvalues.clone())?;
    let mut cx = vec![0.0; m];
    cx[0] = 1.0;
    let mut cy = vec![0.0; gen_b.dimension()];
    if let Some(c) = cy.first_mut() {
        *c = 1.0;
    }
    let sat = Saturation::new(vec![SaturationTerm {
        scale: cfg.f_lip,
        coupling_x: cx,
        coupling_y: cy,
        shift: cfg.shift,
        output: unit_ones(m),
    }])?;
    let (f_sup, f_lip) = (sat.sup_bound(), sat.lip_bound());
    let sys = SemilinearSystem::new(format!("heat-{m}"), gen_a, spec, gen_b, Arc::new(sat), f_sup, f_lip)?;
    Ok(sys.with_gate_rule(GateRule::Normalized))
}

fn clamp_range() -> [f64; 2] {
    [0.0, 1.0]
}

/// Cable equation `C V_t = (r_e + r_i)⁻¹ V_xx + f(V, n, m, h)` with the
/// current `f = −g_k n⁴(V − E_k) − g_Na m³h(V − E_Na)` and affine gating
/// equations `ṅ = γ_n n − α_n` (likewise `m`, `h`) with constant rates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HodgkinHuxleyConfig {
    pub c: f64,
    pub r_e: f64,
    pub r_i: f64,
    pub g_k: f64,
    pub e_k: f64,
    pub g_na: f64,
    pub e_na: f64,
    pub gamma_n: f64,
    pub gamma_m: f64,
    pub gamma_h: f64,
    pub alpha_n: f64,
    pub alpha_m: f64,
    pub alpha_h: f64,
    pub n_modes: usize,
    /// Radius of the smooth clamp on the `V` coefficients.
    pub v_radius: f64,
    #[serde(default = "clamp_range")]
    pub n_range: [f64; 2],
    #[serde(default = "clamp_range")]
    pub m_range: [f64; 2],
    #[serde(default = "clamp_range")]
    pub h_range: [f64; 2],
}

impl HodgkinHuxleyConfig {
    /// Standard squid-axon conductances and reversal potentials (mV, mS/cm²).
    pub fn standard() -> Self {
        Self {
            c: 1.0,
            r_e: 0.5,
            r_i: 0.5,
            g_k: 36.0,
            e_k: -12.0,
            g_na: 120.0,
            e_na: 115.0,
            gamma_n: 0.2,
            gamma_m: 0.5,
            gamma_h: 0.1,
            alpha_n: 0.06,
            alpha_m: 0.025,
            alpha_h: 0.06,
            n_modes: 4,
            v_radius: 100.0,
            n_range: clamp_range(),
            m_range: clamp_range(),
            h_range: clamp_range(),
        }
    }

    /// Conductances scaled down until the spectral-gap gate holds.
    pub fn weak() -> Self {
        Self {
            g_k: 0.001,
            e_k: -1.0,
            g_na: 0.001,
            e_na: 1.0,
            v_radius: 1.0,
            ..Self::standard()
        }
    }

    /// Diffusion coefficient `D = 1/(C(r_e + r_i))`.
    pub fn diffusion(&self) -> f64 {
        1.0 / (self.c * (self.r_e + self.r_i))
    }

    /// Rest values `α/γ` of the gating variables.
    pub fn rest(&self) -> [f64; 3] {
        [
            self.alpha_n / self.gamma_n,
            self.alpha_m / self.gamma_m,
            self.alpha_h / self.gamma_h,
        ]
    }

    fn validate(&self) -> Result<()> {
        if self.n_modes == 0 {
            return Err(Error::Config("n_modes must be >= 1".into()));
        }
        if !(self.c > 0.0 && self.r_e + self.r_i > 0.0) {
            return Err(Error::Config("C and r_e + r_i must be positive".into()));
        }
        if [self.gamma_n, self.gamma_m, self.gamma_h].contains(&0.0) {
            return Err(Error::Config("gating rates gamma must be nonzero".into()));
        }
        for r in [self.n_range, self.m_range, self.h_range] {
            if !(0.0 <= r[0] && r[0] < r[1] && r[1] <= 1.0) {
                return Err(Error::Config(format!("gating clamp range {r:?} must lie in [0, 1]")));
            }
        }
        if !(self.v_radius > 0.0 && self.v_radius.is_finite()) {
            return Err(Error::Config("V clamp radius must be positive and finite".into()));
        }
        Ok(())
    }
}

/// The ionic current at a point: `−g_k n⁴(V − E_k) − g_Na m³h(V − E_Na)`.
pub fn hh_current(cfg: &HodgkinHuxleyConfig, v: f64, n: f64, m: f64, h: f64) -> f64 {
    -cfg.g_k * n.powi(4) * (v - cfg.e_k) - cfg.g_na * m.powi(3) * h * (v - cfg.e_na)
}

/// Sine coefficients of the constant function 1 on `(0, π)`.
fn constant_coefficients(n_modes: usize) -> Vec<f64> {
    let c = (2.0 / std::f64::consts::PI).sqrt();
    (1..=n_modes)
        .map(|n| if n % 2 == 1 { 2.0 * c / n as f64 } else { 0.0 })
        .collect()
}

/// Smooth clamp of a scalar into `range`: identity within
/// `(hi − lo)/(2√2)` of the centre, saturating at the ends.
fn clamp_gate(range: [f64; 2], x: f64) -> f64 {
    let centre = 0.5 * (range[0] + range[1]);
    let r = (range[1] - range[0]) / (2.0 * std::f64::consts::SQRT_2);
    centre + rescale(&[x - centre], r)[0]
}

#[derive(Clone, Debug)]
struct HodgkinHuxleyCurrent {
    cfg: HodgkinHuxleyConfig,
    e: Vec<f64>,
    rest: [f64; 3],
}

impl Nonlinearity for HodgkinHuxleyCurrent {
    fn x_dim(&self) -> usize {
        self.cfg.n_modes
    }
    fn y_dim(&self) -> usize {
        3
    }
    fn eval_into(&self, x: &[f64], y: &[f64], out: &mut [f64]) {
        let cfg = &self.cfg;
        // The V clamp radius is √2 larger than its identity radius.
        let v = rescale(x, cfg.v_radius / std::f64::consts::SQRT_2);
        let n = clamp_gate(cfg.n_range, self.rest[0] + y[0]);
        let m = clamp_gate(cfg.m_range, self.rest[1] + y[1]);
        let h = clamp_gate(cfg.h_range, self.rest[2] + y[2]);
        let c = cfg.g_k * n.powi(4) + cfg.g_na * m.powi(3) * h;
        let d = cfg.g_k * n.powi(4) * cfg.e_k + cfg.g_na * m.powi(3) * h * cfg.e_na;
        for i in 0..out.len() {
            out[i] = -c * v[i] + d * self.e[i];
        }
    }
}

/// Clamped current with analytic upper bounds on `|f|_∞` and `|f|_Lip`.
/// The gating block is `B = diag(γ_n, γ_m, γ_h)` acting on deviations from
/// the rest values `α/γ`.
pub fn make_hodgkin_huxley(cfg: &HodgkinHuxleyConfig) -> Result<SemilinearSystem> {
    cfg.validate()?;
    let d = cfg.diffusion();
    let k = cfg.n_modes;
    let gen_a = SpectralGenerator::new((1..=k).map(|n| -d * (n * n) as f64).collect())?;
    let spec = DichotomySpec::new(k, (0..k).collect(), 1.0, d)?;
    let gen_b = SpectralGenerator::new(vec![cfg.gamma_n, cfg.gamma_m, cfg.gamma_h])?;
    let e = constant_coefficients(k);
    let e_norm = norm(&e);

    let (n_hi, m_hi, h_hi) = (cfg.n_range[1], cfg.m_range[1], cfg.h_range[1]);
    let v_max = cfg.v_radius;
    let c_max = cfg.g_k * n_hi.powi(4) + cfg.g_na * m_hi.powi(3) * h_hi;
    let d_max = cfg.g_k * n_hi.powi(4) * cfg.e_k.abs() + cfg.g_na * m_hi.powi(3) * h_hi * cfg.e_na.abs();
    let f_sup = c_max * v_max + d_max * e_norm;
    // Both smooth clamps have derivative at most 9.
    let lip_v = 9.0 * c_max;
    let dn = 4.0 * cfg.g_k * n_hi.powi(3) * (v_max + cfg.e_k.abs() * e_norm);
    let dm = 3.0 * cfg.g_na * m_hi.powi(2) * h_hi * (v_max + cfg.e_na.abs() * e_norm);
    let dh = cfg.g_na * m_hi.powi(3) * (v_max + cfg.e_na.abs() * e_norm);
    let lip_y = 9.0 * (dn * dn + dm * dm + dh * dh).sqrt();
    let f_lip = lip_v.max(lip_y);

    let f = HodgkinHuxleyCurrent {
        cfg: cfg.clone(),
        e,
        rest: cfg.rest(),
    };
    SemilinearSystem::new("hodgkin-huxley", gen_a, spec, gen_b, Arc::new(f), f_sup, f_lip)
}

/// Toy linear part with the quadratic nonlinearity `c(x₀² + y₀²)·b`
/// localized to the ball of radius `delta`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalizedConfig {
    pub dim_stable: usize,
    pub dim_unstable: usize,
    pub b_eigenvalues: Vec<f64>,
    pub coefficient: f64,
    pub delta: f64,
}

impl LocalizedConfig {
    pub fn modulus(&self) -> Modulus {
        Modulus::linear(2.0 * self.coefficient.abs())
    }
}

/// The base quadratic and its localization.
pub fn localized_parts(cfg: &LocalizedConfig) -> Result<(Arc<dyn Nonlinearity>, LocalNonlinearity)> {
    let base: Arc<dyn Nonlinearity> = Arc::new(Quadratic {
        coefficient: cfg.coefficient,
        output: unit_ones(cfg.dim_stable + cfg.dim_unstable),
        y_dim: cfg.b_eigenvalues.len(),
    });
    let local = LocalNonlinearity::new(base.clone(), cfg.delta, cfg.modulus())?;
    Ok((base, local))
}

pub fn make_localized(cfg: &LocalizedConfig) -> Result<SemilinearSystem> {
    let toy = make_toy(&ToyConfig {
        b_eigenvalues: cfg.b_eigenvalues.clone(),
        ..ToyConfig::new(cfg.dim_stable, cfg.dim_unstable, 0.0)
    })?;
    let (_, local) = localized_parts(cfg)?;
    let (f_sup, f_lip) = (local.sup_bound(), local.lip_bound());
    let sys = SemilinearSystem::new(
        format!("toy-local-{}-{}", cfg.dim_stable, cfg.dim_unstable),
        toy.gen_a().clone(),
        toy.dichotomy().clone(),
        toy.gen_b().clone(),
        Arc::new(local),
        f_sup,
        f_lip,
    )?;
    Ok(sys.with_tag("localized"))
}

/// Serialized system definition; `kind` selects the factory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SystemConfig {
    Toy(ToyConfig),
    Heat(HeatConfig),
    HodgkinHuxley(HodgkinHuxleyConfig),
    Localized(LocalizedConfig),
}

pub const BUILTIN_NAMES: [&str; 8] = [
    "toy-1-1",
    "toy-2-1",
    "toy-gate-violation",
    "toy-zero",
    "heat-8",
    "hh",
    "hh-weak",
    "toy-local",
];

impl SystemConfig {
    /// Built-in systems by name. `heat-N` accepts any `N ≥ 1`.
    pub fn builtin(name: &str) -> Result<Self> {
        let toy = |ds, du, scale| ToyConfig::new(ds, du, scale);
        Ok(match name {
            "toy-1-1" => SystemConfig::Toy(toy(1, 1, 0.1)),
            "toy-2-1" => SystemConfig::Toy(ToyConfig {
                gap_margin: 0.5,
                ..toy(2, 1, 0.1)
            }),
            "toy-gate-violation" => SystemConfig::Toy(toy(1, 1, 0.3)),
            "toy-zero" => SystemConfig::Toy(toy(1, 1, 0.0)),
            "hh" => SystemConfig::HodgkinHuxley(HodgkinHuxleyConfig::standard()),
            "hh-weak" => SystemConfig::HodgkinHuxley(HodgkinHuxleyConfig::weak()),
            "toy-local" => SystemConfig::Localized(LocalizedConfig {
                dim_stable: 1,
                dim_unstable: 1,
                b_eigenvalues: vec![-0.5],
                coefficient: 1.0,
                delta: 0.005,
            }),
            other => {
                let n = other
                    .strip_prefix("heat-")
                    .and_then(|n| n.parse::<usize>().ok())
                    .filter(|&n| n >= 1)
                    .ok_or_else(|| Error::Config(format!("unknown system '{other}'")))?;
                SystemConfig::Heat(HeatConfig::new(n))
            }
        })
    }

    pub fn build(&self) -> Result<SemilinearSystem> {
        match self {
            SystemConfig::Toy(c) => make_toy(c),
            SystemConfig::Heat(c) => make_heat(c),
            SystemConfig::HodgkinHuxley(c) => make_hodgkin_huxley(c),
            SystemConfig::Localized(c) => make_localized(c),
        }
    }

    /// Copy with one numeric field replaced: `f_lip` (toy, heat), `delta`
    /// (localized) or `gap_margin` (toy).
    pub fn with_axis(&self, axis: &str, value: f64) -> Result<Self> {
        let mut out = self.clone();
        match (&mut out, axis) {
            (SystemConfig::Toy(c), "f_lip") => c.scale = c.scale_for_lip(value)?,
            (SystemConfig::Toy(c), "gap_margin") => c.gap_margin = value,
            (SystemConfig::Heat(c), "f_lip") => c.f_lip = value,
            (SystemConfig::Localized(c), "delta") => c.delta = value,
            (_, axis) => {
                return Err(Error::Config(format!(
                    "axis '{axis}' does not apply to a {} system",
                    self.kind()
                )))
            }
        }
        Ok(out)
    }

    pub fn kind(&self) -> &'static str {
        match self {
            SystemConfig::Toy(_) => "toy",
            SystemConfig::Heat(_) => "heat",
            SystemConfig::HodgkinHuxley(_) => "hodgkin_huxley",
            SystemConfig::Localized(_) => "localized",
        }
    }
}
