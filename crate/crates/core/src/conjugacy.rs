//! The conjugacy `H(u) = (u₁ + h(u), u₂)` and its inverse
//! `G(v) = (v₁ + g(v), v₂)`.
//!
//! `h(ξ, η) = −∫_ℝ G_A(−s) f(U(s; ξ, η)) ds` integrates the forcing along
//! the nonlinear solution through `(ξ, η)`; `g(ξ, η) = w(0)` where `w` is
//! the bounded solution of `w' = Aw + f(e^{At}ξ + w, e^{Bt}η)`.

use std::collections::HashMap;
use std::sync::RwLock;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flows::{bounded_solution_whole_line, half_line, mild_solution, PicardOptions, SemilinearSystem, WholeLine};
use crate::grid::{simpson_weights, TimeGrid};
use crate::operators::exp_scale;
use crate::{dist, norm};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConjugacyConfig {
    /// Green-kernel tail dropped beyond the truncation horizon.
    pub tail_tol: f64,
    pub picard: PicardOptions,
    /// Quadrature step; defaults to `0.01 / max(α, ω_c)`.
    #[serde(default)]
    pub step: Option<f64>,
    /// Replaces the computed truncation horizon `T*`.
    #[serde(default)]
    pub horizon_override: Option<f64>,
    pub cache: bool,
    /// Resolution of cache keys.
    pub cache_quantum: f64,
}

impl Default for ConjugacyConfig {
    fn default() -> Self {
        Self {
            tail_tol: 1e-8,
            picard: PicardOptions::default(),
            step: None,
            horizon_override: None,
            cache: true,
            cache_quantum: 1e-13,
        }
    }
}

type Cache = RwLock<HashMap<Vec<i64>, Vec<f64>>>;

#[derive(Debug)]
pub struct ConjugacyEngine {
    system: SemilinearSystem,
    config: ConjugacyConfig,
    horizon: f64,
    step: f64,
    h_cache: Cache,
    g_cache: Cache,
}

impl ConjugacyEngine {
    /// Fails with a precondition error when the spectral-gap gate does not hold.
    pub fn new(system: SemilinearSystem, config: ConjugacyConfig) -> Result<Self> {
        system.check_gap()?;
        let step = config.step.unwrap_or_else(|| system.default_step());
        if !(step > 0.0) {
            return Err(Error::Config(format!("quadrature step {step} must be positive")));
        }
        if !(config.tail_tol > 0.0) {
            return Err(Error::Config("tail tolerance must be positive".into()));
        }
        let horizon = match config.horizon_override {
            Some(t) if t > 0.0 => t,
            Some(t) => return Err(Error::Config(format!("horizon override {t} must be positive"))),
            None => system.tail_horizon(config.tail_tol).unwrap_or(0.0),
        };
        Ok(Self {
            system,
            config,
            horizon,
            step,
            h_cache: RwLock::default(),
            g_cache: RwLock::default(),
        })
    }

    pub fn system(&self) -> &SemilinearSystem {
        &self.system
    }
    pub fn config(&self) -> &ConjugacyConfig {
        &self.config
    }
    /// Truncation horizon `T*`.
    pub fn horizon(&self) -> f64 {
        self.horizon
    }
    pub fn step(&self) -> f64 {
        self.step
    }

    /// `2k|f|_∞/α`, the a priori bound on `|h|` and `|g|`.
    pub fn norm_bound(&self) -> f64 {
        2.0 * self.system.k() * self.system.f_sup() / self.system.alpha()
    }

    pub fn cache_len(&self) -> usize {
        self.h_cache.read().map_or(0, |c| c.len()) + self.g_cache.read().map_or(0, |c| c.len())
    }

    pub fn clear_cache(&self) {
        if let Ok(mut c) = self.h_cache.write() {
            c.clear();
        }
        if let Ok(mut c) = self.g_cache.write() {
            c.clear();
        }
    }

    fn key(&self, xi: &[f64], eta: &[f64]) -> Vec<i64> {
        let q = self.config.cache_quantum;
        xi.iter()
            .chain(eta)
            .map(|v| (v / q).round() as i64)
            .collect()
    }

    fn cached(
        &self,
        cache: &Cache,
        xi: &[f64],
        eta: &[f64],
        compute: impl FnOnce() -> Result<Vec<f64>>,
    ) -> Result<Vec<f64>> {
        if !self.config.cache {
            return compute();
        }
        let key = self.key(xi, eta);
        if let Some(v) = cache.read().ok().and_then(|c| c.get(&key).cloned()) {
            return Ok(v);
        }
        let v = compute()?;
        if let Ok(mut c) = cache.write() {
            c.insert(key, v.clone());
        }
        Ok(v)
    }

    fn trivial(&self) -> bool {
        self.horizon == 0.0 || self.system.nonlinearity().is_zero()
    }

    fn check_input(&self, xi: &[f64], eta: &[f64]) -> Result<()> {
        Error::check_dim(self.system.x_dim(), xi.len())?;
        Error::check_dim(self.system.y_dim(), eta.len())?;
        if xi.iter().chain(eta).any(|v| !v.is_finite()) {
            return Err(Error::Input("non-finite initial data".into()));
        }
        Ok(())
    }

    /// `h(ξ, η)`: stable coordinates `−∫_{−T*}^0 e^{−λs}F(U(s))ds`, unstable
    /// coordinates `∫_0^{T*} e^{−λs}F(U(s))ds`.
    pub fn compute_h(&self, xi: &[f64], eta: &[f64]) -> Result<Vec<f64>> {
        self.check_input(xi, eta)?;
        if self.trivial() {
            return Ok(vec![0.0; xi.len()]);
        }
        self.cached(&self.h_cache, xi, eta, || self.h_uncached(xi, eta))
    }

    fn h_uncached(&self, xi: &[f64], eta: &[f64]) -> Result<Vec<f64>> {
        let sys = &self.system;
        let n = (self.horizon / self.step).ceil().max(2.0) as usize;
        let w = simpson_weights(n + 1, self.step);
        let ev = sys.gen_a().eigenvalues();
        let spec = sys.dichotomy();
        let mut out = vec![0.0; xi.len()];
        for (dir, idx, sign) in [
            (-1.0, spec.stable_indices(), -1.0),
            (1.0, spec.unstable_indices(), 1.0),
        ] {
            if idx.is_empty() {
                continue;
            }
            let hl = half_line(sys, xi, eta, dir, n, self.step, &self.config.picard)?;
            for &i in idx {
                // Along τ = |s| the kernel is e^{−λ s} = e^{dir·(−λ)τ} = e^{−|λ|τ}.
                let rate = -ev[i].abs();
                let mut acc = 0.0;
                for k in 0..=n {
                    acc += w[k] * exp_scale(rate, k as f64 * self.step, hl.f[i][k]);
                }
                out[i] = sign * acc;
            }
        }
        Ok(out)
    }

    /// `g(ξ, η) = w(0)` for the bounded fixed point `w` on `[−T*, T*]`.
    pub fn compute_g(&self, xi: &[f64], eta: &[f64]) -> Result<Vec<f64>> {
        self.check_input(xi, eta)?;
        if self.trivial() {
            return Ok(vec![0.0; xi.len()]);
        }
        self.cached(&self.g_cache, xi, eta, || {
            let wl = self.g_solution(xi, eta, &self.config.picard)?;
            Ok(wl.w.iter().map(|c| c[wl.grid.zero_index()]).collect())
        })
    }

    /// Whole-line fixed point behind `g`, from an arbitrary starting guess.
    pub fn g_solution(&self, xi: &[f64], eta: &[f64], picard: &PicardOptions) -> Result<WholeLine> {
        self.check_input(xi, eta)?;
        let sys = &self.system;
        let half = (self.horizon / self.step).ceil().max(1.0) as i64;
        let grid = TimeGrid::new(self.step, -half, half)?;
        let lin_x: Vec<Vec<f64>> = grid
            .times()
            .iter()
            .map(|&t| sys.gen_a().eigenvalues().iter().zip(xi).map(|(&l, &x)| exp_scale(l, t, x)).collect())
            .collect();
        let lin_y: Vec<Vec<f64>> = grid
            .times()
            .iter()
            .map(|&t| sys.gen_b().eigenvalues().iter().zip(eta).map(|(&l, &y)| exp_scale(l, t, y)).collect())
            .collect();
        let f = sys.nonlinearity();
        let mut xb = vec![0.0; xi.len()];
        let mut forcing = |k: usize, w: &[f64], out: &mut [f64]| {
            for (b, (l, wi)) in xb.iter_mut().zip(lin_x[k].iter().zip(w)) {
                *b = l + wi;
            }
            f.eval_into(&xb, &lin_y[k], out);
        };
        bounded_solution_whole_line(sys, &mut forcing, half as f64 * self.step, self.step, picard)
    }

    /// `H(u₁, u₂) = (u₁ + h(u₁, u₂), u₂)`.
    pub fn h_map(&self, u1: &[f64], u2: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let h = self.compute_h(u1, u2)?;
        Ok((u1.iter().zip(&h).map(|(a, b)| a + b).collect(), u2.to_vec()))
    }

    /// `G(v₁, v₂) = (v₁ + g(v₁, v₂), v₂)`.
    pub fn g_map(&self, v1: &[f64], v2: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let g = self.compute_g(v1, v2)?;
        Ok((v1.iter().zip(&g).map(|(a, b)| a + b).collect(), v2.to_vec()))
    }

    /// Evaluates identity and equivariance defects on every sample.
    /// Equivariance is measured on the nodes of `grid` when given.
    pub fn verify_conjugacy(
        &self,
        samples: &[(Vec<f64>, Vec<f64>)],
        grid: Option<&TimeGrid>,
    ) -> Result<ConjugacyReport> {
        if samples.is_empty() {
            return Err(Error::Input("verify_conjugacy needs at least one sample".into()));
        }
        let rows = samples
            .par_iter()
            .enumerate()
            .map(|(id, (u1, u2))| self.sample_defects(id, u1, u2, grid))
            .collect::<Result<Vec<_>>>()?;
        let max = |f: fn(&SampleDefects) -> f64| rows.iter().map(f).fold(0.0, f64::max);
        Ok(ConjugacyReport {
            max_hg_identity_error: max(|r| r.hg_identity),
            max_gh_identity_error: max(|r| r.gh_identity),
            max_equivariance_error: max(|r| r.equivariance),
            max_h_norm: max(|r| r.h_norm),
            max_g_norm: max(|r| r.g_norm),
            norm_bound: self.norm_bound(),
            sample_count: rows.len(),
            grid: grid.copied(),
            horizon: self.horizon,
            step: self.step,
            rows,
        })
    }

    fn sample_defects(
        &self,
        id: usize,
        u1: &[f64],
        u2: &[f64],
        grid: Option<&TimeGrid>,
    ) -> Result<SampleDefects> {
        let sys = &self.system;
        let (hu1, hu2) = self.h_map(u1, u2)?;
        let (ghu1, ghu2) = self.g_map(&hu1, &hu2)?;
        let gh = dist(&ghu1, u1) + dist(&ghu2, u2);
        let (gv1, gv2) = self.g_map(u1, u2)?;
        let (hgv1, hgv2) = self.h_map(&gv1, &gv2)?;
        let hg = dist(&hgv1, u1) + dist(&hgv2, u2);
        let h_norm = dist(&hu1, u1);
        let g_norm = dist(&gv1, u1);
        let mut equivariance = 0.0f64;
        if let Some(grid) = grid {
            let traj = mild_solution(sys, u1, u2, grid, &self.config.picard)?;
            for (k, &t) in traj.times.iter().enumerate() {
                let (a1, a2) = self.h_map(&traj.x_states[k], &traj.y_states[k])?;
                let b1 = sys.gen_a().apply(t, &hu1)?;
                let b2 = sys.gen_b().apply(t, &hu2)?;
                equivariance = equivariance.max(dist(&a1, &b1) + dist(&a2, &b2));
            }
        }
        Ok(SampleDefects {
            id,
            u1: u1.to_vec(),
            u2: u2.to_vec(),
            hg_identity: hg,
            gh_identity: gh,
            equivariance,
            h_norm,
            g_norm,
        })
    }
}

/// Per-sample defects, all in the product norm `|x| + |y|`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleDefects {
    pub id: usize,
    pub u1: Vec<f64>,
    pub u2: Vec<f64>,
    /// `|H(G(v)) − v|` with `v` the sample.
    pub hg_identity: f64,
    /// `|G(H(u)) − u|` with `u` the sample.
    pub gh_identity: f64,
    /// `max_t |H(U(t; u)) − V(t; H(u))|`.
    pub equivariance: f64,
    pub h_norm: f64,
    pub g_norm: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConjugacyReport {
    pub max_hg_identity_error: f64,
    pub max_gh_identity_error: f64,
    pub max_equivariance_error: f64,
    pub max_h_norm: f64,
    pub max_g_norm: f64,
    pub norm_bound: f64,
    pub sample_count: usize,
    pub grid: Option<TimeGrid>,
    pub horizon: f64,
    pub step: f64,
    pub rows: Vec<SampleDefects>,
}

impl ConjugacyReport {
    /// CSV of per-sample defects with a header row.
    pub fn rows_csv(&self) -> String {
        let mut s = String::new();
        let m = self.rows.first().map_or(0, |r| r.u1.len());
        let n = self.rows.first().map_or(0, |r| r.u2.len());
        s.push_str("id");
        for i in 0..m {
            s.push_str(&format!(",u1_{i}"));
        }
        for j in 0..n {
            s.push_str(&format!(",u2_{j}"));
        }
        s.push_str(",hg_identity,gh_identity,equivariance,h_norm,g_norm\n");
        for r in &self.rows {
            s.push_str(&r.id.to_string());
            for v in r.u1.iter().chain(&r.u2) {
                s.push_str(&format!(",{v}"));
            }
            s.push_str(&format!(
                ",{},{},{},{},{}\n",
                r.hg_identity, r.gh_identity, r.equivariance, r.h_norm, r.g_norm
            ));
        }
        s
    }

    pub fn identity_ok(&self, tol: f64) -> bool {
        self.max_hg_identity_error <= tol && self.max_gh_identity_error <= tol
    }

    pub fn norms_ok(&self, slack: f64) -> bool {
        self.max_h_norm <= self.norm_bound + slack && self.max_g_norm <= self.norm_bound + slack
    }
}

/// Uniform samples from the box `[−radius, radius]^{m+n}`.
pub fn random_samples(sys: &SemilinearSystem, count: usize, radius: f64, seed: u64) -> Vec<(Vec<f64>, Vec<f64>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let x = (0..sys.x_dim()).map(|_| rng.gen_range(-radius..=radius)).collect();
            let y = (0..sys.y_dim()).map(|_| rng.gen_range(-radius..=radius)).collect();
            (x, y)
        })
        .collect()
}

/// Norm of `h` over the samples, for quick bound checks.
pub fn max_h_norm(engine: &ConjugacyEngine, samples: &[(Vec<f64>, Vec<f64>)]) -> Result<f64> {
    samples
        .par_iter()
        .map(|(x, y)| engine.compute_h(x, y).map(|h| norm(&h)))
        .collect::<Result<Vec<_>>>()
        .map(|v| v.into_iter().fold(0.0, f64::max))
}
