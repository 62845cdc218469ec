//! Verification suites. Each one returns pass/fail, scalar metrics and
//! CSV artifacts; a violated precondition is a failed suite, not an error.

use std::time::Instant;

use conjlab_core::conjugacy::random_samples;
use conjlab_core::flows::{decay_estimate, duhamel_residual, fiber_pairs, mild_solution};
use conjlab_core::inequalities::{
    check_implication, check_implication_backward, synthesize_extremal, synthesize_extremal_backward,
    DichotomyIneqParams, ImplicationRow,
};
use conjlab_core::localization::verify_localization;
use conjlab_core::operators::verify_dichotomy;
use conjlab_core::regularity::{
    base_points, estimate_exponent, theory_holder_exponent, theory_lipschitz_p1, FiberMask, RegularityEstimate,
    SamplingPlan,
};
use conjlab_core::systems::{localized_parts, SystemConfig};
use conjlab_core::{
    ConjugacyConfig, ConjugacyEngine, Fiber, PicardOptions, SemilinearSystem, Side, TimeGrid,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::config::{ExperimentConfig, Suite};

pub const IDENTITY_TOL: f64 = 1e-6;
pub const EQUIVARIANCE_TOL: f64 = 1e-5;
pub const NORM_SLACK: f64 = 1e-8;
pub const DUHAMEL_TOL: f64 = 1e-8;
pub const DECAY_SLACK: f64 = 1e-6;
pub const INEQUALITY_SLACK: f64 = 1e-9;

#[derive(Clone, Debug, Serialize)]
pub struct SuiteOutcome {
    pub suite: Suite,
    pub passed: bool,
    pub metrics: Map<String, Value>,
    pub diagnostics: Vec<String>,
    /// `(file name, contents)`; written by the runner.
    #[serde(skip)]
    pub artifacts: Vec<(String, String)>,
    pub files: Vec<String>,
}

impl SuiteOutcome {
    fn new(suite: Suite) -> Self {
        Self {
            suite,
            passed: true,
            metrics: Map::new(),
            diagnostics: Vec::new(),
            artifacts: Vec::new(),
            files: Vec::new(),
        }
    }

    fn metric(&mut self, key: &str, v: impl Into<Value>) {
        self.metrics.insert(key.into(), v.into());
    }

    fn require(&mut self, ok: bool, what: impl Into<String>) {
        if !ok {
            self.passed = false;
            self.diagnostics.push(what.into());
        }
    }

    fn fail(mut self, what: impl Into<String>) -> Self {
        self.passed = false;
        self.diagnostics.push(what.into());
        self
    }

    fn artifact(&mut self, name: &str, contents: String) {
        self.files.push(name.into());
        self.artifacts.push((name.into(), contents));
    }
}

pub struct Context<'a> {
    pub config: &'a ExperimentConfig,
    pub system_config: &'a SystemConfig,
    pub system: &'a SemilinearSystem,
}

impl Context<'_> {
    fn picard(&self) -> PicardOptions {
        PicardOptions {
            tol: self.config.tolerances.picard,
            ..PicardOptions::default()
        }
    }

    fn engine(&self) -> conjlab_core::Result<ConjugacyEngine> {
        let t = &self.config.tolerances;
        let cfg = ConjugacyConfig {
            tail_tol: t.quadrature,
            picard: self.picard(),
            horizon_override: t.horizon_override,
            ..ConjugacyConfig::default()
        };
        ConjugacyEngine::new(self.system.clone(), cfg)
    }

    /// Stiff systems are expensive per sample and ill-conditioned backward.
    fn stiff(&self) -> bool {
        3.0 * self.system.growth().omega_c > 10.0
    }
}

pub fn run_suite(suite: Suite, ctx: &Context) -> SuiteOutcome {
    match suite {
        Suite::Dichotomy => dichotomy(ctx),
        Suite::Conjugacy => conjugacy(ctx),
        Suite::Regularity => regularity(ctx),
        Suite::Inequalities => inequalities(ctx),
        Suite::Localization => localization(ctx),
    }
}

fn dichotomy(ctx: &Context) -> SuiteOutcome {
    let mut out = SuiteOutcome::new(Suite::Dichotomy);
    let sys = ctx.system;
    let seed = ctx.config.seed;

    let times: Vec<f64> = (-20..=20).map(|i| i as f64 * 0.25).collect();
    let states: Vec<Vec<f64>> = random_samples(sys, 16, 1.0, seed).into_iter().map(|(x, _)| x).collect();
    match verify_dichotomy(sys.gen_a(), sys.dichotomy(), &times, &states, 1e-12) {
        Ok(d) => {
            out.metric("s1_commutation", d.s1_commutation);
            out.metric("s2_forward_decay", d.s2_forward_decay);
            out.metric("s4_backward_decay", d.s4_backward_decay);
            out.require(d.passed, "dichotomy estimates violated");
            if let Some(s) = d.spectrum {
                out.require(false, s);
            }
        }
        Err(e) => return out.fail(e.to_string()),
    }

    let (x0, y0) = random_samples(sys, 1, 1.0, seed ^ 1).remove(0);
    let grid = match TimeGrid::covering(0.0, 1.0, 0.01) {
        Ok(g) => g,
        Err(e) => return out.fail(e.to_string()),
    };
    match mild_solution(sys, &x0, &y0, &grid, &ctx.picard()).and_then(|t| Ok((duhamel_residual(sys, &t)?, t))) {
        Ok((res, traj)) => {
            // The residual scales with |f|, so the threshold does too.
            let limit = DUHAMEL_TOL * sys.f_sup().max(1.0);
            out.metric("duhamel_residual", res);
            out.metric("duhamel_limit", limit);
            out.require(res <= limit, format!("Duhamel residual {res:e} exceeds {limit:e}"));
            out.artifact("dichotomy_trajectory.csv", traj.to_csv_string());
        }
        Err(e) => out.require(false, format!("mild solution: {e}")),
    }

    if sys.dichotomy().stable_indices().is_empty() {
        out.metric("decay_checked", false);
        return out;
    }
    if let Err(e) = sys.check_half_gap() {
        out.metric("decay_checked", false);
        out.diagnostics.push(format!("decay estimate skipped: {e}"));
        return out;
    }
    let pairs = fiber_pairs(sys, Side::Stable, 5, 1.0, seed ^ 2);
    let grid = TimeGrid::covering(0.0, 5.0, 0.05).expect("static grid");
    match decay_estimate(sys, &pairs, Side::Stable, &grid, &ctx.picard()) {
        Ok(r) => {
            out.metric("decay_checked", true);
            out.metric("decay_min_slack", r.min_slack);
            out.metric("decay_alpha1", r.alpha1);
            out.require(
                r.min_slack >= -DECAY_SLACK,
                format!("decay envelope violated by {:e}", -r.min_slack),
            );
            out.artifact("dichotomy_decay.csv", r.rows_csv());
        }
        Err(e) => out.require(false, format!("decay estimate: {e}")),
    }
    out
}

fn conjugacy(ctx: &Context) -> SuiteOutcome {
    let mut out = SuiteOutcome::new(Suite::Conjugacy);
    let sys = ctx.system;
    let engine = match ctx.engine() {
        Ok(e) => e,
        Err(e) => return out.fail(e.to_string()),
    };
    let stiff = ctx.stiff();
    let count = ctx.config.samples.unwrap_or(if stiff { 4 } else { 100 });
    let samples = random_samples(sys, count, 2.0, ctx.config.seed);
    let start = Instant::now();
    let ident = match engine.verify_conjugacy(&samples, None) {
        Ok(r) => r,
        Err(e) => return out.fail(e.to_string()),
    };
    let elapsed = start.elapsed().as_secs_f64();
    eprintln!("conjugacy: {} identity samples in {elapsed:.2} s", ident.sample_count);

    let grid = if stiff {
        TimeGrid::covering(0.0, 3.0, 0.25)
    } else {
        TimeGrid::covering(-3.0, 3.0, 0.1)
    }
    .expect("static grid");
    let eq_samples = &samples[..count.min(if stiff { 3 } else { 20 })];
    let equi = match engine.verify_conjugacy(eq_samples, Some(&grid)) {
        Ok(r) => r,
        Err(e) => return out.fail(e.to_string()),
    };

    let max_h = ident.max_h_norm.max(equi.max_h_norm);
    let max_g = ident.max_g_norm.max(equi.max_g_norm);
    out.metric("samples", ident.sample_count);
    out.metric("max_hg_identity_error", ident.max_hg_identity_error);
    out.metric("max_gh_identity_error", ident.max_gh_identity_error);
    out.metric("equivariance_samples", equi.sample_count);
    out.metric("equivariance_t_min", grid.time(0));
    out.metric("equivariance_t_max", grid.time(grid.len() - 1));
    out.metric("max_equivariance_error", equi.max_equivariance_error);
    out.metric("max_h_norm", max_h);
    out.metric("max_g_norm", max_g);
    out.metric("norm_bound", ident.norm_bound);
    out.metric("horizon", ident.horizon);
    out.metric("step", ident.step);
    out.metric("gap_ratio", sys.gap_ratio());
    out.require(
        ident.identity_ok(IDENTITY_TOL),
        format!(
            "identity error {:e} exceeds {IDENTITY_TOL:e}",
            ident.max_hg_identity_error.max(ident.max_gh_identity_error)
        ),
    );
    out.require(
        equi.max_equivariance_error <= EQUIVARIANCE_TOL,
        format!("equivariance error {:e} exceeds {EQUIVARIANCE_TOL:e}", equi.max_equivariance_error),
    );
    let bound = ident.norm_bound + NORM_SLACK;
    out.require(
        max_h <= bound && max_g <= bound,
        format!("sup |h| = {max_h}, sup |g| = {max_g} exceed {bound}"),
    );
    out.artifact("conjugacy_samples.csv", ident.rows_csv());
    out.artifact("conjugacy_equivariance.csv", equi.rows_csv());
    out
}

fn fit_metrics(out: &mut SuiteOutcome, prefix: &str, est: &RegularityEstimate) {
    out.metric(&format!("{prefix}_slope"), est.fitted_exponent);
    out.metric(&format!("{prefix}_constant"), est.fitted_constant);
    out.metric(&format!("{prefix}_max_ratio"), est.max_ratio);
    out.metric(&format!("{prefix}_points_used"), est.points_used);
    out.metric(&format!("{prefix}_points_excluded"), est.points_excluded);
}

fn regularity(ctx: &Context) -> SuiteOutcome {
    let mut out = SuiteOutcome::new(Suite::Regularity);
    let sys = ctx.system;
    let engine = match ctx.engine() {
        Ok(e) => e,
        Err(e) => return out.fail(e.to_string()),
    };
    let (p1, q) = match (theory_lipschitz_p1(sys), theory_holder_exponent(sys)) {
        (Ok(p1), Ok(q)) => (p1, q),
        (Err(e), _) | (_, Err(e)) => return out.fail(e.to_string()),
    };
    out.metric("theory_p1", p1);
    out.metric("theory_q_tilde", q);
    let seed = ctx.config.seed;
    let base = SamplingPlan {
        base_points: 8,
        directions: 3,
        seed,
        ..SamplingPlan::default()
    };

    let mask = FiberMask::of(sys, Fiber::Stable);
    if mask.is_empty() {
        out.diagnostics.push("stable fiber is empty; H fit skipped".into());
    } else {
        let bases = base_points(sys.x_dim(), sys.y_dim(), &base);
        match estimate_exponent(|x: &[f64], y: &[f64]| engine.h_map(x, y), &bases, &mask, Fiber::Stable, &base) {
            Ok(h) => {
                fit_metrics(&mut out, "h_stable", &h);
                out.require(
                    (0.95..=1.05).contains(&h.fitted_exponent),
                    format!("H slope {} outside [0.95, 1.05]", h.fitted_exponent),
                );
                out.require(h.max_ratio <= p1, format!("H ratio {} exceeds p1 = {p1}", h.max_ratio));
                out.artifact("regularity_h.csv", h.samples_csv());
            }
            Err(e) => out.require(false, format!("H fit: {e}")),
        }
    }

    // G is smooth away from the equilibrium; its Hölder loss shows near it.
    let near = SamplingPlan {
        base_radius: 1e-3,
        ..base
    };
    let bases = base_points(sys.x_dim(), sys.y_dim(), &near);
    let full = FiberMask::full(sys.x_dim(), sys.y_dim());
    match estimate_exponent(|x: &[f64], y: &[f64]| engine.g_map(x, y), &bases, &full, Fiber::Full, &near) {
        Ok(g) => {
            fit_metrics(&mut out, "g_full", &g);
            out.require(
                g.fitted_exponent <= 1.0 + 1e-9 && g.fitted_exponent >= q - 0.1,
                format!("G slope {} outside [{}, 1]", g.fitted_exponent, q - 0.1),
            );
            out.artifact("regularity_g.csv", g.samples_csv());
        }
        Err(e) => out.require(false, format!("G fit: {e}")),
    }
    out
}

fn random_params(count: usize, seed: u64) -> Vec<DichotomyIneqParams> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let alpha = rng.gen_range(0.5..3.0);
            let total = rng.gen_range(0.0..0.9) * alpha;
            let split = rng.gen_range(0.0..=1.0);
            let s = rng.gen_range(1.0..8.0);
            DichotomyIneqParams {
                a1: rng.gen_range(0.0..2.0),
                a2: rng.gen_range(0.0..2.0),
                a3: total * split,
                a4: total * (1.0 - split),
                alpha,
                horizon: Some(s),
            }
        })
        .collect()
}

fn inequalities(ctx: &Context) -> SuiteOutcome {
    let mut out = SuiteOutcome::new(Suite::Inequalities);
    let params = ctx
        .config
        .inequality_params
        .clone()
        .unwrap_or_else(|| random_params(200, ctx.config.seed));
    if params.is_empty() {
        return out.fail("no parameter records");
    }
    let mut rows = Vec::new();
    let (mut fwd, mut bwd) = (f64::INFINITY, f64::INFINITY);
    for (i, p) in params.iter().enumerate() {
        let s = p.horizon.unwrap_or(5.0);
        let p = p.with_horizon(s);
        let n = 400;
        let times: Vec<f64> = (0..=n).map(|k| s * k as f64 / n as f64).collect();
        let back: Vec<f64> = times.iter().rev().map(|t| -t).collect();
        let checked = synthesize_extremal(&times, &p, 1e-13)
            .and_then(|v| check_implication(&times, &v, &p, INEQUALITY_SLACK))
            .and_then(|r| {
                let vb = synthesize_extremal_backward(&back, &p, 1e-13)?;
                Ok((r, check_implication_backward(&back, &vb, &p, INEQUALITY_SLACK)?))
            });
        match checked {
            Ok((r, rb)) => {
                fwd = fwd.min(r.conclusion_slack);
                bwd = bwd.min(rb.conclusion_slack);
                out.require(!r.refuted && !rb.refuted, format!("record {i} refutes the implication"));
                out.require(
                    r.hypothesis_holds && rb.hypothesis_holds,
                    format!("record {i}: synthesized function misses the hypothesis"),
                );
                rows.push(ImplicationRow::new(&p, "forward", &r));
                rows.push(ImplicationRow::new(&p, "backward", &rb));
            }
            Err(e) => out.require(false, format!("record {i}: {e}")),
        }
    }
    out.metric("records", params.len());
    out.metric("min_forward_slack", fwd);
    out.metric("min_backward_slack", bwd);
    out.require(
        fwd >= -INEQUALITY_SLACK && bwd >= -INEQUALITY_SLACK,
        format!("conclusion slack below -{INEQUALITY_SLACK:e}"),
    );
    match csv_of(&rows) {
        Ok(text) => out.artifact("inequalities.csv", text),
        Err(e) => out.require(false, e.to_string()),
    }
    out
}

fn localization(ctx: &Context) -> SuiteOutcome {
    let out = SuiteOutcome::new(Suite::Localization);
    let SystemConfig::Localized(cfg) = ctx.system_config else {
        return out.fail(format!(
            "localization suite needs a localized system, got a {} system",
            ctx.system_config.kind()
        ));
    };
    let mut out = out;
    let sys = ctx.system;
    let checked = localized_parts(cfg)
        .and_then(|(base, local)| verify_localization(base.as_ref(), &local, sys.k(), sys.alpha(), ctx.config.seed));
    match checked {
        Ok(r) => {
            if let Value::Object(m) = json!(r) {
                for (k, v) in m {
                    if k != "passed" {
                        out.metric(&k, v);
                    }
                }
            }
            out.require(r.max_ball_mismatch == 0.0, "f_delta differs from f inside the ball");
            out.require(r.max_outside == 0.0, "f_delta does not vanish beyond sqrt(2)*delta");
            out.require(
                r.lip_quotient <= r.lip_bound * (1.0 + 1e-6),
                format!("Lipschitz quotient {} exceeds 9L = {}", r.lip_quotient, r.lip_bound),
            );
            out.require(r.passed, "gate radius disagrees with its closed form");
        }
        Err(e) => out.require(false, e.to_string()),
    }
    out
}

pub fn csv_of<T: Serialize>(rows: &[T]) -> anyhow::Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}
