//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::process::ExitCode;
use std::time::Instant;

use conjlab_core::conjugacy::random_samples;
use conjlab_core::flows::{decay_estimate, duhamel_residual, fiber_pairs, linear_flow, mild_solution};
use conjlab_core::inequalities::{
    check_implication, check_implication_backward, synthesize_extremal, synthesize_extremal_backward,
    DichotomyIneqParams,
};
use conjlab_core::localization::{local_gate_ratio, verify_localization};
use conjlab_core::operators::verify_dichotomy;
use conjlab_core::regularity::{
    base_points, calibration_map, estimate_exponent, theory_holder_exponent, theory_lipschitz_p1, FiberMask,
    SamplingPlan,
};
use conjlab_core::systems::{localized_parts, SystemConfig};
use conjlab_core::{
    dist, norm, ConjugacyConfig, ConjugacyEngine, Fiber, PicardOptions, Result, SemilinearSystem, Side, TimeGrid,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Result<Outcome> {
    Ok(Outcome { pass, detail })
}

fn builtin(name: &str) -> Result<SemilinearSystem> {
    SystemConfig::builtin(name)?.build()
}

fn engine(sys: &SemilinearSystem) -> Result<ConjugacyEngine> {
    ConjugacyEngine::new(sys.clone(), ConjugacyConfig::default())
}

/// Sup of `|h|` and `|g|` seen by criteria 1 and 2, fed to criterion 3.
#[derive(Default)]
struct Norms {
    h: f64,
    g: f64,
    bound: f64,
}

fn identities(norms: &mut Norms) -> Result<Outcome> {
    let sys = builtin("toy-1-1")?;
    let start = Instant::now();
    let e = engine(&sys)?;
    let r = e.verify_conjugacy(&random_samples(&sys, 100, 2.0, 1), None)?;
    let secs = start.elapsed().as_secs_f64();
    norms.h = norms.h.max(r.max_h_norm);
    norms.g = norms.g.max(r.max_g_norm);
    norms.bound = r.norm_bound;
    outcome(
        r.identity_ok(1e-6) && secs < 60.0,
        format!(
            "max|HG-id| = {:.2e}, max|GH-id| = {:.2e}, {} points in {secs:.1} s",
            r.max_hg_identity_error, r.max_gh_identity_error, r.sample_count
        ),
    )
}

fn equivariance(norms: &mut Norms) -> Result<Outcome> {
    let sys = builtin("toy-1-1")?;
    let e = engine(&sys)?;
    let grid = TimeGrid::covering(-3.0, 3.0, 0.05)?;
    let r = e.verify_conjugacy(&random_samples(&sys, 20, 2.0, 2), Some(&grid))?;
    norms.h = norms.h.max(r.max_h_norm);
    norms.g = norms.g.max(r.max_g_norm);
    outcome(
        r.max_equivariance_error <= 1e-5,
        format!(
            "max|H(U(t)) - V(t)| = {:.2e} over {} points, t in [-3, 3]",
            r.max_equivariance_error, r.sample_count
        ),
    )
}

fn norm_bounds(norms: &Norms) -> Result<Outcome> {
    let sys = builtin("toy-1-1")?;
    let want = 2.0 * sys.k() * sys.f_sup() / sys.alpha();
    let limit = want + 1e-8;
    outcome(
        (norms.bound - 0.2).abs() < 1e-12 && norms.h <= limit && norms.g <= limit,
        format!("sup|h| = {:.4}, sup|g| = {:.4}, bound {:.4}", norms.h, norms.g, norms.bound),
    )
}

fn dichotomy_inequality() -> Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (mut fwd, mut bwd) = (f64::INFINITY, f64::INFINITY);
    let mut bad = 0;
    for _ in 0..200 {
        let alpha = rng.gen_range(0.5..3.0);
        let total = rng.gen_range(0.0..0.9) * alpha;
        let split = rng.gen_range(0.0..=1.0);
        let s = rng.gen_range(1.0..8.0);
        let p = DichotomyIneqParams::new(
            rng.gen_range(0.0..2.0),
            rng.gen_range(0.0..2.0),
            total * split,
            total * (1.0 - split),
            alpha,
        )?
        .with_horizon(s);
        let n = 400;
        let times: Vec<f64> = (0..=n).map(|k| s * k as f64 / n as f64).collect();
        let values = synthesize_extremal(&times, &p, 1e-13)?;
        let r = check_implication(&times, &values, &p, 1e-9)?;
        let back: Vec<f64> = times.iter().rev().map(|t| -t).collect();
        let values_b = synthesize_extremal_backward(&back, &p, 1e-13)?;
        let rb = check_implication_backward(&back, &values_b, &p, 1e-9)?;
        bad += [&r, &rb].iter().filter(|x| !x.hypothesis_holds || x.refuted).count();
        fwd = fwd.min(r.conclusion_slack);
        bwd = bwd.min(rb.conclusion_slack);
    }
    outcome(
        bad == 0 && fwd >= -1e-9 && bwd >= -1e-9,
        format!("200 draws, min slack forward {fwd:.2e}, backward {bwd:.2e}"),
    )
}

fn decay() -> Result<Outcome> {
    let mut worst = f64::INFINITY;
    for name in ["toy-1-1", "toy-2-1"] {
        let sys = builtin(name)?;
        let grid = TimeGrid::covering(0.0, 5.0, 0.05)?;
        let pairs = fiber_pairs(&sys, Side::Stable, 10, 2.0, 5);
        let r = decay_estimate(&sys, &pairs, Side::Stable, &grid, &PicardOptions::default())?;
        worst = worst.min(r.min_slack);
    }
    outcome(worst >= -1e-6, format!("min envelope slack {worst:.3e} on t in [0, 5]"))
}

fn regularity() -> Result<Outcome> {
    let mut notes = Vec::new();
    let mut pass = true;

    let plan = SamplingPlan::default();
    let bases = base_points(1, 0, &SamplingPlan { base_radius: 0.0, base_points: 1, ..plan.clone() });
    let mask = FiberMask::full(1, 0);
    for beta in [0.3, 0.5, 1.0] {
        let est = estimate_exponent(calibration_map(beta), &bases, &mask, Fiber::Full, &plan)?;
        pass &= (est.fitted_exponent - beta).abs() <= 0.03;
        notes.push(format!("beta {beta} -> {:.4}", est.fitted_exponent));
    }

    let sys = builtin("toy-1-1")?;
    let e = engine(&sys)?;
    let p1 = theory_lipschitz_p1(&sys)?;
    let q = theory_holder_exponent(&sys)?;
    let h_plan = SamplingPlan { base_points: 8, directions: 3, ..plan.clone() };
    let h = estimate_exponent(
        |x: &[f64], y: &[f64]| e.h_map(x, y),
        &base_points(sys.x_dim(), sys.y_dim(), &h_plan),
        &FiberMask::of(&sys, Fiber::Stable),
        Fiber::Stable,
        &h_plan,
    )?;
    pass &= (0.95..=1.05).contains(&h.fitted_exponent) && h.max_ratio <= p1;
    notes.push(format!("H slope {:.4} ratio {:.3} <= p1 {p1:.3}", h.fitted_exponent, h.max_ratio));

    let g_plan = SamplingPlan { base_points: 8, directions: 3, base_radius: 1e-3, ..plan };
    let g = estimate_exponent(
        |x: &[f64], y: &[f64]| e.g_map(x, y),
        &base_points(sys.x_dim(), sys.y_dim(), &g_plan),
        &FiberMask::full(sys.x_dim(), sys.y_dim()),
        Fiber::Full,
        &g_plan,
    )?;
    pass &= g.fitted_exponent <= 1.0 && g.fitted_exponent >= q - 0.1;
    notes.push(format!("G slope {:.4} in [{:.3}, 1]", g.fitted_exponent, q - 0.1));
    outcome(pass, notes.join("; "))
}

fn localization() -> Result<Outcome> {
    let SystemConfig::Localized(cfg) = SystemConfig::builtin("toy-local")? else {
        return outcome(false, "toy-local is not a localized system".into());
    };
    let (base, local) = localized_parts(&cfg)?;
    let r = verify_localization(base.as_ref(), &local, 1.0, 1.0, 7)?;
    let lo = local_gate_ratio(1.0, 1.0, local.modulus(), r.critical_delta - 1e-6);
    let hi = local_gate_ratio(1.0, 1.0, local.modulus(), r.critical_delta + 1e-6);
    outcome(
        r.passed && r.ball_points == 1000 && lo < 1.0 && hi >= 1.0,
        format!(
            "max|f_d - f| on {} ball points = {:e}; max|f_d| beyond sqrt2*d = {:e}; \
             Lip quotient {:.4e} <= 9L = {:.4e}; delta* = {:.7} (closed form {:.7})",
            r.ball_points,
            r.max_ball_mismatch,
            r.max_outside,
            r.lip_quotient,
            r.lip_bound,
            r.critical_delta,
            r.critical_delta_exact.unwrap_or(f64::NAN)
        ),
    )
}

fn heat() -> Result<Outcome> {
    let sys = builtin("heat-8")?;
    let mut notes = Vec::new();
    let times: Vec<f64> = (-20..=20).map(|i| i as f64 * 0.25).collect();
    let states: Vec<Vec<f64>> = random_samples(&sys, 8, 1.0, 8).into_iter().map(|(x, _)| x).collect();
    let d = verify_dichotomy(sys.gen_a(), sys.dichotomy(), &times, &states, 1e-12)?;
    notes.push(format!("dichotomy {}", if d.passed { "ok" } else { "violated" }));

    let gate = sys.check_gap().is_ok() && (sys.f_lip() - 0.5).abs() < 1e-12;
    notes.push(format!("f_lip {:.6} gate {:.2}", sys.f_lip(), sys.gap_ratio()));

    let e = engine(&sys)?;
    let grid = TimeGrid::covering(0.0, 3.0, 0.25)?;
    let r = e.verify_conjugacy(&random_samples(&sys, 3, 1.0, 9), Some(&grid))?;
    notes.push(format!(
        "identity {:.1e}, equivariance {:.1e}",
        r.max_hg_identity_error.max(r.max_gh_identity_error),
        r.max_equivariance_error
    ));

    let u = random_samples(&sys, 1, 1.0, 10).remove(0);
    let traj = mild_solution(&sys, &u.0, &u.1, &TimeGrid::covering(0.0, 2.0, 0.01)?, &PicardOptions::default())?;
    let res = duhamel_residual(&sys, &traj)?;
    notes.push(format!("Duhamel residual {res:.2e}"));

    outcome(
        d.passed && gate && r.identity_ok(1e-6) && r.norms_ok(1e-8) && r.max_equivariance_error <= 1e-5 && res <= 1e-8,
        notes.join("; "),
    )
}

fn triviality() -> Result<Outcome> {
    let sys = builtin("toy-zero")?;
    let e = engine(&sys)?;
    let samples = random_samples(&sys, 10, 2.0, 11);
    let grid = TimeGrid::covering(-3.0, 3.0, 0.1)?;
    let r = e.verify_conjugacy(&samples, Some(&grid))?;
    let mut worst = [
        r.max_hg_identity_error,
        r.max_gh_identity_error,
        r.max_equivariance_error,
        r.max_h_norm,
        r.max_g_norm,
    ]
    .into_iter()
    .fold(0.0, f64::max);
    let opts = PicardOptions::default();
    for (x, y) in &samples {
        worst = worst.max(norm(&e.compute_h(x, y)?)).max(norm(&e.compute_g(x, y)?));
        let traj = mild_solution(&sys, x, y, &grid, &opts)?;
        let lin = linear_flow(&sys, x, y, &grid)?;
        for j in 0..traj.len() {
            worst = worst.max(dist(&traj.x_states[j], &lin.x_states[j]));
        }
        let fwd = mild_solution(&sys, x, y, &TimeGrid::covering(0.0, 2.0, 0.01)?, &opts)?;
        worst = worst.max(duhamel_residual(&sys, &fwd)?);
    }
    let plan = SamplingPlan { base_points: 4, directions: 2, ..SamplingPlan::default() };
    let est = estimate_exponent(
        |x: &[f64], y: &[f64]| e.h_map(x, y),
        &base_points(sys.x_dim(), sys.y_dim(), &plan),
        &FiberMask::full(sys.x_dim(), sys.y_dim()),
        Fiber::Full,
        &plan,
    )?;
    let slope_err = (est.fitted_exponent - 1.0).abs();
    outcome(
        worst <= 1e-12 && slope_err <= 1e-9,
        format!("max defect {worst:.1e}; H slope error {slope_err:.1e}"),
    )
}

fn main() -> ExitCode {
    let mut norms = Norms::default();
    let mut failed = 0;
    let mut report = |n: usize, name: &str, r: Result<Outcome>| {
        let (pass, detail) = match r {
            Ok(o) => (o.pass, o.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        if !pass {
            failed += 1;
        }
        println!("criterion {n} {} {name}: {detail}", if pass { "PASS" } else { "FAIL" });
    };
    report(1, "conjugacy identities", identities(&mut norms));
    report(2, "equivariance", equivariance(&mut norms));
    report(3, "norm bounds", norm_bounds(&norms));
    report(4, "dichotomy inequality", dichotomy_inequality());
    report(5, "decay estimate", decay());
    report(6, "regularity", regularity());
    report(7, "localization", localization());
    report(8, "heat application", heat());
    report(9, "triviality", triviality());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
