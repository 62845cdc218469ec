mod common;

use common::*;
use conjlab_core::systems::*;
use conjlab_core::{Error, GateRule, Side};

#[test]
fn builtins_all_build() {
    for name in BUILTIN_NAMES {
        let sys = SystemConfig::builtin(name).unwrap().build().unwrap();
        assert!(sys.x_dim() > 0, "{name}");
        assert_eq!(sys.fingerprint(), builtin(name).fingerprint());
    }
    assert!(matches!(SystemConfig::builtin("nope"), Err(Error::Config(_))));
    assert!(SystemConfig::builtin("heat-0").is_err());
    assert_eq!(builtin("heat-3").x_dim(), 3);
}

#[test]
fn toy_spectrum_and_constants() {
    let sys = builtin("toy-1-1");
    assert_eq!(sys.gen_a().eigenvalues(), &[-1.0, 1.0]);
    assert_eq!(sys.gen_b().eigenvalues(), &[-0.5, 0.5]);
    assert_eq!((sys.k(), sys.alpha()), (1.0, 1.0));
    assert!((sys.f_lip() - 0.1).abs() < 1e-15 && (sys.f_sup() - 0.1).abs() < 1e-15);
    assert!((sys.gap_ratio() - 0.4).abs() < 1e-12);
    assert_eq!(sys.y_indices(Side::Stable), vec![0]);
    assert_eq!(sys.m_b(Side::Stable), 1.0);
    let wide = builtin("toy-2-1");
    assert_eq!(wide.gen_a().eigenvalues(), &[-1.0, -1.5, 1.0]);
}

#[test]
fn heat_spectrum_and_gate() {
    let sys = builtin("heat-8");
    let want: Vec<f64> = (1..=8).map(|n| -((n * n) as f64)).collect();
    assert_eq!(sys.gen_a().eigenvalues(), want.as_slice());
    assert_eq!(sys.dichotomy().stable_indices().len(), 8);
    assert_eq!(sys.gate_rule(), GateRule::Normalized);
    assert!((sys.gap_ratio() - 0.5).abs() < 1e-12);
    sys.check_gap().unwrap();
}

#[test]
fn gate_statuses() {
    assert!(builtin("toy-1-1").check_gap().is_ok());
    assert!(builtin("toy-zero").check_gap().is_ok());
    assert!(builtin("toy-local").check_gap().is_ok());
    let err = builtin("toy-gate-violation").check_gap().unwrap_err();
    assert!(err.to_string().contains("4·k·f_lip/alpha < 1"), "{err}");
    assert!(builtin("hh").check_gap().is_err());
}

#[test]
fn recorded_bounds_dominate_samples() {
    for name in ["toy-1-1", "toy-2-1", "heat-8", "hh", "hh-weak", "toy-local"] {
        let sys = builtin(name);
        for radius in [0.01, 1.0, 50.0] {
            let (sup, lip) = sys.spot_check(2000, radius, 3);
            assert!(sup <= sys.f_sup() * 1.01, "{name} r={radius}: sup {sup} > {}", sys.f_sup());
            assert!(lip <= sys.f_lip() * 1.01, "{name} r={radius}: lip {lip} > {}", sys.f_lip());
        }
    }
}

#[test]
fn toy_bound_is_attained() {
    // tanh saturates, so the sup bound is sharp far from the origin.
    let (sup, _) = builtin("toy-1-1").spot_check(500, 50.0, 1);
    assert!(sup > 0.099);
}

#[test]
fn hodgkin_huxley_raw_current_examples() {
    let cfg = HodgkinHuxleyConfig::standard();
    assert_eq!(hh_current(&cfg, 0.0, 1.0, 1.0, 1.0), -36.0 * 12.0 + 120.0 * 115.0);
    assert_eq!(hh_current(&cfg, -12.0, 1.0, 0.0, 1.0), 0.0);
    assert_eq!(hh_current(&cfg, 115.0, 0.0, 1.0, 1.0), 0.0);
    let v = hh_current(&cfg, 10.0, 0.5, 0.5, 0.5);
    let want = -36.0 * 0.0625 * 22.0 - 120.0 * 0.0625 * (10.0 - 115.0);
    assert!((v - want).abs() < 1e-12);
}

#[test]
fn hodgkin_huxley_linear_part() {
    let cfg = HodgkinHuxleyConfig::standard();
    assert_eq!(cfg.diffusion(), 1.0);
    let rest = cfg.rest();
    assert!((rest[0] - 0.3).abs() < 1e-15 && (rest[1] - 0.05).abs() < 1e-15 && (rest[2] - 0.6).abs() < 1e-15);
    let sys = builtin("hh");
    assert_eq!(sys.gen_a().eigenvalues(), &[-1.0, -4.0, -9.0, -16.0]);
    assert_eq!(sys.gen_b().eigenvalues(), &[0.2, 0.5, 0.1]);
    assert!(sys.y_indices(Side::Stable).is_empty());
}

#[test]
fn with_axis_replaces_one_field() {
    let toy = SystemConfig::builtin("toy-1-1").unwrap();
    let sys = toy.with_axis("f_lip", 0.2).unwrap().build().unwrap();
    assert!((sys.f_lip() - 0.2).abs() < 1e-12);
    let heat = SystemConfig::builtin("heat-8").unwrap().with_axis("f_lip", 0.9).unwrap();
    assert!((heat.build().unwrap().f_lip() - 0.9).abs() < 1e-12);
    let local = SystemConfig::builtin("toy-local").unwrap().with_axis("delta", 0.002).unwrap();
    match local {
        SystemConfig::Localized(c) => assert_eq!(c.delta, 0.002),
        other => panic!("{other:?}"),
    }
    let margin = toy.with_axis("gap_margin", 0.5).unwrap().build().unwrap();
    assert_eq!(margin.gen_a().eigenvalues(), &[-1.0, 1.0]);
    assert!(matches!(toy.with_axis("delta", 1.0), Err(Error::Config(_))));
}

#[test]
fn configs_round_trip_through_json() {
    for name in BUILTIN_NAMES {
        let cfg = SystemConfig::builtin(name).unwrap();
        let text = serde_json::to_string(&cfg).unwrap();
        let back: SystemConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(back, cfg);
        assert!(text.contains(&format!("\"kind\":\"{}\"", cfg.kind())));
    }
}

#[test]
fn invalid_configs_are_rejected() {
    let mut hh = HodgkinHuxleyConfig::standard();
    hh.n_modes = 0;
    assert!(make_hodgkin_huxley(&hh).is_err());
    assert!(make_heat(&HeatConfig::new(0)).is_err());
    let toy = ToyConfig {
        coupling: Some(vec![1.0]),
        ..ToyConfig::new(1, 1, 0.1)
    };
    assert!(make_toy(&toy).is_err());
}
