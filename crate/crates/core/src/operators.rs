//! Diagonal generators, dichotomy projections and the Green kernel.
//!
//! A [`SpectralGenerator`] is a real diagonal operator given by its
//! eigenvalues, so `e^{At}` acts componentwise and exactly. A
//! [`DichotomySpec`] splits the coordinates into a stable block (range of
//! `P₊`) and an unstable block (range of `P₋`) together with the dichotomy
//! constants `k ≥ 1` and `α > 0`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::norm;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Stable,
    Unstable,
}

/// `e^{λ t} x`, with `0 · ∞` read as zero so that exploding modes with a
/// vanishing coefficient stay exactly zero.
#[inline]
pub(crate) fn exp_scale(lambda: f64, t: f64, x: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        (lambda * t).exp() * x
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralGenerator {
    eigenvalues: Vec<f64>,
}

impl SpectralGenerator {
    pub fn new(eigenvalues: Vec<f64>) -> Result<Self> {
        if let Some(bad) = eigenvalues.iter().find(|l| !l.is_finite()) {
            return Err(Error::Input(format!("non-finite eigenvalue {bad}")));
        }
        Ok(Self { eigenvalues })
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn dimension(&self) -> usize {
        self.eigenvalues.len()
    }

    /// `e^{At} x`.
    pub fn apply(&self, t: f64, x: &[f64]) -> Result<Vec<f64>> {
        Error::check_dim(self.dimension(), x.len())?;
        if !t.is_finite() {
            return Err(Error::Input(format!("non-finite time {t}")));
        }
        let mut out = vec![0.0; x.len()];
        self.apply_into(t, x, &mut out);
        Ok(out)
    }

    /// Unchecked variant of [`apply`](Self::apply) for hot loops.
    #[inline]
    pub(crate) fn apply_into(&self, t: f64, x: &[f64], out: &mut [f64]) {
        for ((o, &xi), &l) in out.iter_mut().zip(x).zip(&self.eigenvalues) {
            *o = exp_scale(l, t, xi);
        }
    }

    /// Largest `|λ|`, i.e. the growth rate `ω` in `|e^{At}| ≤ e^{ω|t|}`.
    pub fn max_rate(&self) -> f64 {
        self.eigenvalues.iter().fold(0.0, |m, l| m.max(l.abs()))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DichotomySpec {
    dimension: usize,
    stable_indices: Vec<usize>,
    unstable_indices: Vec<usize>,
    k: f64,
    alpha: f64,
}

impl DichotomySpec {
    /// The unstable block is the complement of `stable_indices`.
    pub fn new(dimension: usize, stable_indices: Vec<usize>, k: f64, alpha: f64) -> Result<Self> {
        if !(k >= 1.0) {
            return Err(Error::Input(format!("dichotomy constant k = {k} must be ≥ 1")));
        }
        if !(alpha > 0.0) || !alpha.is_finite() {
            return Err(Error::Input(format!("dichotomy rate alpha = {alpha} must be > 0")));
        }
        let mut stable = stable_indices;
        stable.sort_unstable();
        stable.dedup();
        if let Some(&i) = stable.iter().find(|&&i| i >= dimension) {
            return Err(Error::Input(format!(
                "stable index {i} out of range for dimension {dimension}"
            )));
        }
        let unstable = (0..dimension).filter(|i| stable.binary_search(i).is_err()).collect();
        Ok(Self {
            dimension,
            stable_indices: stable,
            unstable_indices: unstable,
            k,
            alpha,
        })
    }

    /// Split by eigenvalue sign with `k = 1` and `α = min |λ|`.
    pub fn from_generator(gen: &SpectralGenerator) -> Result<Self> {
        let ev = gen.eigenvalues();
        if ev.is_empty() {
            return Err(Error::Input("empty generator has no dichotomy".into()));
        }
        if let Some(l) = ev.iter().find(|l| **l == 0.0) {
            return Err(Error::Precondition(format!(
                "eigenvalue {l} on the imaginary axis: no exponential dichotomy"
            )));
        }
        let alpha = ev.iter().fold(f64::INFINITY, |m, l| m.min(l.abs()));
        let stable = (0..ev.len()).filter(|&i| ev[i] < 0.0).collect();
        Self::new(ev.len(), stable, 1.0, alpha)
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }
    pub fn stable_indices(&self) -> &[usize] {
        &self.stable_indices
    }
    pub fn unstable_indices(&self) -> &[usize] {
        &self.unstable_indices
    }
    pub fn k(&self) -> f64 {
        self.k
    }
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn is_stable(&self, i: usize) -> bool {
        self.stable_indices.binary_search(&i).is_ok()
    }

    pub fn indices(&self, side: Side) -> &[usize] {
        match side {
            Side::Stable => &self.stable_indices,
            Side::Unstable => &self.unstable_indices,
        }
    }

    /// `P₊x` or `P₋x`.
    pub fn project(&self, x: &[f64], side: Side) -> Result<Vec<f64>> {
        Error::check_dim(self.dimension, x.len())?;
        let mut out = vec![0.0; x.len()];
        for &i in self.indices(side) {
            out[i] = x[i];
        }
        Ok(out)
    }

    /// Checks the eigenvalue placement `λ_i ≤ −α` on the stable block and
    /// `λ_j ≥ α` on the unstable block.
    pub fn consistent_with(&self, gen: &SpectralGenerator) -> Result<()> {
        Error::check_dim(self.dimension, gen.dimension())?;
        let ev = gen.eigenvalues();
        for i in 0..self.dimension {
            let ok = if self.is_stable(i) {
                ev[i] <= -self.alpha
            } else {
                ev[i] >= self.alpha
            };
            if !ok {
                return Err(Error::Precondition(format!(
                    "eigenvalue λ_{i} = {} is inside the gap (-{a}, {a}) or on the wrong side",
                    ev[i],
                    a = self.alpha
                )));
            }
        }
        Ok(())
    }
}

/// Green kernel `G_A(t) x`: `e^{At}P₊x` for `t ≥ 0` and `−e^{At}P₋x` for `t < 0`.
pub fn green_kernel_apply(
    gen: &SpectralGenerator,
    spec: &DichotomySpec,
    t: f64,
    x: &[f64],
) -> Result<Vec<f64>> {
    Error::check_dim(gen.dimension(), spec.dimension())?;
    Error::check_dim(gen.dimension(), x.len())?;
    let ev = gen.eigenvalues();
    let mut out = vec![0.0; x.len()];
    if t >= 0.0 {
        for &i in spec.stable_indices() {
            out[i] = exp_scale(ev[i], t, x[i]);
        }
    } else {
        for &j in spec.unstable_indices() {
            out[j] = -exp_scale(ev[j], t, x[j]);
        }
    }
    Ok(out)
}

/// Constants of `|e^{At}| ≤ M_A e^{ω_A|t|}`, `|e^{Bt}| ≤ M_B e^{ω_B|t|}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrowthBounds {
    pub m_a: f64,
    pub m_b: f64,
    pub m_c: f64,
    pub omega_a: f64,
    pub omega_b: f64,
    pub omega_c: f64,
}

impl GrowthBounds {
    /// Diagonal generators in the Euclidean norm have `M = 1` and `ω = max |λ|`.
    /// A zero spectrum gets `ω = ε` to keep `ω > 0`.
    pub fn from_generators(a: &SpectralGenerator, b: &SpectralGenerator) -> Self {
        let omega_a = a.max_rate().max(f64::EPSILON);
        let omega_b = b.max_rate().max(f64::EPSILON);
        Self {
            m_a: 1.0,
            m_b: 1.0,
            m_c: 1.0,
            omega_a,
            omega_b,
            omega_c: omega_a.max(omega_b),
        }
    }
}

/// Serialized form of a generator with its dichotomy:
/// `{"eigenvalues": [...], "stable_indices": [...], "k": ..., "alpha": ...}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OperatorDocument {
    pub eigenvalues: Vec<f64>,
    pub stable_indices: Vec<usize>,
    pub k: f64,
    pub alpha: f64,
}

impl OperatorDocument {
    pub fn build(&self) -> Result<(SpectralGenerator, DichotomySpec)> {
        let gen = SpectralGenerator::new(self.eigenvalues.clone())?;
        let spec = DichotomySpec::new(gen.dimension(), self.stable_indices.clone(), self.k, self.alpha)?;
        Ok((gen, spec))
    }

    pub fn from_parts(gen: &SpectralGenerator, spec: &DichotomySpec) -> Self {
        Self {
            eigenvalues: gen.eigenvalues().to_vec(),
            stable_indices: spec.stable_indices().to_vec(),
            k: spec.k(),
            alpha: spec.alpha(),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DichotomyReport {
    /// `max |P₊e^{At}x − e^{At}P₊x|` over `t ≥ 0`.
    pub s1_commutation: f64,
    /// `max (|e^{At}P₊x| − k e^{−αt}|P₊x|)⁺` over `t ≥ 0`.
    pub s2_forward_decay: f64,
    /// `max (|e^{At}P₋x| − k e^{αt}|P₋x|)⁺` over `t ≤ 0`.
    pub s4_backward_decay: f64,
    /// Placement of the spectrum relative to the gap, if violated.
    pub spectrum: Option<String>,
    pub tolerance: f64,
    pub samples: usize,
    pub passed: bool,
}

/// Checks (S1), (S2) and (S4) on a sample grid. Violations are measured
/// relative to `1 + |x|`. (S3) holds automatically for diagonal generators.
pub fn verify_dichotomy(
    gen: &SpectralGenerator,
    spec: &DichotomySpec,
    time_samples: &[f64],
    state_samples: &[Vec<f64>],
    tolerance: f64,
) -> Result<DichotomyReport> {
    if time_samples.is_empty() || state_samples.is_empty() {
        return Err(Error::Input("verify_dichotomy needs nonempty sample sets".into()));
    }
    Error::check_dim(gen.dimension(), spec.dimension())?;
    let (k, alpha) = (spec.k(), spec.alpha());
    let (mut s1, mut s2, mut s4) = (0.0f64, 0.0f64, 0.0f64);
    for x in state_samples {
        Error::check_dim(gen.dimension(), x.len())?;
        let scale = 1.0 + norm(x);
        let p_plus = spec.project(x, Side::Stable)?;
        let p_minus = spec.project(x, Side::Unstable)?;
        for &t in time_samples {
            let evolved = gen.apply(t, x)?;
            let evolved_plus = gen.apply(t, &p_plus)?;
            let evolved_minus = gen.apply(t, &p_minus)?;
            if t >= 0.0 {
                let lhs = spec.project(&evolved, Side::Stable)?;
                s1 = s1.max(crate::dist(&lhs, &evolved_plus) / scale);
                let excess = norm(&evolved_plus) - k * (-alpha * t).exp() * norm(&p_plus);
                s2 = s2.max(excess.max(0.0) / scale);
            }
            if t <= 0.0 {
                let excess = norm(&evolved_minus) - k * (alpha * t).exp() * norm(&p_minus);
                s4 = s4.max(excess.max(0.0) / scale);
            }
        }
    }
    let spectrum = spec.consistent_with(gen).err().map(|e| e.to_string());
    let passed = s1 <= tolerance && s2 <= tolerance && s4 <= tolerance;
    Ok(DichotomyReport {
        s1_commutation: s1,
        s2_forward_decay: s2,
        s4_backward_decay: s4,
        spectrum,
        tolerance,
        samples: time_samples.len() * state_samples.len(),
        passed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gen(ev: &[f64]) -> SpectralGenerator {
        SpectralGenerator::new(ev.to_vec()).unwrap()
    }

    #[test]
    fn semigroup_identity_at_zero() {
        let g = gen(&[-3.0, 0.5, 7.0]);
        let x = vec![1.5, -2.0, 0.25];
        assert_eq!(g.apply(0.0, &x).unwrap(), x);
    }

    #[test]
    fn heat_first_mode_decays_by_e() {
        let g = gen(&[-1.0, -4.0, -9.0]);
        let out = g.apply(1.0, &[1.0, 0.0, 0.0]).unwrap();
        assert!((out[0] - (-1.0f64).exp()).abs() < 1e-15);
        assert_eq!(&out[1..], &[0.0, 0.0]);
    }

    #[test]
    fn mixed_signs_closed_form() {
        let out = gen(&[-1.0, 2.0]).apply(0.5, &[1.0, 1.0]).unwrap();
        assert!((out[0] - (-0.5f64).exp()).abs() < 1e-15);
        assert!((out[1] - 1.0f64.exp()).abs() < 1e-15);
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        assert!(matches!(
            gen(&[1.0]).apply(1.0, &[1.0, 2.0]),
            Err(Error::Dimension { expected: 1, got: 2 })
        ));
    }

    #[test]
    fn projections_partition() {
        let spec = DichotomySpec::new(2, vec![0], 1.0, 1.0).unwrap();
        let x = [3.0, 5.0];
        let plus = spec.project(&x, Side::Stable).unwrap();
        let minus = spec.project(&x, Side::Unstable).unwrap();
        assert_eq!(plus, vec![3.0, 0.0]);
        assert_eq!(minus, vec![0.0, 5.0]);
        assert_eq!(spec.project(&[0.0, 0.0], Side::Stable).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn green_kernel_cases() {
        let g = gen(&[-1.0, 1.0]);
        let spec = DichotomySpec::new(2, vec![0], 1.0, 1.0).unwrap();
        assert_eq!(green_kernel_apply(&g, &spec, 0.0, &[1.0, 1.0]).unwrap(), vec![1.0, 0.0]);
        let back = green_kernel_apply(&g, &spec, -1.0, &[0.0, 1.0]).unwrap();
        assert_eq!(back[0], 0.0);
        assert!((back[1] + (-1.0f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn dichotomy_checks() {
        let g = gen(&[-2.0, 3.0]);
        let spec = DichotomySpec::new(2, vec![0], 1.0, 2.0).unwrap();
        let times: Vec<f64> = (-20..=20).map(|i| i as f64 * 0.25).collect();
        let states = vec![vec![1.0, -2.0], vec![0.3, 0.0], vec![-1.0, 4.0]];
        let rep = verify_dichotomy(&g, &spec, &times, &states, 1e-12).unwrap();
        assert!(rep.passed, "{rep:?}");
        assert!(rep.spectrum.is_none());

        let slow = gen(&[-0.5]);
        let spec = DichotomySpec::new(1, vec![0], 1.0, 1.0).unwrap();
        let rep = verify_dichotomy(&slow, &spec, &times, &[vec![1.0]], 1e-12).unwrap();
        assert!(!rep.passed);
        assert!(rep.s2_forward_decay > 0.1);
        assert!(rep.spectrum.is_some());
    }

    #[test]
    fn spec_validation() {
        assert!(DichotomySpec::new(2, vec![0], 0.5, 1.0).is_err());
        assert!(DichotomySpec::new(2, vec![0], 1.0, 0.0).is_err());
        assert!(DichotomySpec::new(2, vec![3], 1.0, 1.0).is_err());
        let s = DichotomySpec::from_generator(&gen(&[-3.0, 1.5, -2.0])).unwrap();
        assert_eq!(s.stable_indices(), &[0, 2]);
        assert_eq!(s.unstable_indices(), &[1]);
        assert_eq!(s.alpha(), 1.5);
    }

    #[test]
    fn operator_document_json_shape() {
        let doc: OperatorDocument = serde_json::from_str(
            r#"{"eigenvalues": [-1.0, 2.0], "stable_indices": [0], "k": 1.0, "alpha": 1.0}"#,
        )
        .unwrap();
        let (g, s) = doc.build().unwrap();
        assert_eq!(g.dimension(), 2);
        assert_eq!(OperatorDocument::from_parts(&g, &s), doc);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn group_law(
                ev in proptest::collection::vec(-3.0f64..3.0, 1..6),
                t in -2.0f64..2.0,
                s in -2.0f64..2.0,
                seed in proptest::collection::vec(-5.0f64..5.0, 6),
            ) {
                let g = SpectralGenerator::new(ev.clone()).unwrap();
                let x = &seed[..ev.len()];
                let lhs = g.apply(t, &g.apply(s, x).unwrap()).unwrap();
                let rhs = g.apply(t + s, x).unwrap();
                // relative to the magnitude the flow reaches
                let growth = (g.max_rate() * (t.abs() + s.abs())).exp();
                prop_assert!(crate::dist(&lhs, &rhs) <= 1e-12 * (1.0 + norm(x)) * growth);
            }

            #[test]
            fn green_kernel_bound(
                ev in proptest::collection::vec(prop_oneof![-4.0f64..-1.0, 1.0f64..4.0], 1..6),
                t in -5.0f64..5.0,
                seed in proptest::collection::vec(-5.0f64..5.0, 6),
            ) {
                let g = SpectralGenerator::new(ev.clone()).unwrap();
                let spec = DichotomySpec::from_generator(&g).unwrap();
                let x = &seed[..ev.len()];
                let out = green_kernel_apply(&g, &spec, t, x).unwrap();
                let bound = spec.k() * (-spec.alpha() * t.abs()).exp() * norm(x);
                prop_assert!(norm(&out) <= bound * (1.0 + 1e-14) + 1e-300);
            }
        }
    }
}
