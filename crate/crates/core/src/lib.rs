//! Numerical laboratory for topological linearization of diagonal semilinear
//! systems
//!
//! ```text
//! u1' = A u1 + f(u1, u2)        v1' = A v1
//! u2' = B u2                    v2' = B v2
//! ```
//!
//! where `A` admits an exponential dichotomy and `f` is bounded and
//! Lipschitz. The crate builds the conjugacy `H(u) = (u1 + h(u), u2)` and its
//! inverse `G(v) = (v1 + g(v), v2)` from Green-kernel convolutions and
//! contraction fixed points, checks the conjugacy identities numerically,
//! and probes the regularity of both maps.
//!
//! All generators are real diagonal ("spectral") operators, so semigroup
//! actions are exact and every reported defect comes from quadrature and
//! fixed-point truncation alone.

// Negated comparisons reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod conjugacy;
pub mod error;
pub mod flows;
pub mod grid;
pub mod inequalities;
pub mod localization;
pub mod nonlinearity;
pub mod operators;
pub mod regularity;
pub mod systems;

pub use conjugacy::{ConjugacyConfig, ConjugacyEngine, ConjugacyReport};
pub use error::{Error, Result};
pub use flows::{GateRule, PicardOptions, SemilinearSystem, Trajectory};
pub use grid::TimeGrid;
pub use nonlinearity::Nonlinearity;
pub use operators::{DichotomySpec, GrowthBounds, Side, SpectralGenerator};
pub use regularity::{Fiber, RegularityEstimate};

/// Euclidean norm of a coefficient vector.
pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Euclidean distance between two coefficient vectors of equal length.
pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Norm on the product space `X × Y`: `|x| + |y|`.
pub fn product_norm(x: &[f64], y: &[f64]) -> f64 {
    norm(x) + norm(y)
}
