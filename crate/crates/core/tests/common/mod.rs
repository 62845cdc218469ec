#![allow(dead_code)]

use std::sync::Arc;

use conjlab_core::nonlinearity::{Constant, FnNonlinearity, Nonlinearity, Zero};
use conjlab_core::systems::SystemConfig;
use conjlab_core::{DichotomySpec, SemilinearSystem, SpectralGenerator};

pub fn builtin(name: &str) -> SemilinearSystem {
    SystemConfig::builtin(name).unwrap().build().unwrap()
}

/// Diagonal system with the given spectra; the dichotomy is the sign split.
pub fn diagonal(a: &[f64], b: &[f64], f: Arc<dyn Nonlinearity>, f_sup: f64, f_lip: f64) -> SemilinearSystem {
    let gen_a = SpectralGenerator::new(a.to_vec()).unwrap();
    let spec = DichotomySpec::from_generator(&gen_a).unwrap();
    let gen_b = SpectralGenerator::new(b.to_vec()).unwrap();
    SemilinearSystem::new("test", gen_a, spec, gen_b, f, f_sup, f_lip).unwrap()
}

pub fn zero_system(a: &[f64], b: &[f64]) -> SemilinearSystem {
    let f = Arc::new(Zero {
        x_dim: a.len(),
        y_dim: b.len(),
    });
    diagonal(a, b, f, 0.0, 0.0)
}

pub fn constant_system(a: &[f64], b: &[f64], c: &[f64]) -> SemilinearSystem {
    let f = Arc::new(Constant {
        value: c.to_vec(),
        y_dim: b.len(),
    });
    let sup = c.iter().map(|v| v * v).sum::<f64>().sqrt();
    diagonal(a, b, f, sup, 0.0)
}

/// `f(x, y) = c·sin(x₀ + y₀)` in every coordinate of `out`, scaled so the
/// recorded constants are exact upper bounds.
pub fn sine_system(a: &[f64], b: &[f64], c: f64) -> SemilinearSystem {
    let m = a.len();
    let f = Arc::new(FnNonlinearity::new(m, b.len(), move |x, y, out| {
        let s = c * (x[0] + y.first().copied().unwrap_or(0.0)).sin() / (m as f64).sqrt();
        out.iter_mut().for_each(|o| *o = s);
    }));
    diagonal(a, b, f, c.abs(), c.abs())
}

/// Classic fourth-order Runge-Kutta for `x' = Ax + f(x, y)`, `y' = By`.
pub fn rk4(sys: &SemilinearSystem, x0: &[f64], y0: &[f64], t_end: f64, steps: usize) -> (Vec<f64>, Vec<f64>) {
    let la = sys.gen_a().eigenvalues().to_vec();
    let lb = sys.gen_b().eigenvalues().to_vec();
    let f = sys.nonlinearity().clone();
    let rhs = |x: &[f64], y: &[f64]| -> (Vec<f64>, Vec<f64>) {
        let fx = f.eval(x, y);
        (
            x.iter().zip(&la).zip(&fx).map(|((xi, l), fi)| l * xi + fi).collect(),
            y.iter().zip(&lb).map(|(yi, l)| l * yi).collect(),
        )
    };
    let h = t_end / steps as f64;
    let (mut x, mut y) = (x0.to_vec(), y0.to_vec());
    let axpy = |a: &[f64], k: &[f64], s: f64| -> Vec<f64> { a.iter().zip(k).map(|(u, v)| u + s * v).collect() };
    for _ in 0..steps {
        let (k1x, k1y) = rhs(&x, &y);
        let (k2x, k2y) = rhs(&axpy(&x, &k1x, h / 2.0), &axpy(&y, &k1y, h / 2.0));
        let (k3x, k3y) = rhs(&axpy(&x, &k2x, h / 2.0), &axpy(&y, &k2y, h / 2.0));
        let (k4x, k4y) = rhs(&axpy(&x, &k3x, h), &axpy(&y, &k3y, h));
        for i in 0..x.len() {
            x[i] += h / 6.0 * (k1x[i] + 2.0 * k2x[i] + 2.0 * k3x[i] + k4x[i]);
        }
        for j in 0..y.len() {
            y[j] += h / 6.0 * (k1y[j] + 2.0 * k2y[j] + 2.0 * k3y[j] + k4y[j]);
        }
    }
    (x, y)
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
