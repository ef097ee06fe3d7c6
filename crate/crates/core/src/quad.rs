//! Gaussian quadrature rules (Gauss–Hermite and Gauss–Legendre).
//!
//! Nodes and weights are computed by the Golub–Welsch algorithm: the rule of
//! order `n` is the eigendecomposition of the symmetric tridiagonal Jacobi
//! matrix of the orthogonal-polynomial recurrence. Eigenvalues are the nodes;
//! weights are `mu0 * (first eigenvector component)^2` where `mu0` is the
//! total mass of the weight function.
//!
//! Rules are cached per order behind a mutex so repeated kernel evaluations
//! reuse the same immutable node tables.

use nalgebra::DMatrix;
use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

/// A quadrature rule: paired nodes and weights.
#[derive(Debug, Clone)]
pub struct QuadRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

/// Builds nodes/weights from a Jacobi matrix given by its off-diagonal
/// entries `offdiag` (the diagonal is zero for both Hermite and Legendre)
/// and the weight-function mass `mu0`.
fn golub_welsch(offdiag: &[f64], mu0: f64) -> QuadRule {
    let n = offdiag.len() + 1;
    let mut jacobi = DMatrix::<f64>::zeros(n, n);
    for (k, &b) in offdiag.iter().enumerate() {
        jacobi[(k, k + 1)] = b;
        jacobi[(k + 1, k)] = b;
    }
    let eig = jacobi.symmetric_eigen();
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|j| {
            let node = eig.eigenvalues[j];
            let v0 = eig.eigenvectors[(0, j)];
            (node, mu0 * v0 * v0)
        })
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    QuadRule {
        nodes: pairs.iter().map(|p| p.0).collect(),
        weights: pairs.iter().map(|p| p.1).collect(),
    }
}

fn hermite_cache() -> &'static Mutex<HashMap<usize, Arc<QuadRule>>> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<QuadRule>>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

fn legendre_cache() -> &'static Mutex<HashMap<usize, Arc<QuadRule>>> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<QuadRule>>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// Gauss–Hermite rule of order `n` in the physicists' convention
/// (weight function `exp(-x^2)` on the real line).
pub fn gauss_hermite(n: usize) -> Arc<QuadRule> {
    assert!(n >= 1, "quadrature order must be >= 1");
    let mut cache = hermite_cache().lock().unwrap();
    cache
        .entry(n)
        .or_insert_with(|| {
            // Hermite recurrence: b_k = sqrt(k/2); mu0 = integral of
            // exp(-x^2) = sqrt(pi).
            let offdiag: Vec<f64> = (1..n).map(|k| (k as f64 / 2.0).sqrt()).collect();
            Arc::new(golub_welsch(&offdiag, std::f64::consts::PI.sqrt()))
        })
        .clone()
}

/// Gauss–Legendre rule of order `n` on `[-1, 1]` (unit weight).
pub fn gauss_legendre(n: usize) -> Arc<QuadRule> {
    assert!(n >= 1, "quadrature order must be >= 1");
    let mut cache = legendre_cache().lock().unwrap();
    cache
        .entry(n)
        .or_insert_with(|| {
            // Legendre recurrence: b_k = k / sqrt(4k^2 - 1); mu0 = 2.
            let offdiag: Vec<f64> = (1..n)
                .map(|k| {
                    let k = k as f64;
                    k / (4.0 * k * k - 1.0).sqrt()
                })
                .collect();
            Arc::new(golub_welsch(&offdiag, 2.0))
        })
        .clone()
}

/// Expectation of `f(Z)` for `Z ~ N(0,1)` using an `n`-node Gauss–Hermite
/// rule: substituting `x = z/sqrt(2)` gives
/// `E[f(Z)] = (1/sqrt(pi)) * sum_i w_i f(sqrt(2) x_i)`.
pub fn gauss_expect(n: usize, mut f: impl FnMut(f64) -> f64) -> f64 {
    let rule = gauss_hermite(n);
    let inv_sqrt_pi = 1.0 / std::f64::consts::PI.sqrt();
    let mut acc = 0.0;
    for (&x, &w) in rule.nodes.iter().zip(rule.weights.iter()) {
        acc += w * f(std::f64::consts::SQRT_2 * x);
    }
    acc * inv_sqrt_pi
}

/// Expectation of `f(U, V)` for jointly standard-normal `(U, V)` with
/// correlation `rho`, by a tensor-product Gauss–Hermite rule. The second
/// coordinate is generated as `V = rho U + sqrt(1-rho^2) Z`.
pub fn gauss_expect_2d(n: usize, rho: f64, mut f: impl FnMut(f64, f64) -> f64) -> f64 {
    let rule = gauss_hermite(n);
    let s = (1.0 - rho * rho).max(0.0).sqrt();
    let inv_pi = 1.0 / std::f64::consts::PI;
    let mut acc = 0.0;
    for (&x1, &w1) in rule.nodes.iter().zip(rule.weights.iter()) {
        let u = std::f64::consts::SQRT_2 * x1;
        let mut row = 0.0;
        for (&x2, &w2) in rule.nodes.iter().zip(rule.weights.iter()) {
            let v = rho * u + s * std::f64::consts::SQRT_2 * x2;
            row += w2 * f(u, v);
        }
        acc += w1 * row;
    }
    acc * inv_pi
}

/// Integral of `f` over `[lo, hi]` with an `n`-node Gauss–Legendre rule.
pub fn legendre_integrate(n: usize, lo: f64, hi: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
    let rule = gauss_legendre(n);
    let half = 0.5 * (hi - lo);
    let mid = 0.5 * (hi + lo);
    let mut acc = 0.0;
    for (&x, &w) in rule.nodes.iter().zip(rule.weights.iter()) {
        acc += w * f(mid + half * x);
    }
    acc * half
}
