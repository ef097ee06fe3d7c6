//! Closed-form spectral and generalization bounds.
//!
//! Everything here is a scalar formula in the per-activation constants
//! `beta1/beta2/beta3`, the first Hermite coefficient `mu_1`, and the
//! architecture's skip pattern. The bounds are "certified shape,
//! uncertified constant": order-level constants hidden in the source
//! derivations are instantiated explicitly (the data-Gram constant 9, the
//! `C1/C2` depth constants) or set to 1 and flagged as such.

use crate::activations::{
    beta_constants, f_curve, hermite_mu, ActivationKind, Beta3Variance,
};
use crate::error::{Error, Result};
use crate::network::Architecture;
use nalgebra::{DMatrix, DVector};
use ndarray::Array2;
use serde::{Deserialize, Serialize};

/// High-probability lower bound on `lambda_min(X^T X)` for `N` isotropic
/// unit-norm samples in dimension `d`: `max(N/d - 9 N^(2/3) d^(1/3), 0)`.
/// The boolean is true when the raw value was negative (vacuous regime,
/// which holds whenever `N < 729 d^4`).
pub fn data_gram_lower_bound(n: usize, d: usize) -> (f64, bool) {
    let (nf, df) = (n as f64, d as f64);
    let raw = nf / df - 9.0 * nf.powf(2.0 / 3.0) * df.powf(1.0 / 3.0);
    if raw < 0.0 {
        (0.0, true)
    } else {
        (raw, false)
    }
}

/// `beta3` with the single-activation specialization: for a network using
/// one kind everywhere, the saturating kinds' variance argument collapses
/// to the first-layer diagonal bound (`1/2` for Sigmoid, `2` for Tanh)
/// instead of the depth-growth bound.
fn beta3_uniform_kind(kind: ActivationKind, quad_order: usize) -> Result<f64> {
    Ok(match kind {
        ActivationKind::Sigmoid => f_curve(kind, 0.5, quad_order)?,
        ActivationKind::Tanh => f_curve(kind, 2.0, quad_order)?,
        _ => beta_constants(kind, 2, quad_order, Beta3Variance::GMax)?.2,
    })
}

/// Lower bound on the minimum NTK eigenvalue:
/// `2 mu_1(sigma_1)^2 * data_gram * prod_{p=3}^{L} (beta3(sigma_{p-1}) + alpha_{p-2})`.
///
/// `beta3_override(kind)` lets the single-activation specialization swap in
/// its own lower derivative constant; pass `None` for the general form.
fn lambda_lower_impl(
    arch: &Architecture,
    n: usize,
    d: usize,
    quad_order: usize,
    var_arg: Beta3Variance,
    beta3_override: Option<&dyn Fn(ActivationKind) -> Result<f64>>,
) -> Result<f64> {
    arch.validate()?;
    let mu1 = hermite_mu(arch.activations[0], 1, quad_order.max(64))?;
    let (gram, _) = data_gram_lower_bound(n, d);
    let mut prod = 1.0;
    for p in 3..=arch.depth {
        let kind = arch.activations[p - 2]; // sigma_{p-1}
        let beta3 = match beta3_override {
            Some(f) => f(kind)?,
            None => beta_constants(kind, arch.depth, quad_order, var_arg)?.2,
        };
        prod *= beta3 + arch.alpha(p - 2);
    }
    Ok(2.0 * mu1 * mu1 * gram * prod)
}

/// Lower bound on `lambda_min` of the infinite-width NTK (clipped at 0; see
/// [`data_gram_lower_bound`] for the vacuous regime).
pub fn lambda_min_lower(
    arch: &Architecture,
    n: usize,
    d: usize,
    quad_order: usize,
    var_arg: Beta3Variance,
) -> Result<f64> {
    lambda_lower_impl(arch, n, d, quad_order, var_arg, None)
}

/// Upper bound on `lambda_min` of the infinite-width NTK via the mean
/// diagonal:
/// `(N/d) sum_{l=1}^{L} lead_l * prod_{p=2}^{l-1}(beta1 + alpha) *
///  prod_{p=l+1}^{L}(beta2 + alpha)`,
/// where `lead_1 = 1` (the input Gram has unit diagonal) and
/// `lead_l = beta1(sigma_{l-1})` for `l >= 2`.
pub fn lambda_min_upper(
    arch: &Architecture,
    n: usize,
    d: usize,
    quad_order: usize,
    var_arg: Beta3Variance,
) -> Result<f64> {
    arch.validate()?;
    let beta = |p: usize| -> Result<(f64, f64, f64)> {
        beta_constants(arch.activations[p - 2], arch.depth, quad_order, var_arg)
    };
    let mut total = 0.0;
    for l in 1..=arch.depth {
        let lead = if l == 1 { 1.0 } else { beta(l)?.0 };
        let mut head = 1.0;
        for p in 2..l {
            head *= beta(p)?.0 + arch.alpha(p - 2);
        }
        let mut tail = 1.0;
        for p in (l + 1)..=arch.depth {
            tail *= beta(p)?.1 + arch.alpha(p - 2);
        }
        total += lead * head * tail;
    }
    Ok((n as f64 / d as f64) * total)
}

/// Relative ranking scores for the finite-width NTK spectrum (all hidden
/// order constants set to 1; these rank architectures, they do not certify
/// eigenvalues):
/// lower `(N/d) prod_{i=2}^{L-1}(beta3(sigma_i) + alpha_{i-1})`,
/// upper `(N/d) sum_{k=0}^{L-1} prod_{i=k+2}^{L-1}(beta2(sigma_i) + alpha_{i-1})`.
pub fn finite_width_scores(
    arch: &Architecture,
    n: usize,
    d: usize,
    quad_order: usize,
    var_arg: Beta3Variance,
) -> Result<(f64, f64)> {
    arch.validate()?;
    if arch.depth < 3 {
        return Err(Error::Input("finite-width scores require depth >= 3".into()));
    }
    let ratio = n as f64 / d as f64;
    let mut lower = 1.0;
    for i in 2..=arch.depth - 1 {
        let beta3 = beta_constants(arch.activations[i - 1], arch.depth, quad_order, var_arg)?.2;
        lower *= beta3 + arch.alpha(i - 1);
    }
    let mut upper = 0.0;
    for k in 0..=arch.depth - 1 {
        let mut prod = 1.0;
        for i in (k + 2)..=arch.depth - 1 {
            let beta2 = beta_constants(arch.activations[i - 1], arch.depth, quad_order, var_arg)?.1;
            prod *= beta2 + arch.alpha(i - 1);
        }
        upper += prod;
    }
    Ok((ratio * lower, ratio * upper))
}

/// Specialized sandwich for single-activation networks. Identical in shape
/// to [`lambda_min_lower`]/[`lambda_min_upper`], but the saturating kinds'
/// lower derivative constant is evaluated at the kind-specific first-layer
/// diagonal bound (`f(1/2)` for Sigmoid, `f(2)` for Tanh).
pub fn uniform_kind_bounds(
    kind: ActivationKind,
    depth: usize,
    skips: Vec<u8>,
    n: usize,
    d: usize,
    quad_order: usize,
) -> Result<(f64, f64)> {
    let arch = Architecture::uniform(depth, 1, d.max(1), kind, skips)?;
    let override_fn = |k: ActivationKind| beta3_uniform_kind(k, quad_order);
    let lower = lambda_lower_impl(&arch, n, d, quad_order, Beta3Variance::GMax, Some(&override_fn))?;
    let upper = lambda_min_upper(&arch, n, d, quad_order, Beta3Variance::GMax)?;
    Ok((lower, upper))
}

/// Rejects architectures mixing activation kinds (the specialized bounds
/// only hold for uniform networks).
pub fn require_uniform_kind(arch: &Architecture) -> Result<ActivationKind> {
    let first = arch.activations[0];
    if arch.activations.iter().any(|k| *k != first) {
        return Err(Error::Input(
            "single-activation bounds require the same kind in every layer".into(),
        ));
    }
    Ok(first)
}

/// Depth constant `C1(L) = sqrt(L) / (3 Lip_max + 1)^(L-1)`.
pub fn c1_const(depth: usize, lip_max: f64) -> f64 {
    (depth as f64).sqrt() / (3.0 * lip_max + 1.0).powi(depth as i32 - 1)
}

/// Depth constant `C2(L) = sqrt(L) * (3 Lip_max + 1)^(L-1)`.
pub fn c2_const(depth: usize, lip_max: f64) -> f64 {
    (depth as f64).sqrt() * (3.0 * lip_max + 1.0).powi(depth as i32 - 1)
}

/// Largest Lipschitz constant among the architecture's activations.
pub fn lip_max(arch: &Architecture) -> f64 {
    arch.activations
        .iter()
        .map(|k| k.lipschitz())
        .fold(0.0, f64::max)
}

/// Expected 0-1 risk bound after one-pass SGD:
/// `C2(L) sqrt(y^T y / (lambda_min N)) + sqrt(log(1/delta) / N)`.
/// Returns `(total, term1, term2)`.
pub fn generalization_bound(
    lambda_min: f64,
    y: &[f64],
    delta: f64,
    depth: usize,
    lip: f64,
) -> Result<(f64, f64, f64)> {
    if lambda_min <= 0.0 {
        return Err(Error::Domain(format!(
            "generalization bound needs lambda_min > 0, got {lambda_min} (bound vacuous)"
        )));
    }
    if !(delta > 0.0 && delta <= (-1.0f64).exp()) {
        return Err(Error::Domain(format!(
            "confidence delta must lie in (0, 1/e], got {delta}"
        )));
    }
    let n = y.len();
    if n == 0 {
        return Err(Error::Input("empty label vector".into()));
    }
    let yty: f64 = y.iter().map(|v| v * v).sum();
    let term1 = c2_const(depth, lip) * (yty / (lambda_min * n as f64)).sqrt();
    let term2 = ((1.0 / delta).ln() / n as f64).sqrt();
    Ok((term1 + term2, term1, term2))
}

/// How the quadratic form `y^T K^{-1} y` in [`step_size`] is obtained.
pub enum SpectrumInput<'a> {
    /// Full kernel matrix; the quadratic form is solved exactly.
    Kernel(&'a Array2<f64>),
    /// Only `lambda_min`; uses the relaxation `y^T K^{-1} y <= y^T y / lambda_min`
    /// (never smaller than the exact form).
    LambdaMin(f64),
}

/// Theoretical SGD step size `gamma = kappa C1(L) sqrt(y^T K^{-1} y) / (m sqrt(N))`.
pub fn step_size(
    spectrum: SpectrumInput,
    y: &[f64],
    width: usize,
    kappa: f64,
    depth: usize,
    lip: f64,
) -> Result<f64> {
    if kappa < 0.0 {
        return Err(Error::Input(format!("kappa must be >= 0, got {kappa}")));
    }
    let n = y.len();
    if n == 0 {
        return Err(Error::Input("empty label vector".into()));
    }
    let quad_form = match spectrum {
        SpectrumInput::LambdaMin(lmin) => {
            if lmin <= 0.0 {
                return Err(Error::Domain(format!(
                    "step size needs lambda_min > 0, got {lmin}"
                )));
            }
            y.iter().map(|v| v * v).sum::<f64>() / lmin
        }
        SpectrumInput::Kernel(k) => {
            if k.nrows() != n || k.ncols() != n {
                return Err(Error::Input("kernel size does not match labels".into()));
            }
            let dm = DMatrix::from_fn(n, n, |i, j| 0.5 * (k[(i, j)] + k[(j, i)]));
            let chol = dm
                .cholesky()
                .ok_or_else(|| Error::Domain("kernel is singular or indefinite".into()))?;
            let yv = DVector::from_column_slice(y);
            let solved = chol.solve(&yv);
            yv.dot(&solved)
        }
    };
    Ok(kappa * c1_const(depth, lip) * quad_form.sqrt() / (width as f64 * (n as f64).sqrt()))
}

/// Width proxy from the cumulative-loss analysis:
/// `(3 Lip_max + 1)^(4L-4) L^2 R^4 / (4 eps^2)`. Informational only; the
/// trainer does not gate on width.
pub fn width_proxy(depth: usize, lip: f64, r: f64, eps: f64) -> f64 {
    (3.0 * lip + 1.0).powi(4 * depth as i32 - 4) * (depth as f64).powi(2) * r.powi(4)
        / (4.0 * eps * eps)
}

/// Everything the bound evaluator knows about one architecture, serialized
/// as the `bounds` subcommand's JSON report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoundReport {
    pub arch: String,
    pub n: usize,
    pub d: usize,
    /// Lower bound on lambda_min of the infinite-width NTK (clipped at 0).
    pub lambda_min_lower: f64,
    /// Upper bound on lambda_min via the mean kernel diagonal.
    pub lambda_min_upper: f64,
    /// Finite-width ranking scores (order constants set to 1).
    pub finite_lower_score: f64,
    pub finite_upper_score: f64,
    /// Data-Gram term `max(N/d - 9 N^(2/3) d^(1/3), 0)`.
    pub data_gram_term: f64,
    /// True when the data-Gram term was clipped (lower bound vacuous).
    pub data_gram_vacuous: bool,
    pub mu1_sq: f64,
    /// Per-layer factor triples `(beta3 + alpha, beta2 + alpha, beta1 + alpha)`
    /// for layers `p = 2..L`.
    pub per_layer_factors: Vec<(f64, f64, f64)>,
    pub lip_max: f64,
    pub c1: f64,
    pub c2: f64,
    /// Generalization bound (needs a positive lambda_min estimate).
    pub gen_bound: Option<f64>,
    pub gen_term1: Option<f64>,
    pub gen_term2: Option<f64>,
    /// Order-level constants not derived from the analysis are set to 1.
    pub uncertified_constants_set_to_one: bool,
}

/// Assembles the full report. `lambda_min_estimate` (if given, together
/// with `delta`) also fills in the generalization bound assuming labels in
/// `{-1, +1}` so that `y^T y = N`.
pub fn bound_report(
    arch: &Architecture,
    n: usize,
    d: usize,
    delta: f64,
    lambda_min_estimate: Option<f64>,
    quad_order: usize,
    var_arg: Beta3Variance,
) -> Result<BoundReport> {
    arch.validate()?;
    let mu1 = hermite_mu(arch.activations[0], 1, quad_order.max(64))?;
    let (gram, vacuous) = data_gram_lower_bound(n, d);
    let lower = lambda_min_lower(arch, n, d, quad_order, var_arg)?;
    let upper = lambda_min_upper(arch, n, d, quad_order, var_arg)?;
    let (fl, fu) = if arch.depth >= 3 {
        finite_width_scores(arch, n, d, quad_order, var_arg)?
    } else {
        (f64::NAN, f64::NAN)
    };
    let mut factors = Vec::new();
    for p in 2..=arch.depth {
        let (b1, b2, b3) =
            beta_constants(arch.activations[p - 2], arch.depth, quad_order, var_arg)?;
        let alpha = arch.alpha(p - 2);
        factors.push((b3 + alpha, b2 + alpha, b1 + alpha));
    }
    let lip = lip_max(arch);
    let (gen, t1, t2) = match lambda_min_estimate {
        Some(lmin) if lmin > 0.0 => {
            let y = vec![1.0; n];
            let (g, a, b) = generalization_bound(lmin, &y, delta, arch.depth, lip)?;
            (Some(g), Some(a), Some(b))
        }
        _ => (None, None, None),
    };
    Ok(BoundReport {
        arch: arch.encode(),
        n,
        d,
        lambda_min_lower: lower,
        lambda_min_upper: upper,
        finite_lower_score: fl,
        finite_upper_score: fu,
        data_gram_term: gram,
        data_gram_vacuous: vacuous,
        mu1_sq: mu1 * mu1,
        per_layer_factors: factors,
        lip_max: lip,
        c1: c1_const(arch.depth, lip),
        c2: c2_const(arch.depth, lip),
        gen_bound: gen,
        gen_term1: t1,
        gen_term2: t2,
        uncertified_constants_set_to_one: true,
    })
}
