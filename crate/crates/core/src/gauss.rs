//! Gaussian-expectation engine: 1-D and bivariate expectations of
//! activations and their derivatives under arbitrary covariances.
//!
//! The kernel recursion only ever needs expectations of `sigma(u) sigma(v)`
//! and `sigma'(u) sigma'(v)` for jointly Gaussian `(u, v)`, so everything
//! here is parameterized by the 2x2 marginal covariance [`Cov2`].
//!
//! For the piecewise-linear kinds (ReLU, LeakyReLU) the expectations have
//! arc-cosine closed forms, which the default path uses — quadrature across
//! the kink converges slowly. The smooth kinds use tensor-product
//! Gauss–Hermite quadrature. An independent quadrature path for the
//! piecewise-linear kinds (polar-coordinate wedge integrals with an analytic
//! radial part) is exposed for cross-checking the closed forms.

use crate::activations::ActivationKind;
use crate::error::{Error, Result};
use crate::quad::{gauss_expect, gauss_expect_2d, legendre_integrate};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// 2x2 covariance of a jointly Gaussian pair `(u, v)`:
/// `a = Var(u)`, `b = Var(v)`, `c = Cov(u, v)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cov2 {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl Cov2 {
    pub fn new(a: f64, b: f64, c: f64) -> Result<Self> {
        let cov = Cov2 { a, b, c };
        cov.validate()?;
        Ok(cov)
    }

    /// Checks positive semi-definiteness of the 2x2 marginal
    /// (`a, b >= 0`, `c^2 <= ab` up to tolerance).
    pub fn validate(&self) -> Result<()> {
        if !(self.a.is_finite() && self.b.is_finite() && self.c.is_finite()) {
            return Err(Error::Domain("covariance entries must be finite".into()));
        }
        if self.a < 0.0 || self.b < 0.0 {
            return Err(Error::Domain(format!(
                "variances must be non-negative: a={}, b={}",
                self.a, self.b
            )));
        }
        let tol = 1e-8 * (self.a * self.b).max(1.0);
        if self.c * self.c > self.a * self.b + tol {
            return Err(Error::Domain(format!(
                "covariance breaks PSD: c^2={} > ab={}",
                self.c * self.c,
                self.a * self.b
            )));
        }
        Ok(())
    }

    /// Correlation clamped to `[-1, 1]` (0 when either variance vanishes).
    pub fn rho(&self) -> f64 {
        let ab = self.a * self.b;
        if ab <= 0.0 {
            0.0
        } else {
            (self.c / ab.sqrt()).clamp(-1.0, 1.0)
        }
    }
}

/// Which scalar moment [`expect_1d`] computes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Moment {
    /// `E[sigma(z)^2]`
    SigmaSq,
    /// `E[sigma(z)]`
    Sigma,
    /// `E[sigma'(z)^2]`
    DerivSq,
}

/// `E_{z ~ N(0, variance)}` of the requested moment. At zero variance the
/// point evaluation at 0 is returned. Closed forms for ReLU/LeakyReLU,
/// Gauss–Hermite otherwise.
pub fn expect_1d(
    kind: ActivationKind,
    variance: f64,
    moment: Moment,
    quad_order: usize,
) -> Result<f64> {
    if variance < 0.0 || !variance.is_finite() {
        return Err(Error::Domain(format!("variance must be >= 0, got {variance}")));
    }
    if variance == 0.0 {
        return Ok(match moment {
            Moment::SigmaSq => kind.eval(0.0).powi(2),
            Moment::Sigma => kind.eval(0.0),
            Moment::DerivSq => kind.deriv(0.0).powi(2),
        });
    }
    let eta = match kind {
        ActivationKind::Relu => Some(0.0),
        ActivationKind::LeakyRelu { eta } => Some(eta),
        _ => None,
    };
    if let Some(eta) = eta {
        return Ok(match moment {
            Moment::SigmaSq => 0.5 * (1.0 + eta * eta) * variance,
            Moment::Sigma => 0.5 * (1.0 - eta) * (2.0 * variance / PI).sqrt(),
            Moment::DerivSq => 0.5 * (1.0 + eta * eta),
        });
    }
    let s = variance.sqrt();
    Ok(match moment {
        Moment::SigmaSq => gauss_expect(quad_order, |z| kind.eval(s * z).powi(2)),
        Moment::Sigma => gauss_expect(quad_order, |z| kind.eval(s * z)),
        Moment::DerivSq => gauss_expect(quad_order, |z| kind.deriv(s * z).powi(2)),
    })
}

/// Threshold beyond which the bivariate integrals fall back to the 1-D
/// degenerate reduction `u = sign(rho) sqrt(a/b) v`.
const DEGENERATE_RHO: f64 = 1.0 - 1e-10;

/// `E[sigma(u) sigma(v)]` under `cov`. Arc-cosine closed form for
/// ReLU/LeakyReLU; tensor Gauss–Hermite for smooth kinds; near-degenerate
/// correlations reduce to a 1-D integral.
pub fn dual_expect(kind: ActivationKind, cov: Cov2, quad_order: usize) -> Result<f64> {
    cov.validate()?;
    kind.validate()?;
    if cov.a == 0.0 || cov.b == 0.0 {
        // One argument is identically 0 and sigma(0) = 0 for every kind.
        return Ok(0.0);
    }
    // The expectation is symmetric in (u, v); canonical ordering makes the
    // quadrature result exactly invariant under swapping a and b.
    let cov = if cov.a < cov.b {
        Cov2 { a: cov.b, b: cov.a, c: cov.c }
    } else {
        cov
    };
    match kind {
        ActivationKind::Relu => Ok(relu_dual_closed(cov, 0.0)),
        ActivationKind::LeakyRelu { eta } => Ok(relu_dual_closed(cov, eta)),
        _ => {
            let rho = cov.rho();
            if rho.abs() > DEGENERATE_RHO {
                let (sa, sb, sg) = (cov.a.sqrt(), cov.b.sqrt(), rho.signum());
                Ok(gauss_expect(quad_order, |z| {
                    kind.eval(sg * sa * z) * kind.eval(sb * z)
                }))
            } else {
                let (sa, sb) = (cov.a.sqrt(), cov.b.sqrt());
                Ok(gauss_expect_2d(quad_order, rho, |u, v| {
                    kind.eval(sa * u) * kind.eval(sb * v)
                }))
            }
        }
    }
}

/// `E[sigma'(u) sigma'(v)]` under `cov`; same evaluation strategy as
/// [`dual_expect`].
pub fn dual_deriv_expect(kind: ActivationKind, cov: Cov2, quad_order: usize) -> Result<f64> {
    cov.validate()?;
    kind.validate()?;
    if cov.a == 0.0 && cov.b == 0.0 {
        return Ok(kind.deriv(0.0).powi(2));
    }
    if cov.a == 0.0 || cov.b == 0.0 {
        let v = cov.a.max(cov.b);
        let s = v.sqrt();
        let mean_deriv = match kind {
            ActivationKind::Relu => 0.5,
            ActivationKind::LeakyRelu { eta } => 0.5 * (1.0 + eta),
            _ => gauss_expect(quad_order, |z| kind.deriv(s * z)),
        };
        return Ok(kind.deriv(0.0) * mean_deriv);
    }
    // Canonical ordering for exact swap symmetry (see dual_expect).
    let cov = if cov.a < cov.b {
        Cov2 { a: cov.b, b: cov.a, c: cov.c }
    } else {
        cov
    };
    match kind {
        ActivationKind::Relu => Ok(relu_deriv_dual_closed(cov, 0.0)),
        ActivationKind::LeakyRelu { eta } => Ok(relu_deriv_dual_closed(cov, eta)),
        _ => {
            let rho = cov.rho();
            if rho.abs() > DEGENERATE_RHO {
                let (sa, sb, sg) = (cov.a.sqrt(), cov.b.sqrt(), rho.signum());
                Ok(gauss_expect(quad_order, |z| {
                    kind.deriv(sg * sa * z) * kind.deriv(sb * z)
                }))
            } else {
                let (sa, sb) = (cov.a.sqrt(), cov.b.sqrt());
                Ok(gauss_expect_2d(quad_order, rho, |u, v| {
                    kind.deriv(sa * u) * kind.deriv(sb * v)
                }))
            }
        }
    }
}

/// Closed form for `E[sigma_eta(u) sigma_eta(v)]` (LeakyReLU with negative
/// slope `eta`; `eta = 0` is ReLU). Derived from the decomposition
/// `sigma_eta(x) = ((1+eta) x + (1-eta) |x|) / 2` and the identities
/// `E[u |v|] = 0`, `E[|u||v|] = (2 sqrt(ab)/pi)(sqrt(1-rho^2) + rho asin rho)`.
fn relu_dual_closed(cov: Cov2, eta: f64) -> f64 {
    let sab = (cov.a * cov.b).sqrt();
    let rho = cov.rho();
    let abs_term = (2.0 * sab / PI) * ((1.0 - rho * rho).max(0.0).sqrt() + rho * rho.asin());
    0.25 * ((1.0 + eta) * (1.0 + eta) * cov.c + (1.0 - eta) * (1.0 - eta) * abs_term)
}

/// Closed form for `E[sigma_eta'(u) sigma_eta'(v)]` via
/// `sigma_eta'(x) = (1+eta)/2 + ((1-eta)/2) sign(x)` and
/// `E[sign(u) sign(v)] = (2/pi) asin rho`.
fn relu_deriv_dual_closed(cov: Cov2, eta: f64) -> f64 {
    let rho = cov.rho();
    0.25 * (1.0 + eta) * (1.0 + eta) + 0.25 * (1.0 - eta) * (1.0 - eta) * (2.0 / PI) * rho.asin()
}

/// Quadrature evaluation of `E[sigma(u) sigma(v)]`, an independent path
/// from the closed forms. Piecewise-linear kinds integrate per quadrant in
/// polar coordinates (the radial integral is analytic, the angular integral
/// is smooth and handled by Gauss–Legendre); smooth kinds use tensor
/// Gauss–Hermite.
pub fn dual_expect_quadrature(kind: ActivationKind, cov: Cov2, quad_order: usize) -> Result<f64> {
    cov.validate()?;
    if cov.a == 0.0 || cov.b == 0.0 {
        return Ok(0.0);
    }
    match kind {
        ActivationKind::Relu => wedge_dual(cov, 0.0, quad_order),
        ActivationKind::LeakyRelu { eta } => wedge_dual(cov, eta, quad_order),
        _ => {
            let (sa, sb) = (cov.a.sqrt(), cov.b.sqrt());
            Ok(gauss_expect_2d(quad_order, cov.rho(), |u, v| {
                kind.eval(sa * u) * kind.eval(sb * v)
            }))
        }
    }
}

/// Quadrature evaluation of `E[sigma'(u) sigma'(v)]`; see
/// [`dual_expect_quadrature`].
pub fn dual_deriv_expect_quadrature(
    kind: ActivationKind,
    cov: Cov2,
    quad_order: usize,
) -> Result<f64> {
    cov.validate()?;
    if cov.a == 0.0 || cov.b == 0.0 {
        return dual_deriv_expect(kind, cov, quad_order);
    }
    match kind {
        ActivationKind::Relu => wedge_deriv_dual(cov, 0.0, quad_order),
        ActivationKind::LeakyRelu { eta } => wedge_deriv_dual(cov, eta, quad_order),
        _ => {
            let (sa, sb) = (cov.a.sqrt(), cov.b.sqrt());
            Ok(gauss_expect_2d(quad_order, cov.rho(), |u, v| {
                kind.deriv(sa * u) * kind.deriv(sb * v)
            }))
        }
    }
}

/// Inverse-covariance quadratic form coefficient along direction `theta`:
/// with density `exp(-(b u^2 - 2c uv + a v^2) / (2 det))`, substituting
/// `u = r cos(theta), v = r sin(theta)` gives `exp(-g(theta) r^2 / 2)` with
/// `g = (b cos^2 - 2c cos sin + a sin^2) / det`.
fn angular_coeff(cov: Cov2, theta: f64) -> f64 {
    let det = cov.a * cov.b - cov.c * cov.c;
    let (s, co) = theta.sin_cos();
    (cov.b * co * co - 2.0 * cov.c * co * s + cov.a * s * s) / det
}

/// Composite Gauss–Legendre over `[lo, hi]`: the angular integrands peak
/// sharply as `|rho| -> 1`, so each quadrant is split into panels.
fn panelled_integrate(nodes: usize, lo: f64, hi: f64, f: impl Fn(f64) -> f64) -> f64 {
    const PANELS: usize = 8;
    let width = (hi - lo) / PANELS as f64;
    (0..PANELS)
        .map(|p| {
            let a = lo + p as f64 * width;
            legendre_integrate(nodes, a, a + width, &f)
        })
        .sum()
}

/// `E[u v; (u,v) in wedge]`: the radial integral of `r^3 exp(-g r^2/2)` is
/// `2/g^2`, leaving a smooth angular integral.
fn wedge_uv_moment(cov: Cov2, lo: f64, hi: f64, nodes: usize) -> f64 {
    let det = cov.a * cov.b - cov.c * cov.c;
    let norm = 1.0 / (2.0 * PI * det.sqrt());
    norm * panelled_integrate(nodes, lo, hi, |theta| {
        let g = angular_coeff(cov, theta);
        let (s, co) = theta.sin_cos();
        co * s * 2.0 / (g * g)
    })
}

/// `P[(u,v) in wedge]`: radial integral of `r exp(-g r^2/2)` is `1/g`.
fn wedge_probability(cov: Cov2, lo: f64, hi: f64, nodes: usize) -> f64 {
    let det = cov.a * cov.b - cov.c * cov.c;
    let norm = 1.0 / (2.0 * PI * det.sqrt());
    norm * panelled_integrate(nodes, lo, hi, |theta| 1.0 / angular_coeff(cov, theta))
}

/// Quadrant decomposition of `E[sigma_eta(u) sigma_eta(v)]`: the integrand
/// is `w_Q * u * v` on each quadrant with weights `1, eta, eta^2, eta` going
/// counterclockwise from the positive quadrant.
fn wedge_dual(cov: Cov2, eta: f64, quad_order: usize) -> Result<f64> {
    let rho = cov.rho();
    if rho.abs() > 0.999 {
        // Near-degenerate densities concentrate on a ray; use the closed
        // form's own degenerate limit via the 1-D reduction instead.
        let (sa, sb, sg) = (cov.a.sqrt(), cov.b.sqrt(), rho.signum());
        // Piecewise-quadratic integrand: symmetric Gauss–Hermite is exact.
        let eval = |x: f64| -> f64 {
            if x >= 0.0 {
                x
            } else {
                eta * x
            }
        };
        return Ok(gauss_expect(quad_order.max(64), |z| {
            eval(sg * sa * z) * eval(sb * z)
        }));
    }
    let n = quad_order.max(64);
    let half_pi = PI / 2.0;
    let q1 = wedge_uv_moment(cov, 0.0, half_pi, n);
    let q2 = wedge_uv_moment(cov, half_pi, PI, n);
    let q3 = wedge_uv_moment(cov, PI, 3.0 * half_pi, n);
    let q4 = wedge_uv_moment(cov, 3.0 * half_pi, 2.0 * PI, n);
    Ok(q1 + eta * (q2 + q4) + eta * eta * q3)
}

/// Quadrant decomposition of `E[sigma_eta'(u) sigma_eta'(v)]`: constant
/// `w'_Q` per quadrant (`1, eta, eta^2, eta`).
fn wedge_deriv_dual(cov: Cov2, eta: f64, quad_order: usize) -> Result<f64> {
    let rho = cov.rho();
    if rho.abs() > 0.999 {
        let (sa, sb, sg) = (cov.a.sqrt(), cov.b.sqrt(), rho.signum());
        let deriv = |x: f64| -> f64 {
            if x >= 0.0 {
                1.0
            } else {
                eta
            }
        };
        return Ok(gauss_expect(quad_order.max(64), |z| {
            deriv(sg * sa * z) * deriv(sb * z)
        }));
    }
    let n = quad_order.max(64);
    let half_pi = PI / 2.0;
    let q1 = wedge_probability(cov, 0.0, half_pi, n);
    let q2 = wedge_probability(cov, half_pi, PI, n);
    let q3 = wedge_probability(cov, PI, 3.0 * half_pi, n);
    let q4 = wedge_probability(cov, 3.0 * half_pi, 2.0 * PI, n);
    Ok(q1 + eta * (q2 + q4) + eta * eta * q3)
}
