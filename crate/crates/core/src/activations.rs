//! The five activation functions and the scalar constants the bounds consume.
//!
//! Each activation comes with its derivative, Lipschitz constant, the three
//! growth constants `beta1/beta2/beta3` (bounding kernel-diagonal growth and
//! the derivative-kernel diagonal from above/below), and its Hermite
//! coefficients under the standard Gaussian.
//!
//! Conventions:
//! - Sigmoid is the shifted form `1/(1+e^{-x}) - 1/2`, so every kind maps
//!   0 to 0.
//! - At the ReLU/LeakyReLU kink the derivative is the right derivative (1).
//! - Hermite coefficients use normalized probabilists' polynomials
//!   (orthonormal under N(0,1)), so `sum_k mu_k^2 = E[sigma(Z)^2]`.

use crate::error::{Error, Result};
use crate::quad::gauss_expect;
use serde::{Deserialize, Serialize};

/// One of the five supported activation functions.
///
/// `LeakyRelu` carries its negative-branch slope `eta`, which must lie in
/// `(0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ActivationKind {
    Relu,
    LeakyRelu { eta: f64 },
    Sigmoid,
    Tanh,
    Swish,
}

impl ActivationKind {
    /// Validates the kind's parameters (LeakyReLU slope in `(0,1)`).
    pub fn validate(&self) -> Result<()> {
        if let ActivationKind::LeakyRelu { eta } = self {
            if !(*eta > 0.0 && *eta < 1.0) {
                return Err(Error::Input(format!(
                    "LeakyReLU slope must lie in (0,1), got {eta}"
                )));
            }
        }
        Ok(())
    }

    /// Short tag used in CSV/JSON reports and CLI flags.
    pub fn tag(&self) -> &'static str {
        match self {
            ActivationKind::Relu => "relu",
            ActivationKind::LeakyRelu { .. } => "leakyrelu",
            ActivationKind::Sigmoid => "sigmoid",
            ActivationKind::Tanh => "tanh",
            ActivationKind::Swish => "swish",
        }
    }

    /// Parses a tag; `eta` is attached when the tag is `leakyrelu`.
    pub fn from_tag(tag: &str, eta: f64) -> Result<Self> {
        let kind = match tag.trim().to_ascii_lowercase().as_str() {
            "relu" => ActivationKind::Relu,
            "leakyrelu" | "leaky_relu" | "lrelu" => ActivationKind::LeakyRelu { eta },
            "sigmoid" => ActivationKind::Sigmoid,
            "tanh" => ActivationKind::Tanh,
            "swish" => ActivationKind::Swish,
            other => {
                return Err(Error::Input(format!("unknown activation tag '{other}'")));
            }
        };
        kind.validate()?;
        Ok(kind)
    }

    /// Raw activation value (no finiteness check; hot-path helper).
    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            ActivationKind::Relu => x.max(0.0),
            ActivationKind::LeakyRelu { eta } => {
                if x >= 0.0 {
                    x
                } else {
                    eta * x
                }
            }
            // Shifted logistic: 1/(1+e^{-x}) - 1/2; stable for |x| up to ~700.
            ActivationKind::Sigmoid => logistic(x) - 0.5,
            ActivationKind::Tanh => x.tanh(),
            ActivationKind::Swish => x * logistic(x),
        }
    }

    /// Raw derivative (right derivative 1 at the (Leaky)ReLU kink).
    #[inline]
    pub fn deriv(&self, x: f64) -> f64 {
        match self {
            ActivationKind::Relu => {
                if x >= 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            ActivationKind::LeakyRelu { eta } => {
                if x >= 0.0 {
                    1.0
                } else {
                    *eta
                }
            }
            ActivationKind::Sigmoid => {
                let g = logistic(x);
                g * (1.0 - g)
            }
            ActivationKind::Tanh => {
                let t = x.tanh();
                1.0 - t * t
            }
            ActivationKind::Swish => {
                let g = logistic(x);
                g + x * g * (1.0 - g)
            }
        }
    }

    /// Supremum of `|sigma'|`.
    ///
    /// Closed for all kinds except Swish, whose maximum derivative is pinned
    /// numerically by golden-section maximization (the max sits near
    /// `x ≈ 2.4` and lies in `(1.099, 1.1)`).
    pub fn lipschitz(&self) -> f64 {
        match self {
            ActivationKind::Relu | ActivationKind::LeakyRelu { .. } | ActivationKind::Tanh => 1.0,
            ActivationKind::Sigmoid => 0.25,
            ActivationKind::Swish => golden_section_max(|x| ActivationKind::Swish.deriv(x), 0.0, 5.0),
        }
    }
}

#[inline]
fn logistic(x: f64) -> f64 {
    // Branch on sign so the exponential never overflows.
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Golden-section maximization of a unimodal function on `[lo, hi]`,
/// refined to an interval width of 1e-12.
fn golden_section_max(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while hi - lo > 1e-12 {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = f(x1);
        }
    }
    f(0.5 * (lo + hi))
}

/// Checked activation evaluation (rejects non-finite input).
pub fn act_eval(kind: ActivationKind, x: f64) -> Result<f64> {
    if !x.is_finite() {
        return Err(Error::Domain(format!("activation input must be finite, got {x}")));
    }
    Ok(kind.eval(x))
}

/// Checked derivative evaluation (rejects non-finite input).
pub fn act_deriv(kind: ActivationKind, x: f64) -> Result<f64> {
    if !x.is_finite() {
        return Err(Error::Domain(format!("derivative input must be finite, got {x}")));
    }
    Ok(kind.deriv(x))
}

/// Depth-dependent upper bound on kernel diagonals: `2 (2+eta^2)^(L-2)`.
pub fn g_max(depth: usize, eta: f64) -> f64 {
    assert!(depth >= 2, "g_max requires depth >= 2");
    2.0 * (2.0 + eta * eta).powi(depth as i32 - 2)
}

/// Alternative variance argument for the lower derivative constant of
/// Sigmoid/Tanh: `3 (1+eta^2)(2+eta^2)^(L-3)`. Exposed as a configuration
/// choice; the default is [`g_max`].
pub fn g_max_alt(depth: usize, eta: f64) -> f64 {
    assert!(depth >= 3, "alternative variance argument requires depth >= 3");
    3.0 * (1.0 + eta * eta) * (2.0 + eta * eta).powi(depth as i32 - 3)
}

/// Which variance argument the saturating kinds' `beta3` is evaluated at.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum Beta3Variance {
    /// The depth-growth bound `2 (2+eta^2)^(L-2)` (default).
    #[default]
    GMax,
    /// The alternative `3 (1+eta^2)(2+eta^2)^(L-3)`.
    Alt,
}

/// Gaussian-smoothed squared derivative
/// `f(y) = 2 E_{z ~ N(0,y)}[sigma'(z)^2]`, defined for Sigmoid and Tanh.
/// At `y = 0` returns the limit `2 sigma'(0)^2`. Monotone non-increasing
/// in `y` for both kinds.
pub fn f_curve(kind: ActivationKind, y: f64, quad_order: usize) -> Result<f64> {
    match kind {
        ActivationKind::Sigmoid | ActivationKind::Tanh => {}
        _ => {
            return Err(Error::Input(format!(
                "f_curve is defined for Sigmoid and Tanh only, got {}",
                kind.tag()
            )));
        }
    }
    if y < 0.0 || !y.is_finite() {
        return Err(Error::Domain(format!("f_curve variance must be >= 0, got {y}")));
    }
    if y == 0.0 {
        let d0 = kind.deriv(0.0);
        return Ok(2.0 * d0 * d0);
    }
    let s = y.sqrt();
    Ok(2.0 * gauss_expect(quad_order, |z| {
        let d = kind.deriv(s * z);
        d * d
    }))
}

/// The three per-activation growth constants `(beta1, beta2, beta3)`.
///
/// `beta1` bounds kernel-diagonal growth, `beta2`/`beta3` bound the
/// derivative-kernel diagonal from above/below. For the saturating kinds
/// the lower constant depends on how large the diagonal can get, so it is
/// evaluated at the depth-dependent variance argument selected by `var_arg`.
pub fn beta_constants(
    kind: ActivationKind,
    depth: usize,
    quad_order: usize,
    var_arg: Beta3Variance,
) -> Result<(f64, f64, f64)> {
    if depth < 2 {
        return Err(Error::Input(format!("beta_constants requires depth >= 2, got {depth}")));
    }
    if quad_order < 32 {
        return Err(Error::Input(format!(
            "beta_constants requires quad_order >= 32, got {quad_order}"
        )));
    }
    kind.validate()?;
    let y = |eta: f64| -> f64 {
        match var_arg {
            Beta3Variance::GMax => g_max(depth, eta),
            Beta3Variance::Alt => g_max_alt(depth.max(3), eta),
        }
    };
    Ok(match kind {
        ActivationKind::Relu => (1.0, 1.0, 1.0),
        ActivationKind::LeakyRelu { eta } => {
            let c = 1.0 + eta * eta;
            (c, c, c)
        }
        ActivationKind::Sigmoid => (0.125, 0.125, f_curve(kind, y(0.0), quad_order)?),
        ActivationKind::Tanh => (2.0, 2.0, f_curve(kind, y(0.0), quad_order)?),
        ActivationKind::Swish => (1.0, 1.22, 0.5),
    })
}

/// Normalized probabilists' Hermite polynomial `h_k(x)`, evaluated by the
/// stable three-term recurrence `h_{k+1} = (x h_k - sqrt(k) h_{k-1}) / sqrt(k+1)`.
pub fn hermite_h(k: usize, x: f64) -> f64 {
    let mut hm = 0.0; // h_{-1}
    let mut h = 1.0; // h_0
    for j in 0..k {
        let next = (x * h - (j as f64).sqrt() * hm) / ((j + 1) as f64).sqrt();
        hm = h;
        h = next;
    }
    h
}

/// Double factorial `n!! = n (n-2) (n-4) ...` with `(-1)!! = 0!! = 1`.
fn double_factorial(n: i64) -> f64 {
    let mut acc = 1.0;
    let mut k = n;
    while k > 1 {
        acc *= k as f64;
        k -= 2;
    }
    acc
}

/// ln(k!) via the standard library's `ln_gamma`.
fn ln_factorial(k: usize) -> f64 {
    // Small k: exact product avoids any ln_gamma availability concern.
    (1..=k).map(|j| (j as f64).ln()).sum()
}

/// Hermite coefficient of ReLU:
/// `mu_0 = phi(0)`, `mu_1 = 1/2`, odd `k >= 3` vanish, and for even `k >= 2`
/// `mu_k = phi(0) * (-1)^(k/2+1) * (k-3)!! / sqrt(k!)` where `phi` is the
/// standard normal density.
fn hermite_mu_relu(k: usize) -> f64 {
    let phi0 = 1.0 / (2.0 * std::f64::consts::PI).sqrt();
    match k {
        0 => phi0,
        1 => 0.5,
        _ if k % 2 == 1 => 0.0,
        _ => {
            let sign = if (k / 2 + 1) % 2 == 0 { 1.0 } else { -1.0 };
            let ln_df = {
                // (k-3)!! as exp(ln) to stay finite for large k.
                let mut acc = 0.0;
                let mut j = k as i64 - 3;
                while j > 1 {
                    acc += (j as f64).ln();
                    j -= 2;
                }
                acc
            };
            sign * phi0 * (ln_df - 0.5 * ln_factorial(k)).exp()
        }
    }
}

/// `k`-th Hermite coefficient `mu_k = E[sigma(Z) h_k(Z)]`, `Z ~ N(0,1)`.
///
/// Closed form for ReLU/LeakyReLU (the Gauss–Hermite rule converges slowly
/// across the kink); Gauss–Hermite quadrature for the smooth kinds.
pub fn hermite_mu(kind: ActivationKind, k: usize, quad_order: usize) -> Result<f64> {
    if quad_order < 64 {
        return Err(Error::Input(format!(
            "hermite_mu requires quad_order >= 64, got {quad_order}"
        )));
    }
    kind.validate()?;
    Ok(match kind {
        ActivationKind::Relu => hermite_mu_relu(k),
        ActivationKind::LeakyRelu { eta } => {
            if k == 1 {
                0.5 * (1.0 + eta)
            } else {
                // sigma_eta = ((1+eta) x + (1-eta) relu-part decomposition):
                // even coefficients scale the ReLU ones by (1-eta).
                (1.0 - eta) * hermite_mu_relu(k)
            }
        }
        _ => gauss_expect(quad_order, |z| kind.eval(z) * hermite_h(k, z)),
    })
}

/// An activation together with every scalar constant the bounds consume.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ActivationProfile {
    pub kind: ActivationKind,
    pub beta1: f64,
    pub beta2: f64,
    pub beta3: f64,
    pub lipschitz: f64,
    /// `mu_0 .. mu_S`.
    pub hermite: Vec<f64>,
}

impl ActivationProfile {
    /// Builds the profile at network depth `depth`, with Hermite
    /// coefficients up to index `s_max`.
    pub fn new(
        kind: ActivationKind,
        depth: usize,
        quad_order: usize,
        s_max: usize,
        var_arg: Beta3Variance,
    ) -> Result<Self> {
        let (beta1, beta2, beta3) = beta_constants(kind, depth, quad_order, var_arg)?;
        let hermite = (0..=s_max)
            .map(|k| hermite_mu(kind, k, quad_order))
            .collect::<Result<Vec<_>>>()?;
        Ok(ActivationProfile {
            kind,
            beta1,
            beta2,
            beta3,
            lipschitz: kind.lipschitz(),
            hermite,
        })
    }
}

/// Convenience: `n!!` exposed for tests of the closed-form coefficients.
#[doc(hidden)]
pub fn double_factorial_f64(n: i64) -> f64 {
    double_factorial(n)
}
