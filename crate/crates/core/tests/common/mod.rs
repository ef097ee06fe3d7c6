//! Independent brute-force oracles for the integration tests.
//!
//! Nothing in here touches the library's main computational paths: the
//! Monte-Carlo estimator draws samples directly, the scalar kernel
//! recursion works on plain numbers via 1-D expectations only, the
//! finite-difference gradient perturbs a flat parameter vector, and the
//! minimum-eigenvalue oracle bisects the characteristic polynomial using LU
//! determinants.

#![allow(dead_code)]

use ndarray::{Array1, Array2, ArrayView1};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use resntk::activations::ActivationKind;
use resntk::gauss::{expect_1d, Cov2, Moment};
use resntk::network::{forward, Architecture, Params};

/// Plain Monte Carlo with antithetic pairing for `E[sigma(u) sigma(v)]`.
/// Returns `(mean, stderr)`.
pub fn mc_dual_expect(
    kind: ActivationKind,
    cov: Cov2,
    n_samples: usize,
    seed: u64,
) -> (f64, f64) {
    assert!(n_samples >= 100_000, "oracle needs >= 1e5 samples");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (sa, sb) = (cov.a.sqrt(), cov.b.sqrt());
    let rho = cov.rho();
    let s = (1.0 - rho * rho).max(0.0).sqrt();
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for _ in 0..n_samples {
        let z1: f64 = rng.sample(StandardNormal);
        let z2: f64 = rng.sample(StandardNormal);
        let u = sa * z1;
        let v = sb * (rho * z1 + s * z2);
        // Antithetic pair (-u, -v) shares the same distribution.
        let val = 0.5 * (kind.eval(u) * kind.eval(v) + kind.eval(-u) * kind.eval(-v));
        sum += val;
        sum_sq += val * val;
    }
    let n = n_samples as f64;
    let mean = sum / n;
    let var = (sum_sq / n - mean * mean).max(0.0);
    (mean, (var / n).sqrt())
}

/// Scalar evaluation of the kernel recursion for a single unit-norm input:
/// every matrix collapses to a number and only 1-D expectations are needed.
/// An independent code path from the matrix implementation.
pub fn symbolic_ntk_n1(arch: &Architecture, quad_order: usize) -> f64 {
    let depth = arch.depth;
    let mut a_prev = 1.0; // A^(1) = <x, x> = 1
    let mut a_list = vec![a_prev];
    let mut gdot_list = Vec::new(); // Gdot^(2) .. Gdot^(L)
    for l in 2..=depth {
        let kind = arch.activations[l - 2];
        let g = 2.0 * expect_1d(kind, a_prev, Moment::SigmaSq, quad_order).unwrap();
        let gdot = 2.0 * expect_1d(kind, a_prev, Moment::DerivSq, quad_order).unwrap();
        let a = g + arch.alpha(l - 2) * a_prev;
        gdot_list.push(gdot);
        a_list.push(a);
        a_prev = a;
    }
    let mut k = 0.0;
    for l in 1..=depth {
        let mut prod = a_list[l - 1];
        for p in (l + 1)..=depth {
            prod *= gdot_list[p - 2] + arch.alpha(p - 2);
        }
        k += prod;
    }
    k
}

/// Flattens weights in the same order as `resntk::network::jacobian`:
/// row-major `W_1`, then the hidden matrices, then the output vector.
pub fn flatten_params(params: &Params) -> Vec<f64> {
    let mut flat: Vec<f64> = params.w1.iter().cloned().collect();
    for h in &params.hidden {
        flat.extend(h.iter().cloned());
    }
    flat.extend(params.w_out.iter().cloned());
    flat
}

/// Inverse of [`flatten_params`] (shapes taken from the template).
pub fn unflatten_params(template: &Params, flat: &[f64]) -> Params {
    let mut out = template.clone();
    let mut pos = 0usize;
    {
        let n = out.w1.len();
        out.w1 = Array2::from_shape_vec(
            (template.w1.nrows(), template.w1.ncols()),
            flat[pos..pos + n].to_vec(),
        )
        .unwrap();
        pos += n;
    }
    for (i, h) in template.hidden.iter().enumerate() {
        let n = h.len();
        out.hidden[i] =
            Array2::from_shape_vec((h.nrows(), h.ncols()), flat[pos..pos + n].to_vec()).unwrap();
        pos += n;
    }
    let n = out.w_out.len();
    out.w_out = Array1::from_vec(flat[pos..pos + n].to_vec());
    pos += n;
    assert_eq!(pos, flat.len());
    out
}

/// Central finite differences of the network output w.r.t. every weight.
pub fn fd_jacobian(params: &Params, arch: &Architecture, x: ArrayView1<f64>, h: f64) -> Vec<f64> {
    let flat = flatten_params(params);
    let mut grad = Vec::with_capacity(flat.len());
    for k in 0..flat.len() {
        let mut plus = flat.clone();
        plus[k] += h;
        let mut minus = flat.clone();
        minus[k] -= h;
        let fp = forward(&unflatten_params(params, &plus), arch, x).unwrap().output;
        let fm = forward(&unflatten_params(params, &minus), arch, x).unwrap().output;
        grad.push((fp - fm) / (2.0 * h));
    }
    grad
}

/// Minimum eigenvalue by bisection on `det(M - t I)` (LU determinants):
/// below the smallest eigenvalue every factor `lambda_i - t` is positive,
/// so the first sign change of the characteristic polynomial marks it.
pub fn charpoly_min_eig(m: &Array2<f64>) -> f64 {
    let n = m.nrows();
    let dm = nalgebra::DMatrix::from_fn(n, n, |i, j| m[(i, j)]);
    let det_at = |t: f64| -> f64 {
        let shifted = &dm - nalgebra::DMatrix::identity(n, n) * t;
        shifted.lu().determinant()
    };
    // Gershgorin interval containing all eigenvalues.
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..n {
        let radius: f64 = (0..n).filter(|&j| j != i).map(|j| m[(i, j)].abs()).sum();
        lo = lo.min(m[(i, i)] - radius);
        hi = hi.max(m[(i, i)] + radius);
    }
    lo -= 1e-9;
    assert!(det_at(lo) > 0.0, "determinant must be positive below the spectrum");
    // Scan for the first sign change, then bisect.
    let steps = 4000;
    let width = (hi - lo) / steps as f64;
    let mut a = lo;
    let mut b = hi;
    for s in 1..=steps {
        let t = lo + s as f64 * width;
        if det_at(t) <= 0.0 {
            a = t - width;
            b = t;
            break;
        }
        assert!(s < steps, "no sign change found; matrix may be scalar");
    }
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        if det_at(mid) > 0.0 {
            a = mid;
        } else {
            b = mid;
        }
    }
    0.5 * (a + b)
}

/// Spearman rank correlation (average ranks on ties).
pub fn spearman(xs: &[f64], ys: &[f64]) -> f64 {
    fn ranks(v: &[f64]) -> Vec<f64> {
        let n = v.len();
        let mut idx: Vec<usize> = (0..n).collect();
        idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
        let mut r = vec![0.0; n];
        let mut i = 0;
        while i < n {
            let mut j = i;
            while j + 1 < n && v[idx[j + 1]] == v[idx[i]] {
                j += 1;
            }
            let avg = (i + j) as f64 / 2.0 + 1.0;
            for &k in &idx[i..=j] {
                r[k] = avg;
            }
            i = j + 1;
        }
        r
    }
    let rx = ranks(xs);
    let ry = ranks(ys);
    let n = xs.len() as f64;
    let mx = rx.iter().sum::<f64>() / n;
    let my = ry.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut vx = 0.0;
    let mut vy = 0.0;
    for i in 0..xs.len() {
        let dx = rx[i] - mx;
        let dy = ry[i] - my;
        cov += dx * dy;
        vx += dx * dx;
        vy += dy * dy;
    }
    cov / (vx * vy).sqrt()
}

/// The five kinds used throughout the cross-kind test grids.
pub fn all_kinds() -> [ActivationKind; 5] {
    [
        ActivationKind::Relu,
        ActivationKind::LeakyRelu { eta: 0.1 },
        ActivationKind::Sigmoid,
        ActivationKind::Tanh,
        ActivationKind::Swish,
    ]
}

/// Uniformly random mixed-kind architecture for property grids.
pub fn random_architecture(
    rng: &mut ChaCha8Rng,
    depth_range: std::ops::RangeInclusive<usize>,
    width: usize,
    input_dim: usize,
) -> Architecture {
    let kinds = all_kinds();
    let depth = rng.gen_range(depth_range);
    let activations = (0..depth - 1)
        .map(|_| kinds[rng.gen_range(0..kinds.len())])
        .collect();
    let skips = (0..depth - 2).map(|_| rng.gen_bool(0.5) as u8).collect();
    Architecture::new(depth, width, input_dim, activations, skips).unwrap()
}
