//! Infinite-width NTK recursion, the layer-2 Hermite-series kernel, and
//! dense spectral utilities.
//!
//! The kernel of a depth-`L` residual MLP is built layer by layer. With
//! `G^(1) = X X^T` and `A^(1) = G^(1)`, each subsequent layer contributes
//!
//! - `G^(l)_ij = 2 E[sigma_{l-1}(u) sigma_{l-1}(v)]`,
//! - `Gdot^(l)_ij = 2 E[sigma'_{l-1}(u) sigma'_{l-1}(v)]`,
//!
//! where `(u, v)` is Gaussian with the 2x2 marginal of `A^(l-1)` at `(i,j)`,
//! and the accumulated covariance follows `A^(l) = G^(l) + alpha_{l-2}
//! A^(l-1)` (`alpha_0 = 0`, so `A^(2) = G^(2)`). The final kernel is the
//! Hadamard-product sum
//!
//! `K = sum_{l=1}^{L} A^(l) ∘ prod_{p=l+1}^{L} (Gdot^(p) + alpha_{p-2} 1)`,
//!
//! the `l = L` term being `A^(L)` itself.

use crate::error::{Error, Result};
use crate::gauss::{dual_deriv_expect, dual_expect, Cov2};
use crate::network::Architecture;
use crate::quad::gauss_expect;
use crate::activations::{hermite_mu, ActivationKind};
use nalgebra::DMatrix;
use ndarray::Array2;
use std::io::{Read as IoRead, Write as IoWrite};

/// Per-layer matrices of the infinite-width recursion plus the final NTK.
#[derive(Debug, Clone)]
pub struct KernelStack {
    /// `G^(1) .. G^(L)`; `g[l-1]` is `G^(l)`.
    pub g: Vec<Array2<f64>>,
    /// `Gdot^(2) .. Gdot^(L)`; `gdot[l-2]` is `Gdot^(l)`.
    pub gdot: Vec<Array2<f64>>,
    /// `A^(1) .. A^(L)`; `a[l-1]` is `A^(l)` (`A^(L)` is the last summand
    /// of the kernel).
    pub a: Vec<Array2<f64>>,
    /// The assembled NTK `K^(L)`.
    pub k: Array2<f64>,
}

/// Verifies every row of `x` has unit Euclidean norm to `tol`.
pub fn check_unit_rows(x: &Array2<f64>, tol: f64) -> Result<()> {
    for (i, row) in x.outer_iter().enumerate() {
        let norm = row.dot(&row).sqrt();
        if (norm - 1.0).abs() > tol {
            return Err(Error::Input(format!(
                "row {i} has norm {norm}, expected unit norm (tol {tol})"
            )));
        }
    }
    Ok(())
}

/// Extracts the 2x2 marginal of `m` at `(i, j)`, clamping the covariance
/// into the PSD range (quadrature noise can push it slightly outside).
fn marginal(m: &Array2<f64>, i: usize, j: usize) -> Cov2 {
    let a = m[(i, i)].max(0.0);
    let b = m[(j, j)].max(0.0);
    let lim = (a * b).sqrt();
    Cov2 {
        a,
        b,
        c: m[(i, j)].clamp(-lim, lim),
    }
}

/// Clips eigenvalues of a symmetric matrix below `-1e-10 * trace/N` to 0.
/// Fails if the most negative eigenvalue is worse than `-1e-6 * trace/N`.
fn psd_repair(m: &mut Array2<f64>, label: &str) -> Result<()> {
    let n = m.nrows();
    if n <= 1 {
        if m[(0, 0)] < 0.0 {
            m[(0, 0)] = 0.0;
        }
        return Ok(());
    }
    let trace: f64 = (0..n).map(|i| m[(i, i)]).sum();
    let scale = (trace / n as f64).abs().max(f64::MIN_POSITIVE);
    let dm = DMatrix::from_fn(n, n, |i, j| 0.5 * (m[(i, j)] + m[(j, i)]));
    let eig = dm.symmetric_eigen();
    let min_eig = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    if min_eig >= -1e-10 * scale {
        return Ok(()); // already PSD to tolerance; keep the exact entries
    }
    if min_eig < -1e-6 * scale {
        return Err(Error::Numerical(format!(
            "{label}: PSD repair failed, min eigenvalue {min_eig} below -1e-6 * trace/N"
        )));
    }
    let mut vals = eig.eigenvalues.clone();
    for v in vals.iter_mut() {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
    let repaired = &eig.eigenvectors * DMatrix::from_diagonal(&vals) * eig.eigenvectors.transpose();
    for i in 0..n {
        for j in 0..n {
            m[(i, j)] = 0.5 * (repaired[(i, j)] + repaired[(j, i)]);
        }
    }
    Ok(())
}

/// Applies `f(i, j)` to the upper triangle (including diagonal) and mirrors,
/// optionally in parallel over rows.
fn fill_symmetric(
    n: usize,
    threads: usize,
    f: impl Fn(usize, usize) -> Result<f64> + Sync,
) -> Result<Array2<f64>> {
    let mut out = Array2::<f64>::zeros((n, n));
    if threads > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| Error::Numerical(format!("thread pool: {e}")))?;
        let rows: Vec<Result<Vec<f64>>> = pool.install(|| {
            use rayon::prelude::*;
            (0..n)
                .into_par_iter()
                .map(|i| (i..n).map(|j| f(i, j)).collect::<Result<Vec<f64>>>())
                .collect()
        });
        for (i, row) in rows.into_iter().enumerate() {
            let row = row?;
            for (off, v) in row.into_iter().enumerate() {
                let j = i + off;
                out[(i, j)] = v;
                out[(j, i)] = v;
            }
        }
    } else {
        for i in 0..n {
            for j in i..n {
                let v = f(i, j)?;
                out[(i, j)] = v;
                out[(j, i)] = v;
            }
        }
    }
    Ok(out)
}

/// Computes the infinite-width NTK of `arch` on data `x` (rows unit-norm).
/// Single-threaded; see [`ntk_infinite_threads`] for a parallel entry path.
pub fn ntk_infinite(x: &Array2<f64>, arch: &Architecture, quad_order: usize) -> Result<KernelStack> {
    ntk_infinite_threads(x, arch, quad_order, 1)
}

/// [`ntk_infinite`] with entry computations spread over `threads` workers.
/// Results are identical at any thread count (entries are independent and
/// the reductions keep a fixed order).
pub fn ntk_infinite_threads(
    x: &Array2<f64>,
    arch: &Architecture,
    quad_order: usize,
    threads: usize,
) -> Result<KernelStack> {
    arch.validate()?;
    check_unit_rows(x, 1e-8)?;
    let n = x.nrows();
    let depth = arch.depth;

    let g1 = x.dot(&x.t());
    let mut g = vec![g1.clone()];
    let mut gdot: Vec<Array2<f64>> = Vec::new();
    let mut a = vec![g1];

    for l in 2..=depth {
        let kind = arch.activations[l - 2]; // sigma_{l-1}
        let prev = a.last().unwrap();
        let g_l = fill_symmetric(n, threads, |i, j| {
            Ok(2.0 * dual_expect(kind, marginal(prev, i, j), quad_order)?)
        })?;
        let gdot_l = fill_symmetric(n, threads, |i, j| {
            Ok(2.0 * dual_deriv_expect(kind, marginal(prev, i, j), quad_order)?)
        })?;
        let alpha = arch.alpha(l - 2); // alpha_0 = 0 at l = 2
        let mut a_l = &g_l + &(prev * alpha);
        psd_repair(&mut a_l, &format!("A^({l})"))?;
        g.push(g_l);
        gdot.push(gdot_l);
        a.push(a_l);
    }

    // K = sum_l A^(l) ∘ prod_{p>l} (Gdot^(p) + alpha_{p-2} 1), assembled
    // from the top with a running Hadamard product.
    let mut k = a[depth - 1].clone();
    let mut running = Array2::<f64>::ones((n, n));
    for l in (1..depth).rev() {
        // factor for p = l + 1: Gdot^(l+1) + alpha_{l-1}
        let alpha = arch.alpha(l - 1);
        let factor = &gdot[l - 1] + alpha;
        running = &running * &factor;
        k = &k + &(&a[l - 1] * &running);
    }

    Ok(KernelStack { g, gdot, a, k })
}

/// Truncated Hermite-series approximation of the layer-2 kernel:
/// `2 sum_{s=0}^{S} mu_s^2 (X X^T)^{∘s}` (the `s = 0` term is all-ones).
pub fn hermite_kernel_layer2(
    x: &Array2<f64>,
    kind: ActivationKind,
    s_max: usize,
    quad_order: usize,
) -> Result<Array2<f64>> {
    if s_max < 1 {
        return Err(Error::Input("hermite_kernel_layer2 requires S >= 1".into()));
    }
    check_unit_rows(x, 1e-8)?;
    let n = x.nrows();
    let gram = x.dot(&x.t());
    let mut acc = Array2::<f64>::zeros((n, n));
    let mut hadamard_pow = Array2::<f64>::ones((n, n));
    for s in 0..=s_max {
        let mu = hermite_mu(kind, s, quad_order.max(64))?;
        acc = &acc + &(&hadamard_pow * (mu * mu));
        hadamard_pow = &hadamard_pow * &gram;
    }
    Ok(acc * 2.0)
}

/// Smallest eigenvalue of a symmetric matrix by full symmetric
/// eigendecomposition. Rejects matrices asymmetric beyond `1e-8` (relative
/// to the largest entry).
pub fn min_eigenvalue(m: &Array2<f64>) -> Result<f64> {
    let n = m.nrows();
    if n != m.ncols() {
        return Err(Error::Input("min_eigenvalue requires a square matrix".into()));
    }
    let mut max_abs = 0.0f64;
    let mut max_asym = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            max_abs = max_abs.max(m[(i, j)].abs());
            max_asym = max_asym.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    if max_asym > 1e-8 * (1.0 + max_abs) {
        return Err(Error::Input(format!(
            "matrix asymmetric beyond tolerance: max |M - M^T| = {max_asym}"
        )));
    }
    let dm = DMatrix::from_fn(n, n, |i, j| 0.5 * (m[(i, j)] + m[(j, i)]));
    let eig = dm.symmetric_eigen();
    Ok(eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min))
}

/// `(1/d) * trace(M)`.
pub fn trace_over_d(m: &Array2<f64>, d: usize) -> f64 {
    let trace: f64 = (0..m.nrows().min(m.ncols())).map(|i| m[(i, i)]).sum();
    trace / d as f64
}

/// Frobenius norm.
pub fn frobenius(m: &Array2<f64>) -> f64 {
    m.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Mean per-coordinate second moment `E[sigma(Z)^2]` helper used by tests
/// of the Hermite diagonal identity.
pub fn activation_second_moment(kind: ActivationKind, quad_order: usize) -> f64 {
    gauss_expect(quad_order, |z| kind.eval(z).powi(2))
}

const MATRIX_MAGIC: &[u8; 4] = b"KMAT";
const MATRIX_VERSION: u32 = 1;

/// Writes a square matrix in the crate's binary layout: magic `KMAT`,
/// format version, `n` and the network depth as little-endian u64, then the
/// `n*n` entries row-major as little-endian f64.
pub fn save_matrix_binary(w: &mut impl IoWrite, m: &Array2<f64>, depth: usize) -> Result<()> {
    let n = m.nrows();
    if n != m.ncols() {
        return Err(Error::Input("binary layout stores square matrices only".into()));
    }
    w.write_all(MATRIX_MAGIC)?;
    w.write_all(&MATRIX_VERSION.to_le_bytes())?;
    w.write_all(&(n as u64).to_le_bytes())?;
    w.write_all(&(depth as u64).to_le_bytes())?;
    for row in m.outer_iter() {
        for &v in row.iter() {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

/// Reads a matrix written by [`save_matrix_binary`]; returns `(matrix, depth)`.
pub fn load_matrix_binary(r: &mut impl IoRead) -> Result<(Array2<f64>, usize)> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MATRIX_MAGIC {
        return Err(Error::Io("bad magic: not a kernel matrix file".into()));
    }
    let mut b4 = [0u8; 4];
    r.read_exact(&mut b4)?;
    let version = u32::from_le_bytes(b4);
    if version != MATRIX_VERSION {
        return Err(Error::Io(format!("unsupported matrix format version {version}")));
    }
    let mut b8 = [0u8; 8];
    r.read_exact(&mut b8)?;
    let n = u64::from_le_bytes(b8) as usize;
    r.read_exact(&mut b8)?;
    let depth = u64::from_le_bytes(b8) as usize;
    let mut data = vec![0.0f64; n * n];
    for v in data.iter_mut() {
        r.read_exact(&mut b8)?;
        *v = f64::from_le_bytes(b8);
    }
    let m = Array2::from_shape_vec((n, n), data)
        .map_err(|e| Error::Io(format!("shape error: {e}")))?;
    Ok((m, depth))
}

/// Writes a matrix as plain CSV (no header).
pub fn save_matrix_csv(w: &mut impl IoWrite, m: &Array2<f64>) -> Result<()> {
    for row in m.outer_iter() {
        let line: Vec<String> = row.iter().map(|v| format!("{v:.17e}")).collect();
        writeln!(w, "{}", line.join(","))?;
    }
    Ok(())
}
