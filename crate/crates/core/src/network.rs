//! Finite-width residual MLP: forward pass, explicit Jacobian, empirical
//! NTK, per-sample gradient norms, and the SGD trainer for the logistic
//! margin loss.
//!
//! Two weight conventions are supported:
//!
//! - `StandardInit`: every entry is drawn `N(0, 1/m)` and the forward pass is
//!   the plain residual recursion `f_l = sigma_l(W_l f_{l-1}) + alpha_{l-1}
//!   f_{l-1}`. This is the convention used for training and train-free
//!   scoring.
//! - `KernelMatched`: entries are `N(0, 1)` and the forward pass applies an
//!   explicit `sqrt(2/m)` feature scaling, so per-neuron pre-activation
//!   variances track the infinite-width recursion's `A^(l)` diagonals. Used
//!   for finite-vs-infinite kernel comparisons.

use crate::activations::ActivationKind;
use crate::data::Dataset;
use crate::error::{Error, Result};
use ndarray::{Array1, Array2, ArrayView1};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::io::{Read as IoRead, Write as IoWrite};

/// A residual MLP architecture: depth `L`, width `m`, input dimension `d`,
/// per-layer activations `sigma_1..sigma_{L-1}`, and binary skip indicators
/// `alpha_1..alpha_{L-2}` (the skip at layer `l+1` adds layer `l`'s
/// features).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Architecture {
    pub depth: usize,
    pub width: usize,
    pub input_dim: usize,
    /// Length `depth - 1`.
    pub activations: Vec<ActivationKind>,
    /// Length `depth - 2`; entries in {0, 1}.
    pub skips: Vec<u8>,
}

impl Architecture {
    pub fn new(
        depth: usize,
        width: usize,
        input_dim: usize,
        activations: Vec<ActivationKind>,
        skips: Vec<u8>,
    ) -> Result<Self> {
        let arch = Architecture {
            depth,
            width,
            input_dim,
            activations,
            skips,
        };
        arch.validate()?;
        Ok(arch)
    }

    /// Same activation in every layer.
    pub fn uniform(
        depth: usize,
        width: usize,
        input_dim: usize,
        kind: ActivationKind,
        skips: Vec<u8>,
    ) -> Result<Self> {
        Self::new(depth, width, input_dim, vec![kind; depth - 1], skips)
    }

    pub fn validate(&self) -> Result<()> {
        if self.depth < 2 {
            return Err(Error::Input(format!("depth must be >= 2, got {}", self.depth)));
        }
        if self.width < 1 || self.input_dim < 1 {
            return Err(Error::Input("width and input_dim must be >= 1".into()));
        }
        if self.activations.len() != self.depth - 1 {
            return Err(Error::Input(format!(
                "expected {} activations for depth {}, got {}",
                self.depth - 1,
                self.depth,
                self.activations.len()
            )));
        }
        if self.skips.len() != self.depth - 2 {
            return Err(Error::Input(format!(
                "expected {} skip bits for depth {}, got {}",
                self.depth - 2,
                self.depth,
                self.skips.len()
            )));
        }
        for &s in &self.skips {
            if s > 1 {
                return Err(Error::Input(format!("skip bits must be 0 or 1, got {s}")));
            }
        }
        for k in &self.activations {
            k.validate()?;
        }
        Ok(())
    }

    /// Skip coefficient `alpha_j` with the convention `alpha_0 = 0`.
    #[inline]
    pub fn alpha(&self, j: usize) -> f64 {
        if j == 0 || j > self.skips.len() {
            0.0
        } else {
            self.skips[j - 1] as f64
        }
    }

    /// Compact encoding used in reports: activation tags joined by `-` plus
    /// the skip bitstring, e.g. `relu-tanh-swish|01`.
    pub fn encode(&self) -> String {
        let acts: Vec<&str> = self.activations.iter().map(|k| k.tag()).collect();
        let skips: String = self.skips.iter().map(|s| char::from(b'0' + s)).collect();
        format!("{}|{}", acts.join("-"), skips)
    }
}

/// Weight-initialization / forward-scaling convention.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum InitConvention {
    /// `N(0, 1/m)` entries, unscaled forward pass.
    StandardInit,
    /// `N(0, 1)` entries, `sqrt(2/m)` feature scaling in the forward pass.
    KernelMatched,
}

/// Network weights: `W_1 (m x d)`, `W_2..W_{L-1} (m x m)`, and the output
/// vector `W_L (m)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Params {
    pub w1: Array2<f64>,
    pub hidden: Vec<Array2<f64>>,
    pub w_out: Array1<f64>,
    pub convention: InitConvention,
    pub seed: u64,
}

/// Draws weights for `arch` under `convention`; deterministic given `seed`.
pub fn init(arch: &Architecture, convention: InitConvention, seed: u64) -> Result<Params> {
    arch.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let std = match convention {
        InitConvention::StandardInit => (1.0 / arch.width as f64).sqrt(),
        InitConvention::KernelMatched => 1.0,
    };
    let mut draw = |rows: usize, cols: usize| -> Array2<f64> {
        Array2::from_shape_fn((rows, cols), |_| std * rng.sample::<f64, _>(StandardNormal))
    };
    let w1 = draw(arch.width, arch.input_dim);
    let hidden: Vec<Array2<f64>> = (2..arch.depth)
        .map(|_| draw(arch.width, arch.width))
        .collect();
    let w_out = Array1::from_shape_fn(arch.width, |_| std * rng.sample::<f64, _>(StandardNormal));
    Ok(Params {
        w1,
        hidden,
        w_out,
        convention,
        seed,
    })
}

/// Per-layer quantities cached by [`forward`]: pre-activations `h_1 ..
/// h_{L-1}` and features `a_0 .. a_{L-1}` (with `a_0 = x`; `a_{L-1}` feeds
/// the output weights).
#[derive(Debug, Clone)]
pub struct ForwardCache {
    pub pre: Vec<Array1<f64>>,
    pub features: Vec<Array1<f64>>,
    pub output: f64,
}

fn apply_kind(kind: ActivationKind, h: &Array1<f64>) -> Array1<f64> {
    h.mapv(|v| kind.eval(v))
}

/// Evaluates the network on one input, returning the scalar output and the
/// cache needed for gradients.
pub fn forward(params: &Params, arch: &Architecture, x: ArrayView1<f64>) -> Result<ForwardCache> {
    if x.len() != arch.input_dim {
        return Err(Error::Input(format!(
            "input dimension mismatch: expected {}, got {}",
            arch.input_dim,
            x.len()
        )));
    }
    let scale = match params.convention {
        InitConvention::StandardInit => 1.0,
        InitConvention::KernelMatched => (2.0 / arch.width as f64).sqrt(),
    };
    let mut features: Vec<Array1<f64>> = Vec::with_capacity(arch.depth);
    let mut pre: Vec<Array1<f64>> = Vec::with_capacity(arch.depth - 1);
    features.push(x.to_owned());

    for l in 1..arch.depth {
        let w = if l == 1 { &params.w1 } else { &params.hidden[l - 2] };
        let h = w.dot(&features[l - 1]);
        let kind = arch.activations[l - 1];
        let mut a = apply_kind(kind, &h) * scale;
        let alpha = arch.alpha(l - 1); // alpha_0 = 0: no skip into layer 1
        if alpha != 0.0 && l >= 2 {
            a = &a + &(&features[l - 1] * alpha);
        }
        pre.push(h);
        features.push(a);
    }
    let output = params.w_out.dot(&features[arch.depth - 1]);
    if !output.is_finite() {
        return Err(Error::Numerical("non-finite network output".into()));
    }
    Ok(ForwardCache {
        pre,
        features,
        output,
    })
}

/// Backward quantities for one sample: `delta_l = df/dh_l` for
/// `l = 1..L-1`, plus the output-layer gradient `df/dW_L = a_{L-1}`.
#[derive(Debug, Clone)]
pub struct BackwardCache {
    pub deltas: Vec<Array1<f64>>,
    pub out_grad: Array1<f64>,
}

/// Reverse-mode pass through the cached forward computation.
pub fn backward(params: &Params, arch: &Architecture, cache: &ForwardCache) -> BackwardCache {
    let scale = match params.convention {
        InitConvention::StandardInit => 1.0,
        InitConvention::KernelMatched => (2.0 / arch.width as f64).sqrt(),
    };
    let depth = arch.depth;
    let mut deltas: Vec<Array1<f64>> = vec![Array1::zeros(0); depth - 1];
    // g = df/da_l, initialized at l = L-1.
    let mut g = params.w_out.clone();
    for l in (1..depth).rev() {
        let kind = arch.activations[l - 1];
        let delta = Array1::from_shape_fn(g.len(), |i| scale * kind.deriv(cache.pre[l - 1][i]) * g[i]);
        if l >= 2 {
            let w = if l == 1 { &params.w1 } else { &params.hidden[l - 2] };
            let mut g_prev = delta.dot(w);
            let alpha = arch.alpha(l - 1);
            if alpha != 0.0 {
                g_prev = &g_prev + &(&g * alpha);
            }
            deltas[l - 1] = delta;
            g = g_prev;
        } else {
            deltas[0] = delta;
        }
    }
    BackwardCache {
        deltas,
        out_grad: cache.features[depth - 1].clone(),
    }
}

/// Flat gradient of the output w.r.t. all weights, ordered
/// `vec(W_1), vec(W_2), ..., vec(W_{L-1}), W_L` (row-major blocks).
pub fn jacobian(params: &Params, arch: &Architecture, x: ArrayView1<f64>) -> Result<Vec<f64>> {
    let cache = forward(params, arch, x)?;
    let back = backward(params, arch, &cache);
    let mut flat = Vec::new();
    for l in 1..arch.depth {
        let delta = &back.deltas[l - 1];
        let input = &cache.features[l - 1];
        for i in 0..delta.len() {
            for j in 0..input.len() {
                flat.push(delta[i] * input[j]);
            }
        }
    }
    flat.extend(back.out_grad.iter());
    Ok(flat)
}

fn per_sample_caches(
    params: &Params,
    arch: &Architecture,
    x: &Array2<f64>,
) -> Result<Vec<(ForwardCache, BackwardCache)>> {
    x.outer_iter()
        .map(|row| {
            let f = forward(params, arch, row)?;
            let b = backward(params, arch, &f);
            Ok((f, b))
        })
        .collect()
}

/// Empirical NTK Gram matrix `J J^T`, assembled layerwise:
/// `K_ij = sum_l <delta_l^i, delta_l^j> <a_{l-1}^i, a_{l-1}^j>
///        + <a_{L-1}^i, a_{L-1}^j>`,
/// which equals the flat-Jacobian Gram but never materializes the
/// `m^2`-sized gradients.
pub fn ntk_empirical(params: &Params, arch: &Architecture, x: &Array2<f64>) -> Result<Array2<f64>> {
    crate::kernel::check_unit_rows(x, 1e-8)?;
    let caches = per_sample_caches(params, arch, x)?;
    let n = caches.len();
    let mut k = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        for j in i..n {
            let (fi, bi) = &caches[i];
            let (fj, bj) = &caches[j];
            let mut acc = bi.out_grad.dot(&bj.out_grad);
            for l in 1..arch.depth {
                acc += bi.deltas[l - 1].dot(&bj.deltas[l - 1])
                    * fi.features[l - 1].dot(&fj.features[l - 1]);
            }
            k[(i, j)] = acc;
            k[(j, i)] = acc;
        }
    }
    Ok(k)
}

/// Per-sample squared gradient norms `||grad_W f(x_i)||^2` in O(N) memory —
/// the diagonal of [`ntk_empirical`] without the Gram.
pub fn grad_norm_diag(params: &Params, arch: &Architecture, x: &Array2<f64>) -> Result<Vec<f64>> {
    crate::kernel::check_unit_rows(x, 1e-8)?;
    x.outer_iter()
        .map(|row| {
            let f = forward(params, arch, row)?;
            let b = backward(params, arch, &f);
            let mut acc = b.out_grad.dot(&b.out_grad);
            for l in 1..arch.depth {
                acc += b.deltas[l - 1].dot(&b.deltas[l - 1])
                    * f.features[l - 1].dot(&f.features[l - 1]);
            }
            Ok(acc)
        })
        .collect()
}

/// Numerically stable logistic loss `l(z) = log(1 + exp(-z))`.
pub fn cross_entropy(z: f64) -> f64 {
    if z >= 0.0 {
        (-z).exp().ln_1p()
    } else {
        -z + z.exp().ln_1p()
    }
}

/// Derivative `l'(z) = -1 / (1 + exp(z))`.
pub fn cross_entropy_deriv(z: f64) -> f64 {
    if z >= 0.0 {
        let e = (-z).exp();
        -e / (1.0 + e)
    } else {
        -1.0 / (1.0 + z.exp())
    }
}

/// Training mode for [`sgd_train`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TrainMode {
    /// Single pass in data order, constant step; returns an iterate chosen
    /// uniformly at random among the `N` visited ones (the index is drawn
    /// up front so only one snapshot is kept).
    Algorithm1,
    /// Multi-epoch SGD with per-epoch reshuffling; returns the final
    /// iterate.
    Practical { epochs: usize },
}

/// One SGD step on sample `(x, y)`: `W -= gamma * l'(y f) * y * grad_W f`.
/// Returns the pre-update loss. Rank-1 updates keep the step at O(m^2).
fn sgd_step(
    params: &mut Params,
    arch: &Architecture,
    x: ArrayView1<f64>,
    y: f64,
    gamma: f64,
    iteration: usize,
) -> Result<f64> {
    let cache = forward(params, arch, x)?;
    if cache.output.abs() > 1e6 {
        return Err(Error::Divergence {
            iteration,
            message: format!("|f| = {} exceeded the divergence guard", cache.output.abs()),
        });
    }
    let loss = cross_entropy(y * cache.output);
    if !loss.is_finite() {
        return Err(Error::Divergence {
            iteration,
            message: "non-finite loss".into(),
        });
    }
    if gamma == 0.0 {
        return Ok(loss);
    }
    let coef = gamma * cross_entropy_deriv(y * cache.output) * y;
    let back = backward(params, arch, &cache);
    for l in 1..arch.depth {
        let delta = &back.deltas[l - 1];
        let input = &cache.features[l - 1];
        let w = if l == 1 { &mut params.w1 } else { &mut params.hidden[l - 2] };
        for i in 0..delta.len() {
            let di = coef * delta[i];
            if di != 0.0 {
                let mut row = w.row_mut(i);
                for (wv, &xv) in row.iter_mut().zip(input.iter()) {
                    *wv -= di * xv;
                }
            }
        }
    }
    for (wv, &gv) in params.w_out.iter_mut().zip(back.out_grad.iter()) {
        *wv -= coef * gv;
    }
    Ok(loss)
}

/// Trains with constant-step SGD on the logistic margin loss `l(y f)`.
/// Deterministic given `(arch, data, gamma, seed, mode)`.
pub fn sgd_train(
    arch: &Architecture,
    data: &Dataset,
    gamma: f64,
    seed: u64,
    mode: TrainMode,
) -> Result<(Params, Vec<f64>)> {
    if gamma < 0.0 {
        return Err(Error::Input(format!("step size must be >= 0, got {gamma}")));
    }
    if data.is_empty() {
        return Err(Error::Input("cannot train on an empty dataset".into()));
    }
    let mut params = init(arch, InitConvention::StandardInit, seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_0ff5e7);
    let n = data.len();
    let mut trace = Vec::new();

    match mode {
        TrainMode::Algorithm1 => {
            // Choose which of the N iterates {W^(1)..W^(N)} to return before
            // the pass; W^(1) is the initialization.
            let keep_after = rng.gen_range(0..n);
            let mut kept = if keep_after == 0 { Some(params.clone()) } else { None };
            for i in 0..n {
                let loss = sgd_step(&mut params, arch, data.x.row(i), data.y[i], gamma, i)?;
                trace.push(loss);
                if i + 1 == keep_after {
                    kept = Some(params.clone());
                }
            }
            Ok((kept.unwrap_or(params), trace))
        }
        TrainMode::Practical { epochs } => {
            let mut order: Vec<usize> = (0..n).collect();
            let mut iter = 0usize;
            for _ in 0..epochs {
                // Fisher–Yates with the seeded generator.
                for i in (1..n).rev() {
                    let j = rng.gen_range(0..=i);
                    order.swap(i, j);
                }
                for &idx in &order {
                    let loss =
                        sgd_step(&mut params, arch, data.x.row(idx), data.y[idx], gamma, iter)?;
                    trace.push(loss);
                    iter += 1;
                }
            }
            Ok((params, trace))
        }
    }
}

/// Fraction of samples with `y f(x) <= 0` (counting `f = 0` as an error).
pub fn zero_one_error(params: &Params, arch: &Architecture, data: &Dataset) -> Result<f64> {
    let mut errors = 0usize;
    for (row, &y) in data.x.outer_iter().zip(data.y.iter()) {
        let f = forward(params, arch, row)?.output;
        if y * f <= 0.0 {
            errors += 1;
        }
    }
    Ok(errors as f64 / data.len() as f64)
}

const PARAMS_MAGIC: &[u8; 4] = b"KPAR";
const PARAMS_VERSION: u32 = 1;

/// Writes weights as per-layer blocks with shape headers (same binary
/// conventions as the kernel matrices: little-endian, row-major f64).
pub fn save_params_binary(w: &mut impl IoWrite, params: &Params) -> Result<()> {
    w.write_all(PARAMS_MAGIC)?;
    w.write_all(&PARAMS_VERSION.to_le_bytes())?;
    let conv: u8 = match params.convention {
        InitConvention::StandardInit => 0,
        InitConvention::KernelMatched => 1,
    };
    w.write_all(&[conv])?;
    w.write_all(&params.seed.to_le_bytes())?;
    let n_blocks = 2 + params.hidden.len() as u64;
    w.write_all(&n_blocks.to_le_bytes())?;
    let mut write_block = |rows: usize, cols: usize, data: &mut dyn Iterator<Item = f64>| -> Result<()> {
        w.write_all(&(rows as u64).to_le_bytes())?;
        w.write_all(&(cols as u64).to_le_bytes())?;
        for v in data {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    };
    write_block(params.w1.nrows(), params.w1.ncols(), &mut params.w1.iter().cloned())?;
    for h in &params.hidden {
        write_block(h.nrows(), h.ncols(), &mut h.iter().cloned())?;
    }
    write_block(1, params.w_out.len(), &mut params.w_out.iter().cloned())?;
    Ok(())
}

/// Reads weights written by [`save_params_binary`].
pub fn load_params_binary(r: &mut impl IoRead) -> Result<Params> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != PARAMS_MAGIC {
        return Err(Error::Io("bad magic: not a parameter file".into()));
    }
    let mut b4 = [0u8; 4];
    r.read_exact(&mut b4)?;
    if u32::from_le_bytes(b4) != PARAMS_VERSION {
        return Err(Error::Io("unsupported parameter format version".into()));
    }
    let mut b1 = [0u8; 1];
    r.read_exact(&mut b1)?;
    let convention = match b1[0] {
        0 => InitConvention::StandardInit,
        1 => InitConvention::KernelMatched,
        other => return Err(Error::Io(format!("unknown convention byte {other}"))),
    };
    let mut b8 = [0u8; 8];
    r.read_exact(&mut b8)?;
    let seed = u64::from_le_bytes(b8);
    r.read_exact(&mut b8)?;
    let n_blocks = u64::from_le_bytes(b8) as usize;
    if n_blocks < 2 {
        return Err(Error::Io("parameter file needs at least two blocks".into()));
    }
    let read_block = |r: &mut dyn IoRead| -> Result<Array2<f64>> {
        let mut b8 = [0u8; 8];
        r.read_exact(&mut b8)?;
        let rows = u64::from_le_bytes(b8) as usize;
        r.read_exact(&mut b8)?;
        let cols = u64::from_le_bytes(b8) as usize;
        let mut data = vec![0.0f64; rows * cols];
        for v in data.iter_mut() {
            r.read_exact(&mut b8)?;
            *v = f64::from_le_bytes(b8);
        }
        Array2::from_shape_vec((rows, cols), data).map_err(|e| Error::Io(format!("shape: {e}")))
    };
    let w1 = read_block(r)?;
    let mut hidden = Vec::new();
    for _ in 0..n_blocks - 2 {
        hidden.push(read_block(r)?);
    }
    let out = read_block(r)?;
    let w_out = Array1::from_vec(out.into_raw_vec_and_offset().0);
    Ok(Params {
        w1,
        hidden,
        w_out,
        convention,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate, Distribution, LabelRule, SynthSpec};
    use approx::assert_relative_eq;
    use ndarray::array;

    #[test]
    fn hand_forward_single_neuron() {
        // m=1, d=1, L=2, ReLU, W_1=[2], W_2=[3], x=[1] -> f = 6.
        let arch = Architecture::uniform(2, 1, 1, ActivationKind::Relu, vec![]).unwrap();
        let params = Params {
            w1: array![[2.0]],
            hidden: vec![],
            w_out: array![3.0],
            convention: InitConvention::StandardInit,
            seed: 0,
        };
        let out = forward(&params, &arch, array![1.0].view()).unwrap().output;
        assert_relative_eq!(out, 6.0);
    }

    #[test]
    fn zero_first_layer_gives_zero_output() {
        let arch = Architecture::uniform(3, 4, 2, ActivationKind::Relu, vec![0]).unwrap();
        let mut params = init(&arch, InitConvention::StandardInit, 1).unwrap();
        params.w1.fill(0.0);
        let out = forward(&params, &arch, array![1.0, 0.0].view()).unwrap().output;
        assert_relative_eq!(out, 0.0);
    }

    #[test]
    fn init_variance_matches_convention() {
        let arch = Architecture::uniform(3, 1024, 8, ActivationKind::Relu, vec![0]).unwrap();
        let p = init(&arch, InitConvention::StandardInit, 42).unwrap();
        let var: f64 =
            p.hidden[0].iter().map(|v| v * v).sum::<f64>() / (p.hidden[0].len() as f64);
        assert!((var * 1024.0 - 1.0).abs() < 0.05);
        let p = init(&arch, InitConvention::KernelMatched, 42).unwrap();
        let var: f64 =
            p.hidden[0].iter().map(|v| v * v).sum::<f64>() / (p.hidden[0].len() as f64);
        assert!((var - 1.0).abs() < 0.05);
    }

    #[test]
    fn init_is_deterministic() {
        let arch = Architecture::uniform(4, 16, 4, ActivationKind::Tanh, vec![1, 0]).unwrap();
        let a = init(&arch, InitConvention::StandardInit, 9).unwrap();
        let b = init(&arch, InitConvention::StandardInit, 9).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn empirical_ntk_diagonal_matches_grad_norms() {
        let arch = Architecture::uniform(4, 16, 6, ActivationKind::Swish, vec![1, 0]).unwrap();
        let params = init(&arch, InitConvention::KernelMatched, 5).unwrap();
        let spec = SynthSpec {
            n: 6,
            d: 6,
            distribution: Distribution::SphereUniform,
            label_rule: LabelRule::RandomSign,
            seed: 11,
        };
        let data = generate(&spec).unwrap();
        let k = ntk_empirical(&params, &arch, &data.x).unwrap();
        let diag = grad_norm_diag(&params, &arch, &data.x).unwrap();
        for i in 0..6 {
            assert_relative_eq!(k[(i, i)], diag[i], max_relative = 1e-12);
        }
    }

    #[test]
    fn cross_entropy_identities() {
        assert_relative_eq!(cross_entropy(0.0), std::f64::consts::LN_2, epsilon = 1e-15);
        assert_relative_eq!(cross_entropy_deriv(0.0), -0.5, epsilon = 1e-15);
        for &z in &[-50.0, -1.0, 0.0, 1.0, 50.0] {
            // l(-z) = l(z) + z
            assert_relative_eq!(cross_entropy(-z), cross_entropy(z) + z, epsilon = 1e-12);
        }
    }

    #[test]
    fn gamma_zero_keeps_initialization() {
        let arch = Architecture::uniform(3, 8, 4, ActivationKind::Relu, vec![1]).unwrap();
        let spec = SynthSpec {
            n: 16,
            d: 4,
            distribution: Distribution::SphereUniform,
            label_rule: LabelRule::RandomSign,
            seed: 2,
        };
        let data = generate(&spec).unwrap();
        let (params, trace) = sgd_train(&arch, &data, 0.0, 3, TrainMode::Practical { epochs: 2 }).unwrap();
        let fresh = init(&arch, InitConvention::StandardInit, 3).unwrap();
        assert_eq!(params, fresh);
        // Constant loss per sample across epochs (same multiset of values).
        let (a, b) = trace.split_at(16);
        let mut a = a.to_vec();
        let mut b = b.to_vec();
        a.sort_by(f64::total_cmp);
        b.sort_by(f64::total_cmp);
        assert_eq!(a, b);
    }

    #[test]
    fn params_binary_roundtrip() {
        let arch = Architecture::uniform(4, 8, 4, ActivationKind::Tanh, vec![1, 1]).unwrap();
        let params = init(&arch, InitConvention::StandardInit, 77).unwrap();
        let mut buf = Vec::new();
        save_params_binary(&mut buf, &params).unwrap();
        let back = load_params_binary(&mut buf.as_slice()).unwrap();
        assert_eq!(params, back);
    }
}
