//! Train-free architecture search: random sampling of the search space,
//! spectral scoring of candidates, top-k selection with short validation
//! training, and rank-correlation analytics.
//!
//! The default score is the mean NTK diagonal over the input dimension,
//! `(1/d) sum_i ||grad_W f(x_i)||^2`, an O(N) upper-bound surrogate for the
//! minimum NTK eigenvalue via the chain
//! `lambda_min(K) <= (1/d) trace(K) <= ||K||_F` (valid once `N >= d`).

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::kernel::{frobenius, min_eigenvalue, ntk_infinite, trace_over_d};
use crate::network::{
    grad_norm_diag, init, ntk_empirical, sgd_train, zero_one_error, Architecture,
    InitConvention, TrainMode,
};
use crate::activations::ActivationKind;
use ndarray::Array2;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// How skip bits are chosen when sampling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SkipPolicy {
    /// Independent fair coin per skip position.
    Free,
    AllOn,
    AllOff,
}

/// Named skip layouts used by the depth sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SkipConfig {
    /// Fully connected: no skips.
    None,
    /// A skip at every eligible layer.
    All,
    /// Skips only in the first half of the eligible positions.
    FirstHalf,
    /// Skips only in the second half of the eligible positions.
    SecondHalf,
}

impl SkipConfig {
    /// The skip bit-vector (length `depth - 2`) for a network of `depth`
    /// layers. Halves split at `floor((depth - 2) / 2)`; the second half
    /// takes the extra position when the count is odd.
    pub fn pattern(&self, depth: usize) -> Result<Vec<u8>> {
        if depth < 3 {
            return Err(Error::Input(format!(
                "skip layouts need depth >= 3, got {depth}"
            )));
        }
        let n = depth - 2;
        let half = n / 2;
        Ok(match self {
            SkipConfig::None => vec![0; n],
            SkipConfig::All => vec![1; n],
            SkipConfig::FirstHalf => {
                let mut v = vec![0; n];
                for b in v.iter_mut().take(half) {
                    *b = 1;
                }
                v
            }
            SkipConfig::SecondHalf => {
                let mut v = vec![0; n];
                for b in v.iter_mut().skip(half) {
                    *b = 1;
                }
                v
            }
        })
    }

    pub fn tag(&self) -> &'static str {
        match self {
            SkipConfig::None => "none",
            SkipConfig::All => "all",
            SkipConfig::FirstHalf => "first_half",
            SkipConfig::SecondHalf => "second_half",
        }
    }

    pub fn from_tag(tag: &str) -> Result<Self> {
        match tag {
            "none" => Ok(SkipConfig::None),
            "all" => Ok(SkipConfig::All),
            "first_half" => Ok(SkipConfig::FirstHalf),
            "second_half" => Ok(SkipConfig::SecondHalf),
            other => Err(Error::Input(format!(
                "unknown skip config '{other}' (expected none|all|first_half|second_half)"
            ))),
        }
    }
}

/// The sampled space: fixed depth/width/input dimension, free activation
/// choice per layer, skip bits per policy.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SearchSpace {
    pub depth: usize,
    pub width: usize,
    pub input_dim: usize,
    pub allowed_kinds: Vec<ActivationKind>,
    pub skip_policy: SkipPolicy,
}

impl SearchSpace {
    pub fn validate(&self) -> Result<()> {
        if self.allowed_kinds.is_empty() {
            return Err(Error::Input("search space needs at least one activation kind".into()));
        }
        if self.depth < 3 {
            return Err(Error::Input("skip search needs depth >= 3".into()));
        }
        for k in &self.allowed_kinds {
            k.validate()?;
        }
        Ok(())
    }
}

/// Draws one architecture: activations i.i.d. uniform over the allowed
/// kinds, skips per policy (Bernoulli(1/2) when free).
pub fn sample(space: &SearchSpace, rng: &mut ChaCha8Rng) -> Result<Architecture> {
    space.validate()?;
    let activations: Vec<ActivationKind> = (0..space.depth - 1)
        .map(|_| space.allowed_kinds[rng.gen_range(0..space.allowed_kinds.len())])
        .collect();
    let skips: Vec<u8> = (0..space.depth - 2)
        .map(|_| match space.skip_policy {
            SkipPolicy::Free => rng.gen_bool(0.5) as u8,
            SkipPolicy::AllOn => 1,
            SkipPolicy::AllOff => 0,
        })
        .collect();
    Architecture::new(space.depth, space.width, space.input_dim, activations, skips)
}

/// Train-free scoring metric.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ScoreMode {
    /// `(1/d) sum_i ||grad f(x_i)||^2` at fresh random weights, averaged
    /// over a few draws (the default metric; O(N) time and memory).
    TraceDiagEmpirical,
    /// `(1/d) trace` of the infinite-width NTK.
    TraceDiagAnalytic,
    /// `lambda_min` of the infinite-width NTK.
    MinEigAnalytic,
    /// `lambda_min` of the empirical NTK at fresh random weights.
    MinEigEmpirical,
    /// Frobenius norm of the empirical NTK (baseline metric).
    FrobeniusEmpirical,
}

impl ScoreMode {
    pub fn tag(&self) -> &'static str {
        match self {
            ScoreMode::TraceDiagEmpirical => "trace_diag_empirical",
            ScoreMode::TraceDiagAnalytic => "trace_diag_analytic",
            ScoreMode::MinEigAnalytic => "min_eig_analytic",
            ScoreMode::MinEigEmpirical => "min_eig_empirical",
            ScoreMode::FrobeniusEmpirical => "frobenius_empirical",
        }
    }

    pub fn from_tag(tag: &str) -> Result<Self> {
        Ok(match tag.trim().to_ascii_lowercase().as_str() {
            "trace_diag_empirical" | "trace" => ScoreMode::TraceDiagEmpirical,
            "trace_diag_analytic" => ScoreMode::TraceDiagAnalytic,
            "min_eig_analytic" => ScoreMode::MinEigAnalytic,
            "min_eig_empirical" => ScoreMode::MinEigEmpirical,
            "frobenius_empirical" | "frobenius" => ScoreMode::FrobeniusEmpirical,
            other => return Err(Error::Input(format!("unknown score mode '{other}'"))),
        })
    }
}

/// Number of independent weight draws averaged by the empirical trace score.
pub const DEFAULT_SCORE_DRAWS: usize = 3;

/// Scores one architecture on inputs `x` (rows unit-norm). Empirical modes
/// draw weights from `seed`; analytic modes ignore it.
pub fn score_architecture(
    arch: &Architecture,
    x: &Array2<f64>,
    mode: ScoreMode,
    seed: u64,
    quad_order: usize,
    score_draws: usize,
) -> Result<f64> {
    let d = arch.input_dim;
    match mode {
        ScoreMode::TraceDiagEmpirical => {
            let draws = score_draws.max(1);
            let mut acc = 0.0;
            for t in 0..draws {
                let params = init(arch, InitConvention::StandardInit, seed.wrapping_add(t as u64))?;
                let diag = grad_norm_diag(&params, arch, x)?;
                acc += diag.iter().sum::<f64>() / d as f64;
            }
            Ok(acc / draws as f64)
        }
        ScoreMode::TraceDiagAnalytic => {
            let stack = ntk_infinite(x, arch, quad_order)?;
            Ok(trace_over_d(&stack.k, d))
        }
        ScoreMode::MinEigAnalytic => {
            let stack = ntk_infinite(x, arch, quad_order)?;
            min_eigenvalue(&stack.k)
        }
        ScoreMode::MinEigEmpirical => {
            let params = init(arch, InitConvention::StandardInit, seed)?;
            let k = ntk_empirical(&params, arch, x)?;
            min_eigenvalue(&k)
        }
        ScoreMode::FrobeniusEmpirical => {
            let params = init(arch, InitConvention::StandardInit, seed)?;
            let k = ntk_empirical(&params, arch, x)?;
            Ok(frobenius(&k))
        }
    }
}

/// A sampled architecture with its score and (for trained candidates)
/// validation accuracy.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Candidate {
    pub arch: Architecture,
    pub encoded: String,
    pub score: f64,
    pub score_mode: String,
    /// 1-based position after sorting by score (descending).
    pub rank: usize,
    /// Present only for top-k candidates whose training succeeded.
    pub val_accuracy: Option<f64>,
    /// True when training diverged.
    pub failed: bool,
}

/// Search configuration beyond the space itself.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SearchConfig {
    /// Number of sampled architectures.
    pub num_samples: usize,
    /// How many top-scored candidates get trained.
    pub top_k: usize,
    /// Training epochs per top-k candidate.
    pub train_epochs: usize,
    /// SGD step size for candidate training.
    pub gamma: f64,
    pub seed: u64,
    pub quad_order: usize,
    pub score_draws: usize,
}

fn derived_seed(seed: u64, idx: usize, salt: u64) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(idx as u64)
        .wrapping_add(salt.wrapping_mul(0x2545_F491_4F6C_DD1D))
}

/// Runs the full search: sample, score, keep the top-k by score, train each
/// kept candidate, and return (best by validation accuracy, all candidates
/// ranked by score). Ties break by higher score, then by earlier sample
/// index. Diverged candidates are marked failed and excluded from the pick.
pub fn eigen_nas(
    space: &SearchSpace,
    train: &Dataset,
    val: &Dataset,
    mode: ScoreMode,
    cfg: &SearchConfig,
) -> Result<(Candidate, Vec<Candidate>)> {
    space.validate()?;
    if cfg.num_samples < 1 || cfg.top_k < 1 || cfg.top_k > cfg.num_samples {
        return Err(Error::Input(format!(
            "need num_samples >= top_k >= 1, got M={}, k={}",
            cfg.num_samples, cfg.top_k
        )));
    }
    if train.dim() != space.input_dim || val.dim() != space.input_dim {
        return Err(Error::Input("dataset dimension does not match the search space".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut scored: Vec<(usize, Architecture, f64)> = Vec::with_capacity(cfg.num_samples);
    for idx in 0..cfg.num_samples {
        let arch = sample(space, &mut rng)?;
        let score = score_architecture(
            &arch,
            &train.x,
            mode,
            derived_seed(cfg.seed, idx, 1),
            cfg.quad_order,
            cfg.score_draws,
        )?;
        scored.push((idx, arch, score));
    }
    // Descending score; earlier sample index wins ties.
    scored.sort_by(|a, b| b.2.total_cmp(&a.2).then(a.0.cmp(&b.0)));

    let mut candidates: Vec<Candidate> = scored
        .iter()
        .enumerate()
        .map(|(rank, (_, arch, score))| Candidate {
            encoded: arch.encode(),
            arch: arch.clone(),
            score: *score,
            score_mode: mode.tag().to_string(),
            rank: rank + 1,
            val_accuracy: None,
            failed: false,
        })
        .collect();

    for pos in 0..cfg.top_k {
        let arch = candidates[pos].arch.clone();
        let train_seed = derived_seed(cfg.seed, scored[pos].0, 2);
        match sgd_train(
            &arch,
            train,
            cfg.gamma,
            train_seed,
            TrainMode::Practical {
                epochs: cfg.train_epochs,
            },
        ) {
            Ok((params, _)) => {
                let acc = 1.0 - zero_one_error(&params, &arch, val)?;
                candidates[pos].val_accuracy = Some(acc);
            }
            Err(Error::Divergence { .. }) => {
                candidates[pos].failed = true;
            }
            Err(e) => return Err(e),
        }
    }

    let best = candidates
        .iter()
        .filter(|c| c.val_accuracy.is_some())
        .max_by(|a, b| {
            a.val_accuracy
                .unwrap()
                .total_cmp(&b.val_accuracy.unwrap())
                .then(a.score.total_cmp(&b.score))
                .then(b.rank.cmp(&a.rank))
        })
        .cloned()
        .ok_or_else(|| Error::Numerical("every top-k candidate diverged during training".into()))?;

    Ok((best, candidates))
}

/// Kendall rank correlation (tau-b, with tie correction).
pub fn kendall_tau(scores: &[f64], targets: &[f64]) -> Result<f64> {
    if scores.len() != targets.len() {
        return Err(Error::Input(format!(
            "kendall_tau length mismatch: {} vs {}",
            scores.len(),
            targets.len()
        )));
    }
    let n = scores.len();
    if n < 2 {
        return Err(Error::Input("kendall_tau needs at least two observations".into()));
    }
    let mut concordant = 0i64;
    let mut discordant = 0i64;
    let mut ties_x = 0i64;
    let mut ties_y = 0i64;
    for i in 0..n {
        for j in (i + 1)..n {
            let dx = scores[i] - scores[j];
            let dy = targets[i] - targets[j];
            if dx == 0.0 && dy == 0.0 {
                // Joint ties contribute to neither correction term.
                continue;
            } else if dx == 0.0 {
                ties_x += 1;
            } else if dy == 0.0 {
                ties_y += 1;
            } else if dx * dy > 0.0 {
                concordant += 1;
            } else {
                discordant += 1;
            }
        }
    }
    let n0 = (n * (n - 1) / 2) as i64;
    let denom = (((n0 - ties_x) as f64) * ((n0 - ties_y) as f64)).sqrt();
    if denom == 0.0 {
        return Err(Error::Numerical("kendall_tau undefined: all pairs tied".into()));
    }
    Ok((concordant - discordant) as f64 / denom)
}

/// Two-sided 5% significance threshold for tau under the null of random
/// ranking: `1.96 * sqrt(2 (2n + 5) / (9 n (n - 1)))`.
pub fn kendall_tau_null_threshold(n: usize) -> f64 {
    1.96 * (2.0 * (2.0 * n as f64 + 5.0) / (9.0 * n as f64 * (n as f64 - 1.0))).sqrt()
}
