//! Finite-width network checks: analytic gradients vs central finite
//! differences, the layerwise kernel identity vs an explicit Jacobian Gram
//! matrix, and trainer invariants.

mod common;

use common::{all_kinds, fd_jacobian, flatten_params};
use ndarray::Array2;
use resntk::activations::ActivationKind;
use resntk::data::{generate, Dataset, Distribution, LabelRule, SynthSpec};
use resntk::kernel::min_eigenvalue;
use resntk::network::{
    forward, init, jacobian, ntk_empirical, sgd_train, zero_one_error, Architecture,
    InitConvention, Params, TrainMode,
};

fn sphere_inputs(n: usize, d: usize, seed: u64) -> Array2<f64> {
    generate(&SynthSpec {
        n,
        d,
        distribution: Distribution::SphereUniform,
        label_rule: LabelRule::RandomSign,
        seed,
    })
    .unwrap()
    .x
}

fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let den: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    num / den.max(1e-12)
}

#[test]
fn analytic_jacobian_matches_finite_differences() {
    let d = 5;
    let x = sphere_inputs(1, d, 17);
    for kind in all_kinds() {
        for depth in [2usize, 3, 5] {
            let skip_patterns: Vec<Vec<u8>> = if depth == 2 {
                vec![vec![]]
            } else if depth == 3 {
                vec![vec![0], vec![1]]
            } else {
                vec![vec![0; 3], vec![1; 3], vec![1, 0, 1]]
            };
            for skips in skip_patterns {
                for m in [8usize, 32] {
                    let arch =
                        Architecture::uniform(depth, m, d, kind, skips.clone()).unwrap();
                    let params = init(&arch, InitConvention::StandardInit, 3).unwrap();
                    let analytic = jacobian(&params, &arch, x.row(0)).unwrap();
                    let fd = fd_jacobian(&params, &arch, x.row(0), 1e-5);
                    let rel = rel_err(&analytic, &fd);
                    assert!(
                        rel <= 1e-5,
                        "{:?} L={depth} m={m} skips={:?}: fd mismatch {rel}",
                        kind,
                        skips
                    );
                }
            }
        }
    }
}

#[test]
fn finite_difference_error_shrinks_with_step_on_smooth_kinds() {
    let d = 4;
    let x = sphere_inputs(1, d, 23);
    for kind in [ActivationKind::Tanh, ActivationKind::Sigmoid, ActivationKind::Swish] {
        let arch = Architecture::uniform(3, 8, d, kind, vec![1]).unwrap();
        let params = init(&arch, InitConvention::StandardInit, 5).unwrap();
        let analytic = jacobian(&params, &arch, x.row(0)).unwrap();
        let coarse = rel_err(&fd_jacobian(&params, &arch, x.row(0), 1e-3), &analytic);
        let fine = rel_err(&fd_jacobian(&params, &arch, x.row(0), 1e-6), &analytic);
        assert!(fine <= coarse, "{:?}: fd error grew under h-refinement", kind);
    }
}

#[test]
fn layerwise_kernel_equals_jacobian_gram() {
    let (n, d, m) = (8usize, 5usize, 32usize);
    let x = sphere_inputs(n, d, 31);
    let arch = Architecture::new(
        4,
        m,
        d,
        vec![ActivationKind::Relu, ActivationKind::Tanh, ActivationKind::Swish],
        vec![1, 0],
    )
    .unwrap();
    let params = init(&arch, InitConvention::KernelMatched, 9).unwrap();
    let k = ntk_empirical(&params, &arch, &x).unwrap();
    let jacs: Vec<Vec<f64>> =
        (0..n).map(|i| jacobian(&params, &arch, x.row(i)).unwrap()).collect();
    for i in 0..n {
        for j in 0..n {
            let dot: f64 = jacs[i].iter().zip(&jacs[j]).map(|(a, b)| a * b).sum();
            assert!(
                (k[(i, j)] - dot).abs() <= 1e-10 * dot.abs().max(1.0),
                "({i},{j}): layerwise {} vs Gram {dot}",
                k[(i, j)]
            );
        }
    }
}

#[test]
fn empirical_kernel_is_positive_semidefinite() {
    let x = sphere_inputs(10, 6, 41);
    let arch = Architecture::uniform(4, 24, 6, ActivationKind::Relu, vec![1, 1]).unwrap();
    let params = init(&arch, InitConvention::KernelMatched, 2).unwrap();
    let k = ntk_empirical(&params, &arch, &x).unwrap();
    let lo = min_eigenvalue(&k).unwrap();
    assert!(lo >= -1e-8, "empirical kernel min eigenvalue {lo}");
}

#[test]
fn kernel_matched_feature_norms_track_recursion_diagonal() {
    // At large width the squared feature norm at layer l concentrates
    // around the recursion's diagonal A^(l+1)_ii; assert a generous window.
    let d = 6;
    let x = sphere_inputs(1, d, 53);
    let arch = Architecture::uniform(4, 4096, d, ActivationKind::Tanh, vec![1, 1]).unwrap();
    let stack = resntk::kernel::ntk_infinite(&x, &arch, 96).unwrap();
    let params = init(&arch, InitConvention::KernelMatched, 8).unwrap();
    let cache = forward(&params, &arch, x.row(0)).unwrap();
    for l in 1..arch.depth {
        let norm_sq: f64 = cache.features[l].iter().map(|v| v * v).sum();
        let target = stack.a[l][(0, 0)];
        assert!(
            norm_sq >= 0.2 * target && norm_sq <= 5.0 * target,
            "layer {l}: |a|^2 = {norm_sq} vs diagonal {target}"
        );
    }
}

#[test]
fn empirical_kernel_approaches_analytic_without_skips() {
    let (n, d) = (8usize, 6usize);
    let x = sphere_inputs(n, d, 61);
    let fc = Architecture::uniform(3, 1024, d, ActivationKind::Relu, vec![0]).unwrap();
    let analytic = resntk::kernel::ntk_infinite(&x, &fc, 96).unwrap().k;
    let mut acc = 0.0;
    let seeds = 3;
    for s in 0..seeds {
        let params = init(&fc, InitConvention::KernelMatched, 100 + s).unwrap();
        let emp = ntk_empirical(&params, &fc, &x).unwrap();
        acc += resntk::kernel::frobenius(&(&emp - &analytic))
            / resntk::kernel::frobenius(&analytic);
    }
    let mean = acc / seeds as f64;
    assert!(mean <= 0.15, "mean relative error {mean} at m = 1024");
}

fn teacher_data(n: usize, d: usize, seed: u64) -> Dataset {
    generate(&SynthSpec {
        n,
        d,
        distribution: Distribution::SphereUniform,
        label_rule: LabelRule::LinearTeacher { margin: 0.2 },
        seed,
    })
    .unwrap()
}

#[test]
fn zero_step_training_is_an_exact_no_op() {
    let data = teacher_data(32, 6, 71);
    let arch = Architecture::uniform(3, 16, 6, ActivationKind::Relu, vec![1]).unwrap();
    let (trained, trace) =
        sgd_train(&arch, &data, 0.0, 4, TrainMode::Practical { epochs: 2 }).unwrap();
    let fresh = init(&arch, InitConvention::StandardInit, 4).unwrap();
    assert_eq!(flatten_params(&trained), flatten_params(&fresh));
    // Both epochs see the same (frozen) network, so the multiset of
    // per-sample losses repeats exactly.
    let n = data.len();
    let mut e1: Vec<f64> = trace[..n].to_vec();
    let mut e2: Vec<f64> = trace[n..].to_vec();
    e1.sort_by(f64::total_cmp);
    e2.sort_by(f64::total_cmp);
    assert_eq!(e1, e2);
}

#[test]
fn training_is_deterministic_given_seed() {
    let data = teacher_data(64, 6, 73);
    let arch = Architecture::uniform(3, 16, 6, ActivationKind::Tanh, vec![1]).unwrap();
    let run = |seed| sgd_train(&arch, &data, 0.5, seed, TrainMode::Practical { epochs: 2 }).unwrap();
    let (p1, t1) = run(5);
    let (p2, t2) = run(5);
    assert_eq!(flatten_params(&p1), flatten_params(&p2));
    assert_eq!(t1, t2);
    let (p3, _) = run(6);
    assert_ne!(flatten_params(&p1), flatten_params(&p3));
}

#[test]
fn practical_training_reduces_loss_and_error() {
    let data = teacher_data(256, 8, 79);
    let arch = Architecture::uniform(3, 64, 8, ActivationKind::Relu, vec![1]).unwrap();
    let (params, trace) =
        sgd_train(&arch, &data, 1.0, 11, TrainMode::Practical { epochs: 5 }).unwrap();
    let first_epoch: f64 = trace[..256].iter().sum::<f64>() / 256.0;
    let last_epoch: f64 = trace[trace.len() - 256..].iter().sum::<f64>() / 256.0;
    assert!(last_epoch < first_epoch, "loss did not descend: {first_epoch} -> {last_epoch}");
    let err = zero_one_error(&params, &arch, &data).unwrap();
    assert!(err <= 0.10, "train error {err} after 5 epochs");
}

#[test]
fn single_pass_mode_returns_one_visited_iterate() {
    // The returned iterate must exactly equal one of the N + 1 parameter
    // states visited during the pass (replay the pass and compare).
    let data = teacher_data(16, 5, 83);
    let arch = Architecture::uniform(3, 8, 5, ActivationKind::Relu, vec![0]).unwrap();
    let (picked, _) = sgd_train(&arch, &data, 0.3, 21, TrainMode::Algorithm1).unwrap();
    // Replay: visit every prefix-length run in practical order (one epoch of
    // Algorithm 1 visits samples in data order with no reshuffle).
    let mut matches = 0;
    for prefix in 0..=data.len() {
        let truncated = Dataset {
            x: data.x.slice(ndarray::s![..prefix, ..]).to_owned(),
            y: data.y[..prefix].to_vec(),
        };
        let state: Params = if prefix == 0 {
            init(&arch, InitConvention::StandardInit, 21).unwrap()
        } else {
            // gamma identical, same seed: the first `prefix` steps coincide.
            run_prefix(&arch, &truncated, 0.3, 21)
        };
        if flatten_params(&state) == flatten_params(&picked) {
            matches += 1;
        }
    }
    assert!(matches >= 1, "returned iterate not among the visited states");
}

fn run_prefix(arch: &Architecture, data: &Dataset, gamma: f64, seed: u64) -> Params {
    // One in-order pass over `data` starting from the seeded init. Uses the
    // public trainer in single-pass mode with a deterministic kept index by
    // brute force: replicate via gamma steps through Practical with 1 epoch
    // is reshuffled, so instead step manually through the library's
    // functions.
    use resntk::network::{backward, cross_entropy_deriv, forward};
    let mut params = init(arch, InitConvention::StandardInit, seed).unwrap();
    for i in 0..data.len() {
        let cache = forward(&params, arch, data.x.row(i)).unwrap();
        let coef = gamma * cross_entropy_deriv(data.y[i] * cache.output) * data.y[i];
        let back = backward(&params, arch, &cache);
        for l in 1..arch.depth {
            let delta = back.deltas[l - 1].clone();
            let input = cache.features[l - 1].clone();
            let w = if l == 1 { &mut params.w1 } else { &mut params.hidden[l - 2] };
            for r in 0..delta.len() {
                let dr = coef * delta[r];
                for (wv, &xv) in w.row_mut(r).iter_mut().zip(input.iter()) {
                    *wv -= dr * xv;
                }
            }
        }
        for (wv, &gv) in params.w_out.iter_mut().zip(back.out_grad.iter()) {
            *wv -= coef * gv;
        }
    }
    params
}
