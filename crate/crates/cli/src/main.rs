//! Command-line surface for the residual-network NTK library: exact kernel
//! computation, depth sweeps, spectrum bounds, train-free architecture
//! search, finite-vs-infinite width convergence curves, and SGD training.
//!
//! Exit codes: 0 success, 2 input error, 3 numerical error, 4 divergence.

use clap::{Args, Parser, Subcommand};
use resntk::activations::{ActivationKind, Beta3Variance};
use resntk::bounds::{bound_report, generalization_bound, lip_max, step_size, SpectrumInput};
use resntk::data::{generate, load_csv, Dataset, Distribution, LabelRule, SynthSpec};
use resntk::kernel::{
    frobenius, min_eigenvalue, ntk_infinite_threads, save_matrix_csv, trace_over_d,
};
use resntk::network::{
    save_params_binary, sgd_train, zero_one_error, Architecture, TrainMode,
};
use resntk::search::{
    eigen_nas, ScoreMode, SearchConfig, SearchSpace, SkipConfig, SkipPolicy,
    DEFAULT_SCORE_DRAWS,
};
use resntk::Error;
use serde_json::json;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

const VERSION: &str = env!("CARGO_PKG_VERSION");
const OUTPUT_DIR_ENV: &str = "RESNTK_OUTPUT_DIR";

#[derive(Parser, Debug)]
#[command(name = "resntk", version, about = "Exact NTK computation, spectrum bounds, and train-free architecture search for residual MLPs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Compute the infinite-width NTK on a dataset and report its spectrum summaries.
    Kernel(KernelArgs),
    /// Sweep the minimum NTK eigenvalue over depth for several activations and skip layouts.
    Sweep(SweepArgs),
    /// Evaluate the closed-form spectrum and generalization bounds for one architecture.
    Bounds(BoundsArgs),
    /// Train-free architecture search: sample, score, train the top-k, pick the best.
    Search(SearchArgs),
    /// Measure the empirical-kernel distance to the infinite-width NTK across widths.
    Convergence(ConvergenceArgs),
    /// Train a finite network with constant-step SGD on the logistic margin loss.
    Train(TrainArgs),
}

#[derive(Args, Debug, Clone)]
struct CommonOpts {
    /// Master seed for all randomness in the run.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Gauss-Hermite nodes per axis for kernel expectations.
    #[arg(long, default_value_t = 128)]
    quad_order: usize,
    /// Worker threads for kernel entries (1 = fully sequential).
    #[arg(long, default_value_t = 1)]
    threads: usize,
    /// Output directory (default: $RESNTK_OUTPUT_DIR or the current directory).
    #[arg(long)]
    output_dir: Option<PathBuf>,
}

impl CommonOpts {
    fn resolve_output_dir(&self) -> Result<PathBuf, Error> {
        let dir = match &self.output_dir {
            Some(p) => p.clone(),
            None => std::env::var_os(OUTPUT_DIR_ENV)
                .map(PathBuf::from)
                .unwrap_or_else(|| PathBuf::from(".")),
        };
        fs::create_dir_all(&dir)
            .map_err(|e| Error::Io(format!("cannot create output dir {}: {e}", dir.display())))?;
        Ok(dir)
    }
}

#[derive(Args, Debug, Clone)]
struct ArchOpts {
    /// Comma-separated activation list, one per hidden layer (sigma_1..sigma_{L-1}).
    #[arg(long)]
    act: String,
    /// Network depth L; inferred from --act when omitted, validated against it when given.
    #[arg(long)]
    depth: Option<usize>,
    /// Skip bit-string of length L-2 ('1' adds the previous layer's features); default all '0'.
    #[arg(long)]
    skips: Option<String>,
    /// Negative slope for leakyrelu activations.
    #[arg(long, default_value_t = 0.1)]
    eta: f64,
    /// Hidden width m for finite-width operations.
    #[arg(long, default_value_t = 256)]
    width: usize,
}

impl ArchOpts {
    fn build(&self, input_dim: usize) -> Result<Architecture, Error> {
        let acts: Vec<ActivationKind> = self
            .act
            .split(',')
            .map(|t| ActivationKind::from_tag(t, self.eta))
            .collect::<Result<_, _>>()?;
        let depth = match self.depth {
            Some(l) => {
                if acts.len() != l - 1 {
                    return Err(Error::Input(format!(
                        "--act lists {} activations but --depth {l} needs {}",
                        acts.len(),
                        l - 1
                    )));
                }
                l
            }
            None => acts.len() + 1,
        };
        let skips = match &self.skips {
            Some(bits) => {
                if bits.len() != depth - 2 || !bits.bytes().all(|b| b == b'0' || b == b'1') {
                    return Err(Error::Input(format!(
                        "--skips must be a bit-string of length {}, got '{bits}'",
                        depth - 2
                    )));
                }
                bits.bytes().map(|b| b - b'0').collect()
            }
            None => vec![0u8; depth - 2],
        };
        Architecture::new(depth, self.width, input_dim, acts, skips)
    }

    fn manifest(&self) -> serde_json::Value {
        json!({
            "act": self.act,
            "depth": self.depth,
            "skips": self.skips,
            "eta": self.eta,
            "width": self.width,
        })
    }
}

#[derive(Args, Debug, Clone)]
struct DataOpts {
    /// Number of samples to generate.
    #[arg(long, default_value_t = 512)]
    n: usize,
    /// Input dimension.
    #[arg(long, default_value_t = 16)]
    d: usize,
    /// Input distribution: sphere | gaussian.
    #[arg(long, default_value = "sphere")]
    dist: String,
    /// Label rule: random | teacher.
    #[arg(long, default_value = "teacher")]
    labels: String,
    /// Rejection margin for the linear-teacher label rule.
    #[arg(long, default_value_t = 0.2)]
    margin: f64,
    /// Load a CSV dataset instead of generating one (last column = label).
    #[arg(long)]
    data: Option<PathBuf>,
    /// Skip one header line when loading CSV data.
    #[arg(long, default_value_t = false)]
    header: bool,
}

impl DataOpts {
    fn load(&self, seed: u64) -> Result<Dataset, Error> {
        if let Some(path) = &self.data {
            let file = File::open(path)
                .map_err(|e| Error::Io(format!("cannot open {}: {e}", path.display())))?;
            let (data, report) = load_csv(BufReader::new(file), self.header)?;
            if report.mapped_zero_one_labels {
                eprintln!("note: labels {{0,1}} mapped to {{-1,+1}}");
            }
            if report.max_renorm_delta > 1e-6 {
                eprintln!(
                    "note: rows renormalized to unit length (max delta {:.3e})",
                    report.max_renorm_delta
                );
            }
            return Ok(data);
        }
        let distribution = match self.dist.as_str() {
            "sphere" => Distribution::SphereUniform,
            "gaussian" => Distribution::GaussianNormalized,
            other => return Err(Error::Input(format!("unknown distribution '{other}'"))),
        };
        let label_rule = match self.labels.as_str() {
            "random" => LabelRule::RandomSign,
            "teacher" => LabelRule::LinearTeacher { margin: self.margin },
            other => return Err(Error::Input(format!("unknown label rule '{other}'"))),
        };
        generate(&SynthSpec {
            n: self.n,
            d: self.d,
            distribution,
            label_rule,
            seed,
        })
    }

    fn manifest(&self) -> serde_json::Value {
        json!({
            "n": self.n,
            "d": self.d,
            "dist": self.dist,
            "labels": self.labels,
            "margin": self.margin,
            "data": self.data.as_ref().map(|p| p.display().to_string()),
            "header": self.header,
        })
    }
}

#[derive(Args, Debug)]
struct KernelArgs {
    #[command(flatten)]
    common: CommonOpts,
    #[command(flatten)]
    arch: ArchOpts,
    #[command(flatten)]
    data: DataOpts,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[command(flatten)]
    common: CommonOpts,
    /// Comma-separated activation kinds to sweep.
    #[arg(long, default_value = "relu,leakyrelu,sigmoid,tanh,swish")]
    act: String,
    /// Negative slope for leakyrelu.
    #[arg(long, default_value_t = 0.1)]
    eta: f64,
    /// Comma-separated skip layouts: none | all | first_half | second_half.
    #[arg(long, default_value = "none,all,first_half,second_half")]
    skip_config: String,
    /// Smallest depth (inclusive, >= 3).
    #[arg(long, default_value_t = 3)]
    l_min: usize,
    /// Largest depth (inclusive, <= 12).
    #[arg(long, default_value_t = 10)]
    l_max: usize,
    /// Number of sphere-uniform inputs.
    #[arg(long, default_value_t = 16)]
    n: usize,
    /// Input dimension.
    #[arg(long, default_value_t = 8)]
    d: usize,
}

#[derive(Args, Debug)]
struct BoundsArgs {
    #[command(flatten)]
    common: CommonOpts,
    #[command(flatten)]
    arch: ArchOpts,
    /// Sample count N entering the N/d bound scale.
    #[arg(long, default_value_t = 512)]
    n: usize,
    /// Input dimension d.
    #[arg(long, default_value_t = 16)]
    d: usize,
    /// Confidence level for the generalization bound (must lie in (0, 1/e]).
    #[arg(long, default_value_t = 0.05)]
    delta: f64,
    /// Minimum-eigenvalue estimate enabling the generalization bound.
    #[arg(long)]
    lambda_min: Option<f64>,
    /// Use the alternate (first-layer-refined) diagonal bound for beta3.
    #[arg(long, default_value_t = false)]
    alt_gmax: bool,
}

#[derive(Args, Debug)]
struct SearchArgs {
    #[command(flatten)]
    common: CommonOpts,
    #[command(flatten)]
    data: DataOpts,
    /// Validation sample count (drawn with a shifted seed).
    #[arg(long, default_value_t = 256)]
    n_val: usize,
    /// Depth of every sampled architecture.
    #[arg(long, default_value_t = 4)]
    depth: usize,
    /// Hidden width of every sampled architecture.
    #[arg(long, default_value_t = 64)]
    width: usize,
    /// Comma-separated activation kinds the sampler may use.
    #[arg(long, default_value = "relu,leakyrelu,sigmoid,tanh,swish")]
    act_set: String,
    /// Negative slope for leakyrelu.
    #[arg(long, default_value_t = 0.1)]
    eta: f64,
    /// Number of sampled architectures (M).
    #[arg(long, default_value_t = 30)]
    m: usize,
    /// How many top-scored candidates get trained (k).
    #[arg(long, default_value_t = 5)]
    k: usize,
    /// Scoring metric: trace_diag_empirical | trace_diag_analytic | min_eig_analytic | min_eig_empirical | frobenius_empirical.
    #[arg(long, default_value = "trace_diag_empirical")]
    mode: String,
    /// Training epochs per top-k candidate.
    #[arg(long, default_value_t = 5)]
    epochs: usize,
    /// SGD step size for candidate training.
    #[arg(long, default_value_t = 0.5)]
    gamma: f64,
    /// Weight draws averaged by the empirical trace score.
    #[arg(long, default_value_t = DEFAULT_SCORE_DRAWS)]
    score_draws: usize,
}

#[derive(Args, Debug)]
struct ConvergenceArgs {
    #[command(flatten)]
    common: CommonOpts,
    #[command(flatten)]
    arch: ArchOpts,
    /// Comma-separated widths to measure.
    #[arg(long, default_value = "64,256,1024,4096")]
    widths: String,
    /// Independent weight draws per width.
    #[arg(long, default_value_t = 5)]
    seeds: usize,
    /// Number of sphere-uniform inputs.
    #[arg(long, default_value_t = 16)]
    n: usize,
    /// Input dimension.
    #[arg(long, default_value_t = 8)]
    d: usize,
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[command(flatten)]
    common: CommonOpts,
    #[command(flatten)]
    arch: ArchOpts,
    #[command(flatten)]
    data: DataOpts,
    /// SGD step size (mutually exclusive with --kappa).
    #[arg(long, conflicts_with = "kappa")]
    gamma: Option<f64>,
    /// Step-size scale kappa; gamma is derived from the kernel spectrum.
    #[arg(long)]
    kappa: Option<f64>,
    /// Minimum-eigenvalue estimate used with --kappa and for the risk bound.
    #[arg(long)]
    lambda_min: Option<f64>,
    /// Training mode: algorithm1 (single randomized pass) | practical (multi-epoch).
    #[arg(long, default_value = "practical")]
    mode: String,
    /// Epochs in practical mode.
    #[arg(long, default_value_t = 5)]
    epochs: usize,
    /// Confidence level for the expected-risk bound.
    #[arg(long, default_value_t = 0.05)]
    delta: f64,
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<(), Error> {
    let mut f = BufWriter::new(
        File::create(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?,
    );
    serde_json::to_writer_pretty(&mut f, value)
        .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    f.write_all(b"\n").map_err(|e| Error::Io(e.to_string()))?;
    Ok(())
}

fn write_manifest(
    dir: &Path,
    command: &str,
    common: &CommonOpts,
    config: serde_json::Value,
) -> Result<(), Error> {
    let manifest = json!({
        "command": command,
        "library_version": VERSION,
        "seed": common.seed,
        "quad_order": common.quad_order,
        "threads": common.threads,
        "output_dir": common.resolve_output_dir()?.display().to_string(),
        "config": config,
    });
    write_json(&dir.join("manifest.json"), &manifest)
}

fn cmd_kernel(args: &KernelArgs) -> Result<(), Error> {
    let dir = args.common.resolve_output_dir()?;
    let data = args.data.load(args.common.seed)?;
    let arch = args.arch.build(data.dim())?;
    write_manifest(
        &dir,
        "kernel",
        &args.common,
        json!({ "arch": args.arch.manifest(), "data": args.data.manifest(),
                "arch_encoded": arch.encode() }),
    )?;
    let stack = ntk_infinite_threads(&data.x, &arch, args.common.quad_order, args.common.threads)?;
    let csv_path = dir.join("kernel.csv");
    let mut f = BufWriter::new(
        File::create(&csv_path).map_err(|e| Error::Io(format!("{}: {e}", csv_path.display())))?,
    );
    save_matrix_csv(&mut f, &stack.k)?;
    let lmin = min_eigenvalue(&stack.k)?;
    let summary = json!({
        "arch": arch.encode(),
        "n": data.len(),
        "d": data.dim(),
        "lambda_min": lmin,
        "trace_over_d": trace_over_d(&stack.k, data.dim()),
        "frobenius": frobenius(&stack.k),
    });
    write_json(&dir.join("kernel_summary.json"), &summary)?;
    println!("kernel: N={} lambda_min={lmin:.6e}", data.len());
    Ok(())
}

fn cmd_sweep(args: &SweepArgs) -> Result<(), Error> {
    if args.l_min < 3 || args.l_max > 12 || args.l_min > args.l_max {
        return Err(Error::Input(format!(
            "depth range [{}, {}] must lie within [3, 12]",
            args.l_min, args.l_max
        )));
    }
    let dir = args.common.resolve_output_dir()?;
    let kinds: Vec<ActivationKind> = args
        .act
        .split(',')
        .map(|t| ActivationKind::from_tag(t, args.eta))
        .collect::<Result<_, _>>()?;
    let configs: Vec<SkipConfig> = args
        .skip_config
        .split(',')
        .map(SkipConfig::from_tag)
        .collect::<Result<_, _>>()?;
    write_manifest(
        &dir,
        "sweep",
        &args.common,
        json!({ "act": args.act, "eta": args.eta, "skip_config": args.skip_config,
                "l_min": args.l_min, "l_max": args.l_max, "n": args.n, "d": args.d }),
    )?;
    let data = generate(&SynthSpec {
        n: args.n,
        d: args.d,
        distribution: Distribution::SphereUniform,
        label_rule: LabelRule::RandomSign,
        seed: args.common.seed,
    })?;
    let csv_path = dir.join("sweep.csv");
    let mut f = BufWriter::new(
        File::create(&csv_path).map_err(|e| Error::Io(format!("{}: {e}", csv_path.display())))?,
    );
    writeln!(f, "kind,skip_config,depth,lambda_min").map_err(|e| Error::Io(e.to_string()))?;
    for kind in &kinds {
        for config in &configs {
            for depth in args.l_min..=args.l_max {
                let arch = Architecture::uniform(
                    depth,
                    8,
                    args.d,
                    *kind,
                    config.pattern(depth)?,
                )?;
                let stack = ntk_infinite_threads(
                    &data.x,
                    &arch,
                    args.common.quad_order,
                    args.common.threads,
                )?;
                let lmin = min_eigenvalue(&stack.k)?;
                writeln!(f, "{},{},{depth},{lmin:.17e}", kind.tag(), config.tag())
                    .map_err(|e| Error::Io(e.to_string()))?;
            }
        }
    }
    println!("sweep: wrote {}", csv_path.display());
    Ok(())
}

fn cmd_bounds(args: &BoundsArgs) -> Result<(), Error> {
    let dir = args.common.resolve_output_dir()?;
    let arch = args.arch.build(args.d)?;
    write_manifest(
        &dir,
        "bounds",
        &args.common,
        json!({ "arch": args.arch.manifest(), "n": args.n, "d": args.d,
                "delta": args.delta, "lambda_min": args.lambda_min,
                "alt_gmax": args.alt_gmax, "arch_encoded": arch.encode() }),
    )?;
    let var_arg = if args.alt_gmax { Beta3Variance::Alt } else { Beta3Variance::GMax };
    let report = bound_report(
        &arch,
        args.n,
        args.d,
        args.delta,
        args.lambda_min,
        args.common.quad_order,
        var_arg,
    )?;
    let value = serde_json::to_value(&report).map_err(|e| Error::Io(e.to_string()))?;
    write_json(&dir.join("bounds.json"), &value)?;
    println!(
        "bounds: lower={:.6e} upper={:.6e}{}",
        report.lambda_min_lower,
        report.lambda_min_upper,
        if report.data_gram_vacuous { " (lower bound vacuous at this N/d)" } else { "" }
    );
    Ok(())
}

fn cmd_search(args: &SearchArgs) -> Result<(), Error> {
    let dir = args.common.resolve_output_dir()?;
    // Generate one pool and split it, so train and validation share the
    // same label rule realization (e.g. the same teacher vector).
    let mut pool_opts = args.data.clone();
    pool_opts.n = args.data.n + args.n_val;
    let pool = pool_opts.load(args.common.seed)?;
    if pool.len() < args.data.n + args.n_val {
        return Err(Error::Input("dataset too small for the requested train/val split".into()));
    }
    let n_train = args.data.n;
    let train = Dataset {
        x: pool.x.slice(ndarray::s![..n_train, ..]).to_owned(),
        y: pool.y[..n_train].to_vec(),
    };
    let val = Dataset {
        x: pool.x.slice(ndarray::s![n_train.., ..]).to_owned(),
        y: pool.y[n_train..].to_vec(),
    };
    let kinds: Vec<ActivationKind> = args
        .act_set
        .split(',')
        .map(|t| ActivationKind::from_tag(t, args.eta))
        .collect::<Result<_, _>>()?;
    let mode = ScoreMode::from_tag(&args.mode)?;
    write_manifest(
        &dir,
        "search",
        &args.common,
        json!({ "data": args.data.manifest(), "n_val": args.n_val, "depth": args.depth,
                "width": args.width, "act_set": args.act_set, "eta": args.eta,
                "m": args.m, "k": args.k, "mode": mode.tag(), "epochs": args.epochs,
                "gamma": args.gamma, "score_draws": args.score_draws }),
    )?;
    let space = SearchSpace {
        depth: args.depth,
        width: args.width,
        input_dim: train.dim(),
        allowed_kinds: kinds,
        skip_policy: SkipPolicy::Free,
    };
    let cfg = SearchConfig {
        num_samples: args.m,
        top_k: args.k,
        train_epochs: args.epochs,
        gamma: args.gamma,
        seed: args.common.seed,
        quad_order: args.common.quad_order,
        score_draws: args.score_draws,
    };
    let (best, all) = eigen_nas(&space, &train, &val, mode, &cfg)?;
    let csv_path = dir.join("candidates.csv");
    let mut f = BufWriter::new(
        File::create(&csv_path).map_err(|e| Error::Io(format!("{}: {e}", csv_path.display())))?,
    );
    writeln!(f, "rank,arch,score,score_mode,val_accuracy,failed")
        .map_err(|e| Error::Io(e.to_string()))?;
    for c in &all {
        writeln!(
            f,
            "{},{},{:.17e},{},{},{}",
            c.rank,
            c.encoded,
            c.score,
            c.score_mode,
            c.val_accuracy.map(|v| format!("{v:.6}")).unwrap_or_default(),
            c.failed
        )
        .map_err(|e| Error::Io(e.to_string()))?;
    }
    let value = serde_json::to_value(&best).map_err(|e| Error::Io(e.to_string()))?;
    write_json(&dir.join("best.json"), &value)?;
    println!(
        "search: best {} (rank {}, val accuracy {:.4})",
        best.encoded,
        best.rank,
        best.val_accuracy.unwrap_or(f64::NAN)
    );
    Ok(())
}

fn cmd_convergence(args: &ConvergenceArgs) -> Result<(), Error> {
    use resntk::network::{init, ntk_empirical, InitConvention};
    let dir = args.common.resolve_output_dir()?;
    let arch_probe = args.arch.build(args.d)?;
    let widths: Vec<usize> = args
        .widths
        .split(',')
        .map(|w| {
            w.trim()
                .parse::<usize>()
                .map_err(|e| Error::Input(format!("bad width '{w}': {e}")))
        })
        .collect::<Result<_, _>>()?;
    if widths.is_empty() || args.seeds == 0 {
        return Err(Error::Input("need at least one width and one seed".into()));
    }
    write_manifest(
        &dir,
        "convergence",
        &args.common,
        json!({ "arch": args.arch.manifest(), "widths": widths, "seeds": args.seeds,
                "n": args.n, "d": args.d, "convention": "kernel_matched",
                "arch_encoded": arch_probe.encode() }),
    )?;
    let data = generate(&SynthSpec {
        n: args.n,
        d: args.d,
        distribution: Distribution::SphereUniform,
        label_rule: LabelRule::RandomSign,
        seed: args.common.seed,
    })?;
    let analytic =
        ntk_infinite_threads(&data.x, &arch_probe, args.common.quad_order, args.common.threads)?
            .k;
    let norm = frobenius(&analytic);
    let csv_path = dir.join("convergence.csv");
    let mut f = BufWriter::new(
        File::create(&csv_path).map_err(|e| Error::Io(format!("{}: {e}", csv_path.display())))?,
    );
    writeln!(f, "width,seed,rel_frobenius_error").map_err(|e| Error::Io(e.to_string()))?;
    for &m in &widths {
        let mut arch = arch_probe.clone();
        arch.width = m;
        let mut acc = 0.0;
        for s in 0..args.seeds {
            let params = init(&arch, InitConvention::KernelMatched, args.common.seed + s as u64)?;
            let emp = ntk_empirical(&params, &arch, &data.x)?;
            let rel = frobenius(&(&emp - &analytic)) / norm;
            acc += rel;
            writeln!(f, "{m},{s},{rel:.17e}").map_err(|e| Error::Io(e.to_string()))?;
        }
        writeln!(f, "{m},mean,{:.17e}", acc / args.seeds as f64)
            .map_err(|e| Error::Io(e.to_string()))?;
    }
    println!("convergence: wrote {}", csv_path.display());
    Ok(())
}

fn cmd_train(args: &TrainArgs) -> Result<(), Error> {
    let dir = args.common.resolve_output_dir()?;
    let data = args.data.load(args.common.seed)?;
    let arch = args.arch.build(data.dim())?;
    let mode = match args.mode.as_str() {
        "algorithm1" => TrainMode::Algorithm1,
        "practical" => TrainMode::Practical { epochs: args.epochs },
        other => return Err(Error::Input(format!("unknown training mode '{other}'"))),
    };
    // Resolve the step size: explicit gamma, or kappa via the theoretical
    // formula (needs a spectrum estimate), defaulting to gamma = 0.5.
    let lip = lip_max(&arch);
    let (gamma, gamma_source) = match (args.gamma, args.kappa) {
        (Some(g), _) => (g, "explicit".to_string()),
        (None, Some(kappa)) => {
            let spectrum = match args.lambda_min {
                Some(lmin) => SpectrumInput::LambdaMin(lmin),
                None => {
                    return Err(Error::Input(
                        "--kappa needs --lambda-min to estimate the kernel spectrum".into(),
                    ))
                }
            };
            let g = step_size(spectrum, &data.y, arch.width, kappa, arch.depth, lip)?;
            (g, format!("kappa={kappa}"))
        }
        (None, None) => (0.5, "default".to_string()),
    };
    write_manifest(
        &dir,
        "train",
        &args.common,
        json!({ "arch": args.arch.manifest(), "data": args.data.manifest(),
                "gamma": gamma, "gamma_source": gamma_source, "mode": args.mode,
                "epochs": args.epochs, "delta": args.delta,
                "lambda_min": args.lambda_min, "arch_encoded": arch.encode() }),
    )?;
    let (params, trace) = sgd_train(&arch, &data, gamma, args.common.seed, mode)?;
    let params_path = dir.join("params.bin");
    let mut f = BufWriter::new(
        File::create(&params_path)
            .map_err(|e| Error::Io(format!("{}: {e}", params_path.display())))?,
    );
    save_params_binary(&mut f, &params)?;
    let loss_path = dir.join("loss.csv");
    let mut f = BufWriter::new(
        File::create(&loss_path).map_err(|e| Error::Io(format!("{}: {e}", loss_path.display())))?,
    );
    writeln!(f, "iteration,loss").map_err(|e| Error::Io(e.to_string()))?;
    for (i, l) in trace.iter().enumerate() {
        writeln!(f, "{i},{l:.17e}").map_err(|e| Error::Io(e.to_string()))?;
    }
    let train_error = zero_one_error(&params, &arch, &data)?;
    let risk_bound = match args.lambda_min {
        Some(lmin) if lmin > 0.0 => {
            let (total, t1, t2) =
                generalization_bound(lmin, &data.y, args.delta, arch.depth, lip)?;
            json!({ "total": total, "term1": t1, "term2": t2 })
        }
        _ => serde_json::Value::Null,
    };
    let report = json!({
        "arch": arch.encode(),
        "gamma": gamma,
        "gamma_source": gamma_source,
        "iterations": trace.len(),
        "final_loss": trace.last(),
        "train_error": train_error,
        "risk_bound": risk_bound,
    });
    write_json(&dir.join("train_report.json"), &report)?;
    println!("train: {} iterations, train error {train_error:.4}", trace.len());
    Ok(())
}

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::Input(_) | Error::Io(_) => 2,
        Error::Domain(_) | Error::Numerical(_) => 3,
        Error::Divergence { .. } => 4,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Kernel(a) => cmd_kernel(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Bounds(a) => cmd_bounds(a),
        Command::Search(a) => cmd_search(a),
        Command::Convergence(a) => cmd_convergence(a),
        Command::Train(a) => cmd_train(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}
