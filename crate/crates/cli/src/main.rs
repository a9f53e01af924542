//! `lapdiff` command-line front end.
//!
//! Exit codes: 0 success, 2 invalid input or configuration, 3 numerical
//! failure, 4 I/O error, 130 interrupted.

mod config;
mod failure;

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::{AtomicBool, Ordering};

use clap::{Args, Parser, Subcommand, ValueEnum};

use lapdiff::estimator::{
    plugin_delta, plugin_delta_from_covariances, solve_dtrace, SolverConfig, DeltaEstimate,
};
use lapdiff::experiment::{
    build_scenario, lambda_for, normalize_mean_diagonal, run_sweep_with, write_summary_csv, BaseSpec, DeltaSpec,
    Estimator, Execution, ExperimentConfig, SampleAxis, SigmaSpec, SweepResult,
};
use lapdiff::io::{read_samples_csv, read_symmetric_csv, write_matrix_csv, write_samples_csv};
use lapdiff::linalg::{eig_sym, sqrt_psd};
use lapdiff::matpower::{case_laplacian, parse_case, WeightMode};
use lapdiff::network::{reduce_ground_node, ReductionMode, SignMode, WeightRange};
use lapdiff::rng::derive_seed;
use lapdiff::sampling::{psi_from_covariance, psi_hat, sample_potentials, PotentialSamples};
use lapdiff::SymmetricMatrix;

use config::Settings;
use failure::{Context, Failure};

static INTERRUPTED: AtomicBool = AtomicBool::new(false);

const EXIT_INTERRUPTED: u8 = 130;

#[derive(Parser)]
#[command(name = "lapdiff", version, about = "Estimate sparse changes between two network Laplacians")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic scenario (and optionally samples) as CSV files.
    Gen(GenArgs),
    /// Estimate the difference matrix from two sample or covariance files.
    Estimate(EstimateArgs),
    /// Run a Monte-Carlo sweep and write one CSV row per instance.
    Experiment(ExperimentArgs),
    /// Parse a MATPOWER case and write its Laplacians.
    ParseMatpower(ParseArgs),
}

/// Options shared by scenario generation and sweeps.
#[derive(Args, Default)]
struct ScenarioOpts {
    /// Off-diagonal density of the random base matrix.
    #[arg(long)]
    density: Option<f64>,
    /// Diagonal-dominance margin of the random base matrix.
    #[arg(long)]
    margin: Option<f64>,
    /// Smallest |weight| of a difference edge.
    #[arg(long)]
    w_min: Option<f64>,
    /// Largest |weight| of a difference edge.
    #[arg(long)]
    w_max: Option<f64>,
    /// Sign pattern of difference edges: mixed or positive.
    #[arg(long)]
    sign: Option<String>,
    /// Injection covariance: identity, diagonal:<min>:<max> or dense:<condition>.
    #[arg(long)]
    sigma: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    p: Option<usize>,
    /// Structure of the difference; only `grid` is available.
    #[arg(long)]
    delta: Option<String>,
    /// Also draw this many samples from each system.
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    scenario: ScenarioOpts,
}

#[derive(Args)]
struct EstimateArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Potential samples of system 1 (`# n=.. p=..` CSV).
    #[arg(long, conflicts_with = "cov1")]
    samples1: Option<PathBuf>,
    #[arg(long, conflicts_with = "cov2")]
    samples2: Option<PathBuf>,
    /// Covariance of the potentials of system 1 (needs --n1).
    #[arg(long)]
    cov1: Option<PathBuf>,
    #[arg(long)]
    cov2: Option<PathBuf>,
    #[arg(long)]
    n1: Option<usize>,
    #[arg(long)]
    n2: Option<usize>,
    /// Injection covariance of system 1.
    #[arg(long, conflicts_with = "unknown_sigma")]
    sigma1: Option<PathBuf>,
    #[arg(long, conflicts_with = "unknown_sigma")]
    sigma2: Option<PathBuf>,
    /// Skip whitening; the estimate then targets the difference of the
    /// square roots of the potential precision matrices.
    #[arg(long)]
    unknown_sigma: bool,
    /// dtrace or plugin.
    #[arg(long)]
    estimator: Option<String>,
    /// Explicit ℓ1 weight.
    #[arg(long, conflicts_with = "lambda_scale")]
    lambda: Option<f64>,
    /// c in λ = c·sqrt(log p / n).
    #[arg(long)]
    lambda_scale: Option<f64>,
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Variant {
    Synth,
    Power,
    PluginCompare,
}

#[derive(Args)]
struct ExperimentArgs {
    variant: Variant,
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output CSV (a directory for plugin-compare).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write per-point means to this CSV (a file name inside the
    /// output directory for plugin-compare).
    #[arg(long)]
    summary: Option<PathBuf>,
    /// Comma-separated dimensions.
    #[arg(long)]
    dims: Option<String>,
    /// Single dimension (plugin-compare).
    #[arg(long)]
    p: Option<usize>,
    /// Comma-separated rescaled sample sizes n/(d² log p).
    #[arg(long)]
    ratios: Option<String>,
    /// Comma-separated sample sizes as multiples of p (plugin-compare).
    #[arg(long)]
    multiples: Option<String>,
    /// Comma-separated base densities (plugin-compare).
    #[arg(long)]
    densities: Option<String>,
    #[arg(long)]
    instances: Option<usize>,
    #[arg(long)]
    lambda_scale: Option<f64>,
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
    #[arg(long)]
    tol: Option<f64>,
    /// Support threshold relative to the largest |Δ*| entry.
    #[arg(long)]
    support_epsilon: Option<f64>,
    /// Comma-separated estimators: dtrace, plugin, sqrt.
    #[arg(long)]
    estimators: Option<String>,
    /// MATPOWER case (power variant).
    #[arg(long)]
    case: Option<PathBuf>,
    /// dc or magnitude_y.
    #[arg(long)]
    weight_mode: Option<String>,
    /// Ground bus id; defaults to the case's slack bus.
    #[arg(long)]
    slack: Option<i64>,
    /// Scale the reduced Laplacian to unit mean diagonal.
    #[arg(long)]
    normalize_base: bool,
    /// Record wall-clock time per row (output is then not reproducible).
    #[arg(long)]
    timing: bool,
    /// Run instances one after another.
    #[arg(long)]
    sequential: bool,
    /// 100 instances and larger dimensions.
    #[arg(long)]
    full_scale: bool,
    #[command(flatten)]
    scenario: ScenarioOpts,
}

#[derive(Args)]
struct ParseArgs {
    /// MATPOWER case file.
    #[arg(long)]
    case: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    weight_mode: Option<String>,
    #[arg(long)]
    slack: Option<i64>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Gen(args) => cmd_gen(args),
        Command::Estimate(args) => cmd_estimate(args),
        Command::Experiment(args) => cmd_experiment(args),
        Command::ParseMatpower(args) => cmd_parse_matpower(args),
    };
    match result {
        Ok(code) => code,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.exit_code() as u8)
        }
    }
}

// ---------------------------------------------------------------- helpers

fn require_file(path: &Path, what: &str) -> Result<(), Failure> {
    if path.is_file() {
        Ok(())
    } else {
        Err(Failure::io(format!("{what} {} does not exist", path.display())))
    }
}

fn create_dir(dir: &Path) -> Result<(), Failure> {
    fs::create_dir_all(dir).map_err(|e| Failure::io(format!("cannot create {}: {e}", dir.display())))
}

fn create(path: &Path) -> Result<BufWriter<File>, Failure> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Failure::io(format!("cannot write {}: {e}", path.display())))
}

fn open(path: &Path) -> Result<BufReader<File>, Failure> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Failure::io(format!("cannot read {}: {e}", path.display())))
}

fn write_matrix(path: &Path, m: &SymmetricMatrix) -> Result<(), Failure> {
    let mut w = create(path)?;
    write_matrix_csv(&mut w, m.as_matrix()).context(path.display())?;
    w.flush().map_err(|e| Failure::io(format!("{}: {e}", path.display())))
}

fn write_text(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text).map_err(|e| Failure::io(format!("cannot write {}: {e}", path.display())))
}

fn read_sym(path: &Path) -> Result<SymmetricMatrix, Failure> {
    read_symmetric_csv(open(path)?).context(path.display())
}

fn parse_sigma(text: &str) -> Result<SigmaSpec, Failure> {
    let parts: Vec<&str> = text.split(':').collect();
    let num = |s: &str| {
        s.parse::<f64>()
            .map_err(|_| Failure::validation(format!("sigma: `{s}` is not a number")))
    };
    match parts.as_slice() {
        ["identity"] => Ok(SigmaSpec::Identity),
        ["diagonal", lo, hi] => Ok(SigmaSpec::Diagonal {
            min: num(lo)?,
            max: num(hi)?,
        }),
        ["dense", c] => Ok(SigmaSpec::Dense { condition: num(c)? }),
        _ => Err(Failure::validation(format!(
            "sigma: expected identity, diagonal:<min>:<max> or dense:<condition>, got `{text}`"
        ))),
    }
}

fn parse_sign(text: &str) -> Result<SignMode, Failure> {
    match text {
        "mixed" => Ok(SignMode::Mixed),
        "positive" => Ok(SignMode::Positive),
        _ => Err(Failure::validation(format!("sign: expected mixed or positive, got `{text}`"))),
    }
}

// defaults of the synthetic scenario
const DEFAULT_DENSITY: f64 = 0.003;
const DEFAULT_MARGIN: f64 = 0.7;

struct Scenario {
    density: f64,
    margin: f64,
    delta: DeltaSpec,
    sigma: SigmaSpec,
    seed: u64,
}

fn scenario_settings(opts: ScenarioOpts, s: &Settings) -> Result<Scenario, Failure> {
    let defaults = WeightRange::default();
    let w_min = s.get_or(opts.w_min, "w_min", defaults.min)?;
    let w_max = s.get_or(opts.w_max, "w_max", defaults.max)?;
    let sign = match s.get::<String>(opts.sign, "sign")? {
        Some(t) => parse_sign(&t)?,
        None => SignMode::Mixed,
    };
    let sigma = match s.get::<String>(opts.sigma, "sigma")? {
        Some(t) => parse_sigma(&t)?,
        None => SigmaSpec::Identity,
    };
    Ok(Scenario {
        density: s.get_or(opts.density, "density", DEFAULT_DENSITY)?,
        margin: s.get_or(opts.margin, "margin", DEFAULT_MARGIN)?,
        delta: DeltaSpec {
            weights: WeightRange::new(w_min, w_max)?,
            sign,
        },
        sigma,
        seed: s.get_or(opts.seed, "seed", 0)?,
    })
}

fn parse_weight_mode(text: Option<String>) -> Result<WeightMode, Failure> {
    Ok(match text {
        Some(t) => t.parse::<WeightMode>()?,
        None => WeightMode::Dc,
    })
}

fn bool_str(b: bool) -> &'static str {
    if b {
        "true"
    } else {
        "false"
    }
}

// ---------------------------------------------------------------- gen

fn cmd_gen(args: GenArgs) -> Result<ExitCode, Failure> {
    let s = Settings::load(args.config.as_deref())?;
    let p: usize = s
        .get(args.p, "p")?
        .ok_or_else(|| Failure::validation("missing `p`"))?;
    let delta_kind = s.get_or(args.delta, "delta", "grid".to_string())?;
    let n: Option<usize> = s.get(args.n, "n")?;
    let out: PathBuf = s.get(args.out, "out")?.unwrap_or_else(|| PathBuf::from("."));
    let sc = scenario_settings(args.scenario, &s)?;
    s.reject_unknown()?;

    if delta_kind != "grid" {
        return Err(Failure::validation(format!("delta: only `grid` is supported, got `{delta_kind}`")));
    }
    let k = (p as f64).sqrt().round() as usize;
    if k < 2 || k * k != p {
        return Err(Failure::validation(format!("p: grid difference needs a perfect square, got {p}")));
    }
    if n == Some(0) {
        return Err(Failure::validation("n: must be at least 1"));
    }

    let cfg = ExperimentConfig {
        dims: vec![p],
        base: BaseSpec::Random {
            density: sc.density,
            margin: sc.margin,
        },
        delta: sc.delta,
        sigma: sc.sigma.clone(),
        seed: sc.seed,
        ..Default::default()
    };
    cfg.validate()?;
    let scenario = build_scenario(&cfg, p, 0)?;

    create_dir(&out)?;
    write_matrix(&out.join("b1.csv"), scenario.b1())?;
    write_matrix(&out.join("b2.csv"), scenario.b2())?;
    write_matrix(&out.join("delta_true.csv"), scenario.delta_true())?;
    write_matrix(&out.join("sigma_x1.csv"), scenario.sigma_x1())?;
    write_matrix(&out.join("sigma_x2.csv"), scenario.sigma_x2())?;
    if let Some(n) = n {
        let pairs = [
            ("samples1.csv", scenario.b1(), scenario.sigma_x1(), 1),
            ("samples2.csv", scenario.b2(), scenario.sigma_x2(), 2),
        ];
        for (name, b, sigma, tag) in pairs {
            let samples = sample_potentials(b, sigma, n, derive_seed(&[sc.seed, 0x5A, tag]))?;
            let path = out.join(name);
            let mut w = create(&path)?;
            write_samples_csv(&mut w, &samples).context(path.display())?;
            w.flush().map_err(|e| Failure::io(e.to_string()))?;
        }
    }

    let sigma_text = match sc.sigma {
        SigmaSpec::Identity => "identity".to_string(),
        SigmaSpec::Diagonal { min, max } => format!("diagonal:{min}:{max}"),
        SigmaSpec::Dense { condition } => format!("dense:{condition}"),
    };
    let mut manifest = String::new();
    manifest.push_str(&format!("p = {p}\ndelta = grid\nseed = {}\n", sc.seed));
    manifest.push_str(&format!("density = {}\nmargin = {}\n", sc.density, sc.margin));
    manifest.push_str(&format!(
        "w_min = {}\nw_max = {}\nsign = {}\nsigma = {sigma_text}\n",
        sc.delta.weights.min,
        sc.delta.weights.max,
        match sc.delta.sign {
            SignMode::Mixed => "mixed",
            SignMode::Positive => "positive",
        }
    ));
    if let Some(n) = n {
        manifest.push_str(&format!("n = {n}\n"));
    }
    write_text(&out.join("manifest.txt"), &manifest)?;
    Ok(ExitCode::SUCCESS)
}

// ---------------------------------------------------------------- estimate

enum Inputs {
    Samples(PotentialSamples, PotentialSamples),
    Covariances {
        cov1: SymmetricMatrix,
        cov2: SymmetricMatrix,
        n1: usize,
        n2: usize,
    },
}

impl Inputs {
    fn p(&self) -> usize {
        match self {
            Inputs::Samples(a, _) => a.p(),
            Inputs::Covariances { cov1, .. } => cov1.dim(),
        }
    }

    fn sizes(&self) -> (usize, usize) {
        match self {
            Inputs::Samples(a, b) => (a.n(), b.n()),
            Inputs::Covariances { n1, n2, .. } => (*n1, *n2),
        }
    }
}

fn cmd_estimate(args: EstimateArgs) -> Result<ExitCode, Failure> {
    let s = Settings::load(args.config.as_deref())?;
    let samples1: Option<PathBuf> = s.get(args.samples1, "samples1")?;
    let samples2: Option<PathBuf> = s.get(args.samples2, "samples2")?;
    let cov1: Option<PathBuf> = s.get(args.cov1, "cov1")?;
    let cov2: Option<PathBuf> = s.get(args.cov2, "cov2")?;
    let n1: Option<usize> = s.get(args.n1, "n1")?;
    let n2: Option<usize> = s.get(args.n2, "n2")?;
    let sigma1: Option<PathBuf> = s.get(args.sigma1, "sigma1")?;
    let sigma2: Option<PathBuf> = s.get(args.sigma2, "sigma2")?;
    let unknown_sigma = s.flag(args.unknown_sigma, "unknown_sigma")?;
    let estimator: Estimator = s.get_or(args.estimator, "estimator", "dtrace".to_string())?.parse()?;
    let lambda: Option<f64> = s.get(args.lambda, "lambda")?;
    let lambda_scale: Option<f64> = s.get(args.lambda_scale, "lambda_scale")?;
    let defaults = SolverConfig::default();
    let rho = s.get_or(args.rho, "rho", defaults.rho)?;
    let max_iter = s.get_or(args.max_iter, "max_iter", defaults.max_iter)?;
    let tol = s.get_or(args.tol, "tol", defaults.tol_consensus)?;
    let out: PathBuf = s.get(args.out, "out")?.unwrap_or_else(|| PathBuf::from("."));
    s.reject_unknown()?;

    if lambda.is_some() && lambda_scale.is_some() {
        return Err(Failure::validation("give either `lambda` or `lambda_scale`, not both"));
    }
    if estimator == Estimator::Sqrt {
        return Err(Failure::validation("estimator: use `dtrace` with --unknown-sigma for the square-root variant"));
    }
    if unknown_sigma && (sigma1.is_some() || sigma2.is_some()) {
        return Err(Failure::validation("--unknown-sigma conflicts with sigma1/sigma2"));
    }

    let inputs = match (samples1, samples2, cov1, cov2) {
        (Some(a), Some(b), None, None) => {
            require_file(&a, "samples1")?;
            require_file(&b, "samples2")?;
            let a = read_samples_csv(open(&a)?).context(a.display())?;
            let b = read_samples_csv(open(&b)?).context(b.display())?;
            Inputs::Samples(a, b)
        }
        (None, None, Some(a), Some(b)) => {
            require_file(&a, "cov1")?;
            require_file(&b, "cov2")?;
            let (Some(n1), Some(n2)) = (n1, n2) else {
                return Err(Failure::validation("covariance inputs need n1 and n2"));
            };
            Inputs::Covariances {
                cov1: read_sym(&a)?,
                cov2: read_sym(&b)?,
                n1,
                n2,
            }
        }
        _ => {
            return Err(Failure::validation(
                "give both samples1 and samples2, or both cov1 and cov2",
            ))
        }
    };
    let p = inputs.p();
    let (s1, s2) = if unknown_sigma {
        (SymmetricMatrix::identity(p), SymmetricMatrix::identity(p))
    } else {
        match (sigma1, sigma2) {
            (Some(a), Some(b)) => {
                require_file(&a, "sigma1")?;
                require_file(&b, "sigma2")?;
                (read_sym(&a)?, read_sym(&b)?)
            }
            _ => {
                return Err(Failure::validation(
                    "sigma1 and sigma2 are required unless --unknown-sigma is given",
                ))
            }
        }
    };
    let dims = [
        ("second input", match &inputs {
            Inputs::Samples(_, b) => b.p(),
            Inputs::Covariances { cov2, .. } => cov2.dim(),
        }),
        ("sigma1", s1.dim()),
        ("sigma2", s2.dim()),
    ];
    for (name, d) in dims {
        if d != p {
            return Err(Failure::validation(format!("dimension mismatch: first input has p = {p}, {name} has {d}")));
        }
    }

    let (n1, n2) = inputs.sizes();
    let n = n1.min(n2);
    let lambda = match lambda {
        Some(l) => l,
        None => lambda_for(lambda_scale.unwrap_or(0.5), p, n),
    };
    let solver = SolverConfig {
        lambda,
        rho,
        max_iter,
        tol_consensus: tol,
        ..defaults
    };
    solver.validate()?;

    create_dir(&out)?;
    let mut report = format!(
        "estimator = {}\nwhitening = {}\np = {p}\nn1 = {n1}\nn2 = {n2}\n",
        estimator.tag(),
        if unknown_sigma { "none" } else { "sigma" }
    );

    match estimator {
        Estimator::Dtrace => {
            let (psi1, psi2) = match &inputs {
                Inputs::Samples(a, b) => (psi_hat(a, &s1)?.psi, psi_hat(b, &s2)?.psi),
                Inputs::Covariances { cov1, cov2, n1, n2 } => {
                    (psi_from_covariance(cov1, &s1, *n1)?.psi, psi_from_covariance(cov2, &s2, *n2)?.psi)
                }
            };
            let est: DeltaEstimate = solve_dtrace(&psi1, &psi2, &solver)?;
            write_matrix(&out.join("delta_hat.csv"), &est.delta)?;
            report.push_str(&format!(
                "lambda = {lambda}\nrho = {rho}\niterations = {}\nconverged = {}\nobjective = {}\n",
                est.iterations,
                bool_str(est.converged),
                est.objective
            ));
            write_text(&out.join("report.txt"), &report)?;
            if !est.converged {
                return Err(Failure::numerical(format!(
                    "ADMM did not converge in {} iterations (estimate written anyway)",
                    est.iterations
                )));
            }
        }
        Estimator::Plugin => {
            let delta = match &inputs {
                Inputs::Samples(a, b) => plugin_delta(a, b, &s1, &s2)?,
                Inputs::Covariances { cov1, cov2, n1, n2 } => {
                    if *n1 <= p || *n2 <= p {
                        return Err(lapdiff::Error::PluginUndefined { n: (*n1).min(*n2), p }.into());
                    }
                    let t1 = cov1.congruence(&sqrt_psd(&s1)?)?;
                    let t2 = cov2.congruence(&sqrt_psd(&s2)?)?;
                    plugin_delta_from_covariances(&t1, &t2, &s1, &s2)?
                }
            };
            write_matrix(&out.join("delta_hat.csv"), &delta)?;
            write_text(&out.join("report.txt"), &report)?;
        }
        Estimator::Sqrt => unreachable!("rejected above"),
    }
    Ok(ExitCode::SUCCESS)
}

// ---------------------------------------------------------------- experiment

fn execution(sequential: bool) -> Execution {
    if sequential || cfg!(not(feature = "parallel")) {
        Execution::Sequential
    } else {
        Execution::Parallel
    }
}

fn thread_cap() -> Result<Option<usize>, Failure> {
    match std::env::var("LAPDIFF_THREADS") {
        Err(_) => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(Some(n)),
            _ => Err(Failure::validation(format!("LAPDIFF_THREADS must be a positive integer, got `{v}`"))),
        },
    }
}

#[cfg(feature = "parallel")]
fn with_thread_cap<T: Send>(cap: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T, Failure> {
    match cap {
        None => Ok(f()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Failure::io(format!("cannot start thread pool: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

#[cfg(not(feature = "parallel"))]
fn with_thread_cap<T>(_cap: Option<usize>, f: impl FnOnce() -> T) -> Result<T, Failure> {
    Ok(f())
}

fn write_sweep(result: &SweepResult, out: &Path, summary: Option<&Path>) -> Result<(), Failure> {
    if let Some(parent) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    let mut w = create(out)?;
    result.write_csv(&mut w).context(out.display())?;
    w.flush().map_err(|e| Failure::io(format!("{}: {e}", out.display())))?;
    if let Some(path) = summary {
        let mut w = create(path)?;
        write_summary_csv(&mut w, &result.summarize()).context(path.display())?;
        w.flush().map_err(|e| Failure::io(format!("{}: {e}", path.display())))?;
    }
    Ok(())
}

fn cmd_experiment(args: ExperimentArgs) -> Result<ExitCode, Failure> {
    let s = Settings::load(args.config.as_deref())?;
    let full = s.flag(args.full_scale, "full_scale")?;
    let defaults = SolverConfig::default();
    let solver = SolverConfig {
        rho: s.get_or(args.rho, "rho", defaults.rho)?,
        max_iter: s.get_or(args.max_iter, "max_iter", defaults.max_iter)?,
        tol_consensus: s.get_or(args.tol, "tol", defaults.tol_consensus)?,
        ..defaults
    };
    let instances = s.get_or(args.instances, "instances", if full { 100 } else { 20 })?;
    let lambda_scale = s.get_or(args.lambda_scale, "lambda_scale", 0.5)?;
    let support_epsilon_rel = s.get_or(args.support_epsilon, "support_epsilon", 1e-3)?;
    let record_timing = s.flag(args.timing, "timing")?;
    let sequential = s.flag(args.sequential, "sequential")?;
    let out: Option<PathBuf> = s.get(args.out, "out")?;
    let summary: Option<PathBuf> = s.get(args.summary, "summary")?;
    let sc = scenario_settings(args.scenario, &s)?;
    let estimators: Option<Vec<Estimator>> = s.get_list(args.estimators, "estimators")?;
    let ratios: Option<Vec<f64>> = s.get_list(args.ratios, "ratios")?;

    let base_cfg = ExperimentConfig {
        samples: SampleAxis::Ratios(ratios.clone().unwrap_or_else(|| vec![0.5, 1.0, 2.0, 3.0, 5.0])),
        instances,
        lambda_scale,
        support_epsilon_rel,
        delta: sc.delta,
        sigma: sc.sigma.clone(),
        solver,
        estimators: estimators.clone().unwrap_or_else(|| vec![Estimator::Dtrace]),
        seed: sc.seed,
        record_timing,
        base: BaseSpec::Random {
            density: sc.density,
            margin: sc.margin,
        },
        ..Default::default()
    };

    // (output path, config) pairs to run
    let mut jobs: Vec<(PathBuf, Option<PathBuf>, ExperimentConfig)> = Vec::new();
    match args.variant {
        Variant::Synth => {
            let dims: Vec<usize> = s
                .get_list(args.dims, "dims")?
                .unwrap_or_else(|| if full { vec![64, 144, 256] } else { vec![64] });
            s.reject_unknown()?;
            let out = out.unwrap_or_else(|| PathBuf::from("synth.csv"));
            jobs.push((out, summary, ExperimentConfig { dims, ..base_cfg }));
        }
        Variant::Power => {
            let case: PathBuf = s
                .get(args.case, "case")?
                .ok_or_else(|| Failure::validation("power variant needs `case`"))?;
            let mode = parse_weight_mode(s.get(args.weight_mode, "weight_mode")?)?;
            let slack: Option<i64> = s.get(args.slack, "slack")?;
            let normalize = s.flag(args.normalize_base, "normalize_base")?;
            let ratios = ratios.unwrap_or_else(|| vec![1.0, 3.0, 5.0]);
            s.reject_unknown()?;
            require_file(&case, "case")?;
            let text = fs::read_to_string(&case).map_err(|e| Failure::io(format!("{}: {e}", case.display())))?;
            let parsed = parse_case(&text).context(case.display())?;
            let lap = case_laplacian(&parsed, mode, slack).context(case.display())?;
            let mut b1 = reduce_ground_node(&lap.laplacian, lap.slack_index, ReductionMode::Delete)?;
            if normalize {
                b1 = normalize_mean_diagonal(&b1);
            }
            let out = out.unwrap_or_else(|| PathBuf::from("power.csv"));
            let cfg = ExperimentConfig {
                dims: vec![b1.dim()],
                samples: SampleAxis::Ratios(ratios),
                base: BaseSpec::Fixed(b1),
                instances: s.get_or(args.instances, "instances", if full { 100 } else { 10 })?,
                ..base_cfg
            };
            jobs.push((out, summary, cfg));
        }
        Variant::PluginCompare => {
            let p: usize = s.get_or(args.p, "p", 60)?;
            let densities: Vec<f64> = s.get_list(args.densities, "densities")?.unwrap_or_else(|| vec![0.2, 0.5, 0.8]);
            let multiples: Vec<f64> = s.get_list(args.multiples, "multiples")?.unwrap_or_else(|| vec![0.5, 2.0, 4.0]);
            s.reject_unknown()?;
            if ratios.is_some() {
                return Err(Failure::validation("plugin-compare uses `multiples`, not `ratios`"));
            }
            if densities.is_empty() {
                return Err(Failure::validation("densities: at least one value is required"));
            }
            let dir = out.unwrap_or_else(|| PathBuf::from("plugin_compare"));
            for density in densities {
                let name = format!("plugin_compare_s{density}.csv");
                let summary_path = summary.as_ref().map(|sname| {
                    let stem = sname.file_stem().and_then(|x| x.to_str()).unwrap_or("summary");
                    dir.join(format!("{stem}_s{density}.csv"))
                });
                let cfg = ExperimentConfig {
                    dims: vec![p],
                    samples: SampleAxis::Multiples(multiples.clone()),
                    estimators: estimators.clone().unwrap_or_else(|| vec![Estimator::Dtrace, Estimator::Plugin]),
                    base: BaseSpec::Random {
                        density,
                        margin: sc.margin,
                    },
                    ..base_cfg.clone()
                };
                jobs.push((dir.join(name), summary_path, cfg));
            }
        }
    }
    for (_, _, cfg) in &jobs {
        cfg.validate()?;
    }

    let cap = thread_cap()?;
    let exec = execution(sequential);
    let _ = ctrlc::set_handler(|| INTERRUPTED.store(true, Ordering::SeqCst));
    for (out, summary, cfg) in jobs {
        let result = with_thread_cap(cap, || run_sweep_with(&cfg, exec, Some(&INTERRUPTED)))??;
        write_sweep(&result, &out, summary.as_deref())?;
        if result.cancelled {
            eprintln!("interrupted: wrote {} completed rows to {}", result.rows.len(), out.display());
            return Ok(ExitCode::from(EXIT_INTERRUPTED));
        }
    }
    Ok(ExitCode::SUCCESS)
}

// ---------------------------------------------------------------- parse-matpower

fn cmd_parse_matpower(args: ParseArgs) -> Result<ExitCode, Failure> {
    require_file(&args.case, "case")?;
    let mode = parse_weight_mode(args.weight_mode)?;
    let text = fs::read_to_string(&args.case).map_err(|e| Failure::io(format!("{}: {e}", args.case.display())))?;
    let case = parse_case(&text).context(args.case.display())?;
    let lap = case_laplacian(&case, mode, args.slack).context(args.case.display())?;
    let reduced = reduce_ground_node(&lap.laplacian, lap.slack_index, ReductionMode::Delete)?;
    let min_eig = eig_sym(&reduced)?.min_value();

    create_dir(&args.out)?;
    write_matrix(&args.out.join("laplacian.csv"), &lap.laplacian)?;
    write_matrix(&args.out.join("reduced.csv"), &reduced)?;
    let summary = format!(
        "name = {}\nbuses = {}\nbranches = {}\nin_service_branches = {}\nslack_bus = {}\nslack_index = {}\nconnected = true\nweight_mode = {}\nreduced_dim = {}\nreduced_min_eigenvalue = {min_eig:e}\n",
        case.name,
        case.buses.len(),
        case.branches.len(),
        case.in_service_branches().count(),
        lap.bus_ids[lap.slack_index],
        lap.slack_index,
        match mode {
            WeightMode::Dc => "dc",
            WeightMode::MagnitudeY => "magnitude_y",
        },
        reduced.dim(),
    );
    write_text(&args.out.join("summary.txt"), &summary)?;
    Ok(ExitCode::SUCCESS)
}
