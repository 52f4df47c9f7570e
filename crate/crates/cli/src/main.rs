//! `jointsparse` command-line driver.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use jointsparse::experiments::{
    run_deblurring, run_parallel_mri, run_phase_transition, run_success_analysis, DeblurConfig, Method, MriConfig,
    PhaseConfig, PriorDefaults, SuccessConfig,
};
use jointsparse::io::{read_matrix, read_vector, write_matrix, write_table};
use jointsparse::uq::{conditional_posterior, credible_intervals, sample_posterior};
use jointsparse::{
    least_squares_baseline, run, AlgorithmSpec, Coupling, Error, InnerSolver, LinearMap, MmvProblem, NoiseCovariance,
    SolverConfig,
};
use nalgebra::DMatrix;
use serde_json::json;

#[derive(Parser, Debug)]
#[command(name = "jointsparse", version, about = "Jointly sparse MAP recovery from multiple measurement vectors")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Deblur piecewise-constant signals with a shared edge profile.
    Deblur(DeblurArgs),
    /// Average error and success probability over a sweep of measurement counts.
    Success(SuccessArgs),
    /// Success probability over a grid of sparsity levels and measurement counts.
    Phase(PhaseArgs),
    /// Coil-by-coil parallel MRI of a Shepp-Logan phantom with radial sampling.
    Mri(MriArgs),
    /// Recover user-supplied problems stored as CSV files.
    Solve(SolveArgs),
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// Generalized gamma exponent r of the IAS variants [default: -1]
    #[arg(long, allow_negative_numbers = true)]
    r: Option<f64>,
    /// IAS hyper-prior beta [default: 1]
    #[arg(long)]
    beta: Option<f64>,
    /// IAS hyper-prior vartheta [default: 1e-4 for signals, 1e-3 for mri]
    #[arg(long)]
    vartheta: Option<f64>,
    /// GSBL hyper-prior beta [default: 1]
    #[arg(long)]
    gsbl_beta: Option<f64>,
    /// GSBL hyper-prior vartheta [default: 1e4 for signals, 1e3 for mri]
    #[arg(long)]
    gsbl_vartheta: Option<f64>,
    /// Master random seed
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory
    #[arg(long, default_value = "out")]
    outdir: PathBuf,
    /// Worker threads (0 uses all cores)
    #[arg(long, default_value_t = 0)]
    jobs: usize,
    /// Relative change of x below which the outer iteration stops
    #[arg(long, default_value_t = 1e-4)]
    tol: f64,
    /// Maximum number of outer iterations
    #[arg(long, default_value_t = 200)]
    max_outer: usize,
    /// Inner solver: auto, pcg or direct
    #[arg(long, default_value = "auto")]
    inner_solver: InnerSolver,
}

impl Common {
    fn prior(&self, base: PriorDefaults) -> PriorDefaults {
        PriorDefaults {
            r: self.r.unwrap_or(base.r),
            beta: self.beta.unwrap_or(base.beta),
            vartheta: self.vartheta.unwrap_or(base.vartheta),
            gsbl_beta: self.gsbl_beta.unwrap_or(base.gsbl_beta),
            gsbl_vartheta: self.gsbl_vartheta.unwrap_or(base.gsbl_vartheta),
        }
    }

    fn solver(&self) -> SolverConfig {
        SolverConfig {
            inner_solver: self.inner_solver,
            convergence_tol: self.tol,
            outer_maxit: self.max_outer,
            seed: self.seed,
            ..SolverConfig::default()
        }
    }
}

#[derive(Args, Debug)]
struct DeblurArgs {
    #[command(flatten)]
    common: Common,
    /// Algorithms (comma separated)
    #[arg(long, alias = "algs", value_delimiter = ',', default_value = "ias,gsbl,mmv-ias,mmv-gsbl")]
    algorithm: Vec<AlgorithmSpec>,
    /// Number of signals
    #[arg(long = "L", default_value_t = 4)]
    l: usize,
    /// Noise variance
    #[arg(long, default_value_t = 1e-2)]
    sigma2: f64,
    /// Posterior samples per signal for credible intervals (0 disables)
    #[arg(long, default_value_t = 10_000)]
    samples: usize,
    /// Credible level
    #[arg(long, default_value_t = 0.999)]
    level: f64,
}

#[derive(Args, Debug)]
struct SuccessArgs {
    #[command(flatten)]
    common: Common,
    /// Algorithms (comma separated)
    #[arg(long, alias = "algs", value_delimiter = ',', default_value = "ias,gsbl,mmv-ias,mmv-gsbl")]
    algorithm: Vec<AlgorithmSpec>,
    /// Numbers of signals (comma separated)
    #[arg(long = "L", value_delimiter = ',', default_value = "4,8,16")]
    l: Vec<usize>,
    /// Noise variance
    #[arg(long, default_value_t = 1e-6)]
    sigma2: f64,
    /// Trials per condition
    #[arg(long, default_value_t = 10)]
    trials: usize,
    /// Measurement counts (comma separated)
    #[arg(long, value_delimiter = ',', default_value = "10,20,30,40,50,60,70,80,90,100")]
    m: Vec<usize>,
}

#[derive(Args, Debug)]
struct PhaseArgs {
    #[command(flatten)]
    common: Common,
    /// Algorithms (comma separated)
    #[arg(long, alias = "algs", value_delimiter = ',', default_value = "ias,mmv-ias")]
    algorithm: Vec<AlgorithmSpec>,
    /// Number of signals
    #[arg(long = "L", default_value_t = 4)]
    l: usize,
    /// Noise variance
    #[arg(long, default_value_t = 1e-6)]
    sigma2: f64,
    /// Trials per cell
    #[arg(long, default_value_t = 10)]
    trials: usize,
    /// Grid stride on both axes
    #[arg(long, default_value_t = 5)]
    stride: usize,
    /// Use every (s, M) pair instead of the strided grid
    #[arg(long)]
    full_scale: bool,
}

#[derive(Args, Debug)]
struct MriArgs {
    #[command(flatten)]
    common: Common,
    /// Methods (comma separated; ls adds the least-squares baseline)
    #[arg(long, alias = "algs", value_delimiter = ',', default_value = "ls,ias,gsbl,mmv-ias,mmv-gsbl")]
    algorithm: Vec<Method>,
    /// Number of coils
    #[arg(long = "L", default_value_t = 4)]
    l: usize,
    /// Radial line counts per coil (comma separated)
    #[arg(long, value_delimiter = ',', default_value = "4,8,12,16,20")]
    lines: Vec<usize>,
    /// Noise variance per real component
    #[arg(long, default_value_t = 1e-3)]
    sigma2: f64,
    /// Reconstruct on a 256x256 grid instead of 64x64
    #[arg(long)]
    full_scale: bool,
}

#[derive(Args, Debug)]
struct SolveArgs {
    #[command(flatten)]
    common: Common,
    /// Algorithm: ias, gsbl, mmv-ias, mmv-gsbl or ls
    #[arg(long, default_value = "mmv-ias")]
    algorithm: Method,
    /// Forward operator CSV, one per measurement vector
    #[arg(long = "forward", required = true)]
    forward: Vec<PathBuf>,
    /// Measurement vector CSV, one per forward operator
    #[arg(long = "data", required = true)]
    data: Vec<PathBuf>,
    /// Sparsifying operator CSV
    #[arg(long)]
    sparsifier: Option<PathBuf>,
    /// Noise covariance CSV, one per measurement vector
    #[arg(long = "noise-cov")]
    noise_cov: Vec<PathBuf>,
    /// Isotropic noise variance applied to every measurement vector
    #[arg(long)]
    sigma2: Option<f64>,
    /// Sample the conditional posterior and write credible intervals
    #[arg(long)]
    uq: bool,
    /// Posterior samples per signal
    #[arg(long, default_value_t = 1000)]
    samples: usize,
    /// Credible level
    #[arg(long, default_value_t = 0.999)]
    level: f64,
}

enum Failure {
    Validation(String),
    Runtime(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::DimensionMismatch(_)
            | Error::InvalidHyperParameter(_)
            | Error::InvalidSolverConfig(_)
            | Error::IndexOutOfRange { .. }
            | Error::InvalidEta { .. }
            | Error::InvalidShape(_)
            | Error::Parse(_)
            | Error::Csv(_)
            | Error::NotApplicable(_) => Failure::Validation(e.to_string()),
            _ => Failure::Runtime(e.to_string()),
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Validation(msg)) => {
            eprintln!("error: {}", msg.replace('\n', " "));
            ExitCode::from(3)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {}", msg.replace('\n', " "));
            ExitCode::from(1)
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), Failure> {
    let common = match &cli.command {
        Command::Deblur(a) => &a.common,
        Command::Success(a) => &a.common,
        Command::Phase(a) => &a.common,
        Command::Mri(a) => &a.common,
        Command::Solve(a) => &a.common,
    };
    common.solver().validate()?;
    if common.jobs > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(common.jobs)
            .build_global()
            .map_err(|e| Failure::Runtime(e.to_string()))?;
    }
    match cli.command {
        Command::Deblur(a) => deblur(a),
        Command::Success(a) => success(a),
        Command::Phase(a) => phase(a),
        Command::Mri(a) => mri(a),
        Command::Solve(a) => solve(a),
    }
}

/// Rejects hyper-parameters that cannot be used with `l` signals before any work starts.
fn precheck(prior: &PriorDefaults, algorithms: &[AlgorithmSpec], l: usize) -> Result<(), Failure> {
    for &spec in algorithms {
        let hyper = prior.hyper(spec, 1)?;
        hyper.check_for(hyper.pooled_count(l))?;
    }
    Ok(())
}

fn bayes_specs(methods: &[Method]) -> Vec<AlgorithmSpec> {
    methods
        .iter()
        .filter_map(|m| match m {
            Method::Bayes(s) => Some(*s),
            Method::LeastSquares => None,
        })
        .collect()
}

fn prepare_outdir(dir: &Path) -> Result<(), Failure> {
    fs::create_dir_all(dir).map_err(|e| Failure::Runtime(format!("cannot create {}: {e}", dir.display())))
}

fn write_manifest(dir: &Path, command: &str, seed: u64, config: serde_json::Value) -> Result<(), Failure> {
    let manifest = json!({
        "command": command,
        "version": env!("CARGO_PKG_VERSION"),
        "seed": seed,
        "config": config,
    });
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| Failure::Runtime(e.to_string()))? + "\n";
    fs::write(dir.join("manifest.json"), text).map_err(|e| Failure::Runtime(e.to_string()))
}

fn to_json<T: serde::Serialize>(v: &T) -> Result<serde_json::Value, Failure> {
    serde_json::to_value(v).map_err(|e| Failure::Runtime(e.to_string()))
}

fn deblur(a: DeblurArgs) -> Result<(), Failure> {
    let cfg = DeblurConfig {
        l: a.l,
        sigma2: a.sigma2,
        seed: a.common.seed,
        prior: a.common.prior(PriorDefaults::signals()),
        solver: a.common.solver(),
        algorithms: a.algorithm.clone(),
        uq_samples: a.samples,
        level: a.level,
        ..DeblurConfig::default()
    };
    precheck(&cfg.prior, &cfg.algorithms, cfg.l)?;
    prepare_outdir(&a.common.outdir)?;
    let report = run_deblurring(&cfg)?;
    report.write_csv(&a.common.outdir)?;
    for r in &report.recoveries {
        let mean = r.errors.iter().sum::<f64>() / r.errors.len() as f64;
        println!("{:<9} mean relative error {mean:.4e} ({} iterations)", r.algorithm.name(), r.iterations);
    }
    write_manifest(&a.common.outdir, "deblur", cfg.seed, to_json(&cfg)?)
}

fn success(a: SuccessArgs) -> Result<(), Failure> {
    let cfg = SuccessConfig {
        trials: a.trials,
        sigma2: a.sigma2,
        m_grid: a.m.clone(),
        l_values: a.l.clone(),
        algorithms: a.algorithm.clone(),
        seed: a.common.seed,
        prior: a.common.prior(PriorDefaults::signals()),
        solver: a.common.solver(),
        ..SuccessConfig::default()
    };
    for &l in &cfg.l_values {
        precheck(&cfg.prior, &cfg.algorithms, l)?;
    }
    prepare_outdir(&a.common.outdir)?;
    let report = run_success_analysis(&cfg)?;
    report.write_csv(&a.common.outdir)?;
    for &l in &cfg.l_values {
        for &spec in &cfg.algorithms {
            match report.min_m_full_success(spec, l) {
                Some(m) => println!("L = {l:<3} {:<9} ESP = 1 from M = {m}", spec.name()),
                None => println!("L = {l:<3} {:<9} ESP < 1 on the whole grid", spec.name()),
            }
        }
    }
    write_manifest(&a.common.outdir, "success", cfg.seed, to_json(&cfg)?)
}

fn phase(a: PhaseArgs) -> Result<(), Failure> {
    let cfg = PhaseConfig {
        stride: if a.full_scale { 1 } else { a.stride },
        trials: a.trials,
        l: a.l,
        sigma2: a.sigma2,
        algorithms: a.algorithm.clone(),
        seed: a.common.seed,
        prior: a.common.prior(PriorDefaults::signals()),
        solver: a.common.solver(),
        ..PhaseConfig::default()
    };
    if cfg.stride == 0 {
        return Err(Failure::Validation("grid stride must be at least 1".into()));
    }
    precheck(&cfg.prior, &cfg.algorithms, cfg.l)?;
    prepare_outdir(&a.common.outdir)?;
    let report = run_phase_transition(&cfg)?;
    report.write_csv(&a.common.outdir)?;
    println!("{} cells written", report.cells.len());
    write_manifest(&a.common.outdir, "phase", cfg.seed, to_json(&cfg)?)
}

fn mri(a: MriArgs) -> Result<(), Failure> {
    let base = if a.full_scale { MriConfig::full_scale() } else { MriConfig::default() };
    let cfg = MriConfig {
        coils: a.l,
        lines: a.lines.clone(),
        sigma2: a.sigma2,
        seed: a.common.seed,
        prior: a.common.prior(PriorDefaults::imaging()),
        solver: a.common.solver(),
        methods: a.algorithm.clone(),
        ..base
    };
    precheck(&cfg.prior, &bayes_specs(&cfg.methods), cfg.coils)?;
    prepare_outdir(&a.common.outdir)?;
    let report = run_parallel_mri(&cfg)?;
    report.write_csv(&a.common.outdir)?;
    for r in &report.rows {
        println!("{:<9} {:>3} lines  relative error {:.4e}", r.method.name(), r.lines, r.rel_error);
    }
    write_manifest(&a.common.outdir, "mri", cfg.seed, to_json(&cfg)?)
}

fn require_file(p: &Path) -> Result<(), Failure> {
    if p.is_file() {
        Ok(())
    } else {
        Err(Failure::Validation(format!("input file {} does not exist", p.display())))
    }
}

fn solve(a: SolveArgs) -> Result<(), Failure> {
    let sparsifier = a
        .sparsifier
        .as_ref()
        .ok_or_else(|| Failure::Validation("a sparsifying operator (--sparsifier) is required".into()))?;
    for p in a.forward.iter().chain(&a.data).chain(&a.noise_cov).chain(std::iter::once(sparsifier)) {
        require_file(p)?;
    }
    if a.forward.len() != a.data.len() {
        return Err(Failure::Validation(format!("{} forward operators but {} measurement vectors", a.forward.len(), a.data.len())));
    }
    if !a.noise_cov.is_empty() && a.sigma2.is_some() {
        return Err(Failure::Validation("--noise-cov and --sigma2 are mutually exclusive".into()));
    }
    let forward = a.forward.iter().map(|p| read_matrix(p).map(LinearMap::Dense)).collect::<Result<Vec<_>, _>>()?;
    let data = a.data.iter().map(read_vector).collect::<Result<Vec<_>, _>>()?;
    let r = LinearMap::Dense(read_matrix(sparsifier)?);
    let l = forward.len();
    let mut problem = MmvProblem::new(forward, data, r.clone());
    if !a.noise_cov.is_empty() {
        let covs = a.noise_cov.iter().map(|p| read_matrix(p).map(NoiseCovariance::Full)).collect::<Result<Vec<_>, _>>()?;
        problem = problem.with_noise(covs);
    } else if let Some(s2) = a.sigma2 {
        problem = problem.with_noise(vec![NoiseCovariance::Isotropic(s2); l]);
    }
    problem.check_dimensions()?;
    let prior = a.common.prior(PriorDefaults::signals());
    let solver = a.common.solver();
    let out = &a.common.outdir;

    match a.algorithm {
        Method::LeastSquares => {
            let x = least_squares_baseline(&problem, &solver)?;
            prepare_outdir(out)?;
            write_matrix(out.join("x_hat.csv"), &DMatrix::from_columns(&x))?;
        }
        Method::Bayes(spec) => {
            let hyper = prior.hyper(spec, problem.sparse_dim())?;
            jointsparse::validate(&problem, &hyper)?;
            let res = run(&problem, &hyper, &solver)?;
            prepare_outdir(out)?;
            write_matrix(out.join("x_hat.csv"), &DMatrix::from_columns(&res.x_hat))?;
            write_matrix(out.join("theta_hat.csv"), &DMatrix::from_columns(&res.theta_hat))?;
            let mut rows = Vec::new();
            for (run_idx, trace) in res.objective_trace.iter().enumerate() {
                for (it, g) in trace.iter().enumerate() {
                    rows.push(vec![(run_idx + 1).to_string(), (it + 1).to_string(), g.to_string()]);
                }
            }
            write_table(out.join("objective.csv"), &["run", "iteration", "objective"], &rows)?;
            println!("{}: {} iterations, converged = {}", spec.name(), res.iterations, res.converged);

            if a.uq {
                let white = problem.whitened()?;
                for i in 0..l {
                    let theta = match spec.coupling {
                        Coupling::Joint => &res.theta_hat[0],
                        Coupling::Separate => &res.theta_hat[i],
                    };
                    let post = conditional_posterior(&white.forward_ops[i], &white.measurements[i], &r, theta, spec.variant)?;
                    let samples = sample_posterior(&post, a.samples, jointsparse::experiments::derive_seed(a.common.seed, &[i as u64]))?;
                    let ci = credible_intervals(&samples, a.level)?;
                    write_matrix(out.join(format!("samples_{}.csv", i + 1)), &samples)?;
                    let rows: Vec<Vec<String>> = ci
                        .iter()
                        .enumerate()
                        .map(|(k, (lo, hi))| vec![(k + 1).to_string(), post.mean[k].to_string(), lo.to_string(), hi.to_string()])
                        .collect();
                    write_table(out.join(format!("intervals_{}.csv", i + 1)), &["index", "mean", "lo", "hi"], &rows)?;
                }
            }
        }
    }
    write_manifest(
        out,
        "solve",
        a.common.seed,
        json!({
            "algorithm": a.algorithm.name(),
            "forward": a.forward,
            "data": a.data,
            "sparsifier": sparsifier,
            "noise_cov": a.noise_cov,
            "sigma2": a.sigma2,
            "prior": to_json(&prior)?,
            "solver": to_json(&solver)?,
            "uq": a.uq,
            "samples": a.samples,
            "level": a.level,
        }),
    )
}
