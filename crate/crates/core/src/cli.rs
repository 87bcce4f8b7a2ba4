//! Command-line front end.
//!
//! Exit codes: 0 success, 1 a verification check failed, 2 invalid flags or
//! configuration, 3 model, numerical or I/O failure, 4 an estimate was
//! written but its solver reported non-convergence. Data goes to stdout,
//! diagnostics to stderr.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::{DMatrix, DVector};

use crate::error::Error;
use crate::estimators::{self, EstimateResult, Method, SolverOptions};
use crate::experiments::{self, Experiment, ExperimentConfig, GridSpec};
use crate::fmt17;
use crate::kernel::{assemble_s_eta, tc_kernel, AtomicDictionary, KernelMatrix};
use crate::lti::{self, SignalKind, SignalSpec, TransferFunction};
use crate::regression::{build_phi, Dataset};
use crate::rng::sub_seed;
use crate::tuning::{self, MarginalModel, TuneConfig};
use crate::verify::{self, Check, VerifyOptions};

pub const EXIT_VERIFY_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_MODEL: i32 = 3;
pub const EXIT_NOT_CONVERGED: i32 = 4;

/// Environment variable consulted for the master seed when no flag or
/// config entry sets it.
pub const SEED_ENV: &str = "REGKIT_SEED";

#[derive(Debug, Parser)]
#[command(name = "regkit", version, about = "Kernel-based regularized and robust FIR identification")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate an input/output record and write `t,u,v,y` CSV.
    Simulate(SimulateArgs),
    /// Estimate an impulse response from a recorded dataset.
    Identify(IdentifyArgs),
    /// Tune kernel hyperparameters by (regularized) empirical Bayes.
    Tune(TuneArgs),
    /// Run a Monte Carlo experiment.
    Mc(McArgs),
    /// Run the built-in property checks.
    Verify(VerifyArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Named benchmark (bench2, bench4); overridden by --num/--den.
    #[arg(long, default_value = "bench2")]
    pub system: String,
    /// Numerator coefficients in powers of z⁻¹, comma separated.
    #[arg(long, value_delimiter = ',', requires = "den")]
    pub num: Option<Vec<f64>>,
    /// Denominator coefficients in powers of z⁻¹, comma separated.
    #[arg(long, value_delimiter = ',', requires = "num")]
    pub den: Option<Vec<f64>>,
    #[arg(long, default_value = "prbs")]
    pub input: SignalKind,
    #[arg(long, default_value_t = 127)]
    pub n: usize,
    /// Input amplitude (PRBS level or Gaussian standard deviation).
    #[arg(long, default_value_t = 1.0)]
    pub scale: f64,
    /// Standard deviation of the input measurement disturbance.
    #[arg(long, default_value_t = 0.0)]
    pub sigma_d: f64,
    /// Output noise variance.
    #[arg(long, default_value_t = 0.0)]
    pub sigma2: f64,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum KernelChoice {
    /// TC kernel `c·α^max(i,j)`.
    Tc,
    /// Atomic multi-kernel `S_η` tuned by empirical Bayes.
    Atomic,
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// Dataset CSV with columns t, y and the input column.
    #[arg(long)]
    pub data: PathBuf,
    /// FIR order.
    #[arg(long)]
    pub n_g: usize,
    /// Column used as the regressor input (`v` is the measured input).
    #[arg(long, default_value = "v")]
    pub input_column: String,
}

#[derive(Debug, Args)]
pub struct GridArgs {
    #[arg(long, default_value_t = 16)]
    pub grid_angles: usize,
    #[arg(long, default_value_t = 15)]
    pub grid_radii: usize,
    #[arg(long, default_value_t = 0.8)]
    pub grid_r_min: f64,
    #[arg(long, default_value_t = 1.0)]
    pub grid_r_max: f64,
    #[arg(long, default_value_t = 1e6)]
    pub grid_base: f64,
}

impl GridArgs {
    fn spec(&self) -> GridSpec {
        GridSpec {
            n_angles: self.grid_angles,
            n_radii: self.grid_radii,
            r_min: self.grid_r_min,
            r_max: self.grid_r_max,
            base: self.grid_base,
        }
    }
}

#[derive(Debug, Args)]
pub struct IdentifyArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub method: Method,
    /// Regularization weight (RegLS family), or rate of the sparsity prior (REB).
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Uncertainty radius, or `from-lambda` to use the radius equivalent to RegLS at --lambda.
    #[arg(long)]
    pub rho: Option<String>,
    #[arg(long, value_enum, default_value = "tc")]
    pub kernel: KernelChoice,
    /// TC scale.
    #[arg(long, default_value_t = 1.0)]
    pub tc_c: f64,
    /// TC decay; chosen by marginal likelihood when omitted.
    #[arg(long)]
    pub tc_alpha: Option<f64>,
    /// ℓ₁ weight for the atomic baseline.
    #[arg(long)]
    pub weight: Option<f64>,
    /// Noise variance; estimated from least-squares residuals when omitted.
    #[arg(long)]
    pub sigma2: Option<f64>,
    #[arg(long, default_value_t = 5)]
    pub mm_iters: usize,
    /// Iteration cap for the iterative solvers.
    #[arg(long)]
    pub max_iters: Option<usize>,
    #[command(flatten)]
    pub grid: GridArgs,
    /// Result record (JSON); stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Impulse response as `k,g` CSV.
    #[arg(long)]
    pub g_out: Option<PathBuf>,
    /// Objective trace of the hyperparameter search (eb, reb).
    #[arg(long)]
    pub trace_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TuneArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, value_enum, default_value = "atomic")]
    pub kernel: KernelChoice,
    /// Rate of the exponential sparsity prior; 0 gives plain empirical Bayes.
    #[arg(long, default_value_t = 0.0)]
    pub lambda: f64,
    #[arg(long)]
    pub sigma2: Option<f64>,
    #[arg(long, default_value_t = 5)]
    pub mm_iters: usize,
    #[command(flatten)]
    pub grid: GridArgs,
    /// Objective trace CSV; stdout when omitted.
    #[arg(long)]
    pub trace_out: Option<PathBuf>,
    /// Tuned hyperparameters as `index,eta` CSV (atomic) or `c,alpha,nll` (tc).
    #[arg(long)]
    pub params_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct McArgs {
    #[arg(long)]
    pub experiment: Option<Experiment>,
    #[arg(long)]
    pub runs: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub workers: Option<usize>,
    /// Config file of `key = value` lines; `[section]` headers prefix keys.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Extra `key=value` override, applied after the config file.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    /// Print the resolved configuration and exit.
    #[arg(long)]
    pub echo: bool,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Checks to run (comma separated); all when omitted.
    #[arg(long, value_delimiter = ',')]
    pub check: Vec<Check>,
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long, default_value_t = 2024)]
    pub seed: u64,
    /// Perturb every check so it must fail; exercises the harness.
    #[arg(long)]
    pub inject_failure: bool,
}

/// Failure carrying its exit code.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn usage(message: impl Into<String>) -> Self {
        Self { code: EXIT_USAGE, message: message.into() }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        Self { code: EXIT_MODEL, message: e.to_string() }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

/// Parse `args` (including the program name) and run; returns the exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let _ = if code == 0 { write!(stdout, "{e}") } else { write!(stderr, "{e}") };
            return code;
        }
    };
    let env_seed = std::env::var(SEED_ENV).ok();
    match dispatch(cli.command, env_seed.as_deref(), stdout, stderr) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(stderr, "error: {}", e.message);
            e.code
        }
    }
}

fn dispatch(cmd: Command, env_seed: Option<&str>, out: &mut dyn Write, err: &mut dyn Write) -> CliResult<i32> {
    match cmd {
        Command::Simulate(a) => cmd_simulate(&a, env_seed, out),
        Command::Identify(a) => cmd_identify(&a, out, err),
        Command::Tune(a) => cmd_tune(&a, out),
        Command::Mc(a) => cmd_mc(&a, env_seed, out, err),
        Command::Verify(a) => cmd_verify(&a, out),
    }
}

fn parse_env_seed(env_seed: Option<&str>) -> CliResult<Option<u64>> {
    env_seed
        .map(|s| s.trim().parse().map_err(|e| CliError::usage(format!("{SEED_ENV}: {e}"))))
        .transpose()
}

fn create(path: &Path) -> CliResult<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError { code: EXIT_MODEL, message: format!("cannot write {}: {e}", path.display()) })
}

fn io<T>(r: std::io::Result<T>) -> CliResult<T> {
    r.map_err(|e| Error::from(e).into())
}

fn cmd_simulate(a: &SimulateArgs, env_seed: Option<&str>, out: &mut dyn Write) -> CliResult<i32> {
    let seed = a.seed.or(parse_env_seed(env_seed)?).unwrap_or(0);
    if a.n == 0 {
        return Err(CliError::usage("--n must be at least 1"));
    }
    let tf = match (&a.num, &a.den) {
        (Some(n), Some(d)) => TransferFunction::new(n.clone(), d.clone())?,
        _ => TransferFunction::named(&a.system).ok_or_else(|| CliError::usage(format!("unknown system `{}`", a.system)))?,
    };
    let spec = SignalSpec { kind: a.input, length: a.n, scale: a.scale, seed: sub_seed(seed, 0, experiments::PURPOSE_INPUT) };
    spec.validate().map_err(|e| CliError::usage(e.to_string()))?;
    let u = lti::generate_signal(&spec);
    // a response as long as the record makes the FIR simulation exact from rest
    let g = lti::impulse_response(&tf, a.n)?;
    let (v, _) = lti::disturb(&u, a.sigma_d, sub_seed(seed, 0, experiments::PURPOSE_DISTURBANCE)).map_err(|e| CliError::usage(e.to_string()))?;
    let clean = lti::simulate(g.as_vector().as_slice(), &u);
    let y = lti::add_noise(&clean, a.sigma2, sub_seed(seed, 0, experiments::PURPOSE_NOISE)).map_err(|e| CliError::usage(e.to_string()))?;
    let mut w = create(&a.out)?;
    io(writeln!(w, "t,u,v,y"))?;
    for t in 0..a.n {
        io(writeln!(w, "{t},{},{},{}", fmt17(u[t]), fmt17(v[t]), fmt17(y[t])))?;
    }
    io(w.flush())?;
    io(writeln!(out, "wrote {} samples to {}", a.n, a.out.display()))?;
    Ok(0)
}

struct Loaded {
    phi: DMatrix<f64>,
    y: DVector<f64>,
}

fn load(a: &DataArgs) -> CliResult<Loaded> {
    if a.n_g == 0 {
        return Err(CliError::usage("--n-g must be at least 1"));
    }
    let data = Dataset::load_csv(&a.data, &a.input_column, a.n_g)?;
    Ok(Loaded { phi: build_phi(data.u(), a.n_g)?.into_matrix(), y: data.y_vector() })
}

fn need(v: Option<f64>, flag: &str, method: Method) -> CliResult<f64> {
    v.ok_or_else(|| CliError::usage(format!("{flag} is required for --method {}", method.key())))
}

fn noise_var(l: &Loaded, given: Option<f64>) -> CliResult<f64> {
    match given {
        Some(s) if s > 0.0 => Ok(s),
        Some(s) => Err(CliError::usage(format!("--sigma2 must be positive, got {s}"))),
        None => Ok(experiments::residual_noise_var(&l.phi, &l.y)?),
    }
}

/// The kernel for the kernel-based methods, plus a trace when it was tuned.
fn resolve_kernel(a: &IdentifyArgs, l: &Loaded) -> CliResult<(KernelMatrix, Option<tuning::TuneResult>)> {
    match a.kernel {
        KernelChoice::Tc => {
            let alpha = match a.tc_alpha {
                Some(al) => al,
                None => {
                    let s2 = noise_var(l, a.sigma2)?;
                    tuning::tc_grid_search(&l.phi, &l.y, s2, &[a.tc_c], &tuning::linspace(0.5, 0.99, 13))?.alpha
                }
            };
            Ok((tc_kernel(a.tc_c, alpha, a.data.n_g)?, None))
        }
        KernelChoice::Atomic => {
            let dict = a.grid.spec().build(a.data.n_g)?;
            let s2 = noise_var(l, a.sigma2)?;
            let model = MarginalModel::new(&l.phi, &l.y, &dict, s2)?;
            let res = tuning::eb_solve(&model, &TuneConfig { mm_iters: a.mm_iters, ..TuneConfig::default() })?;
            Ok((KernelMatrix::psd(assemble_s_eta(&dict, &res.eta)?)?, Some(res)))
        }
    }
}

fn resolve_rho(a: &IdentifyArgs, l: &Loaded, k: Option<&KernelMatrix>) -> CliResult<f64> {
    let m = a.method;
    let raw = a.rho.as_deref().ok_or_else(|| CliError::usage(format!("--rho is required for --method {}", m.key())))?;
    if raw == "from-lambda" {
        let k = k.ok_or_else(|| CliError::usage(format!("--rho from-lambda needs a kernel method, not {}", m.key())))?;
        let lambda = need(a.lambda, "--lambda", m)?;
        let g = estimators::regls(&l.phi, &l.y, k, lambda)?;
        return Ok(estimators::rho_from_lambda(g.g.as_vector(), &l.phi, &l.y, k, lambda)?);
    }
    match raw.parse::<f64>() {
        Ok(r) if r >= 0.0 && r.is_finite() => Ok(r),
        _ => Err(CliError::usage(format!("--rho must be a nonnegative number or `from-lambda`, got `{raw}`"))),
    }
}

fn with_cap(mut o: SolverOptions, cap: Option<usize>) -> SolverOptions {
    if let Some(c) = cap {
        o.max_iters = c;
    }
    o
}

fn identify(a: &IdentifyArgs, l: &Loaded) -> CliResult<(EstimateResult, Option<tuning::TuneResult>)> {
    let m = a.method;
    let (phi, y) = (&l.phi, &l.y);
    let needs_kernel = matches!(m, Method::RegLs | Method::Krls | Method::RRegLs | Method::SrRegLs | Method::KrRegLs);
    let (kernel, trace) = if needs_kernel { resolve_kernel(a, l).map(|(k, t)| (Some(k), t))? } else { (None, None) };
    let k = kernel.as_ref();
    let res = match m {
        Method::Ls => estimators::ls(phi, y)?,
        Method::RegLs => estimators::regls(phi, y, k.expect("kernel"), need(a.lambda, "--lambda", m)?)?,
        Method::Rls => estimators::rls(phi, y, resolve_rho(a, l, None)?, &with_cap(SolverOptions::fixed_point(), a.max_iters))?,
        Method::Srls => estimators::srls(phi, y, resolve_rho(a, l, None)?, &with_cap(SolverOptions::subgradient(), a.max_iters))?,
        Method::Krls => estimators::krls(phi, y, k.expect("kernel"), resolve_rho(a, l, k)?, &with_cap(SolverOptions::fixed_point(), a.max_iters))?,
        Method::RRegLs | Method::KrRegLs | Method::SrRegLs => {
            let kk = k.expect("kernel");
            let rho = resolve_rho(a, l, k)?;
            let lambda = need(a.lambda, "--lambda", m)?;
            match m {
                Method::RRegLs => estimators::rregls(phi, y, kk, rho, lambda, &with_cap(SolverOptions::majorization(), a.max_iters))?,
                Method::KrRegLs => estimators::krregls(phi, y, kk, rho, lambda, &with_cap(SolverOptions::majorization(), a.max_iters))?,
                _ => estimators::srregls(phi, y, kk, rho, lambda, &with_cap(SolverOptions::subgradient(), a.max_iters))?,
            }
        }
        Method::Tck => {
            let s2 = noise_var(l, a.sigma2)?;
            let fit = tuning::tc_grid_search(phi, y, s2, &tuning::logspace(-2.0, 2.0, 13), &tuning::linspace(0.5, 0.99, 13))?;
            let mut r = estimators::regls(phi, y, &fit.kernel, s2)?;
            r.method = Method::Tck;
            r
        }
        Method::Atom => {
            let dict = a.grid.spec().build(a.data.n_g)?;
            estimators::atom_estimate(phi, y, &dict, need(a.weight, "--weight", m)?, &with_cap(SolverOptions::proximal(), a.max_iters))?
        }
        Method::Eb | Method::Reb => {
            let lambda = if m == Method::Eb { 0.0 } else { need(a.lambda, "--lambda", m)? };
            let dict = a.grid.spec().build(a.data.n_g)?;
            let s2 = noise_var(l, a.sigma2)?;
            return tuned_estimate(m, phi, y, &dict, s2, lambda, a.mm_iters);
        }
    };
    Ok((res, trace))
}

fn tuned_estimate(m: Method, phi: &DMatrix<f64>, y: &DVector<f64>, dict: &AtomicDictionary, s2: f64, lambda: f64, mm_iters: usize) -> CliResult<(EstimateResult, Option<tuning::TuneResult>)> {
    let model = MarginalModel::new(phi, y, dict, s2)?;
    let tr = tuning::reb_solve(&model, &TuneConfig { lambda, mm_iters, ..TuneConfig::default() })?;
    let g = tuning::eb_estimate(phi, y, dict, &tr.eta, s2)?;
    let objective = (y - phi * &g).norm_squared();
    let mut r = EstimateResult::new(m, g, objective)?;
    r.iterations = mm_iters;
    r.converged = tr.converged;
    r.lambda = Some(lambda);
    Ok((r, Some(tr)))
}

fn cmd_identify(a: &IdentifyArgs, out: &mut dyn Write, err: &mut dyn Write) -> CliResult<i32> {
    let l = load(&a.data)?;
    let (res, trace) = identify(a, &l)?;
    let record = serde_json::to_string_pretty(&res.to_json()).map_err(|e| Error::Numerical(e.to_string()))?;
    match &a.out {
        Some(p) => {
            let mut w = create(p)?;
            io(writeln!(w, "{record}"))?;
            io(w.flush())?;
        }
        None => io(writeln!(out, "{record}"))?,
    }
    if let Some(p) = &a.g_out {
        let mut w = create(p)?;
        io(writeln!(w, "k,g"))?;
        for (k, v) in res.g.as_vector().iter().enumerate() {
            io(writeln!(w, "{k},{}", fmt17(*v)))?;
        }
        io(w.flush())?;
    }
    if let (Some(p), Some(t)) = (&a.trace_out, &trace) {
        let mut w = create(p)?;
        t.write_trace(&mut w)?;
        io(w.flush())?;
    }
    if !res.converged {
        io(writeln!(err, "warning: {} did not converge within its iteration budget", res.method.label()))?;
        return Ok(EXIT_NOT_CONVERGED);
    }
    Ok(0)
}

fn cmd_tune(a: &TuneArgs, out: &mut dyn Write) -> CliResult<i32> {
    let l = load(&a.data)?;
    let s2 = noise_var(&l, a.sigma2)?;
    match a.kernel {
        KernelChoice::Tc => {
            let fit = tuning::tc_grid_search(&l.phi, &l.y, s2, &tuning::logspace(-2.0, 2.0, 13), &tuning::linspace(0.5, 0.99, 13))?;
            let line = format!("c,alpha,nll\n{},{},{}\n", fmt17(fit.c), fmt17(fit.alpha), fmt17(fit.nll));
            match &a.params_out {
                Some(p) => io(create(p)?.write_all(line.as_bytes()))?,
                None => io(out.write_all(line.as_bytes()))?,
            }
            Ok(0)
        }
        KernelChoice::Atomic => {
            if !(a.lambda.is_finite() && a.lambda >= 0.0) {
                return Err(CliError::usage(format!("--lambda must be nonnegative, got {}", a.lambda)));
            }
            let dict = a.grid.spec().build(a.data.n_g)?;
            let model = MarginalModel::new(&l.phi, &l.y, &dict, s2)?;
            let res = tuning::reb_solve(&model, &TuneConfig { lambda: a.lambda, mm_iters: a.mm_iters, ..TuneConfig::default() })?;
            match &a.trace_out {
                Some(p) => {
                    let mut w = create(p)?;
                    res.write_trace(&mut w)?;
                    io(w.flush())?;
                }
                None => res.write_trace(&mut *out)?,
            }
            if let Some(p) = &a.params_out {
                let mut w = create(p)?;
                io(writeln!(w, "index,eta"))?;
                for (i, e) in res.eta.as_slice().iter().enumerate() {
                    io(writeln!(w, "{i},{}", fmt17(*e)))?;
                }
                io(w.flush())?;
            }
            Ok(if res.converged { 0 } else { EXIT_NOT_CONVERGED })
        }
    }
}

/// Apply a `key = value` config file; `[section]` headers prefix the keys
/// that follow with `section.`, and `#` starts a comment.
pub fn apply_config_text(cfg: &mut ExperimentConfig, text: &str) -> crate::Result<()> {
    let mut section = String::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
            section = name.trim().to_string();
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Parse(format!("line {}: expected `key = value`", n + 1)))?;
        let key = if section.is_empty() { k.trim().to_string() } else { format!("{section}.{}", k.trim()) };
        cfg.set(&key, v).map_err(|e| Error::Parse(format!("line {}: {e}", n + 1)))?;
    }
    Ok(())
}

/// Resolve the experiment configuration: built-in defaults, then the
/// seed environment variable, then the config file, then flags.
pub fn resolve_mc_config(a: &McArgs, env_seed: Option<&str>) -> CliResult<ExperimentConfig> {
    let text = match &a.config {
        Some(p) => Some(std::fs::read_to_string(p).map_err(|e| CliError::usage(format!("cannot read {}: {e}", p.display())))?),
        None => None,
    };
    // the experiment decides the defaults, so find it before layering
    let mut which = None;
    if let Some(t) = &text {
        let mut probe = ExperimentConfig::disturbed_input();
        apply_config_text(&mut probe, t).map_err(|e| CliError::usage(e.to_string()))?;
        which = Some(probe.which);
    }
    let which = a
        .experiment
        .or(which)
        .ok_or_else(|| CliError::usage("--experiment is required (or `experiment = ...` in the config file)"))?;
    let mut cfg = ExperimentConfig::for_experiment(which);
    if let Some(s) = parse_env_seed(env_seed)? {
        cfg.seed = s;
    }
    if let Some(t) = &text {
        apply_config_text(&mut cfg, t).map_err(|e| CliError::usage(e.to_string()))?;
        // a file naming the other experiment must not override the flag
        if cfg.which != which {
            cfg.set("experiment", which.key()).map_err(|e| CliError::usage(e.to_string()))?;
        }
    }
    for kv in &a.overrides {
        let (k, v) = kv.split_once('=').ok_or_else(|| CliError::usage(format!("--set expects KEY=VALUE, got `{kv}`")))?;
        cfg.set(k, v).map_err(|e| CliError::usage(e.to_string()))?;
    }
    if let Some(r) = a.runs {
        cfg.runs = r;
    }
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if let Some(w) = a.workers {
        cfg.workers = w;
    }
    cfg.validate().map_err(|e| CliError::usage(e.to_string()))?;
    Ok(cfg)
}

fn cmd_mc(a: &McArgs, env_seed: Option<&str>, out: &mut dyn Write, err: &mut dyn Write) -> CliResult<i32> {
    let cfg = resolve_mc_config(a, env_seed)?;
    if a.echo {
        io(out.write_all(cfg.echo().as_bytes()))?;
        return Ok(0);
    }
    std::fs::create_dir_all(&a.out).map_err(|e| CliError { code: EXIT_MODEL, message: format!("cannot create {}: {e}", a.out.display()) })?;
    io(writeln!(err, "running {} with {} runs (seed {})", cfg.which.key(), cfg.runs, cfg.seed))?;
    let report = experiments::run(&cfg)?;
    report
        .write_all(&a.out)
        .map_err(|e| CliError { code: EXIT_MODEL, message: format!("cannot write results to {}: {e}", a.out.display()) })?;
    report.write_summary(&mut *out)?;
    Ok(0)
}

fn cmd_verify(a: &VerifyArgs, out: &mut dyn Write) -> CliResult<i32> {
    let opts = VerifyOptions {
        checks: if a.check.is_empty() { Check::ALL.to_vec() } else { a.check.clone() },
        trials: a.trials,
        seed: a.seed,
        inject_failure: a.inject_failure,
    };
    if opts.trials == Some(0) {
        return Err(CliError::usage("--trials must be at least 1"));
    }
    let results = verify::run_checks(&opts)?;
    for r in &results {
        io(writeln!(out, "{r}"))?;
    }
    Ok(if results.iter().all(|r| r.passed) { 0 } else { EXIT_VERIFY_FAILED })
}
