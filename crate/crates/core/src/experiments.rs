//! Monte Carlo harnesses: the disturbed-input robustness study and the
//! atomic-kernel noise study.
//!
//! Each run draws its signals from seeds derived from `(master seed, run
//! index)` and runs are mapped in parallel with an order-preserving
//! collect, so reports are bit-identical for any worker count.

use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::estimators::{self, EstimateResult, Method, SolverOptions};
use crate::fmt17;
use crate::kernel::{build_grid, kernel_norm, AtomicDictionary, KernelMatrix};
use crate::lti::{add_noise, disturb, generate_signal, impulse_response, prbs, simulate, SignalKind, SignalSpec, TransferFunction};
use crate::metrics::{bias_var_mse, fit_w, median, r_squared, sq_err};
use crate::regression::build_phi;
use crate::rng::sub_seed;
use crate::tuning::{self, cross_validate, MarginalModel, TuneConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    DisturbedInput,
    AtomicNoise,
}

impl Experiment {
    pub fn key(self) -> &'static str {
        match self {
            Experiment::DisturbedInput => "disturbed-input",
            Experiment::AtomicNoise => "atomic-noise",
        }
    }

    pub fn methods(self) -> &'static [Method] {
        match self {
            Experiment::DisturbedInput => &Method::ROBUST_FAMILY,
            Experiment::AtomicNoise => &Method::ATOMIC_FAMILY,
        }
    }
}

impl FromStr for Experiment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.replace('_', "-").as_str() {
            "disturbed-input" => Ok(Experiment::DisturbedInput),
            "atomic-noise" => Ok(Experiment::AtomicNoise),
            _ => Err(Error::Parse(format!("unknown experiment `{s}`"))),
        }
    }
}

/// Polar pole grid parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub n_angles: usize,
    pub n_radii: usize,
    pub r_min: f64,
    pub r_max: f64,
    pub base: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self { n_angles: 16, n_radii: 15, r_min: 0.8, r_max: 1.0, base: 1e6 }
    }
}

impl GridSpec {
    pub fn build(&self, n_g: usize) -> Result<AtomicDictionary> {
        build_grid(self.n_angles, self.n_radii, self.r_min, self.r_max, self.base, n_g)
    }
}

/// How the uncertainty radii are set. Only calibration on the true
/// disturbance is implemented: each family gets the matching norm of the
/// true perturbation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RhoPolicy {
    TrueDisturbance,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub which: Experiment,
    pub runs: usize,
    pub seed: u64,
    pub n_d: usize,
    pub n_g: usize,
    pub sigma_d: f64,
    pub sigma2: f64,
    pub methods: Vec<Method>,
    pub grid: GridSpec,
    pub regls_lambda_grid: Vec<f64>,
    pub tc_alpha_grid: Vec<f64>,
    pub atom_weight_grid: Vec<f64>,
    pub reb_lambda_grid: Vec<f64>,
    pub mm_iters: usize,
    pub subgradient_iters: usize,
    pub rho_policy: RhoPolicy,
    /// Worker threads; 0 means available parallelism. Never affects results.
    pub workers: usize,
}

impl ExperimentConfig {
    pub fn disturbed_input() -> Self {
        Self {
            which: Experiment::DisturbedInput,
            runs: 1000,
            seed: 0,
            n_d: 127,
            n_g: 80,
            sigma_d: 0.1,
            sigma2: 0.0,
            methods: Method::ROBUST_FAMILY.to_vec(),
            grid: GridSpec::default(),
            regls_lambda_grid: tuning::logspace(-4.0, 2.0, 7),
            tc_alpha_grid: tuning::linspace(0.5, 0.99, 13),
            atom_weight_grid: tuning::logspace(0.0, 4.0, 5),
            reb_lambda_grid: tuning::logspace(-1.0, 1.0, 5),
            mm_iters: 5,
            subgradient_iters: 500,
            rho_policy: RhoPolicy::TrueDisturbance,
            workers: 0,
        }
    }

    pub fn atomic_noise() -> Self {
        Self {
            which: Experiment::AtomicNoise,
            runs: 150,
            n_d: 150,
            n_g: 50,
            sigma_d: 0.0,
            sigma2: 0.01,
            methods: Method::ATOMIC_FAMILY.to_vec(),
            ..Self::disturbed_input()
        }
    }

    pub fn for_experiment(which: Experiment) -> Self {
        match which {
            Experiment::DisturbedInput => Self::disturbed_input(),
            Experiment::AtomicNoise => Self::atomic_noise(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Parameter(m));
        if self.runs == 0 {
            return bad("runs must be at least 1".into());
        }
        if self.n_d == 0 || self.n_g == 0 {
            return bad("n_d and n_g must be positive".into());
        }
        if !(self.sigma_d >= 0.0) || !(self.sigma2 >= 0.0) {
            return bad("noise levels must be nonnegative".into());
        }
        if self.methods.is_empty() {
            return bad("no methods selected".into());
        }
        if let Some(m) = self.methods.iter().find(|m| !self.which.methods().contains(m)) {
            return bad(format!("method {m} is not part of the {} experiment", self.which.key()));
        }
        for (name, grid) in [
            ("cv.regls_lambda", &self.regls_lambda_grid),
            ("cv.atom_weight", &self.atom_weight_grid),
            ("cv.reb_lambda", &self.reb_lambda_grid),
        ] {
            if grid.is_empty() || grid.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
                return bad(format!("{name} must be a nonempty list of nonnegative numbers"));
            }
        }
        if self.tc_alpha_grid.is_empty() || self.tc_alpha_grid.iter().any(|a| !(*a > 0.0 && *a < 1.0)) {
            return bad("tc.alpha values must lie in (0, 1)".into());
        }
        if self.mm_iters == 0 || self.subgradient_iters == 0 {
            return bad("iteration budgets must be positive".into());
        }
        if self.which == Experiment::AtomicNoise {
            self.grid.build(self.n_g)?;
        }
        Ok(())
    }

    /// Set one `key = value` entry. Keys match the lines of [`Self::echo`].
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        let num = |v: &str| v.parse::<f64>().map_err(|e| Error::Parse(format!("{key}: {e}")));
        let int = |v: &str| v.parse::<usize>().map_err(|e| Error::Parse(format!("{key}: {e}")));
        let list = |v: &str| -> Result<Vec<f64>> { v.split(',').map(|s| num(s.trim())).collect() };
        match key.trim() {
            "experiment" => {
                let which: Experiment = v.parse()?;
                if which != self.which {
                    // switching experiments resets the method list
                    self.which = which;
                    self.methods = which.methods().to_vec();
                }
            }
            "runs" => self.runs = int(v)?,
            "seed" => self.seed = v.parse().map_err(|e| Error::Parse(format!("{key}: {e}")))?,
            "n_d" => self.n_d = int(v)?,
            "n_g" => self.n_g = int(v)?,
            "sigma_d" => self.sigma_d = num(v)?,
            "sigma2" => self.sigma2 = num(v)?,
            "methods" => self.methods = v.split(',').map(|m| m.trim().parse()).collect::<Result<_>>()?,
            "grid.n_angles" => self.grid.n_angles = int(v)?,
            "grid.n_radii" => self.grid.n_radii = int(v)?,
            "grid.r_min" => self.grid.r_min = num(v)?,
            "grid.r_max" => self.grid.r_max = num(v)?,
            "grid.base" => self.grid.base = num(v)?,
            "cv.regls_lambda" => self.regls_lambda_grid = list(v)?,
            "cv.atom_weight" => self.atom_weight_grid = list(v)?,
            "cv.reb_lambda" => self.reb_lambda_grid = list(v)?,
            "tc.alpha" => self.tc_alpha_grid = list(v)?,
            "solver.mm_iters" => self.mm_iters = int(v)?,
            "solver.subgradient_iters" => self.subgradient_iters = int(v)?,
            "rho.policy" => match v {
                "true-disturbance" => self.rho_policy = RhoPolicy::TrueDisturbance,
                _ => return Err(Error::Parse(format!("unknown rho policy `{v}`"))),
            },
            "workers" => self.workers = int(v)?,
            other => return Err(Error::Parse(format!("unknown config key `{other}`"))),
        }
        Ok(())
    }

    /// Fully resolved configuration as `key = value` lines, loadable by [`Self::set`].
    pub fn echo(&self) -> String {
        let join = |v: &[f64]| v.iter().map(|x| fmt17(*x)).collect::<Vec<_>>().join(",");
        let mut s = String::new();
        let _ = writeln!(s, "# regkit {}", env!("CARGO_PKG_VERSION"));
        let _ = writeln!(s, "experiment = {}", self.which.key());
        let _ = writeln!(s, "runs = {}", self.runs);
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "n_d = {}", self.n_d);
        let _ = writeln!(s, "n_g = {}", self.n_g);
        let _ = writeln!(s, "sigma_d = {}", fmt17(self.sigma_d));
        let _ = writeln!(s, "sigma2 = {}", fmt17(self.sigma2));
        let methods: Vec<&str> = self.methods.iter().map(|m| m.key()).collect();
        let _ = writeln!(s, "methods = {}", methods.join(","));
        let _ = writeln!(s, "grid.n_angles = {}", self.grid.n_angles);
        let _ = writeln!(s, "grid.n_radii = {}", self.grid.n_radii);
        let _ = writeln!(s, "grid.r_min = {}", fmt17(self.grid.r_min));
        let _ = writeln!(s, "grid.r_max = {}", fmt17(self.grid.r_max));
        let _ = writeln!(s, "grid.base = {}", fmt17(self.grid.base));
        let _ = writeln!(s, "cv.regls_lambda = {}", join(&self.regls_lambda_grid));
        let _ = writeln!(s, "cv.atom_weight = {}", join(&self.atom_weight_grid));
        let _ = writeln!(s, "cv.reb_lambda = {}", join(&self.reb_lambda_grid));
        let _ = writeln!(s, "tc.alpha = {}", join(&self.tc_alpha_grid));
        let _ = writeln!(s, "solver.mm_iters = {}", self.mm_iters);
        let _ = writeln!(s, "solver.subgradient_iters = {}", self.subgradient_iters);
        let _ = writeln!(s, "rho.policy = true-disturbance");
        let _ = writeln!(s, "workers = {}", self.workers);
        s
    }
}

#[derive(Debug, Clone)]
pub struct RunRecord {
    pub run_id: usize,
    pub method: Method,
    pub fit_w: f64,
    pub r2: f64,
    pub sq_err: f64,
    pub converged: bool,
    /// `None` when the estimator failed.
    pub g_hat: Option<DVector<f64>>,
}

#[derive(Debug, Clone)]
pub struct MethodSummary {
    pub method: Method,
    pub bias2: f64,
    pub var: f64,
    pub mse: f64,
    pub median_fit: f64,
    pub n_ok: usize,
    pub n_fail: usize,
}

#[derive(Debug, Clone)]
pub struct McReport {
    pub config: ExperimentConfig,
    pub g_true: DVector<f64>,
    /// Sorted by run, then by method in configuration order.
    pub records: Vec<RunRecord>,
    pub summary: Vec<MethodSummary>,
}

impl McReport {
    pub fn summary_for(&self, m: Method) -> Option<&MethodSummary> {
        self.summary.iter().find(|s| s.method == m)
    }

    pub fn write_runs<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "run_id,method,fit_w,r2,sq_err,converged")?;
        for r in &self.records {
            writeln!(w, "{},{},{},{},{},{}", r.run_id, r.method.label(), fmt17(r.fit_w), fmt17(r.r2), fmt17(r.sq_err), r.converged)?;
        }
        Ok(())
    }

    pub fn write_summary<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "method,bias2,var,mse,median_fit,n_ok,n_fail")?;
        for s in &self.summary {
            writeln!(
                w,
                "{},{},{},{},{},{},{}",
                s.method.label(),
                fmt17(s.bias2),
                fmt17(s.var),
                fmt17(s.mse),
                fmt17(s.median_fit),
                s.n_ok,
                s.n_fail
            )?;
        }
        Ok(())
    }

    /// Write `runs.csv`, `summary.csv` and `config.echo` into `dir`.
    pub fn write_all(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let open = |name: &str| -> Result<std::io::BufWriter<std::fs::File>> {
            Ok(std::io::BufWriter::new(std::fs::File::create(dir.join(name))?))
        };
        self.write_runs(open("runs.csv")?)?;
        self.write_summary(open("summary.csv")?)?;
        open("config.echo")?.write_all(self.config.echo().as_bytes())?;
        Ok(())
    }
}

type Outcome = Vec<(Method, Result<EstimateResult>)>;

/// Run the configured experiment.
pub fn run(cfg: &ExperimentConfig) -> Result<McReport> {
    cfg.validate()?;
    match cfg.which {
        Experiment::DisturbedInput => run_disturbed_input(cfg),
        Experiment::AtomicNoise => run_atomic_noise(cfg),
    }
}

fn parallel_runs<F>(cfg: &ExperimentConfig, f: F) -> Result<Vec<Outcome>>
where
    F: Fn(usize) -> Outcome + Sync,
{
    let mut builder = rayon::ThreadPoolBuilder::new();
    if cfg.workers > 0 {
        builder = builder.num_threads(cfg.workers);
    }
    let pool = builder.build().map_err(|e| Error::Numerical(format!("thread pool: {e}")))?;
    Ok(pool.install(|| (0..cfg.runs).into_par_iter().map(&f).collect()))
}

fn failed_all(methods: &[Method], e: &Error) -> Outcome {
    methods.iter().map(|&m| (m, Err(e.clone()))).collect()
}

fn assemble(cfg: &ExperimentConfig, g_true: DVector<f64>, outcomes: Vec<Outcome>) -> Result<McReport> {
    let mut records = Vec::with_capacity(outcomes.len() * cfg.methods.len());
    for (run_id, outcome) in outcomes.into_iter().enumerate() {
        for (method, res) in outcome {
            let rec = match res {
                Ok(est) => {
                    let gh = est.g.into_vector();
                    RunRecord {
                        run_id,
                        method,
                        fit_w: fit_w(&g_true, &gh)?,
                        r2: r_squared(&g_true, &gh)?,
                        sq_err: sq_err(&g_true, &gh)?,
                        converged: est.converged,
                        g_hat: Some(gh),
                    }
                }
                Err(_) => RunRecord {
                    run_id,
                    method,
                    fit_w: f64::NAN,
                    r2: f64::NAN,
                    sq_err: f64::NAN,
                    converged: false,
                    g_hat: None,
                },
            };
            records.push(rec);
        }
    }
    let summary = cfg
        .methods
        .iter()
        .map(|&method| {
            let mine: Vec<&RunRecord> = records.iter().filter(|r| r.method == method).collect();
            let ok: Vec<DVector<f64>> = mine.iter().filter_map(|r| r.g_hat.clone()).collect();
            let fits: Vec<f64> = mine.iter().map(|r| r.fit_w).collect();
            let (bias2, var, mse) = match bias_var_mse(&g_true, &ok) {
                Ok(bv) => (bv.bias2, bv.var, bv.mse),
                Err(_) => (f64::NAN, f64::NAN, f64::NAN),
            };
            MethodSummary { method, bias2, var, mse, median_fit: median(&fits), n_ok: ok.len(), n_fail: mine.len() - ok.len() }
        })
        .collect();
    Ok(McReport { config: cfg.clone(), g_true, records, summary })
}

/// Noise-variance estimate from LS residuals, floored so that noiseless
/// data still give a positive definite marginal covariance.
pub fn residual_noise_var(phi: &DMatrix<f64>, y: &DVector<f64>) -> Result<f64> {
    let s2 = tuning::estimate_noise_var(phi, y)?;
    Ok(s2.max(1e-10 * y.norm_squared() / y.len() as f64).max(f64::MIN_POSITIVE))
}

/// Everything one disturbed-input run needs besides the estimators.
pub struct DisturbedSetup {
    pub psi: DMatrix<f64>,
    pub y: DVector<f64>,
    /// True Toeplitz perturbation `Ψ − Φ`.
    pub delta: DMatrix<f64>,
    pub disturbance: DVector<f64>,
    pub kernel: KernelMatrix,
    pub lambda: Option<f64>,
}

pub const PURPOSE_INPUT: u64 = 1;
pub const PURPOSE_DISTURBANCE: u64 = 2;
pub const PURPOSE_NOISE: u64 = 3;

/// Data, kernel (`c = 1`, decay by marginal likelihood) and cross-validated
/// λ for run `run_id`.
pub fn disturbed_setup(cfg: &ExperimentConfig, g: &DVector<f64>, run_id: usize) -> Result<DisturbedSetup> {
    let u = prbs(cfg.n_d, sub_seed(cfg.seed, run_id as u64, PURPOSE_INPUT));
    let y = DVector::from_vec(simulate(g.as_slice(), &u));
    let (v, d) = disturb(&u, cfg.sigma_d, sub_seed(cfg.seed, run_id as u64, PURPOSE_DISTURBANCE))?;
    let psi = build_phi(&v, cfg.n_g)?.into_matrix();
    let delta = build_phi(&d, cfg.n_g)?.into_matrix();
    let s2 = residual_noise_var(&psi, &y)?;
    let kernel = tuning::tc_grid_search(&psi, &y, s2, &[1.0], &cfg.tc_alpha_grid)?.kernel;
    let needs_lambda = cfg
        .methods
        .iter()
        .any(|m| matches!(m, Method::RegLs | Method::RRegLs | Method::SrRegLs | Method::KrRegLs));
    let lambda = if needs_lambda {
        let cv = cross_validate(&psi, &y, &cfg.regls_lambda_grid, |p, yy, l| Ok(estimators::regls(p, yy, &kernel, l)?.g.into_vector()))?;
        Some(cv.best)
    } else {
        None
    };
    Ok(DisturbedSetup { psi, y, delta, disturbance: DVector::from_vec(d), kernel, lambda })
}

fn disturbed_estimate(cfg: &ExperimentConfig, s: &DisturbedSetup, method: Method) -> Result<EstimateResult> {
    let (psi, y, k) = (&s.psi, &s.y, &s.kernel);
    let lambda = || s.lambda.ok_or_else(|| Error::Parameter("lambda was not tuned".into()));
    let rho_std = s.delta.norm();
    let rho_ker = kernel_norm(&s.delta, k);
    let rho_str = s.disturbance.norm();
    let fp = SolverOptions::fixed_point();
    let mm = SolverOptions::majorization();
    let sg = SolverOptions { max_iters: cfg.subgradient_iters, ..SolverOptions::subgradient() };
    match method {
        Method::Ls => estimators::ls(psi, y),
        Method::RegLs => estimators::regls(psi, y, k, lambda()?),
        Method::Rls => estimators::rls(psi, y, rho_std, &fp),
        Method::Srls => estimators::srls(psi, y, rho_str, &sg),
        Method::Krls => estimators::krls(psi, y, k, rho_ker, &fp),
        Method::RRegLs => estimators::rregls(psi, y, k, rho_std, lambda()?, &mm),
        Method::SrRegLs => estimators::srregls(psi, y, k, rho_str, lambda()?, &sg),
        Method::KrRegLs => estimators::krregls(psi, y, k, rho_ker, lambda()?, &mm),
        other => Err(Error::Parameter(format!("{other} is not part of the disturbed-input experiment"))),
    }
}

/// Second-order benchmark under PRBS excitation with Gaussian input
/// measurement disturbance and noiseless output.
pub fn run_disturbed_input(cfg: &ExperimentConfig) -> Result<McReport> {
    cfg.validate()?;
    let g = impulse_response(&TransferFunction::bench2(), cfg.n_g)?.into_vector();
    let outcomes = parallel_runs(cfg, |run_id| match disturbed_setup(cfg, &g, run_id) {
        Ok(setup) => cfg.methods.iter().map(|&m| (m, disturbed_estimate(cfg, &setup, m))).collect(),
        Err(e) => failed_all(&cfg.methods, &e),
    })?;
    assemble(cfg, g, outcomes)
}

/// Data and tuned quantities for one atomic-noise run.
pub struct AtomicSetup {
    pub phi: DMatrix<f64>,
    pub y: DVector<f64>,
    pub sigma2_hat: f64,
}

pub fn atomic_setup(cfg: &ExperimentConfig, g: &DVector<f64>, run_id: usize) -> Result<AtomicSetup> {
    let spec = SignalSpec {
        kind: SignalKind::Gaussian,
        length: cfg.n_d,
        scale: 1.0,
        seed: sub_seed(cfg.seed, run_id as u64, PURPOSE_INPUT),
    };
    let u = generate_signal(&spec);
    let clean = simulate(g.as_slice(), &u);
    let y = DVector::from_vec(add_noise(&clean, cfg.sigma2, sub_seed(cfg.seed, run_id as u64, PURPOSE_NOISE))?);
    let phi = build_phi(&u, cfg.n_g)?.into_matrix();
    let sigma2_hat = residual_noise_var(&phi, &y)?;
    Ok(AtomicSetup { phi, y, sigma2_hat })
}

fn tune_cfg(cfg: &ExperimentConfig, lambda: f64) -> TuneConfig {
    TuneConfig { lambda, mm_iters: cfg.mm_iters, ..TuneConfig::default() }
}

/// Posterior mean after (regularized) empirical-Bayes tuning on `(phi, y)`.
pub fn reb_fit(phi: &DMatrix<f64>, y: &DVector<f64>, dict: &AtomicDictionary, sigma2: f64, cfg: &TuneConfig) -> Result<(DVector<f64>, bool)> {
    let model = MarginalModel::new(phi, y, dict, sigma2)?;
    let res = tuning::reb_solve(&model, cfg)?;
    Ok((tuning::eb_estimate(phi, y, dict, &res.eta, sigma2)?, res.converged))
}

fn atomic_estimate(cfg: &ExperimentConfig, s: &AtomicSetup, dict: &AtomicDictionary, method: Method) -> Result<EstimateResult> {
    let (phi, y, s2) = (&s.phi, &s.y, s.sigma2_hat);
    let wrap = |g: DVector<f64>, converged: bool, lambda: Option<f64>| -> Result<EstimateResult> {
        let mut r = EstimateResult::new(method, g.clone(), (y - phi * g).norm_squared())?;
        r.converged = converged;
        r.lambda = lambda;
        Ok(r)
    };
    match method {
        Method::Ls => estimators::ls(phi, y),
        Method::Tck => {
            let fit = tuning::tc_grid_search(phi, y, s2, &tuning::logspace(-2.0, 2.0, 13), &cfg.tc_alpha_grid)?;
            let mut r = estimators::regls(phi, y, &fit.kernel, s2)?;
            r.method = Method::Tck;
            Ok(r)
        }
        Method::Atom => {
            let opts = SolverOptions::proximal();
            let cv = cross_validate(phi, y, &cfg.atom_weight_grid, |p, yy, w| Ok(estimators::atom_estimate(p, yy, dict, w, &opts)?.g.into_vector()))?;
            estimators::atom_estimate(phi, y, dict, cv.best, &opts)
        }
        Method::Eb => {
            let (g, ok) = reb_fit(phi, y, dict, s2, &tune_cfg(cfg, 0.0))?;
            wrap(g, ok, Some(0.0))
        }
        Method::Reb => {
            let cv = cross_validate(phi, y, &cfg.reb_lambda_grid, |p, yy, l| Ok(reb_fit(p, yy, dict, s2, &tune_cfg(cfg, l))?.0))?;
            let (g, ok) = reb_fit(phi, y, dict, s2, &tune_cfg(cfg, cv.best))?;
            wrap(g, ok, Some(cv.best))
        }
        other => Err(Error::Parameter(format!("{other} is not part of the atomic-noise experiment"))),
    }
}

/// Fourth-order benchmark under Gaussian excitation with output noise,
/// identified with the TC kernel, the atomic ℓ₁ baseline, and empirical
/// Bayes with and without the sparsity-promoting prior on `η`.
pub fn run_atomic_noise(cfg: &ExperimentConfig) -> Result<McReport> {
    cfg.validate()?;
    let g = impulse_response(&TransferFunction::bench4(), cfg.n_g)?.into_vector();
    let dict = cfg.grid.build(cfg.n_g)?;
    let outcomes = parallel_runs(cfg, |run_id| match atomic_setup(cfg, &g, run_id) {
        Ok(setup) => cfg.methods.iter().map(|&m| (m, atomic_estimate(cfg, &setup, &dict, m))).collect(),
        Err(e) => failed_all(&cfg.methods, &e),
    })?;
    assemble(cfg, g, outcomes)
}
