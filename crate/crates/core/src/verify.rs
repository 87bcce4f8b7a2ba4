//! Built-in self-checks: mathematical identities the library must satisfy,
//! each compared against an independent oracle on random instances.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::estimators::{self, structured, SolverOptions};
use crate::kernel::{
    assemble_s_eta, build_grid, decompose_sample, numerical_rank, sample_prior, tc_kernel, AtomicDictionary, HyperParams, KernelMatrix, C64,
};
use crate::regression::build_phi;
use crate::rng::{self, Rng};
use crate::tuning::{self, MarginalModel, TuneConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Check {
    Theorem1,
    Lemma,
    Covariance,
    Mm,
    Gradients,
    Reductions,
    Structured,
}

impl Check {
    pub const ALL: [Check; 7] =
        [Check::Theorem1, Check::Lemma, Check::Covariance, Check::Mm, Check::Gradients, Check::Reductions, Check::Structured];

    pub fn key(self) -> &'static str {
        match self {
            Check::Theorem1 => "theorem1",
            Check::Lemma => "lemma",
            Check::Covariance => "covariance",
            Check::Mm => "mm",
            Check::Gradients => "gradients",
            Check::Reductions => "reductions",
            Check::Structured => "structured",
        }
    }

    fn default_trials(self) -> usize {
        match self {
            Check::Theorem1 => 50,
            Check::Lemma => 100,
            Check::Covariance => 20,
            Check::Mm => 3,
            Check::Gradients => 20,
            Check::Reductions => 5,
            Check::Structured => 20,
        }
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

impl FromStr for Check {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Check::ALL
            .into_iter()
            .find(|c| c.key() == s)
            .ok_or_else(|| Error::Parse(format!("unknown check `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub check: Check,
    pub passed: bool,
    /// Worst error observed across trials.
    pub measured: f64,
    pub tolerance: f64,
    pub trials: usize,
}

impl fmt::Display for CheckResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {:<11} trials={:<4} max_err={:.3e} tol={:.1e}",
            if self.passed { "PASS" } else { "FAIL" },
            self.check.key(),
            self.trials,
            self.measured,
            self.tolerance
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyOptions {
    pub checks: Vec<Check>,
    /// Overrides every check's default trial count.
    pub trials: Option<usize>,
    pub seed: u64,
    /// Feed each check a deliberately wrong input, so every check must fail.
    pub inject_failure: bool,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self { checks: Check::ALL.to_vec(), trials: None, seed: 2024, inject_failure: false }
    }
}

pub fn run_checks(opts: &VerifyOptions) -> Result<Vec<CheckResult>> {
    if opts.trials == Some(0) {
        return Err(Error::Parameter("trials must be at least 1".into()));
    }
    opts.checks
        .iter()
        .map(|&c| {
            let trials = opts.trials.unwrap_or(c.default_trials());
            let mut rng = rng::stream(opts.seed, c as u64);
            let inj = opts.inject_failure;
            let (measured, tolerance) = match c {
                Check::Theorem1 => theorem1(&mut rng, trials, inj)?,
                Check::Lemma => lemma(&mut rng, trials, inj)?,
                Check::Covariance => covariance(&mut rng, trials, inj)?,
                Check::Mm => mm(&mut rng, trials, inj)?,
                Check::Gradients => gradients(&mut rng, trials, inj)?,
                Check::Reductions => reductions(&mut rng, trials, inj)?,
                Check::Structured => structured_check(&mut rng, trials, inj)?,
            };
            Ok(CheckResult { check: c, passed: measured <= tolerance, measured, tolerance, trials })
        })
        .collect()
}

fn normal(rng: &mut Rng) -> f64 {
    StandardNormal.sample(rng)
}

fn rand_vec(rng: &mut Rng, n: usize) -> DVector<f64> {
    DVector::from_fn(n, |_, _| normal(rng))
}

fn rand_mat(rng: &mut Rng, r: usize, c: usize) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| normal(rng))
}

/// RegLS and KRLS with the matched radius coincide.
fn theorem1(rng: &mut Rng, trials: usize, inject: bool) -> Result<(f64, f64)> {
    let k = tc_kernel(1.0, 0.9, 10)?;
    let mut worst: f64 = 0.0;
    for t in 0..trials {
        let lambda = [0.1, 1.0, 10.0][t % 3];
        let u = rand_vec(rng, 30);
        let phi = build_phi(u.as_slice(), 10)?.into_matrix();
        let y = rand_vec(rng, 30);
        let g_reg = estimators::regls(&phi, &y, &k, lambda)?.g.into_vector();
        let mut rho = estimators::rho_from_lambda(&g_reg, &phi, &y, &k, lambda)?;
        if inject {
            rho *= 1.01;
        }
        let g = estimators::krls(&phi, &y, &k, rho, &SolverOptions::fixed_point())?.g.into_vector();
        worst = worst.max((g - &g_reg).norm() / g_reg.norm());
    }
    Ok((worst, 1e-6))
}

fn random_factor(rng: &mut Rng, n: usize) -> DMatrix<f64> {
    let a = rand_mat(rng, n, n);
    let spd = &a * a.transpose() + DMatrix::identity(n, n) * 0.1;
    spd.cholesky().expect("shifted Gram matrix is positive definite").unpack()
}

/// The closed-form worst case is attained and never exceeded.
fn lemma(rng: &mut Rng, trials: usize, inject: bool) -> Result<(f64, f64)> {
    let mut worst: f64 = 0.0;
    for _ in 0..trials {
        let n = rng.random_range(1..=5);
        let m = rng.random_range(1..=5);
        let a = rand_vec(rng, n);
        let b = rand_vec(rng, m);
        let r = random_factor(rng, n);
        let rho = rng.random_range(0.1..3.0);
        let value = estimators::worst_case_value(&a, &b, &r, rho)?;
        let wc = estimators::worst_case_delta(&a, &b, &r, rho)?;
        let achieved = if inject { (&wc.delta * &a * 0.9 + &b).norm() } else { wc.value };
        worst = worst.max((achieved - value).abs());
        let rinv = r.clone().try_inverse().ok_or_else(|| Error::SingularFactor("R".into()))?;
        for _ in 0..1000 {
            let e = rand_mat(rng, m, n);
            let s: f64 = rng.random();
            let delta = &e * &rinv * (rho * s / e.norm());
            worst = worst.max((&delta * &a + &b).norm() - value);
        }
    }
    Ok((worst, 1e-9))
}

/// Ten poles: two real, four conjugate pairs.
pub fn ten_pole_dictionary(n_g: usize) -> Result<AtomicDictionary> {
    let poles = [
        C64::new(0.5, 0.0),
        C64::new(-0.6, 0.0),
        C64::from_polar(0.8, std::f64::consts::FRAC_PI_4),
        C64::from_polar(0.7, std::f64::consts::FRAC_PI_2),
        C64::from_polar(0.9, 3.0 * std::f64::consts::FRAC_PI_4),
        C64::from_polar(0.6, std::f64::consts::FRAC_PI_6),
    ];
    AtomicDictionary::new(&poles, n_g)
}

/// Samples of a sparse `S_η` decompose on the active atoms, and its rank
/// is bounded by the number of active poles.
fn covariance(rng: &mut Rng, trials: usize, inject: bool) -> Result<(f64, f64)> {
    let dict = ten_pole_dictionary(30)?;
    let mut worst: f64 = 0.0;
    for t in 0..trials {
        let mut eta = vec![0.0; dict.n_eta()];
        for e in eta.iter_mut() {
            if rng.random_bool(0.5) {
                *e = rng.random_range(0.1..2.0);
            }
        }
        if eta.iter().all(|&e| e == 0.0) {
            eta[t % dict.n_eta()] = 1.0;
        }
        let eta = HyperParams::new(eta)?;
        let s = assemble_s_eta(&dict, &eta)?;
        let active = eta.active_poles(&dict, 0.0);
        let rank = numerical_rank(&s, 1e-10);
        if rank > active {
            return Ok((f64::INFINITY, 1e-8));
        }
        let mut g = sample_prior(&s, rng.random())?.into_vector();
        if inject {
            g += rand_vec(rng, g.len()) * (1e-4 * g.norm());
        }
        match decompose_sample(&g, &dict, &eta) {
            Ok(d) => {
                let gn = g.norm().max(f64::MIN_POSITIVE);
                worst = worst.max(d.residual / gn).max(d.imag_residue / gn * 10.0);
            }
            Err(Error::NotInSpan(rel)) => worst = worst.max(rel),
            Err(e) => return Err(e),
        }
    }
    Ok((worst, 1e-8))
}

fn mm_instance(rng: &mut Rng) -> Result<MarginalModel> {
    let dict = build_grid(8, 5, 0.5, 0.95, 100.0, 30)?;
    let u = rand_vec(rng, 100);
    let phi = build_phi(u.as_slice(), 30)?.into_matrix();
    let g = crate::lti::impulse_response(&crate::lti::TransferFunction::bench4(), 30)?.into_vector();
    let y = &phi * g + rand_vec(rng, 100) * 0.1;
    MarginalModel::new(&phi, &y, &dict, 0.01)
}

/// MM never increases the MAP objective; the majorizer bounds and touches.
fn mm(rng: &mut Rng, trials: usize, inject: bool) -> Result<(f64, f64)> {
    let mut worst: f64 = 0.0;
    for _ in 0..trials {
        let model = mm_instance(rng)?;
        for lambda in [0.0, 1.0, 10.0] {
            let res = tuning::reb_solve(&model, &TuneConfig { lambda, ..TuneConfig::default() })?;
            for w in res.trace.windows(2) {
                worst = worst.max((w[1] - w[0]) / w[0].abs().max(1.0));
            }
        }
        let n = model.n_eta();
        for _ in 0..20 {
            let eta: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..0.5)).collect();
            let gamma: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..0.5)).collect();
            let obj = model.map_objective(&eta, 1.0)?;
            let j_lambda = if inject { 0.0 } else { 1.0 };
            let scale = obj.abs().max(1.0);
            worst = worst.max((obj - model.majorizer(&eta, &gamma, j_lambda)?) / scale);
            worst = worst.max((model.majorizer(&eta, &eta, j_lambda)? - obj).abs() / scale);
        }
    }
    Ok((worst, 1e-9))
}

/// Analytic gradients of F and H against central differences.
fn gradients(rng: &mut Rng, trials: usize, inject: bool) -> Result<(f64, f64)> {
    let model = mm_instance(rng)?;
    let n = model.n_eta();
    let mut worst: f64 = 0.0;
    for _ in 0..trials {
        let eta: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..0.5)).collect();
        let lambda = 0.5;
        let mut gf = model.grad_f(&eta, lambda)?;
        let gh = model.grad_h(&eta)?;
        if inject {
            gf *= 1.001;
        }
        let i = rng.random_range(0..n);
        let h = 1e-5 * eta[i];
        let (mut p, mut q) = (eta.clone(), eta.clone());
        p[i] += h;
        q[i] -= h;
        let fd_f = (model.f_value(&p, lambda)? - model.f_value(&q, lambda)?) / (2.0 * h);
        let fd_h = (model.h_value(&p)? - model.h_value(&q)?) / (2.0 * h);
        worst = worst
            .max((fd_f - gf[i]).abs() / gf[i].abs().max(1e-8))
            .max((fd_h - gh[i]).abs() / gh[i].abs().max(1e-8));
    }
    Ok((worst, 1e-5))
}

/// Robust estimators at ρ = 0, REB at λ = 0 and the posterior mean reduce
/// to their plain counterparts.
fn reductions(rng: &mut Rng, trials: usize, inject: bool) -> Result<(f64, f64)> {
    let rho = if inject { 1e-2 } else { 0.0 };
    let mut worst: f64 = 0.0;
    let rel = |a: &DVector<f64>, b: &DVector<f64>| (a - b).norm() / b.norm().max(f64::MIN_POSITIVE);
    for _ in 0..trials {
        let u = rand_vec(rng, 40);
        let psi = build_phi(u.as_slice(), 8)?.into_matrix();
        let y = rand_vec(rng, 40);
        let k = tc_kernel(1.0, 0.8, 8)?;
        let lambda = 0.7;
        let g_ls = estimators::ls(&psi, &y)?.g.into_vector();
        let g_reg = estimators::regls(&psi, &y, &k, lambda)?.g.into_vector();
        let fp = SolverOptions::fixed_point();
        let mm = SolverOptions::majorization();
        let sg = SolverOptions::subgradient();
        let pairs = [
            (estimators::rls(&psi, &y, rho, &fp)?, &g_ls),
            (estimators::krls(&psi, &y, &k, rho, &fp)?, &g_ls),
            (estimators::srls(&psi, &y, rho, &sg)?, &g_ls),
            (estimators::rregls(&psi, &y, &k, rho, lambda, &mm)?, &g_reg),
            (estimators::krregls(&psi, &y, &k, rho, lambda, &mm)?, &g_reg),
            (estimators::srregls(&psi, &y, &k, rho, lambda, &sg)?, &g_reg),
        ];
        for (est, reference) in pairs {
            worst = worst.max(rel(est.g.as_vector(), reference));
        }

        let dict = build_grid(4, 2, 0.5, 0.9, 10.0, 8)?;
        let model = MarginalModel::new(&psi, &y, &dict, 0.5)?;
        let cfg = TuneConfig { mm_iters: 2, ..TuneConfig::default() };
        let eb = tuning::eb_solve(&model, &cfg)?;
        let reb = tuning::reb_solve(&model, &TuneConfig { lambda: rho, ..cfg })?;
        let (a, b) = (DVector::from_column_slice(eb.eta.as_slice()), DVector::from_column_slice(reb.eta.as_slice()));
        worst = worst.max(rel(&b, &a));

        let s = assemble_s_eta(&dict, &eb.eta)?;
        let sigma2 = 0.5 + rho;
        let pm = tuning::posterior_mean(&psi, &y, &s, sigma2)?;
        let rg = estimators::regls(&psi, &y, &KernelMatrix::psd(s)?, 0.5)?.g.into_vector();
        worst = worst.max(rel(&pm, &rg));
    }
    Ok((worst, 1e-8))
}

/// Secular-equation inner maximum against random boundary sampling refined
/// by projected gradient ascent. The error is normalized so that 1 is the
/// limit: 1e−3 relative in either direction, 1e−6 below the oracle.
fn structured_check(rng: &mut Rng, trials: usize, inject: bool) -> Result<(f64, f64)> {
    let mut worst: f64 = 0.0;
    for _ in 0..trials {
        let psi = rand_mat(rng, 5, 3);
        let y = rand_vec(rng, 5);
        let g = rand_vec(rng, 3);
        let rho = rng.random_range(0.1..2.0);
        let im = structured::structured_inner_max(&g, &psi, &y, rho)?;
        let value = if inject { im.value * 0.99 } else { im.value };
        let oracle = boundary_search(rng, &g, &psi, &y, rho, 20_000);
        let rel = (value - oracle) / oracle;
        worst = worst.max(rel.abs() / 1e-3).max(-rel / 1e-6);
    }
    Ok((worst, 1.0))
}

/// Best of random points on the sphere `‖δ‖ = ρ`, polished by projected
/// gradient ascent.
pub fn boundary_search(rng: &mut Rng, g: &DVector<f64>, psi: &DMatrix<f64>, y: &DVector<f64>, rho: f64, samples: usize) -> f64 {
    let m = structured::convolution_matrix(g, psi.nrows());
    let r = y - psi * g;
    let f = |d: &DVector<f64>| (&r + &m * d).norm_squared();
    let mut best = (f64::NEG_INFINITY, DVector::zeros(m.ncols()));
    for _ in 0..samples {
        let d = rand_vec(rng, m.ncols());
        let d = &d * (rho / d.norm());
        let v = f(&d);
        if v > best.0 {
            best = (v, d);
        }
    }
    let step = 0.5 / m.norm_squared().max(f64::MIN_POSITIVE);
    let (mut v, mut d) = best;
    for _ in 0..20_000 {
        let grad = m.transpose() * (&r + &m * &d) * 2.0;
        let next = &d + grad * step;
        let next = &next * (rho / next.norm());
        let vn = f(&next);
        if vn <= v {
            break;
        }
        v = vn;
        d = next;
    }
    v
}
