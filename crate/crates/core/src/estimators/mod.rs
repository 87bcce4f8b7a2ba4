//! FIR estimators: least squares, kernel-regularized least squares, and
//! robust least squares over standard, structured and kernel-based
//! uncertainty sets (plus their regularized variants), and the atomic-norm
//! `ℓ₁` baseline.
//!
//! The unstructured robust problems are reduced to finite convex programs
//! with the closed-form worst case `max_{‖ΔR‖_F ≤ ρ} ‖Δa + b‖ = ‖b‖ + ρ‖R⁻¹a‖`
//! from [`worst_case`]. The structured problem keeps its inner maximization
//! and is solved by a secular equation (see [`structured`]).

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::KernelMatrix;
use crate::lti::ImpulseResponse;

pub mod atom;
pub mod robust;
pub mod structured;
pub mod worst_case;

pub use atom::atom_estimate;
pub use robust::{krls, krregls, rls, rregls};
pub use structured::{srls, srregls, structured_inner_max, InnerMax};
pub use worst_case::{worst_case_delta, worst_case_value, WorstCase};

/// Every identification scheme the crate can run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    Ls,
    RegLs,
    Rls,
    Srls,
    Krls,
    RRegLs,
    SrRegLs,
    KrRegLs,
    Atom,
    Eb,
    Reb,
    Tck,
}

impl Method {
    pub const ROBUST_FAMILY: [Method; 8] = [
        Method::Ls,
        Method::RegLs,
        Method::Rls,
        Method::Srls,
        Method::Krls,
        Method::RRegLs,
        Method::SrRegLs,
        Method::KrRegLs,
    ];

    pub const ATOMIC_FAMILY: [Method; 5] = [Method::Ls, Method::Tck, Method::Atom, Method::Eb, Method::Reb];

    /// Lower-case identifier used on the command line.
    pub fn key(self) -> &'static str {
        match self {
            Method::Ls => "ls",
            Method::RegLs => "regls",
            Method::Rls => "rls",
            Method::Srls => "srls",
            Method::Krls => "krls",
            Method::RRegLs => "rregls",
            Method::SrRegLs => "srregls",
            Method::KrRegLs => "krregls",
            Method::Atom => "atom",
            Method::Eb => "eb",
            Method::Reb => "reb",
            Method::Tck => "tck",
        }
    }

    /// Label used in reports.
    pub fn label(self) -> &'static str {
        match self {
            Method::Ls => "LS",
            Method::RegLs => "RegLS",
            Method::Rls => "RLS",
            Method::Srls => "SRLS",
            Method::Krls => "KRLS",
            Method::RRegLs => "RRegLS",
            Method::SrRegLs => "SRRegLS",
            Method::KrRegLs => "KRRegLS",
            Method::Atom => "Atom",
            Method::Eb => "EB",
            Method::Reb => "REB",
            Method::Tck => "TCK",
        }
    }

    /// Uncertainty family of a robust estimator.
    pub fn uncertainty(self) -> Option<UncertaintyKind> {
        match self {
            Method::Rls | Method::RRegLs => Some(UncertaintyKind::Standard),
            Method::Srls | Method::SrRegLs => Some(UncertaintyKind::Structured),
            Method::Krls | Method::KrRegLs => Some(UncertaintyKind::KernelBased),
            _ => None,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let all = [
            Method::Ls,
            Method::RegLs,
            Method::Rls,
            Method::Srls,
            Method::Krls,
            Method::RRegLs,
            Method::SrRegLs,
            Method::KrRegLs,
            Method::Atom,
            Method::Eb,
            Method::Reb,
            Method::Tck,
        ];
        all.into_iter()
            .find(|m| m.key().eq_ignore_ascii_case(s) || m.label().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Parse(format!("unknown method `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UncertaintyKind {
    /// Frobenius ball `‖Δ‖_F ≤ ρ`.
    Standard,
    /// Toeplitz perturbations `Σ δ_k E^{(k)}` with `‖δ‖₂ ≤ ρ`.
    Structured,
    /// Kernel ball `‖Δ‖_K = ‖ΔR‖_F ≤ ρ`.
    KernelBased,
}

/// Uncertainty set description. All radii bound a Euclidean-type norm of
/// the perturbation (not its square).
#[derive(Debug, Clone)]
pub struct UncertaintySpec {
    pub kind: UncertaintyKind,
    pub rho: f64,
    pub kernel: Option<KernelMatrix>,
}

impl UncertaintySpec {
    pub fn new(kind: UncertaintyKind, rho: f64, kernel: Option<KernelMatrix>) -> Result<Self> {
        if !(rho.is_finite() && rho >= 0.0) {
            return Err(Error::Parameter(format!("rho must be finite and nonnegative, got {rho}")));
        }
        match (kind, &kernel) {
            (UncertaintyKind::KernelBased, None) => {
                return Err(Error::Parameter("kernel-based uncertainty needs a kernel".into()))
            }
            (UncertaintyKind::KernelBased, Some(k)) if !k.is_invertible() => return Err(Error::NotPositiveDefinite),
            _ => {}
        }
        Ok(Self { kind, rho, kernel })
    }

    /// Size of a concrete perturbation in this set's norm. For the
    /// structured set, `delta` must be Toeplitz.
    pub fn radius_of(&self, delta: &DMatrix<f64>) -> f64 {
        match self.kind {
            UncertaintyKind::Standard => delta.norm(),
            UncertaintyKind::KernelBased => crate::kernel::kernel_norm(delta, self.kernel.as_ref().expect("validated")),
            UncertaintyKind::Structured => structured::toeplitz_coefficients(delta).norm(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub max_iters: usize,
    pub tol: f64,
    /// Multiplier on the default initial step of first-order solvers.
    pub step_scale: f64,
    pub warm_start: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { max_iters: 500, tol: 1e-10, step_scale: 1.0, warm_start: true }
    }
}

impl SolverOptions {
    pub fn new(max_iters: usize, tol: f64) -> Result<Self> {
        let o = Self { max_iters, tol, ..Self::default() };
        o.validate()?;
        Ok(o)
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return Err(Error::Parameter("max_iters must be at least 1".into()));
        }
        if !(self.tol > 0.0) {
            return Err(Error::Parameter("tolerance must be positive".into()));
        }
        if !(self.step_scale > 0.0) {
            return Err(Error::Parameter("step scale must be positive".into()));
        }
        Ok(())
    }

    /// Fixed-point μ-iteration for RLS/KRLS.
    pub fn fixed_point() -> Self {
        Self { max_iters: 200, tol: 1e-10, ..Self::default() }
    }

    /// Majorization-minimization for RRegLS/KRRegLS.
    pub fn majorization() -> Self {
        Self { max_iters: 20_000, tol: 1e-13, ..Self::default() }
    }

    /// Subgradient descent for SRLS/SRRegLS.
    pub fn subgradient() -> Self {
        Self { max_iters: 500, tol: 1e-10, ..Self::default() }
    }

    /// Proximal gradient for the atomic-norm baseline.
    pub fn proximal() -> Self {
        Self { max_iters: 5_000, tol: 1e-10, ..Self::default() }
    }
}

/// Solver-side proof of optimality attached to an estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Certificate {
    /// Equivalent Tikhonov weight `μ` of the final iterate.
    Mu(f64),
    /// Coefficients of the maximizing structured perturbation.
    WorstDelta(Vec<f64>),
    /// The zero vector satisfies the subgradient optimality condition.
    ZeroCorner,
}

#[derive(Debug, Clone)]
pub struct EstimateResult {
    pub method: Method,
    pub g: ImpulseResponse,
    pub objective: f64,
    pub iterations: usize,
    pub certificate: Option<Certificate>,
    pub converged: bool,
    pub rho: Option<f64>,
    pub lambda: Option<f64>,
}

#[derive(Serialize)]
struct Record<'a> {
    method: &'static str,
    g: &'a [f64],
    objective: f64,
    iterations: usize,
    mu: Option<f64>,
    rho: Option<f64>,
    lambda: Option<f64>,
    converged: bool,
    certificate: &'a Option<Certificate>,
}

impl EstimateResult {
    pub(crate) fn new(method: Method, g: DVector<f64>, objective: f64) -> Result<Self> {
        if !objective.is_finite() {
            return Err(Error::Numerical(format!("{method}: non-finite objective")));
        }
        Ok(Self {
            method,
            g: ImpulseResponse::new(g)?,
            objective,
            iterations: 1,
            certificate: None,
            converged: true,
            rho: None,
            lambda: None,
        })
    }

    pub fn mu(&self) -> Option<f64> {
        match self.certificate {
            Some(Certificate::Mu(m)) => Some(m),
            _ => None,
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(Record {
            method: self.method.key(),
            g: self.g.as_slice(),
            objective: self.objective,
            iterations: self.iterations,
            mu: self.mu(),
            rho: self.rho,
            lambda: self.lambda,
            converged: self.converged,
            certificate: &self.certificate,
        })
        .expect("record is serializable")
    }
}

fn check_dims(phi: &DMatrix<f64>, y: &DVector<f64>) -> Result<()> {
    if phi.nrows() != y.len() {
        return Err(Error::Dimension(format!("regressor has {} rows, y has {}", phi.nrows(), y.len())));
    }
    Ok(())
}

fn check_kernel(phi: &DMatrix<f64>, k: &KernelMatrix) -> Result<()> {
    if k.n() != phi.ncols() {
        return Err(Error::Dimension(format!("kernel is {0}x{0}, regressor has {1} columns", k.n(), phi.ncols())));
    }
    Ok(())
}

/// Least squares as an [`EstimateResult`].
pub fn ls(phi: &DMatrix<f64>, y: &DVector<f64>) -> Result<EstimateResult> {
    check_dims(phi, y)?;
    let g = crate::regression::ls_estimate(phi, y)?.into_vector();
    let obj = (y - phi * &g).norm_squared();
    EstimateResult::new(Method::Ls, g, obj)
}

/// Solve `min ‖y − A h‖² + λ‖h‖²` by QR of the stacked matrix `[A; √λ I]`.
pub(crate) fn ridge(a: &DMatrix<f64>, y: &DVector<f64>, lambda: f64) -> Result<DVector<f64>> {
    let (m, n) = a.shape();
    let mut stacked = DMatrix::zeros(m + n, n);
    stacked.rows_mut(0, m).copy_from(a);
    let s = lambda.sqrt();
    for i in 0..n {
        stacked[(m + i, i)] = s;
    }
    let mut rhs = DVector::zeros(m + n);
    rhs.rows_mut(0, m).copy_from(y);
    let qr = stacked.qr();
    let qtb = qr.q().transpose() * rhs;
    qr.r()
        .solve_upper_triangular(&qtb)
        .filter(|h| h.iter().all(|v| v.is_finite()))
        .ok_or_else(|| Error::Numerical("regularized system is singular".into()))
}

/// Kernel-regularized least squares `argmin ‖y − Φg‖² + λ gᵀK⁻¹g`,
/// i.e. `(ΦᵀΦ + λK⁻¹)⁻¹Φᵀy`.
///
/// Solved in the factor coordinates `g = R h`, so `K⁻¹` is never formed.
/// With a singular factor the penalty acts on the range of `K`.
pub fn regls(phi: &DMatrix<f64>, y: &DVector<f64>, k: &KernelMatrix, lambda: f64) -> Result<EstimateResult> {
    check_dims(phi, y)?;
    check_kernel(phi, k)?;
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::Parameter(format!("lambda must be positive, got {lambda}")));
    }
    let r = k.factor();
    let a = phi * r;
    let h = ridge(&a, y, lambda)?;
    let g = r * &h;
    let obj = (y - phi * &g).norm_squared() + lambda * h.norm_squared();
    let mut res = EstimateResult::new(Method::RegLs, g, obj)?;
    res.lambda = Some(lambda);
    Ok(res)
}

/// Radius that makes KRLS reproduce a given RegLS fit:
/// `ρ = λ (gᵀK⁻¹g)^{1/2} / ‖Φg − y‖`.
pub fn rho_from_lambda(g_reg: &DVector<f64>, phi: &DMatrix<f64>, y: &DVector<f64>, k: &KernelMatrix, lambda: f64) -> Result<f64> {
    check_dims(phi, y)?;
    check_kernel(phi, k)?;
    let resid = (phi * g_reg - y).norm();
    if resid == 0.0 {
        return Err(Error::InfiniteRho);
    }
    Ok(lambda * k.inv_norm(g_reg)? / resid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::tc_kernel;
    use crate::regression::ls_estimate;
    use crate::testutil::{random_matrix, random_spd, random_vector};

    /// Plain gradient descent on ‖y − Φg‖² + λgᵀK⁻¹g with exact line search.
    fn descent_oracle(phi: &DMatrix<f64>, y: &DVector<f64>, kinv: &DMatrix<f64>, lambda: f64) -> DVector<f64> {
        let hess = (phi.transpose() * phi + kinv * lambda) * 2.0;
        let mut g = DVector::zeros(phi.ncols());
        for _ in 0..200_000 {
            let grad = (phi.transpose() * (phi * &g - y)) * 2.0 + kinv * &g * (2.0 * lambda);
            if grad.norm() < 1e-13 {
                break;
            }
            let step = grad.norm_squared() / (grad.transpose() * &hess * &grad)[0];
            g -= grad * step;
        }
        g
    }

    #[test]
    fn vanishing_lambda_gives_ls() {
        let phi = random_matrix(20, 5, 1);
        let y = random_vector(20, 2);
        let k = KernelMatrix::new(DMatrix::identity(5, 5)).unwrap();
        let g = regls(&phi, &y, &k, 1e-12).unwrap().g;
        let g_ls = ls_estimate(&phi, &y).unwrap();
        assert!((g.as_vector() - g_ls.as_vector()).norm() <= 1e-6 * g_ls.norm());
    }

    #[test]
    fn identity_halves() {
        let y = random_vector(4, 3);
        let eye = DMatrix::identity(4, 4);
        let k = KernelMatrix::new(eye.clone()).unwrap();
        let g = regls(&eye, &y, &k, 1.0).unwrap().g;
        assert!((g.as_vector() - &y * 0.5).norm() < 1e-14);
    }

    #[test]
    fn regls_matches_descent_oracle() {
        let phi = random_matrix(15, 4, 5);
        let y = random_vector(15, 6);
        let kmat = random_spd(4, 7);
        let k = KernelMatrix::new(kmat.clone()).unwrap();
        let kinv = kmat.try_inverse().unwrap();
        for lambda in [0.1, 1.0, 10.0] {
            let g = regls(&phi, &y, &k, lambda).unwrap().g;
            let oracle = descent_oracle(&phi, &y, &kinv, lambda);
            assert!((g.as_vector() - &oracle).norm() <= 1e-8 * oracle.norm().max(1.0));
        }
    }

    #[test]
    fn regls_rejects_bad_lambda() {
        let phi = random_matrix(6, 3, 1);
        let k = tc_kernel(1.0, 0.8, 3).unwrap();
        assert!(regls(&phi, &random_vector(6, 1), &k, 0.0).is_err());
        assert!(regls(&phi, &random_vector(5, 1), &k, 1.0).is_err());
    }

    #[test]
    fn rho_from_lambda_errors_on_exact_fit() {
        let phi = random_matrix(8, 3, 2);
        let g = random_vector(3, 3);
        let y = &phi * &g;
        let k = tc_kernel(1.0, 0.8, 3).unwrap();
        assert_eq!(rho_from_lambda(&g, &phi, &y, &k, 1.0), Err(Error::InfiniteRho));
    }

    #[test]
    fn rho_is_linear_in_lambda_at_fixed_fit() {
        let phi = random_matrix(8, 3, 2);
        let y = random_vector(8, 4);
        let k = tc_kernel(1.0, 0.8, 3).unwrap();
        let g = regls(&phi, &y, &k, 1.0).unwrap().g.into_vector();
        let r1 = rho_from_lambda(&g, &phi, &y, &k, 1.0).unwrap();
        let r2 = rho_from_lambda(&g, &phi, &y, &k, 2.0).unwrap();
        assert!((r2 - 2.0 * r1).abs() <= 1e-14 * r2);
    }

    #[test]
    fn method_names_round_trip() {
        for m in Method::ROBUST_FAMILY.iter().chain(Method::ATOMIC_FAMILY.iter()) {
            assert_eq!(m.key().parse::<Method>().unwrap(), *m);
            assert_eq!(m.label().parse::<Method>().unwrap(), *m);
        }
        assert!("nope".parse::<Method>().is_err());
    }

    #[test]
    fn json_record_fields() {
        let phi = random_matrix(6, 2, 1);
        let r = ls(&phi, &random_vector(6, 2)).unwrap();
        let v = r.to_json();
        assert_eq!(v["method"], "ls");
        assert_eq!(v["g"].as_array().unwrap().len(), 2);
        assert_eq!(v["converged"], true);
    }

    #[test]
    fn uncertainty_spec_validation() {
        assert!(UncertaintySpec::new(UncertaintyKind::Standard, -1.0, None).is_err());
        assert!(UncertaintySpec::new(UncertaintyKind::KernelBased, 1.0, None).is_err());
        let k = tc_kernel(1.0, 0.5, 3).unwrap();
        let spec = UncertaintySpec::new(UncertaintyKind::KernelBased, 1.0, Some(k.clone())).unwrap();
        let delta = random_matrix(5, 3, 9);
        let tr = (&delta * k.matrix() * delta.transpose()).trace();
        assert!((spec.radius_of(&delta).powi(2) - tr).abs() < 1e-12 * tr);
    }
}
