//! Robust least squares over standard and kernel-based uncertainty sets.
//!
//! After the closed-form inner maximization these become
//! `min ‖Ψg − y‖ + ρ‖Mg‖` (RLS/KRLS) and
//! `min (‖Ψg − y‖ + ρ‖Mg‖)² + λgᵀK⁻¹g` (RRegLS/KRRegLS), with `M = I` for the
//! Frobenius ball and `M = R⁻¹` for the kernel ball. Everything is solved in
//! the factor coordinates `g = R h`, where the kernel ball penalty is `ρ‖h‖`.

use nalgebra::{DMatrix, DVector};

use super::{check_dims, check_kernel, ridge, Certificate, EstimateResult, Method, SolverOptions};
use crate::error::{Error, Result};
use crate::kernel::KernelMatrix;

fn check_rho(rho: f64) -> Result<()> {
    if !(rho.is_finite() && rho >= 0.0) {
        return Err(Error::Parameter(format!("rho must be finite and nonnegative, got {rho}")));
    }
    Ok(())
}

/// Tikhonov path `h(μ) = (AᵀA + μI)⁻¹Aᵀy` in SVD coordinates.
struct TikhonovPath {
    sigma: Vec<f64>,
    /// `Uᵀy`
    beta: Vec<f64>,
    v: DMatrix<f64>,
    /// squared part of `y` outside the range of `A`
    outside: f64,
}

impl TikhonovPath {
    fn new(a: &DMatrix<f64>, y: &DVector<f64>) -> Result<Self> {
        let svd = a.clone().svd(true, true);
        let u = svd.u.as_ref().ok_or(Error::EigenFailure)?;
        let vt = svd.v_t.as_ref().ok_or(Error::EigenFailure)?;
        let beta_vec = u.transpose() * y;
        let outside = (y - u * &beta_vec).norm_squared();
        Ok(Self {
            sigma: svd.singular_values.iter().copied().collect(),
            beta: beta_vec.iter().copied().collect(),
            v: vt.transpose(),
            outside,
        })
    }

    fn cutoff(&self) -> f64 {
        let smax = self.sigma.iter().copied().fold(0.0, f64::max);
        smax * self.sigma.len().max(1) as f64 * f64::EPSILON
    }

    /// `(‖h(μ)‖², ‖Ah(μ) − y‖²/μ²)`, the latter kept finite as `μ → 0`
    /// only when `y` lies in the range of `A`.
    fn norms(&self, mu: f64) -> (f64, f64) {
        let mut hn = 0.0;
        let mut rs = 0.0;
        for (&s, &b) in self.sigma.iter().zip(&self.beta) {
            let d = s * s + mu;
            if d == 0.0 {
                continue;
            }
            hn += s * s * b * b / (d * d);
            rs += b * b / (d * d);
        }
        if self.outside > 0.0 {
            rs += self.outside / (mu * mu);
        }
        (hn, rs)
    }

    /// `q(μ) = μ²‖h‖²/‖Ah − y‖²`, increasing in `μ`.
    fn q(&self, mu: f64) -> f64 {
        let (hn, rs) = self.norms(mu);
        if rs == 0.0 {
            return f64::INFINITY;
        }
        hn / rs
    }

    fn q_at_zero(&self) -> f64 {
        if self.outside > 0.0 {
            return 0.0;
        }
        let cut = self.cutoff();
        let (mut hn, mut rs) = (0.0, 0.0);
        for (&s, &b) in self.sigma.iter().zip(&self.beta) {
            if s > cut {
                hn += b * b / (s * s);
                rs += b * b / s.powi(4);
            } else if b != 0.0 {
                return 0.0;
            }
        }
        if rs == 0.0 {
            return 0.0;
        }
        hn / rs
    }

    fn h(&self, mu: f64) -> DVector<f64> {
        let cut = self.cutoff();
        let coeff = DVector::from_iterator(
            self.sigma.len(),
            self.sigma.iter().zip(&self.beta).map(|(&s, &b)| {
                if mu == 0.0 {
                    if s > cut {
                        b / s
                    } else {
                        0.0
                    }
                } else {
                    s * b / (s * s + mu)
                }
            }),
        );
        &self.v * coeff
    }
}

/// Root of `q(μ) = ρ²` by the fixed point `μ ← ρ‖Ah − y‖/‖h‖`, with a
/// bisection on `log μ` as fallback. Returns `(μ, iterations, converged)`.
fn solve_mu(path: &TikhonovPath, rho: f64, opts: &SolverOptions) -> (f64, usize, bool) {
    let target = rho * rho;
    let mut mu = rho.max(f64::MIN_POSITIVE);
    let mut iters = 0;
    while iters < opts.max_iters {
        iters += 1;
        let q = path.q(mu);
        let next = if q.is_finite() && q > 0.0 { rho * mu / q.sqrt() } else { f64::NAN };
        if !next.is_finite() || next <= 0.0 {
            break;
        }
        let done = (next - mu).abs() <= opts.tol * (1.0 + mu);
        mu = next;
        if done {
            return (mu, iters, true);
        }
    }

    // bracket and bisect in log μ
    let (mut lo, mut hi) = (mu.max(1e-300), mu.max(1e-300));
    while path.q(lo) > target && lo > 1e-300 {
        lo *= 1e-3;
    }
    let mut grow = 0;
    while path.q(hi) < target {
        hi *= 1e3;
        grow += 1;
        if grow > 200 {
            return (mu, iters, false);
        }
    }
    let (mut a, mut b) = (lo.ln(), hi.ln());
    for _ in 0..300 {
        iters += 1;
        let m = 0.5 * (a + b);
        if path.q(m.exp()) < target {
            a = m;
        } else {
            b = m;
        }
        if b - a <= 1e-15 * (1.0 + m.abs()) {
            break;
        }
    }
    ((0.5 * (a + b)).exp(), iters, true)
}

fn robust_path(method: Method, psi: &DMatrix<f64>, y: &DVector<f64>, r: &DMatrix<f64>, rho: f64, opts: &SolverOptions) -> Result<EstimateResult> {
    check_dims(psi, y)?;
    check_rho(rho)?;
    opts.validate()?;
    let a = psi * r;
    let path = TikhonovPath::new(&a, y)?;
    let ynorm = y.norm();
    let finish = |h: DVector<f64>, mu: f64, iters: usize, converged: bool| -> Result<EstimateResult> {
        let g = r * &h;
        let obj = (psi * &g - y).norm() + rho * h.norm();
        let mut res = EstimateResult::new(method, g, obj)?;
        res.iterations = iters;
        res.converged = converged;
        res.certificate = Some(Certificate::Mu(mu));
        res.rho = Some(rho);
        Ok(res)
    };

    if ynorm == 0.0 || rho * ynorm >= (a.transpose() * y).norm() {
        let mut res = EstimateResult::new(method, DVector::zeros(psi.ncols()), ynorm)?;
        res.certificate = Some(Certificate::ZeroCorner);
        res.rho = Some(rho);
        return Ok(res);
    }
    if rho == 0.0 || path.q_at_zero() >= rho * rho {
        return finish(path.h(0.0), 0.0, 1, true);
    }
    let (mu, iters, converged) = solve_mu(&path, rho, opts);
    finish(path.h(mu), mu, iters, converged)
}

/// Kernel-based robust least squares `min ‖Ψg − y‖ + ρ‖R⁻¹g‖`, whose
/// worst case is taken over `‖ΔR‖_F ≤ ρ`. The minimizer is the RegLS
/// estimate with weight `μ`, returned as the certificate.
pub fn krls(psi: &DMatrix<f64>, y: &DVector<f64>, k: &KernelMatrix, rho: f64, opts: &SolverOptions) -> Result<EstimateResult> {
    check_kernel(psi, k)?;
    if !k.is_invertible() {
        return Err(Error::NotPositiveDefinite);
    }
    robust_path(Method::Krls, psi, y, k.factor(), rho, opts)
}

/// Robust least squares over the Frobenius ball `‖Δ‖_F ≤ ρ`.
pub fn rls(psi: &DMatrix<f64>, y: &DVector<f64>, rho: f64, opts: &SolverOptions) -> Result<EstimateResult> {
    let n = psi.ncols();
    robust_path(Method::Rls, psi, y, &DMatrix::identity(n, n), rho, opts)
}

/// Which norm of `g` the robustness term uses.
#[derive(Clone, Copy, PartialEq)]
enum Penalty {
    /// `‖g‖ = ‖Rh‖`
    Euclidean,
    /// `‖R⁻¹g‖ = ‖h‖`
    Kernel,
}

/// Majorization-minimization for `(‖Ah − y‖ + ρ‖Mh‖)² + λ‖h‖²`.
///
/// At `(r, n)` = current residual and penalty norms the bound
/// `(r' + ρn')² ≤ (1+t)r'² + (1+1/t)ρ²n'²`, `t = ρn/r`, is tight, so each step
/// solves a ridge system `(AᵀA + (ρr/n)MᵀM + λr/(r+ρn)·I)h = Aᵀy` and the
/// objective never increases.
fn regularized_robust(
    method: Method,
    penalty: Penalty,
    psi: &DMatrix<f64>,
    y: &DVector<f64>,
    k: &KernelMatrix,
    rho: f64,
    lambda: f64,
    opts: &SolverOptions,
) -> Result<EstimateResult> {
    check_dims(psi, y)?;
    check_kernel(psi, k)?;
    check_rho(rho)?;
    opts.validate()?;
    if !(lambda.is_finite() && lambda >= 0.0) {
        return Err(Error::Parameter(format!("lambda must be finite and nonnegative, got {lambda}")));
    }
    if penalty == Penalty::Kernel && !k.is_invertible() {
        return Err(Error::NotPositiveDefinite);
    }
    let r = k.factor();
    let a = psi * r;
    let n_g = a.ncols();
    let aty = a.transpose() * y;
    let ata = a.transpose() * &a;
    let p = match penalty {
        Penalty::Euclidean => r.transpose() * r,
        Penalty::Kernel => DMatrix::identity(n_g, n_g),
    };
    let pen_norm = |h: &DVector<f64>| match penalty {
        Penalty::Euclidean => (r * h).norm(),
        Penalty::Kernel => h.norm(),
    };
    let objective = |h: &DVector<f64>| {
        let rn = (&a * h - y).norm();
        (rn + rho * pen_norm(h)).powi(2) + lambda * h.norm_squared()
    };
    let finish = |h: DVector<f64>, iters: usize, converged: bool, cert: Option<Certificate>| -> Result<EstimateResult> {
        let obj = objective(&h);
        let mut res = EstimateResult::new(method, r * h, obj)?;
        res.iterations = iters;
        res.converged = converged;
        res.certificate = cert;
        res.rho = Some(rho);
        res.lambda = Some(lambda);
        Ok(res)
    };

    let ynorm = y.norm();
    // zero is optimal iff ‖M⁻ᵀAᵀy‖ ≤ ρ‖y‖
    let corner_lhs = match penalty {
        Penalty::Euclidean => (psi.transpose() * y).norm(),
        Penalty::Kernel => aty.norm(),
    };
    if ynorm == 0.0 || corner_lhs <= rho * ynorm {
        return finish(DVector::zeros(n_g), 0, true, Some(Certificate::ZeroCorner));
    }
    if rho == 0.0 {
        if lambda == 0.0 {
            let path = TikhonovPath::new(&a, y)?;
            return finish(path.h(0.0), 1, true, Some(Certificate::Mu(0.0)));
        }
        return finish(ridge(&a, y, lambda)?, 1, true, Some(Certificate::Mu(lambda)));
    }

    // eigenbasis of AᵀA makes each step O(n²) when M is the identity
    let eig = if penalty == Penalty::Kernel { Some(ata.clone().symmetric_eigen()) } else { None };
    let scale = ata.trace() / n_g as f64;
    let solve = |w_pen: f64, w_reg: f64| -> Result<DVector<f64>> {
        if let Some(e) = &eig {
            let c = e.eigenvectors.transpose() * &aty;
            let d = DVector::from_iterator(
                n_g,
                c.iter().zip(e.eigenvalues.iter()).map(|(ci, li)| ci / (li.max(0.0) + w_pen + w_reg)),
            );
            return Ok(&e.eigenvectors * d);
        }
        let mut m = &ata + &p * w_pen;
        for i in 0..n_g {
            m[(i, i)] += w_reg;
        }
        m.cholesky()
            .map(|c| c.solve(&aty))
            .ok_or_else(|| Error::Numerical("majorizer system is not positive definite".into()))
    };

    let mut h = ridge(&a, y, lambda.max(1e-8 * scale))?;
    let mut f = objective(&h);
    let mut iters = 0;
    let mut converged = false;
    while iters < opts.max_iters {
        iters += 1;
        let rn = (&a * &h - y).norm().max(1e-15 * ynorm);
        let nn = pen_norm(&h);
        if nn == 0.0 {
            return Err(Error::Numerical("majorization reached zero away from the optimum corner".into()));
        }
        let next = solve(rho * rn / nn, lambda * rn / (rn + rho * nn))?;
        let f_next = objective(&next);
        let step = (&next - &h).norm();
        let hn = next.norm();
        if f_next > f {
            // round-off floor reached
            converged = true;
            break;
        }
        h = next;
        f = f_next;
        if step <= opts.tol * hn.max(f64::MIN_POSITIVE) {
            converged = true;
            break;
        }
    }
    finish(h, iters, converged, None)
}

/// `min (‖Ψg − y‖ + ρ‖g‖)² + λgᵀK⁻¹g`: regularized robust least squares over
/// the Frobenius ball.
pub fn rregls(psi: &DMatrix<f64>, y: &DVector<f64>, k: &KernelMatrix, rho: f64, lambda: f64, opts: &SolverOptions) -> Result<EstimateResult> {
    regularized_robust(Method::RRegLs, Penalty::Euclidean, psi, y, k, rho, lambda, opts)
}

/// `min (‖Ψg − y‖ + ρ‖R⁻¹g‖)² + λgᵀK⁻¹g`: regularized robust least squares
/// over the kernel ball.
pub fn krregls(psi: &DMatrix<f64>, y: &DVector<f64>, k: &KernelMatrix, rho: f64, lambda: f64, opts: &SolverOptions) -> Result<EstimateResult> {
    regularized_robust(Method::KrRegLs, Penalty::Kernel, psi, y, k, rho, lambda, opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::{regls, rho_from_lambda};
    use crate::kernel::tc_kernel;
    use crate::regression::{build_phi, ls_estimate};
    use crate::testutil::{random_matrix, random_spd, random_vector};

    fn opts() -> SolverOptions {
        SolverOptions::fixed_point()
    }

    /// Objective evaluated along random directions around `g` never drops.
    fn assert_local_min(f: impl Fn(&DVector<f64>) -> f64, g: &DVector<f64>, seed: u64, rel: f64) {
        let f0 = f(g);
        let scale = g.norm().max(1e-3);
        for s in 0..200 {
            let d = random_vector(g.len(), seed * 1000 + s) * (scale * 1e-3);
            assert!(f(&(g + &d)) >= f0 - rel * f0.abs().max(1e-12), "descent direction found");
        }
    }

    #[test]
    fn krls_equals_regls_with_matched_rho() {
        for seed in 0..10 {
            let u = random_vector(30, seed);
            let phi = build_phi(u.as_slice(), 10).unwrap().into_matrix();
            let y = random_vector(30, seed + 100);
            let k = tc_kernel(1.0, 0.9, 10).unwrap();
            for lambda in [0.1, 1.0, 10.0] {
                let g_reg = regls(&phi, &y, &k, lambda).unwrap().g.into_vector();
                let rho = rho_from_lambda(&g_reg, &phi, &y, &k, lambda).unwrap();
                let res = krls(&phi, &y, &k, rho, &opts()).unwrap();
                assert!(res.converged);
                let rel = (res.g.as_vector() - &g_reg).norm() / g_reg.norm();
                assert!(rel <= 1e-6, "rel {rel}");
                assert!((res.mu().unwrap() - lambda).abs() <= 1e-6 * lambda);
            }
        }
    }

    #[test]
    fn krls_is_a_local_minimum() {
        let psi = random_matrix(25, 6, 3);
        let y = random_vector(25, 4);
        let k = KernelMatrix::new(random_spd(6, 5)).unwrap();
        let rho = 0.3;
        let res = krls(&psi, &y, &k, rho, &opts()).unwrap();
        let f = |g: &DVector<f64>| (&psi * g - &y).norm() + rho * k.inv_norm(g).unwrap();
        assert!((f(res.g.as_vector()) - res.objective).abs() < 1e-12 * res.objective);
        assert_local_min(f, res.g.as_vector(), 1, 1e-12);
    }

    #[test]
    fn rls_zero_rho_is_ls() {
        let psi = random_matrix(20, 4, 8);
        let y = random_vector(20, 9);
        let g = rls(&psi, &y, 0.0, &opts()).unwrap().g;
        let g_ls = ls_estimate(&psi, &y).unwrap();
        assert!((g.as_vector() - g_ls.as_vector()).norm() <= 1e-8 * g_ls.norm());
    }

    #[test]
    fn large_rho_gives_zero() {
        let psi = random_matrix(20, 4, 8);
        let y = random_vector(20, 9);
        let rho = 1.01 * (psi.transpose() * &y).norm() / y.norm();
        let res = rls(&psi, &y, rho, &opts()).unwrap();
        assert_eq!(res.g.as_vector(), &DVector::zeros(4));
        assert_eq!(res.certificate, Some(Certificate::ZeroCorner));
        // just below the threshold the estimate is nonzero
        let res = rls(&psi, &y, 0.95 * rho / 1.01, &opts()).unwrap();
        assert!(res.g.norm() > 0.0);
    }

    #[test]
    fn rls_shrinks_monotonically() {
        let psi = random_matrix(20, 4, 10);
        let y = random_vector(20, 11);
        let mut last = f64::INFINITY;
        for rho in [0.0, 0.1, 0.5, 1.0, 2.0, 3.0] {
            let n = rls(&psi, &y, rho, &opts()).unwrap().g.norm();
            assert!(n <= last + 1e-12);
            last = n;
        }
    }

    #[test]
    fn rls_beats_ls_in_worst_case() {
        let psi = random_matrix(15, 3, 12);
        let y = random_vector(15, 13);
        let rho = 0.8;
        let worst = |g: &DVector<f64>| (&psi * g - &y).norm() + rho * g.norm();
        let g_rls = rls(&psi, &y, rho, &opts()).unwrap().g.into_vector();
        let g_ls = ls_estimate(&psi, &y).unwrap().into_vector();
        assert!(worst(&g_rls) <= worst(&g_ls));
        assert_local_min(worst, &g_rls, 2, 1e-12);
    }

    #[test]
    fn rls_matches_scalar_root_oracle() {
        // For K = I the optimum is g = (ΨᵀΨ + μI)⁻¹Ψᵀy with μ = ρ‖Ψg − y‖/‖g‖;
        // scan μ on a fine grid and refine the sign change by bisection.
        let psi = random_matrix(12, 3, 14);
        let y = random_vector(12, 15);
        let rho = 0.5;
        let g_of = |mu: f64| (psi.transpose() * &psi + DMatrix::identity(3, 3) * mu).try_inverse().unwrap() * psi.transpose() * &y;
        let gap = |mu: f64| {
            let g = g_of(mu);
            mu * g.norm() - rho * (&psi * &g - &y).norm()
        };
        let (mut lo, mut hi) = (1e-8, 1e4);
        assert!(gap(lo) < 0.0 && gap(hi) > 0.0);
        for _ in 0..200 {
            let mid = (lo * hi).sqrt();
            if gap(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let oracle = g_of(lo);
        let g = rls(&psi, &y, rho, &opts()).unwrap().g.into_vector();
        assert!((g - &oracle).norm() <= 1e-9 * oracle.norm());
    }

    #[test]
    fn exact_fit_returns_min_norm_solution() {
        // underdetermined: y in range(Ψ), q(0+) is positive
        let psi = random_matrix(3, 6, 16);
        let y = random_vector(3, 17);
        let res = rls(&psi, &y, 1e-6, &opts()).unwrap();
        assert!((&psi * res.g.as_vector() - &y).norm() < 1e-8);
    }

    #[test]
    fn rregls_reductions() {
        let psi = random_matrix(20, 5, 18);
        let y = random_vector(20, 19);
        let k = tc_kernel(1.0, 0.8, 5).unwrap();
        let mm = SolverOptions::majorization();
        let g_reg = regls(&psi, &y, &k, 2.0).unwrap().g.into_vector();
        for est in [rregls(&psi, &y, &k, 0.0, 2.0, &mm).unwrap(), krregls(&psi, &y, &k, 0.0, 2.0, &mm).unwrap()] {
            assert!((est.g.as_vector() - &g_reg).norm() <= 1e-8 * g_reg.norm());
        }
        // λ = 0 leaves the squared robust objective, same minimizer as KRLS/RLS
        let rho = 0.4;
        let a = krregls(&psi, &y, &k, rho, 0.0, &mm).unwrap();
        let b = krls(&psi, &y, &k, rho, &opts()).unwrap();
        assert!((a.g.as_vector() - b.g.as_vector()).norm() <= 1e-6 * b.g.norm());
        let a = rregls(&psi, &y, &k, rho, 0.0, &mm).unwrap();
        let b = rls(&psi, &y, rho, &opts()).unwrap();
        assert!((a.g.as_vector() - b.g.as_vector()).norm() <= 1e-6 * b.g.norm());
    }

    #[test]
    fn rregls_is_a_local_minimum() {
        let psi = random_matrix(20, 5, 20);
        let y = random_vector(20, 21);
        let k = tc_kernel(1.0, 0.7, 5).unwrap();
        let kinv = k.inverse().unwrap();
        let (rho, lambda) = (0.5, 1.5);
        let mm = SolverOptions::majorization();
        let res = rregls(&psi, &y, &k, rho, lambda, &mm).unwrap();
        assert!(res.converged);
        let f = |g: &DVector<f64>| ((&psi * g - &y).norm() + rho * g.norm()).powi(2) + lambda * (g.transpose() * &kinv * g)[0];
        assert!((f(res.g.as_vector()) - res.objective).abs() <= 1e-9 * res.objective);
        assert_local_min(f, res.g.as_vector(), 3, 1e-12);

        let res = krregls(&psi, &y, &k, rho, lambda, &mm).unwrap();
        let f = |g: &DVector<f64>| ((&psi * g - &y).norm() + rho * k.inv_norm(g).unwrap()).powi(2) + lambda * (g.transpose() * &kinv * g)[0];
        assert_local_min(f, res.g.as_vector(), 4, 1e-12);
    }

    #[test]
    fn convexity_along_segments() {
        let psi = random_matrix(10, 3, 22);
        let y = random_vector(10, 23);
        let rho = 0.7;
        let f = |g: &DVector<f64>| (&psi * g - &y).norm() + rho * g.norm();
        for s in 0..50 {
            let g1 = random_vector(3, 100 + s);
            let g2 = random_vector(3, 200 + s);
            for t in [0.25, 0.5, 0.75] {
                let mid = &g1 * t + &g2 * (1.0 - t);
                assert!(f(&mid) <= t * f(&g1) + (1.0 - t) * f(&g2) + 1e-12);
            }
        }
    }

    #[test]
    fn negative_rho_rejected() {
        let psi = random_matrix(5, 2, 1);
        assert!(rls(&psi, &random_vector(5, 1), -1.0, &opts()).is_err());
    }
}
