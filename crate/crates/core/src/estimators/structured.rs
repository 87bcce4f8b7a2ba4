//! Structured (Toeplitz) uncertainty `Δ = Σ_k δ_k E^{(k)}`, `‖δ‖₂ ≤ ρ`.
//!
//! The perturbation of the regressor mirrors a perturbation of the input
//! sequence, so `Δg = M(g)δ` where `M(g)` is the convolution matrix of `g`.
//! The inner maximization `max_{‖δ‖≤ρ} ‖r + M(g)δ‖²` is a trust-region
//! subproblem, solved exactly through the eigendecomposition of
//! `C = MMᵀ` (the Toeplitz autocorrelation matrix of `g`).

use nalgebra::{DMatrix, DVector};

use super::{check_dims, check_kernel, ridge, Certificate, EstimateResult, Method, SolverOptions};
use crate::error::{Error, Result};
use crate::kernel::KernelMatrix;

/// Number of Toeplitz coefficients of an `n_d × n_g` perturbation.
pub fn n_coefficients(n_d: usize, n_g: usize) -> usize {
    n_d + n_g - 1
}

/// `Σ_k δ_k E^{(k)}`; coefficient `l` sits on the diagonal `i − j = l − (n_g − 1)`.
pub fn toeplitz_perturbation(delta: &DVector<f64>, n_d: usize, n_g: usize) -> Result<DMatrix<f64>> {
    if delta.len() != n_coefficients(n_d, n_g) {
        return Err(Error::Dimension(format!("expected {} coefficients, got {}", n_coefficients(n_d, n_g), delta.len())));
    }
    Ok(DMatrix::from_fn(n_d, n_g, |i, j| delta[i + n_g - 1 - j]))
}

/// Coefficients of the Toeplitz matrix closest to `delta` (diagonal means).
pub fn toeplitz_coefficients(delta: &DMatrix<f64>) -> DVector<f64> {
    let (n_d, n_g) = delta.shape();
    let mut sum = DVector::zeros(n_coefficients(n_d, n_g));
    let mut count = vec![0usize; sum.len()];
    for i in 0..n_d {
        for j in 0..n_g {
            let l = i + n_g - 1 - j;
            sum[l] += delta[(i, j)];
            count[l] += 1;
        }
    }
    for (s, c) in sum.iter_mut().zip(count) {
        *s /= c as f64;
    }
    sum
}

/// `M(g)` with `M(g)δ = Δ(δ)g`.
pub fn convolution_matrix(g: &DVector<f64>, n_d: usize) -> DMatrix<f64> {
    let n_g = g.len();
    DMatrix::from_fn(n_d, n_coefficients(n_d, n_g), |i, l| {
        // δ_l multiplies g_j with i − j = l − (n_g − 1)
        let j = i as isize + n_g as isize - 1 - l as isize;
        if j >= 0 && (j as usize) < n_g {
            g[j as usize]
        } else {
            0.0
        }
    })
}

#[derive(Debug, Clone)]
pub struct InnerMax {
    /// `max ‖r + M(g)δ‖²`
    pub value: f64,
    pub delta: DVector<f64>,
    /// Lagrange multiplier of the ball constraint.
    pub nu: f64,
    /// `g = 0`: every feasible δ is optimal; zero is returned.
    pub degenerate: bool,
    /// The maximizer needed a component along the top eigenvector.
    pub hard_case: bool,
}

/// Worst-case squared residual `max_{‖δ‖≤ρ} ‖y − (Ψ − Δ(δ))g‖²`.
pub fn structured_inner_max(g: &DVector<f64>, psi: &DMatrix<f64>, y: &DVector<f64>, rho: f64) -> Result<InnerMax> {
    check_dims(psi, y)?;
    if psi.ncols() != g.len() {
        return Err(Error::Dimension(format!("regressor has {} columns, g has {}", psi.ncols(), g.len())));
    }
    if !(rho.is_finite() && rho >= 0.0) {
        return Err(Error::Parameter(format!("rho must be finite and nonnegative, got {rho}")));
    }
    let n_d = psi.nrows();
    let r = y - psi * g;
    let zero = |degenerate| InnerMax {
        value: r.norm_squared(),
        delta: DVector::zeros(n_coefficients(n_d, g.len())),
        nu: 0.0,
        degenerate,
        hard_case: false,
    };
    if g.iter().all(|&v| v == 0.0) {
        return Ok(zero(true));
    }
    if rho == 0.0 {
        return Ok(zero(false));
    }

    let m = convolution_matrix(g, n_d);
    let c = autocorrelation_matrix(g, n_d);
    let eig = c.symmetric_eigen();
    let s: Vec<f64> = eig.eigenvalues.iter().map(|&v| v.max(0.0)).collect();
    let beta = eig.eigenvectors.transpose() * &r;
    let s_max = s.iter().copied().fold(0.0, f64::max);
    let top_tol = 1e-10 * s_max;
    let is_top = |i: usize| s[i] >= s_max - top_tol;
    let beta_top2: f64 = (0..n_d).filter(|&i| is_top(i)).map(|i| beta[i] * beta[i]).sum();
    let rnorm2 = r.norm_squared();

    // ‖δ(ν)‖² over the non-top part at ν = s_max decides the hard case
    let partial: f64 = (0..n_d)
        .filter(|&i| !is_top(i))
        .map(|i| s[i] * beta[i] * beta[i] / (s_max - s[i]).powi(2))
        .sum();
    let hard = beta_top2 <= (1e-14_f64).powi(2) * rnorm2.max(f64::MIN_POSITIVE) && partial <= rho * rho;

    let coeffs = |nu: f64, skip_top: bool| {
        DVector::from_iterator(
            n_d,
            (0..n_d).map(|i| if skip_top && is_top(i) { 0.0 } else { beta[i] / (nu - s[i]) }),
        )
    };
    let (nu, delta) = if hard {
        let w = &eig.eigenvectors * coeffs(s_max, true);
        let mut delta = m.transpose() * w;
        let top = (0..n_d).find(|&i| is_top(i)).expect("nonempty spectrum");
        let v1 = m.transpose() * eig.eigenvectors.column(top) / s_max.sqrt();
        let tau = (rho * rho - delta.norm_squared()).max(0.0).sqrt();
        delta += v1 * tau;
        (s_max, delta)
    } else {
        let nu = secular_root(&s, beta.as_slice(), rho, s_max, (m.transpose() * &r).norm());
        let w = &eig.eigenvectors * coeffs(nu, false);
        (nu, m.transpose() * w)
    };
    let value = (&r + &m * &delta).norm_squared();
    Ok(InnerMax { value, delta, nu, degenerate: false, hard_case: hard })
}

/// Symmetric Toeplitz `C_{ii'} = Σ_j g_j g_{j+|i−i'|}`, equal to `M(g)M(g)ᵀ`.
fn autocorrelation_matrix(g: &DVector<f64>, n_d: usize) -> DMatrix<f64> {
    let n_g = g.len();
    let acf: Vec<f64> = (0..n_d)
        .map(|l| if l < n_g { (0..n_g - l).map(|j| g[j] * g[j + l]).sum() } else { 0.0 })
        .collect();
    DMatrix::from_fn(n_d, n_d, |i, k| acf[i.abs_diff(k)])
}

/// ν > s_max with `Σ s_i β_i²/(ν − s_i)² = ρ²`, by safeguarded Newton on
/// `1/‖δ(ν)‖ − 1/ρ`, which is close to linear in ν.
fn secular_root(s: &[f64], beta: &[f64], rho: f64, s_max: f64, mtr: f64) -> f64 {
    let norm_and_slope = |nu: f64| {
        let (mut n2, mut d) = (0.0, 0.0);
        for (&si, &bi) in s.iter().zip(beta) {
            let gap = nu - si;
            n2 += si * bi * bi / (gap * gap);
            d += si * bi * bi / (gap * gap * gap);
        }
        (n2, -2.0 * d)
    };
    let mut lo = s_max;
    let mut hi = s_max + mtr / rho;
    let mut nu = hi;
    for _ in 0..200 {
        let (n2, dn2) = norm_and_slope(nu);
        if n2 > rho * rho {
            lo = nu;
        } else {
            hi = nu;
        }
        let n = n2.sqrt();
        let phi = 1.0 / n - 1.0 / rho;
        let dphi = -0.5 * dn2 / (n2 * n);
        let mut next = nu - phi / dphi;
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - nu).abs() <= 4.0 * f64::EPSILON * nu.abs().max(f64::MIN_POSITIVE) || hi - lo <= 4.0 * f64::EPSILON * hi {
            return next;
        }
        nu = next;
    }
    nu
}

/// Danskin subgradient of `φ(g) = max_δ ‖y − (Ψ − Δ)g‖²` at the maximizer.
fn worst_case_gradient(g: &DVector<f64>, psi: &DMatrix<f64>, y: &DVector<f64>, inner: &InnerMax) -> Result<DVector<f64>> {
    let pert = toeplitz_perturbation(&inner.delta, psi.nrows(), psi.ncols())?;
    let eff = psi - pert;
    Ok(eff.transpose() * (y - &eff * g) * -2.0)
}

/// Subgradient descent on `x ↦ φ(Rx) + λ‖x‖²` with normalized steps of
/// length `γ₀/√t`, `γ₀ = 0.1·step_scale·‖x_warm‖`, returning the best iterate.
fn subgradient_descent(
    method: Method,
    psi: &DMatrix<f64>,
    y: &DVector<f64>,
    r: Option<&DMatrix<f64>>,
    rho: f64,
    lambda: f64,
    warm: DVector<f64>,
    opts: &SolverOptions,
) -> Result<EstimateResult> {
    opts.validate()?;
    let to_g = |x: &DVector<f64>| match r {
        Some(r) => r * x,
        None => x.clone(),
    };
    let eval = |x: &DVector<f64>| -> Result<(f64, DVector<f64>, InnerMax)> {
        let g = to_g(x);
        let inner = structured_inner_max(&g, psi, y, rho)?;
        let mut grad = worst_case_gradient(&g, psi, y, &inner)?;
        if let Some(r) = r {
            grad = r.transpose() * grad;
        }
        grad += x * (2.0 * lambda);
        Ok((inner.value + lambda * x.norm_squared(), grad, inner))
    };

    let mut x = if opts.warm_start { warm } else { DVector::zeros(psi.ncols()) };
    let gamma0 = 0.1 * opts.step_scale * x.norm().max(1e-3 * y.norm() / psi.norm().max(f64::MIN_POSITIVE));
    let grad_scale = 2.0 * (psi.norm() + rho) * y.norm();
    let (f0, mut grad, inner0) = eval(&x)?;
    let mut best = (f0, x.clone(), inner0.delta);
    let mut iters = 0;
    while iters < opts.max_iters {
        let gn = grad.norm();
        if gn <= opts.tol * grad_scale {
            break;
        }
        iters += 1;
        x -= &grad * (gamma0 / (iters as f64).sqrt() / gn);
        let (f, gr, inner) = eval(&x)?;
        if !f.is_finite() {
            return Err(Error::Numerical(format!("{method}: non-finite objective")));
        }
        if f < best.0 {
            best = (f, x.clone(), inner.delta);
        }
        grad = gr;
    }
    let (f, x, delta) = best;
    let mut res = EstimateResult::new(method, to_g(&x), f)?;
    res.iterations = iters.max(1);
    res.certificate = Some(Certificate::WorstDelta(delta.iter().copied().collect()));
    res.rho = Some(rho);
    if lambda > 0.0 {
        res.lambda = Some(lambda);
    }
    Ok(res)
}

fn check_rho(rho: f64) -> Result<()> {
    if !(rho.is_finite() && rho >= 0.0) {
        return Err(Error::Parameter(format!("rho must be finite and nonnegative, got {rho}")));
    }
    Ok(())
}

/// Structured robust least squares `min_g max_{‖δ‖≤ρ} ‖y − (Ψ − Δ(δ))g‖²`,
/// warm-started at least squares.
pub fn srls(psi: &DMatrix<f64>, y: &DVector<f64>, rho: f64, opts: &SolverOptions) -> Result<EstimateResult> {
    check_dims(psi, y)?;
    check_rho(rho)?;
    let warm = match crate::regression::ls_estimate(psi, y) {
        Ok(g) => g.into_vector(),
        Err(Error::SingularRegressor { .. }) => ridge(psi, y, 1e-8 * psi.norm_squared() / psi.ncols() as f64)?,
        Err(e) => return Err(e),
    };
    subgradient_descent(Method::Srls, psi, y, None, rho, 0.0, warm, opts)
}

/// Structured robust regularized least squares
/// `min_g max_{‖δ‖≤ρ} ‖y − (Ψ − Δ(δ))g‖² + λgᵀK⁻¹g`, warm-started at RegLS.
pub fn srregls(psi: &DMatrix<f64>, y: &DVector<f64>, k: &KernelMatrix, rho: f64, lambda: f64, opts: &SolverOptions) -> Result<EstimateResult> {
    check_dims(psi, y)?;
    check_kernel(psi, k)?;
    check_rho(rho)?;
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::Parameter(format!("lambda must be positive, got {lambda}")));
    }
    let r = k.factor();
    let warm = ridge(&(psi * r), y, lambda)?;
    subgradient_descent(Method::SrRegLs, psi, y, Some(r), rho, lambda, warm, opts)
}
