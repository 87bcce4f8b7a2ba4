//! Hyperparameter tuning for the atomic kernel `S_η`.
//!
//! With `y ~ N(0, Σ_η)`, `Σ_η = Σ_i η_i B_i + σ²I` and `B_i = ΦS̄ⁱΦᵀ`, the
//! regularized negative log marginal likelihood splits into a convex part
//! `F(η) = ½yᵀΣ⁻¹y + λΣη_i` and `H(η) = −½ log det Σ`, where `−H` is
//! concave. Majorization-minimization replaces `−H` by its tangent at the
//! current point `γ`, giving `J(η, γ) = F(η) − H(γ) − ∇H(γ)ᵀ(η − γ)`,
//! which is convex in `η` and minimized by projected gradient.

use std::io::Write;
use std::ops::Range;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};
use crate::fmt17;
use crate::kernel::{assemble_s_eta, tc_kernel, AtomicDictionary, HyperParams, KernelMatrix};

/// Marginal-likelihood model for a fixed dataset, dictionary and noise level.
#[derive(Debug, Clone)]
pub struct MarginalModel {
    /// `Φ·f` for every real factor `f` of every `S̄ⁱ`, side by side.
    f: DMatrix<f64>,
    groups: Vec<Range<usize>>,
    y: DVector<f64>,
    sigma2: f64,
}

struct Factored {
    chol: Cholesky<f64, Dyn>,
    alpha: DVector<f64>,
}

impl MarginalModel {
    pub fn new(phi: &DMatrix<f64>, y: &DVector<f64>, dict: &AtomicDictionary, sigma2: f64) -> Result<Self> {
        if phi.nrows() != y.len() {
            return Err(Error::Dimension(format!("regressor has {} rows, y has {}", phi.nrows(), y.len())));
        }
        if phi.ncols() != dict.n_g() {
            return Err(Error::Dimension(format!("regressor has {} columns, dictionary n_g = {}", phi.ncols(), dict.n_g())));
        }
        if !(sigma2 > 0.0) || !sigma2.is_finite() {
            return Err(Error::Parameter(format!("noise variance must be positive, got {sigma2}")));
        }
        let mut cols = Vec::new();
        let mut groups = Vec::with_capacity(dict.n_eta());
        for k in 0..dict.n_eta() {
            let start = cols.len();
            for f in dict.real_factors(k) {
                cols.push(phi * f);
            }
            groups.push(start..cols.len());
        }
        Ok(Self { f: DMatrix::from_columns(&cols), groups, y: y.clone(), sigma2 })
    }

    pub fn n_eta(&self) -> usize {
        self.groups.len()
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    fn check(&self, eta: &[f64]) -> Result<()> {
        if eta.len() != self.n_eta() {
            return Err(Error::Dimension(format!("{} hyperparameters for {} atoms", eta.len(), self.n_eta())));
        }
        if eta.iter().any(|e| !(*e >= 0.0) || !e.is_finite()) {
            return Err(Error::Parameter("hyperparameters must be finite and nonnegative".into()));
        }
        Ok(())
    }

    /// `Σ_η = Σ_i η_i B_i + σ²I`.
    pub fn covariance(&self, eta: &[f64]) -> Result<DMatrix<f64>> {
        self.check(eta)?;
        let mut scaled = self.f.clone();
        for (range, &e) in self.groups.iter().zip(eta) {
            let s = e.sqrt();
            for j in range.clone() {
                scaled.column_mut(j).scale_mut(s);
            }
        }
        let n = self.y.len();
        let mut sigma = &scaled * scaled.transpose();
        for i in 0..n {
            sigma[(i, i)] += self.sigma2;
        }
        Ok(sigma)
    }

    fn factor(&self, eta: &[f64]) -> Result<Factored> {
        let chol = self.covariance(eta)?.cholesky().ok_or(Error::NotPositiveDefinite)?;
        let alpha = chol.solve(&self.y);
        Ok(Factored { chol, alpha })
    }

    fn l1(&self, eta: &[f64]) -> f64 {
        eta.iter().sum()
    }

    /// `F(η) = ½yᵀΣ⁻¹y + λΣη_i`.
    pub fn f_value(&self, eta: &[f64], lambda: f64) -> Result<f64> {
        let fc = self.factor(eta)?;
        Ok(0.5 * self.y.dot(&fc.alpha) + lambda * self.l1(eta))
    }

    /// `H(η) = −½ log det Σ_η`.
    pub fn h_value(&self, eta: &[f64]) -> Result<f64> {
        let fc = self.factor(eta)?;
        Ok(-log_det_half(&fc.chol))
    }

    /// `F − H`, the regularized negative log marginal likelihood up to a constant.
    pub fn map_objective(&self, eta: &[f64], lambda: f64) -> Result<f64> {
        let fc = self.factor(eta)?;
        Ok(0.5 * self.y.dot(&fc.alpha) + lambda * self.l1(eta) + log_det_half(&fc.chol))
    }

    /// `∂F/∂η_i = −½ Σ_j (f_ijᵀα)² + λ` with `α = Σ⁻¹y`.
    pub fn grad_f(&self, eta: &[f64], lambda: f64) -> Result<DVector<f64>> {
        let fc = self.factor(eta)?;
        Ok(self.grad_f_from(&fc.alpha, lambda))
    }

    fn grad_f_from(&self, alpha: &DVector<f64>, lambda: f64) -> DVector<f64> {
        let proj = self.f.transpose() * alpha;
        DVector::from_iterator(
            self.n_eta(),
            self.groups.iter().map(|r| -0.5 * r.clone().map(|j| proj[j] * proj[j]).sum::<f64>() + lambda),
        )
    }

    /// `∂H/∂η_i = −½ tr(Σ⁻¹B_i)`.
    pub fn grad_h(&self, eta: &[f64]) -> Result<DVector<f64>> {
        let fc = self.factor(eta)?;
        let x = fc
            .chol
            .l_dirty()
            .solve_lower_triangular(&self.f)
            .ok_or(Error::NotPositiveDefinite)?;
        let norms: Vec<f64> = x.column_iter().map(|c| c.norm_squared()).collect();
        Ok(DVector::from_iterator(
            self.n_eta(),
            self.groups.iter().map(|r| -0.5 * r.clone().map(|j| norms[j]).sum::<f64>()),
        ))
    }

    /// Majorizer `J(η, γ) = F(η) − H(γ) − ∇H(γ)ᵀ(η − γ)`.
    pub fn majorizer(&self, eta: &[f64], gamma: &[f64], lambda: f64) -> Result<f64> {
        self.check(gamma)?;
        let gh = self.grad_h(gamma)?;
        let lin: f64 = eta.iter().zip(gamma).zip(gh.iter()).map(|((e, g), d)| d * (e - g)).sum();
        Ok(self.f_value(eta, lambda)? - self.h_value(gamma)? - lin)
    }

    /// Uniform start `η_i = v` with `tr(Σ_i v B_i) = max(‖y‖² − σ²n_D, 10⁻³‖y‖²)`.
    pub fn initial_eta(&self) -> Vec<f64> {
        let y2 = self.y.norm_squared();
        let target = (y2 - self.sigma2 * self.y.len() as f64).max(1e-3 * y2);
        let total: f64 = self.f.norm_squared();
        let v = if total > 0.0 { target / total } else { 1.0 };
        vec![v; self.n_eta()]
    }

    /// `min_η F(η) + cᵀη` over `η ≥ 0` through its variational form
    /// `min_x ½‖y − Fx‖²/σ² + Σ_i √(2w_i)‖x_i‖`, `w_i = c_i + λ`, whose
    /// minimizer gives `η_i = ‖x_i‖/√(2w_i)`. Each group is normalized to
    /// unit Frobenius norm first, so atoms of very different energy are
    /// handled on an equal footing. Solved by FISTA with restart.
    fn group_lasso_solve(&self, start: &[f64], c: &DVector<f64>, lambda: f64, cfg: &TuneConfig) -> Result<(Vec<f64>, usize, bool)> {
        let scales: Vec<f64> = self
            .groups
            .iter()
            .map(|r| r.clone().map(|j| self.f.column(j).norm_squared()).sum::<f64>().sqrt().max(f64::MIN_POSITIVE))
            .collect();
        let weights: Vec<f64> = c.iter().map(|ci| (ci + lambda).max(f64::MIN_POSITIVE)).collect();
        let mut g = self.f.clone();
        let mut owner = vec![0; self.f.ncols()];
        for (k, r) in self.groups.iter().enumerate() {
            for j in r.clone() {
                g.column_mut(j).scale_mut(1.0 / scales[k]);
                owner[j] = k;
            }
        }
        // objective scaled by σ²: ½‖y − Gz‖² + Σ_i t_i‖z_i‖
        let thresh: Vec<f64> = weights.iter().zip(&scales).map(|(w, s)| self.sigma2 * (2.0 * w).sqrt() / s).collect();
        let prox = |v: &DVector<f64>, step: f64| -> DVector<f64> {
            let mut out = v.clone();
            for (k, r) in self.groups.iter().enumerate() {
                let n = r.clone().map(|j| v[j] * v[j]).sum::<f64>().sqrt();
                let shrink = if n > 0.0 { (1.0 - step * thresh[k] / n).max(0.0) } else { 0.0 };
                for j in r.clone() {
                    out[j] *= shrink;
                }
            }
            out
        };
        // warm start from x_i = η_i F_iᵀΣ⁻¹y, the inner minimizer at fixed η
        let alpha = self.factor(start)?.alpha;
        let proj = self.f.transpose() * &alpha;
        let mut z = DVector::from_iterator(proj.len(), (0..proj.len()).map(|j| proj[j] * start[owner[j]] * scales[owner[j]]));
        let gty = g.transpose() * &self.y;
        let smooth = |z: &DVector<f64>| 0.5 * (&self.y - &g * z).norm_squared();
        let grad = |z: &DVector<f64>| g.transpose() * (&g * z) - &gty;
        let mut lip = 1.0_f64;
        let mut v = z.clone();
        let mut t = 1.0_f64;
        let mut converged = false;
        let mut iters = cfg.inner_max_iters;
        for it in 1..=cfg.inner_max_iters {
            let gv = grad(&v);
            let fv = smooth(&v);
            let next = loop {
                let cand = prox(&(&v - &gv / lip), 1.0 / lip);
                let d = &cand - &v;
                if smooth(&cand) <= fv + gv.dot(&d) + 0.5 * lip * d.norm_squared() * (1.0 + 1e-12) {
                    break cand;
                }
                lip *= 2.0;
            };
            if (&v - &next).dot(&(&next - &z)) > 0.0 {
                t = 1.0;
            }
            let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
            let change = (&next - &z).norm();
            v = &next + (&next - &z) * ((t - 1.0) / t_next);
            z = next;
            t = t_next;
            if change <= cfg.inner_tol * z.norm().max(f64::MIN_POSITIVE) {
                converged = true;
                iters = it;
                break;
            }
        }
        let eta = self
            .groups
            .iter()
            .enumerate()
            .map(|(k, r)| {
                let n = r.clone().map(|j| z[j] * z[j]).sum::<f64>().sqrt();
                n / (scales[k] * (2.0 * weights[k]).sqrt())
            })
            .collect();
        Ok((eta, iters, converged))
    }

    /// `F(η) + cᵀη`, the convex MM subproblem objective.
    fn subproblem_value(&self, eta: &[f64], c: &DVector<f64>, lambda: f64) -> Result<f64> {
        let lin: f64 = eta.iter().zip(c.iter()).map(|(e, ci)| e * ci).sum();
        Ok(self.f_value(eta, lambda)? + lin)
    }

    /// One MM step: group-lasso solve, with projected gradient as the
    /// fallback whenever it fails to improve on the current point.
    fn mm_step(&self, gamma: &[f64], c: &DVector<f64>, lambda: f64, cfg: &TuneConfig) -> Result<(Vec<f64>, bool)> {
        let before = self.subproblem_value(gamma, c, lambda)?;
        if let Ok((eta, _, ok)) = self.group_lasso_solve(gamma, c, lambda, cfg) {
            if let Ok(after) = self.subproblem_value(&eta, c, lambda) {
                if after <= before {
                    return Ok((eta, ok));
                }
            }
        }
        let (eta, _, ok) = self.inner_solve(gamma, c, lambda, cfg)?;
        Ok((eta, ok))
    }

    /// `min_η F(η) + cᵀη` over `η ≥ 0` by projected gradient with
    /// Barzilai–Borwein initial steps and Armijo backtracking.
    /// Returns `(η, iterations, converged)`.
    fn inner_solve(&self, start: &[f64], c: &DVector<f64>, lambda: f64, cfg: &TuneConfig) -> Result<(Vec<f64>, usize, bool)> {
        let value_grad = |eta: &[f64]| -> Result<(f64, DVector<f64>)> {
            let fc = self.factor(eta)?;
            let lin: f64 = eta.iter().zip(c.iter()).map(|(e, ci)| e * ci).sum();
            let v = 0.5 * self.y.dot(&fc.alpha) + lambda * self.l1(eta) + lin;
            Ok((v, self.grad_f_from(&fc.alpha, lambda) + c))
        };
        let proj_gap = |eta: &[f64], g: &DVector<f64>| {
            eta.iter().zip(g.iter()).map(|(e, gi)| (e - (e - gi).max(0.0)).abs()).fold(0.0, f64::max)
        };
        let mut eta = start.to_vec();
        let (mut f, mut g) = value_grad(&eta)?;
        let gap0 = proj_gap(&eta, &g).max(f64::MIN_POSITIVE);
        let scale = eta.iter().copied().fold(0.0, f64::max).max(1e-12);
        let mut step = scale / g.amax().max(f64::MIN_POSITIVE);
        for it in 1..=cfg.inner_max_iters {
            if proj_gap(&eta, &g) <= cfg.inner_tol * gap0 {
                return Ok((eta, it - 1, true));
            }
            let mut accepted = None;
            for _ in 0..60 {
                let cand: Vec<f64> = eta.iter().zip(g.iter()).map(|(e, gi)| (e - step * gi).max(0.0)).collect();
                let decrease: f64 = cand.iter().zip(&eta).zip(g.iter()).map(|((a, b), gi)| gi * (a - b)).sum();
                if let Ok((fc, gc)) = value_grad(&cand) {
                    if fc <= f + 1e-4 * decrease {
                        accepted = Some((cand, fc, gc));
                        break;
                    }
                }
                step *= 0.5;
            }
            let Some((cand, fc, gc)) = accepted else {
                // no decrease possible at machine precision
                return Ok((eta, it, true));
            };
            let s: Vec<f64> = cand.iter().zip(&eta).map(|(a, b)| a - b).collect();
            let yv: Vec<f64> = gc.iter().zip(g.iter()).map(|(a, b)| a - b).collect();
            let sy: f64 = s.iter().zip(&yv).map(|(a, b)| a * b).sum();
            let ss: f64 = s.iter().map(|a| a * a).sum();
            step = if sy > 0.0 { ss / sy } else { step * 2.0 };
            let done = f - fc <= f64::EPSILON * f.abs();
            eta = cand;
            f = fc;
            g = gc;
            if done {
                return Ok((eta, it, true));
            }
        }
        let ok = proj_gap(&eta, &g) <= cfg.inner_tol * gap0;
        Ok((eta, cfg.inner_max_iters, ok))
    }
}

fn log_det_half(chol: &Cholesky<f64, Dyn>) -> f64 {
    chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TuneConfig {
    pub lambda: f64,
    pub mm_iters: usize,
    pub inner_max_iters: usize,
    pub inner_tol: f64,
}

impl Default for TuneConfig {
    fn default() -> Self {
        Self { lambda: 0.0, mm_iters: 5, inner_max_iters: 2000, inner_tol: 1e-8 }
    }
}

impl TuneConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return Err(Error::Parameter(format!("lambda must be finite and nonnegative, got {}", self.lambda)));
        }
        if self.mm_iters == 0 || self.inner_max_iters == 0 {
            return Err(Error::Parameter("iteration counts must be positive".into()));
        }
        if !(self.inner_tol > 0.0) {
            return Err(Error::Parameter("inner tolerance must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct TuneResult {
    pub eta: HyperParams,
    /// MAP objective `F − H` at the start and after every MM iteration.
    pub trace: Vec<f64>,
    pub converged: bool,
    pub lambda: f64,
}

impl TuneResult {
    pub fn write_trace<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "iter,objective")?;
        for (i, v) in self.trace.iter().enumerate() {
            writeln!(w, "{i},{}", fmt17(*v))?;
        }
        Ok(())
    }
}

/// Robust empirical Bayes: MM on the ℓ₁-regularized marginal likelihood.
pub fn reb_solve(model: &MarginalModel, cfg: &TuneConfig) -> Result<TuneResult> {
    cfg.validate()?;
    let mut eta = model.initial_eta();
    let mut trace = vec![model.map_objective(&eta, cfg.lambda)?];
    let mut converged = true;
    for _ in 0..cfg.mm_iters {
        let c = -model.grad_h(&eta)?;
        let (next, ok) = model.mm_step(&eta, &c, cfg.lambda, cfg)?;
        converged &= ok;
        eta = next;
        trace.push(model.map_objective(&eta, cfg.lambda)?);
    }
    Ok(TuneResult { eta: HyperParams::new(eta)?, trace, converged, lambda: cfg.lambda })
}

/// Plain empirical Bayes, the `λ = 0` case of [`reb_solve`].
pub fn eb_solve(model: &MarginalModel, cfg: &TuneConfig) -> Result<TuneResult> {
    reb_solve(model, &TuneConfig { lambda: 0.0, ..*cfg })
}

/// `σ̂² = ‖y − Φĝ_LS‖² / (n_D − n_g)`.
pub fn estimate_noise_var(phi: &DMatrix<f64>, y: &DVector<f64>) -> Result<f64> {
    let (n_d, n_g) = phi.shape();
    if n_d <= n_g {
        return Err(Error::InsufficientData(format!("{n_d} samples cannot estimate noise with {n_g} parameters")));
    }
    let g = crate::regression::ls_estimate(phi, y)?;
    Ok((y - phi * g.as_vector()).norm_squared() / (n_d - n_g) as f64)
}

/// Posterior mean `SΦᵀ(ΦSΦᵀ + σ²I)⁻¹y`.
pub fn posterior_mean(phi: &DMatrix<f64>, y: &DVector<f64>, s: &DMatrix<f64>, sigma2: f64) -> Result<DVector<f64>> {
    if phi.nrows() != y.len() || s.nrows() != phi.ncols() || !s.is_square() {
        return Err(Error::Dimension("posterior mean: incompatible shapes".into()));
    }
    if !(sigma2 > 0.0) {
        return Err(Error::Parameter(format!("noise variance must be positive, got {sigma2}")));
    }
    let ps = phi * s;
    let mut sigma = &ps * phi.transpose();
    for i in 0..sigma.nrows() {
        sigma[(i, i)] += sigma2;
    }
    let alpha = sigma.cholesky().ok_or(Error::NotPositiveDefinite)?.solve(y);
    Ok(ps.transpose() * alpha)
}

/// Impulse response estimate from tuned hyperparameters.
pub fn eb_estimate(phi: &DMatrix<f64>, y: &DVector<f64>, dict: &AtomicDictionary, eta: &HyperParams, sigma2: f64) -> Result<DVector<f64>> {
    posterior_mean(phi, y, &assemble_s_eta(dict, eta)?, sigma2)
}

#[derive(Debug, Clone)]
pub struct CvResult {
    pub best: f64,
    /// `(parameter, validation SSE)`; failed fits score `+∞`.
    pub scores: Vec<(f64, f64)>,
}

/// Chronological hold-out: fit on the first 70 % of the rows of `Φ`,
/// score the one-step predicted output on the rest. Ties go to the
/// smaller parameter.
pub fn cross_validate<F>(phi: &DMatrix<f64>, y: &DVector<f64>, grid: &[f64], mut fit: F) -> Result<CvResult>
where
    F: FnMut(&DMatrix<f64>, &DVector<f64>, f64) -> Result<DVector<f64>>,
{
    if grid.is_empty() {
        return Err(Error::Parameter("empty cross-validation grid".into()));
    }
    let n = y.len();
    let n_train = (7 * n) / 10;
    if n_train == 0 || n_train == n {
        return Err(Error::InsufficientData(format!("{n} samples are too few to split")));
    }
    let train_phi = phi.rows(0, n_train).clone_owned();
    let train_y = y.rows(0, n_train).clone_owned();
    let val_phi = phi.rows(n_train, n - n_train);
    let val_y = y.rows(n_train, n - n_train);
    let mut order: Vec<f64> = grid.to_vec();
    order.sort_by(|a, b| a.total_cmp(b));
    let mut scores = Vec::with_capacity(order.len());
    let mut best: Option<(f64, f64)> = None;
    for &p in &order {
        let score = match fit(&train_phi, &train_y, p) {
            Ok(g) => (val_y - val_phi * g).norm_squared(),
            Err(_) => f64::INFINITY,
        };
        let score = if score.is_nan() { f64::INFINITY } else { score };
        scores.push((p, score));
        if score.is_finite() && best.is_none_or(|(_, s)| score < s) {
            best = Some((p, score));
        }
    }
    let (best, _) = best.ok_or_else(|| Error::Numerical("every cross-validation fit failed".into()))?;
    Ok(CvResult { best, scores })
}

/// `n` points from `10^a` to `10^b`.
pub fn logspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    linspace(a, b, n).into_iter().map(|e| 10f64.powf(e)).collect()
}

pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![a],
        _ => (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect(),
    }
}

#[derive(Debug, Clone)]
pub struct TcFit {
    pub c: f64,
    pub alpha: f64,
    /// Negative log marginal likelihood (up to a constant) at the optimum.
    pub nll: f64,
    pub kernel: KernelMatrix,
}

/// Negative log marginal likelihood `½yᵀΣ⁻¹y + ½ log det Σ`, `Σ = ΦKΦᵀ + σ²I`.
pub fn kernel_nll(phi: &DMatrix<f64>, y: &DVector<f64>, k: &KernelMatrix, sigma2: f64) -> Result<f64> {
    let a = phi * k.factor();
    let mut sigma = &a * a.transpose();
    for i in 0..sigma.nrows() {
        sigma[(i, i)] += sigma2;
    }
    let chol = sigma.cholesky().ok_or(Error::NotPositiveDefinite)?;
    Ok(0.5 * y.dot(&chol.solve(y)) + log_det_half(&chol))
}

/// Empirical-Bayes TC kernel over the grid `c ∈ 10^[−2,2]` (13 points) ×
/// `α ∈ [0.5, 0.99]` (13 points).
pub fn tc_empirical_bayes(phi: &DMatrix<f64>, y: &DVector<f64>, sigma2: f64) -> Result<TcFit> {
    tc_grid_search(phi, y, sigma2, &logspace(-2.0, 2.0, 13), &linspace(0.5, 0.99, 13))
}

pub fn tc_grid_search(phi: &DMatrix<f64>, y: &DVector<f64>, sigma2: f64, c_grid: &[f64], alpha_grid: &[f64]) -> Result<TcFit> {
    let n_g = phi.ncols();
    let mut best: Option<TcFit> = None;
    for &alpha in alpha_grid {
        for &c in c_grid {
            let k = tc_kernel(c, alpha, n_g)?;
            let nll = match kernel_nll(phi, y, &k, sigma2) {
                Ok(v) => v,
                Err(_) => continue,
            };
            if best.as_ref().is_none_or(|b| nll < b.nll) {
                best = Some(TcFit { c, alpha, nll, kernel: k });
            }
        }
    }
    best.ok_or(Error::NotPositiveDefinite)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::regls;
    use crate::kernel::{build_grid, AtomicDictionary, C64};
    use crate::testutil::{random_matrix, random_vector};

    fn setup(seed: u64) -> (MarginalModel, AtomicDictionary) {
        let dict = build_grid(4, 3, 0.5, 0.95, 10.0, 10).unwrap();
        let phi = random_matrix(30, 10, seed);
        let y = random_vector(30, seed + 1);
        (MarginalModel::new(&phi, &y, &dict, 0.1).unwrap(), dict)
    }

    fn point(n: usize, seed: u64) -> Vec<f64> {
        random_vector(n, seed).iter().map(|v| 0.05 + v.abs()).collect()
    }

    #[test]
    fn covariance_matches_assembled_kernel() {
        let dict = build_grid(4, 2, 0.5, 0.9, 10.0, 8).unwrap();
        let phi = random_matrix(12, 8, 2);
        let y = random_vector(12, 3);
        let m = MarginalModel::new(&phi, &y, &dict, 0.3).unwrap();
        let eta = point(dict.n_eta(), 4);
        let s = assemble_s_eta(&dict, &HyperParams::new(eta.clone()).unwrap()).unwrap();
        let oracle = &phi * s * phi.transpose() + DMatrix::identity(12, 12) * 0.3;
        assert!((m.covariance(&eta).unwrap() - &oracle).norm() <= 1e-10 * oracle.norm());
    }

    #[test]
    fn gradients_match_finite_differences() {
        let (m, dict) = setup(5);
        for s in 0..5 {
            let eta = point(dict.n_eta(), 10 + s);
            let gf = m.grad_f(&eta, 0.7).unwrap();
            let gh = m.grad_h(&eta).unwrap();
            for i in [0, 3, dict.n_eta() - 1] {
                let h = 1e-6 * eta[i];
                let mut p = eta.clone();
                let mut q = eta.clone();
                p[i] += h;
                q[i] -= h;
                let fd_f = (m.f_value(&p, 0.7).unwrap() - m.f_value(&q, 0.7).unwrap()) / (2.0 * h);
                let fd_h = (m.h_value(&p).unwrap() - m.h_value(&q).unwrap()) / (2.0 * h);
                assert!((fd_f - gf[i]).abs() <= 1e-5 * gf[i].abs().max(1e-8));
                assert!((fd_h - gh[i]).abs() <= 1e-5 * gh[i].abs().max(1e-8));
            }
        }
    }

    #[test]
    fn majorizer_bounds_and_touches() {
        let (m, dict) = setup(6);
        for s in 0..10 {
            let eta = point(dict.n_eta(), 100 + s);
            let gamma = point(dict.n_eta(), 200 + s);
            let obj = m.map_objective(&eta, 0.5).unwrap();
            assert!(m.majorizer(&eta, &gamma, 0.5).unwrap() >= obj - 1e-12 * obj.abs());
            assert!((m.majorizer(&eta, &eta, 0.5).unwrap() - obj).abs() <= 1e-10 * obj.abs());
        }
    }

    #[test]
    fn mm_trace_is_monotone() {
        let (m, _) = setup(7);
        for lambda in [0.0, 1.0, 10.0] {
            let res = reb_solve(&m, &TuneConfig { lambda, ..TuneConfig::default() }).unwrap();
            assert_eq!(res.trace.len(), 6);
            for w in res.trace.windows(2) {
                assert!(w[1] <= w[0] + 1e-9, "{w:?}");
            }
        }
    }

    #[test]
    fn group_lasso_solves_the_convex_subproblem() {
        let (m, dict) = setup(21);
        let cfg = TuneConfig { inner_max_iters: 20_000, inner_tol: 1e-12, ..TuneConfig::default() };
        for (s, lambda) in [(0, 0.0), (1, 0.3)] {
            let gamma = point(dict.n_eta(), 30 + s);
            let c = -m.grad_h(&gamma).unwrap();
            let (fast, _, ok) = m.group_lasso_solve(&gamma, &c, lambda, &cfg).unwrap();
            assert!(ok);
            let (slow, _, _) = m.inner_solve(&gamma, &c, lambda, &cfg).unwrap();
            let vf = m.subproblem_value(&fast, &c, lambda).unwrap();
            let vs = m.subproblem_value(&slow, &c, lambda).unwrap();
            assert!(vf <= vs + 1e-8 * vs.abs(), "lambda {lambda}: {vf} vs {vs}");
            // first-order optimality: gradient ≥ 0, and ≈ 0 on the support
            let g = m.grad_f(&fast, lambda).unwrap() + &c;
            let top = fast.iter().copied().fold(0.0, f64::max);
            for (e, gi) in fast.iter().zip(g.iter()) {
                let tol = 1e-5 * c.amax();
                assert!(*gi >= -tol);
                if *e > 1e-6 * top {
                    assert!(gi.abs() <= tol);
                }
            }
        }
    }

    #[test]
    fn eb_is_reb_at_zero_lambda() {
        let (m, _) = setup(8);
        let a = eb_solve(&m, &TuneConfig { lambda: 3.0, ..TuneConfig::default() }).unwrap();
        let b = reb_solve(&m, &TuneConfig::default()).unwrap();
        assert_eq!(a.eta.as_slice(), b.eta.as_slice());
        assert_eq!(a.lambda, 0.0);
    }

    #[test]
    fn single_atom_matches_golden_section() {
        // one real pole: F − H is a function of a scalar; compare with a
        // golden-section search on the directly assembled likelihood
        let dict = AtomicDictionary::new(&[C64::new(0.7, 0.0)], 10).unwrap();
        let phi = random_matrix(40, 10, 9);
        let g = dict.real_factors(0)[0].clone();
        let noise = random_vector(40, 10) * 0.3;
        let y = &phi * g * 2.0 + noise;
        let m = MarginalModel::new(&phi, &y, &dict, 0.09).unwrap();
        let cfg = TuneConfig { mm_iters: 60, ..TuneConfig::default() };
        let eta = eb_solve(&m, &cfg).unwrap().eta.as_slice()[0];

        let f = |e: f64| m.map_objective(&[e], 0.0).unwrap();
        let (mut a, mut b) = (1e-6, 100.0);
        let r = 0.5 * (5f64.sqrt() - 1.0);
        for _ in 0..200 {
            let c = b - r * (b - a);
            let d = a + r * (b - a);
            if f(c) < f(d) {
                b = d;
            } else {
                a = c;
            }
        }
        let oracle = 0.5 * (a + b);
        assert!((eta - oracle).abs() <= 1e-4 * oracle, "{eta} vs {oracle}");
    }

    #[test]
    fn posterior_mean_is_regls() {
        let phi = random_matrix(15, 5, 11);
        let y = random_vector(15, 12);
        let dict = build_grid(3, 2, 0.5, 0.9, 10.0, 5).unwrap();
        let eta = HyperParams::new(point(dict.n_eta(), 13)).unwrap();
        let s = assemble_s_eta(&dict, &eta).unwrap();
        let pm = posterior_mean(&phi, &y, &s, 0.2).unwrap();
        let k = KernelMatrix::psd(s).unwrap();
        let rg = regls(&phi, &y, &k, 0.2).unwrap().g.into_vector();
        assert!((pm - &rg).norm() <= 1e-8 * rg.norm());
    }

    #[test]
    fn noise_variance_is_unbiased_scale() {
        let phi = random_matrix(400, 4, 14);
        let g = random_vector(4, 15);
        let y = &phi * g + random_vector(400, 16) * 0.5;
        let s2 = estimate_noise_var(&phi, &y).unwrap();
        assert!((s2 - 0.25).abs() < 0.05);
        assert!(estimate_noise_var(&random_matrix(3, 4, 1), &random_vector(3, 1)).is_err());
    }

    #[test]
    fn cross_validation_prefers_smaller_on_ties() {
        let phi = random_matrix(20, 2, 17);
        let y = random_vector(20, 18);
        let cv = cross_validate(&phi, &y, &[3.0, 1.0, 2.0], |_, _, _| Ok(DVector::zeros(2))).unwrap();
        assert_eq!(cv.best, 1.0);
        let cv = cross_validate(&phi, &y, &[1.0, 2.0], |_, _, p| {
            if p < 1.5 {
                Err(Error::NotPositiveDefinite)
            } else {
                Ok(DVector::zeros(2))
            }
        })
        .unwrap();
        assert_eq!(cv.best, 2.0);
        assert!(cv.scores[0].1.is_infinite());
    }

    #[test]
    fn cross_validation_picks_the_better_fit() {
        let phi = random_matrix(40, 3, 19);
        let g0 = random_vector(3, 20);
        let y = &phi * &g0;
        let cv = cross_validate(&phi, &y, &[0.0, 1.0], |_, _, p| Ok(&g0 * p)).unwrap();
        assert_eq!(cv.best, 1.0);
    }

    #[test]
    fn tc_grid_recovers_generating_decay() {
        let phi = random_matrix(200, 20, 21);
        let k = tc_kernel(1.0, 0.8, 20).unwrap();
        let g = crate::kernel::sample_prior(k.matrix(), 3).unwrap().into_vector();
        let y = &phi * g + random_vector(200, 22) * 0.01;
        let fit = tc_empirical_bayes(&phi, &y, 1e-4).unwrap();
        assert!(fit.alpha > 0.6 && fit.alpha < 0.95, "alpha = {}", fit.alpha);
    }

    #[test]
    fn spacing_helpers() {
        assert_eq!(linspace(0.0, 1.0, 3), vec![0.0, 0.5, 1.0]);
        let l = logspace(-1.0, 1.0, 3);
        assert!((l[0] - 0.1).abs() < 1e-15 && l[1] == 1.0 && l[2] == 10.0);
    }

    #[test]
    fn trace_csv_header() {
        let (m, _) = setup(23);
        let res = reb_solve(&m, &TuneConfig { mm_iters: 2, ..TuneConfig::default() }).unwrap();
        let mut buf = Vec::new();
        res.write_trace(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("iter,objective\n0,"));
        assert_eq!(text.lines().count(), 4);
    }
}
