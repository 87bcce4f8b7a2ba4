//! Atomic-norm baseline `min_c ‖y − ΦAc‖² + w‖c‖₁` over the real-ified
//! atom dictionary, solved by FISTA with backtracking.

use nalgebra::{DMatrix, DVector};

use super::{check_dims, EstimateResult, Method, SolverOptions};
use crate::error::{Error, Result};
use crate::kernel::AtomicDictionary;

fn soft_threshold(x: &DVector<f64>, t: f64) -> DVector<f64> {
    x.map(|v| v.signum() * (v.abs() - t).max(0.0))
}

/// FISTA with adaptive restart on `‖y − Xc‖² + w‖c‖₁`. Returns `(c, iterations, converged)`.
pub(crate) fn lasso(x: &DMatrix<f64>, y: &DVector<f64>, w: f64, opts: &SolverOptions) -> (DVector<f64>, usize, bool) {
    let p = x.ncols();
    let xty = x.transpose() * y;
    if xty.amax() * 2.0 <= w {
        return (DVector::zeros(p), 0, true);
    }
    let smooth = |c: &DVector<f64>| (y - x * c).norm_squared();
    let grad = |c: &DVector<f64>| (x.transpose() * (x * c) - &xty) * 2.0;
    let mut lip = 2.0 * x.norm_squared() / p.max(1) as f64;
    let mut c = DVector::zeros(p);
    let mut z = c.clone();
    let mut t = 1.0_f64;
    for it in 1..=opts.max_iters {
        let gz = grad(&z);
        let fz = smooth(&z);
        let next = loop {
            let cand = soft_threshold(&(&z - &gz / lip), w / lip);
            let d = &cand - &z;
            if smooth(&cand) <= fz + gz.dot(&d) + 0.5 * lip * d.norm_squared() * (1.0 + 1e-12) {
                break cand;
            }
            lip *= 2.0;
        };
        // gradient-based adaptive restart keeps the momentum from overshooting
        if (&z - &next).dot(&(&next - &c)) > 0.0 {
            t = 1.0;
        }
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        let change = (&next - &c).norm();
        z = &next + (&next - &c) * ((t - 1.0) / t_next);
        c = next;
        t = t_next;
        if change <= opts.tol * c.norm().max(1.0) {
            return (c, it, true);
        }
    }
    (c, opts.max_iters, false)
}

/// Atomic-norm regularized estimate `g = A c`. The weight bounds
/// `‖c‖₁`, which equals the atomic norm of `g` when the atoms' real parts
/// and imaginary parts are taken as separate columns.
pub fn atom_estimate(phi: &DMatrix<f64>, y: &DVector<f64>, dict: &AtomicDictionary, weight: f64, opts: &SolverOptions) -> Result<EstimateResult> {
    check_dims(phi, y)?;
    opts.validate()?;
    if dict.n_g() != phi.ncols() {
        return Err(Error::Dimension(format!("dictionary has length {}, regressor has {} columns", dict.n_g(), phi.ncols())));
    }
    if !(weight.is_finite() && weight >= 0.0) {
        return Err(Error::Parameter(format!("atomic weight must be finite and nonnegative, got {weight}")));
    }
    let atoms = dict.real_atom_matrix();
    let x = phi * &atoms;
    let (c, iters, converged) = lasso(&x, y, weight, opts);
    let obj = (y - &x * &c).norm_squared() + weight * c.lp_norm(1);
    let mut res = EstimateResult::new(Method::Atom, &atoms * c, obj)?;
    res.iterations = iters.max(1);
    res.converged = converged;
    res.lambda = Some(weight);
    Ok(res)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{build_grid, C64};
    use crate::testutil::{random_matrix, random_vector};

    /// Cyclic coordinate descent, an independent lasso oracle.
    fn coordinate_descent(x: &DMatrix<f64>, y: &DVector<f64>, w: f64) -> DVector<f64> {
        let p = x.ncols();
        let mut c = DVector::zeros(p);
        let mut r = y.clone();
        for _ in 0..20_000 {
            let mut biggest = 0.0_f64;
            for j in 0..p {
                let col = x.column(j);
                let nj = col.norm_squared();
                let rho: f64 = col.dot(&r) + nj * c[j];
                let new = rho.signum() * (rho.abs() - w / 2.0).max(0.0) / nj;
                let d = new - c[j];
                if d != 0.0 {
                    r -= col * d;
                    c[j] = new;
                }
                biggest = biggest.max(d.abs());
            }
            if biggest < 1e-15 {
                break;
            }
        }
        c
    }

    #[test]
    fn matches_coordinate_descent() {
        let x = random_matrix(20, 8, 1);
        let y = random_vector(20, 2);
        for w in [0.1, 1.0, 5.0] {
            let (c, _, conv) = lasso(&x, &y, w, &SolverOptions { tol: 1e-13, max_iters: 50_000, ..SolverOptions::proximal() });
            assert!(conv);
            let oracle = coordinate_descent(&x, &y, w);
            assert!((&c - &oracle).norm() <= 1e-7 * oracle.norm().max(1.0), "w = {w}");
        }
    }

    #[test]
    fn large_weight_zero_solution() {
        let x = random_matrix(10, 4, 3);
        let y = random_vector(10, 4);
        let w = 2.0 * (x.transpose() * &y).amax() * 1.01;
        let (c, _, _) = lasso(&x, &y, w, &SolverOptions::proximal());
        assert_eq!(c, DVector::zeros(4));
    }

    #[test]
    fn recovers_single_real_pole_system() {
        let dict = build_grid(4, 3, 0.5, 0.9, 10.0, 20).unwrap();
        let pole = dict.poles().iter().position(|p| p.im == 0.0 && p.re > 0.0).unwrap();
        let g: DVector<f64> = dict.atom(pole).map(|z: C64| z.re);
        let u = random_vector(60, 5);
        let phi = crate::regression::build_phi(u.as_slice(), 20).unwrap().into_matrix();
        let y = &phi * &g;
        let res = atom_estimate(&phi, &y, &dict, 1e-3, &SolverOptions::proximal()).unwrap();
        assert!((res.g.as_vector() - &g).norm() <= 1e-2 * g.norm());
        assert!(atom_estimate(&phi, &y, &dict, -1.0, &SolverOptions::proximal()).is_err());
    }

    #[test]
    fn zero_weight_fits_data() {
        let x = random_matrix(10, 3, 6);
        let y = random_vector(10, 7);
        let (c, _, _) = lasso(&x, &y, 0.0, &SolverOptions { max_iters: 100_000, tol: 1e-14, ..SolverOptions::proximal() });
        let ls = (x.transpose() * &x).try_inverse().unwrap() * x.transpose() * &y;
        assert!((c - &ls).norm() <= 1e-6 * ls.norm());
    }
}
