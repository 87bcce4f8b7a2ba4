//! All robust estimators on one disturbed-input record, each with its
//! uncertainty radius calibrated on the true input disturbance.

use nalgebra::{DMatrix, DVector};
use regkit::estimators::{self, structured::toeplitz_perturbation};
use regkit::kernel::tc_kernel;
use regkit::lti::{disturb, impulse_response, prbs, simulate, TransferFunction};
use regkit::metrics::r_squared;
use regkit::regression::build_phi;
use regkit::SolverOptions;

fn main() -> regkit::Result<()> {
    let (n_d, n_g) = (127, 40);
    let g = impulse_response(&TransferFunction::bench2(), n_g)?;
    let u = prbs(n_d, 4);
    let y = DVector::from_vec(simulate(g.as_vector().as_slice(), &u));
    let (v, d) = disturb(&u, 0.1, 8)?;
    let psi = build_phi(&v, n_g)?.into_matrix();
    let delta: DMatrix<f64> = build_phi(&d, n_g)?.into_matrix();
    let k = tc_kernel(1.0, 0.85, n_g)?;

    let rho_std = delta.norm();
    let rho_ker = (&delta * k.factor()).norm();
    let mut coeffs = DVector::zeros(n_d + n_g - 1);
    coeffs.rows_mut(n_g - 1, n_d).copy_from(&DVector::from_column_slice(&d));
    let rho_str = coeffs.norm();
    assert!((toeplitz_perturbation(&coeffs, n_d, n_g)? - &delta).norm() < 1e-12);
    let lambda = 1.0;

    let fp = SolverOptions::fixed_point();
    let mm = SolverOptions::majorization();
    let sg = SolverOptions { max_iters: 200, ..SolverOptions::subgradient() };
    let results = vec![
        estimators::ls(&psi, &y)?,
        estimators::regls(&psi, &y, &k, lambda)?,
        estimators::rls(&psi, &y, rho_std, &fp)?,
        estimators::srls(&psi, &y, rho_str, &sg)?,
        estimators::krls(&psi, &y, &k, rho_ker, &fp)?,
        estimators::rregls(&psi, &y, &k, rho_std, lambda, &mm)?,
        estimators::srregls(&psi, &y, &k, rho_str, lambda, &sg)?,
        estimators::krregls(&psi, &y, &k, rho_ker, lambda, &mm)?,
    ];
    for r in results {
        println!("{:<8} R2 = {:6.2}  iterations = {}", r.method.label(), r_squared(g.as_vector(), r.g.as_vector())?, r.iterations);
    }
    Ok(())
}
