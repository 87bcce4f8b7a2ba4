//! Kernel-regularized LS at weight λ coincides with kernel-based robust LS
//! at the radius ρ computed from that solution; the robust solver then
//! returns μ = λ.

use nalgebra::DVector;
use regkit::estimators::{krls, regls, rho_from_lambda};
use regkit::kernel::tc_kernel;
use regkit::lti::{add_noise, impulse_response, prbs, simulate, TransferFunction};
use regkit::regression::build_phi;
use regkit::SolverOptions;

fn main() -> regkit::Result<()> {
    let n_g = 40;
    let g = impulse_response(&TransferFunction::bench2(), n_g)?;
    let u = prbs(127, 1);
    let y = DVector::from_vec(add_noise(&simulate(g.as_vector().as_slice(), &u), 0.01, 2)?);
    let phi = build_phi(&u, n_g)?.into_matrix();
    let k = tc_kernel(1.0, 0.85, n_g)?;

    for lambda in [0.1, 1.0, 10.0] {
        let reg = regls(&phi, &y, &k, lambda)?;
        let rho = rho_from_lambda(reg.g.as_vector(), &phi, &y, &k, lambda)?;
        let rob = krls(&phi, &y, &k, rho, &SolverOptions::fixed_point())?;
        let gap = (reg.g.as_vector() - rob.g.as_vector()).norm() / reg.g.as_vector().norm();
        println!("lambda {lambda:>5}: rho = {rho:.4}, recovered mu = {:.6}, relative gap = {gap:.2e}", rob.mu().unwrap_or(f64::NAN));
    }
    Ok(())
}
