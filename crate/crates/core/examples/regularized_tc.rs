//! Kernel-regularized least squares with a TC kernel whose decay is
//! chosen by marginal likelihood, against plain least squares on noisy data.

use nalgebra::DVector;
use regkit::estimators::{ls, regls};
use regkit::lti::{add_noise, impulse_response, prbs, simulate, TransferFunction};
use regkit::metrics::fit_w;
use regkit::regression::build_phi;
use regkit::tuning::{estimate_noise_var, linspace, logspace, tc_grid_search};

fn main() -> regkit::Result<()> {
    let n_g = 60;
    let g = impulse_response(&TransferFunction::bench2(), n_g)?;
    let u = prbs(127, 5);
    let y = DVector::from_vec(add_noise(&simulate(g.as_vector().as_slice(), &u), 0.01, 9)?);
    let phi = build_phi(&u, n_g)?.into_matrix();

    let s2 = estimate_noise_var(&phi, &y)?;
    let tc = tc_grid_search(&phi, &y, s2, &logspace(-2.0, 2.0, 13), &linspace(0.5, 0.99, 13))?;
    let reg = regls(&phi, &y, &tc.kernel, s2)?;
    let base = ls(&phi, &y)?;
    println!("TC kernel c = {:.3}, alpha = {:.3}", tc.c, tc.alpha);
    println!("W(LS) = {:.2}, W(RegLS) = {:.2}", fit_w(g.as_vector(), base.g.as_vector())?, fit_w(g.as_vector(), reg.g.as_vector())?);
    Ok(())
}
