//! Fit an FIR model by least squares from the Toeplitz regressor.

use nalgebra::DVector;
use regkit::lti::{impulse_response, prbs, simulate, TransferFunction};
use regkit::metrics::fit_w;
use regkit::regression::build_phi;

fn main() -> regkit::Result<()> {
    let g = impulse_response(&TransferFunction::bench2(), 30)?;
    let u = prbs(127, 3);
    let y = DVector::from_vec(simulate(g.as_vector().as_slice(), &u));
    let phi = build_phi(&u, 30)?;
    let est = regkit::estimators::ls(phi.matrix(), &y)?;
    println!("noiseless LS fit W = {:.6}", fit_w(g.as_vector(), est.g.as_vector())?);
    Ok(())
}
