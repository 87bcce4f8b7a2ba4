//! Atomic-norm (ℓ₁ over atoms) baseline with its weight chosen by
//! chronological hold-out validation.

use nalgebra::DVector;
use regkit::estimators::atom_estimate;
use regkit::experiments::GridSpec;
use regkit::lti::{add_noise, generate_signal, impulse_response, simulate, SignalKind, SignalSpec, TransferFunction};
use regkit::metrics::fit_w;
use regkit::regression::build_phi;
use regkit::tuning::{cross_validate, logspace};
use regkit::SolverOptions;

fn main() -> regkit::Result<()> {
    let (n_d, n_g) = (150, 50);
    let g = impulse_response(&TransferFunction::bench4(), n_g)?;
    let u = generate_signal(&SignalSpec { kind: SignalKind::Gaussian, length: n_d, scale: 1.0, seed: 4 });
    let y = DVector::from_vec(add_noise(&simulate(g.as_vector().as_slice(), &u), 0.01, 5)?);
    let phi = build_phi(&u, n_g)?.into_matrix();
    let dict = GridSpec::default().build(n_g)?;
    let opts = SolverOptions::proximal();

    let cv = cross_validate(&phi, &y, &logspace(0.0, 4.0, 5), |p, yy, w| Ok(atom_estimate(p, yy, &dict, w, &opts)?.g.into_vector()))?;
    let est = atom_estimate(&phi, &y, &dict, cv.best, &opts)?;
    println!("validation scores: {:?}", cv.scores);
    println!("chosen weight {}, W = {:.2}, converged: {}", cv.best, fit_w(g.as_vector(), est.g.as_vector())?, est.converged);
    Ok(())
}
