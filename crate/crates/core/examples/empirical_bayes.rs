//! Empirical Bayes and its sparse (regularized) variant on the atomic
//! kernel, with the majorization-minimization objective trace.

use nalgebra::DVector;
use regkit::experiments::GridSpec;
use regkit::lti::{add_noise, generate_signal, impulse_response, simulate, SignalKind, SignalSpec, TransferFunction};
use regkit::metrics::fit_w;
use regkit::regression::build_phi;
use regkit::tuning::{eb_estimate, estimate_noise_var, reb_solve, MarginalModel, TuneConfig};

fn main() -> regkit::Result<()> {
    let (n_d, n_g) = (150, 50);
    let g = impulse_response(&TransferFunction::bench4(), n_g)?;
    let u = generate_signal(&SignalSpec { kind: SignalKind::Gaussian, length: n_d, scale: 1.0, seed: 1 });
    let y = DVector::from_vec(add_noise(&simulate(g.as_vector().as_slice(), &u), 0.01, 2)?);
    let phi = build_phi(&u, n_g)?.into_matrix();
    let s2 = estimate_noise_var(&phi, &y)?;
    let dict = GridSpec::default().build(n_g)?;
    let model = MarginalModel::new(&phi, &y, &dict, s2)?;

    for lambda in [0.0, 1.0, 10.0] {
        let res = reb_solve(&model, &TuneConfig { lambda, ..TuneConfig::default() })?;
        let gh = eb_estimate(&phi, &y, &dict, &res.eta, s2)?;
        println!(
            "lambda {lambda:>4}: W = {:.2}, active poles = {:>3}, objective {:.3} -> {:.3}",
            fit_w(g.as_vector(), &gh)?,
            res.eta.active_poles(&dict, 1e-6),
            res.trace[0],
            res.trace[res.trace.len() - 1]
        );
    }
    Ok(())
}
