//! A stronger exponential prior should not grow the active pole set.

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use regkit::experiments::GridSpec;
use regkit::lti::{impulse_response, TransferFunction};
use regkit::metrics::median;
use regkit::regression::build_phi;
use regkit::tuning::{self, MarginalModel, TuneConfig};

#[test]
fn median_active_poles_do_not_grow_with_lambda() {
    let (n_d, n_g) = (100, 30);
    let dict = GridSpec { n_angles: 8, n_radii: 5, ..GridSpec::default() }.build(n_g).unwrap();
    let g = impulse_response(&TransferFunction::bench4(), n_g).unwrap().into_vector();
    let lambdas = [0.1, 1.0, 10.0];
    let mut counts = vec![Vec::new(); lambdas.len()];
    for seed in 0..20 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u: Vec<f64> = (0..n_d).map(|_| StandardNormal.sample(&mut rng)).collect();
        let phi = build_phi(&u, n_g).unwrap().into_matrix();
        let noise = DVector::from_fn(n_d, |_, _| 0.1 * Distribution::<f64>::sample(&StandardNormal, &mut rng));
        let y = &phi * &g + noise;
        let s2 = tuning::estimate_noise_var(&phi, &y).unwrap();
        let model = MarginalModel::new(&phi, &y, &dict, s2).unwrap();
        for (c, &lambda) in counts.iter_mut().zip(&lambdas) {
            let res = tuning::reb_solve(&model, &TuneConfig { lambda, ..TuneConfig::default() }).unwrap();
            c.push(res.eta.active_poles(&dict, 1e-6) as f64);
        }
    }
    let med: Vec<f64> = counts.iter().map(|c| median(c)).collect();
    for w in med.windows(2) {
        assert!(w[1] <= w[0], "medians {med:?}");
    }
}
