use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn random_matrix(r: usize, c: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    DMatrix::from_fn(r, c, |_, _| StandardNormal.sample(&mut rng))
}

pub fn random_vector(n: usize, seed: u64) -> DVector<f64> {
    random_matrix(n, 1, seed ^ 0xABCD).column(0).clone_owned()
}

pub fn random_spd(n: usize, seed: u64) -> DMatrix<f64> {
    let a = random_matrix(n, n, seed);
    &a * a.transpose() + DMatrix::identity(n, n) * 0.5
}
