//! Closed-form inner maximization over a kernel-weighted Frobenius ball:
//! `max_{‖ΔR‖_F ≤ ρ} ‖Δa + b‖ = ‖b‖ + ρ‖R⁻¹a‖`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

fn solve_r(r: &DMatrix<f64>, a: &DVector<f64>) -> Result<DVector<f64>> {
    if !r.is_square() || r.nrows() != a.len() {
        return Err(Error::Dimension(format!("R is {}x{}, a has length {}", r.nrows(), r.ncols(), a.len())));
    }
    r.clone()
        .lu()
        .solve(a)
        .filter(|x| x.iter().all(|v| v.is_finite()))
        .ok_or_else(|| Error::SingularFactor("R is singular".into()))
}

pub fn worst_case_value(a: &DVector<f64>, b: &DVector<f64>, r: &DMatrix<f64>, rho: f64) -> Result<f64> {
    if !(rho >= 0.0) {
        return Err(Error::Parameter(format!("rho must be nonnegative, got {rho}")));
    }
    let rinv_a = solve_r(r, a)?;
    Ok(b.norm() + rho * rinv_a.norm())
}

#[derive(Debug, Clone)]
pub struct WorstCase {
    pub delta: DMatrix<f64>,
    /// `‖Δ*a + b‖`.
    pub value: f64,
    /// `a = 0`: every feasible Δ is optimal and the zero matrix is returned.
    pub degenerate: bool,
}

/// Maximizer `Δ* = ρ·b̂·(R⁻¹a)ᵀR⁻¹ / ‖R⁻¹a‖` with `b̂ = b/‖b‖`, or the first
/// basis vector when `b = 0`.
pub fn worst_case_delta(a: &DVector<f64>, b: &DVector<f64>, r: &DMatrix<f64>, rho: f64) -> Result<WorstCase> {
    if !(rho >= 0.0) {
        return Err(Error::Parameter(format!("rho must be nonnegative, got {rho}")));
    }
    let m = b.len();
    let n = a.len();
    if m == 0 {
        return Err(Error::Dimension("b is empty".into()));
    }
    if a.iter().all(|&v| v == 0.0) {
        return Ok(WorstCase { delta: DMatrix::zeros(m, n), value: b.norm(), degenerate: true });
    }
    let rinv_a = solve_r(r, a)?;
    // row vector (R⁻¹a)ᵀR⁻¹ = (R⁻ᵀ R⁻¹ a)ᵀ
    let row = r
        .transpose()
        .lu()
        .solve(&rinv_a)
        .ok_or_else(|| Error::SingularFactor("R is singular".into()))?;
    let bn = b.norm();
    let unit = if bn > 0.0 {
        b / bn
    } else {
        let mut e = DVector::zeros(m);
        e[0] = 1.0;
        e
    };
    let delta = &unit * row.transpose() * (rho / rinv_a.norm());
    let value = (&delta * a + b).norm();
    Ok(WorstCase { delta, value, degenerate: false })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::{random_matrix, random_spd, random_vector};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn zero_a_gives_norm_b() {
        let b = DVector::from_vec(vec![3.0, 4.0]);
        let v = worst_case_value(&DVector::zeros(2), &b, &DMatrix::identity(2, 2), 5.0).unwrap();
        assert_eq!(v, 5.0);
        let wc = worst_case_delta(&DVector::zeros(2), &b, &DMatrix::identity(2, 2), 5.0).unwrap();
        assert!(wc.degenerate);
        assert_eq!(wc.delta, DMatrix::zeros(2, 2));
    }

    #[test]
    fn direct_formula() {
        let v = worst_case_value(
            &DVector::from_vec(vec![1.0, 0.0]),
            &DVector::from_vec(vec![3.0, 4.0]),
            &DMatrix::identity(2, 2),
            2.0,
        )
        .unwrap();
        assert_eq!(v, 7.0);

        let wc = worst_case_delta(
            &DVector::from_vec(vec![1.0]),
            &DVector::from_vec(vec![1.0, 0.0]),
            &DMatrix::identity(1, 1),
            1.0,
        )
        .unwrap();
        assert_eq!(wc.delta, DMatrix::from_row_slice(2, 1, &[1.0, 0.0]));
        assert_eq!(wc.value, 2.0);
    }

    #[test]
    fn zero_b_uses_first_basis_vector() {
        let a = DVector::from_vec(vec![0.5, -1.0]);
        let r = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.3, 1.0]);
        let wc = worst_case_delta(&a, &DVector::zeros(3), &r, 0.7).unwrap();
        assert!(wc.delta.row(1).norm() == 0.0 && wc.delta.row(2).norm() == 0.0);
        let v = worst_case_value(&a, &DVector::zeros(3), &r, 0.7).unwrap();
        assert!((wc.value - v).abs() < 1e-12);
    }

    #[test]
    fn maximizer_is_feasible_and_tight() {
        for seed in 0..100u64 {
            let n = 1 + (seed % 4) as usize;
            let m = 1 + (seed % 5) as usize;
            let a = random_vector(n, seed);
            let b = random_vector(m, seed + 1000);
            let r = random_spd(n, seed + 2000).cholesky().unwrap().unpack();
            let rho = 0.1 + (seed as f64) * 0.03;
            let wc = worst_case_delta(&a, &b, &r, rho).unwrap();
            let v = worst_case_value(&a, &b, &r, rho).unwrap();
            assert!(((&wc.delta * &r).norm() - rho).abs() <= 1e-12 * rho.max(1.0));
            assert!((wc.value - v).abs() <= 1e-10 * v.max(1.0));
        }
    }

    #[test]
    fn random_feasible_perturbations_never_exceed_value() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for seed in 0..10u64 {
            let a = random_vector(3, seed);
            let b = random_vector(4, seed + 50);
            let r = random_spd(3, seed + 90).cholesky().unwrap().unpack();
            let rho = 1.3;
            let v = worst_case_value(&a, &b, &r, rho).unwrap();
            let rinv = r.clone().try_inverse().unwrap();
            for _ in 0..2000 {
                let e = DMatrix::<f64>::from_fn(4, 3, |_, _| StandardNormal.sample(&mut rng));
                let scale: f64 = rand::Rng::random::<f64>(&mut rng);
                // Δ = E R⁻¹ scaled so ‖ΔR‖_F ≤ ρ
                let delta = &e * &rinv * (rho * scale / e.norm());
                assert!((&delta * &a + &b).norm() <= v + 1e-9);
            }
        }
    }

    #[test]
    fn cauchy_schwarz_frobenius_bound() {
        for seed in 0..20u64 {
            let d = random_matrix(4, 3, seed);
            let a = random_vector(3, seed + 7);
            assert!((&d * &a).norm() <= d.norm() * a.norm() + 1e-12);
            let c = random_vector(4, seed + 9);
            let rank_one = &c * a.transpose();
            assert!(((&rank_one * &a).norm() - rank_one.norm() * a.norm()).abs() <= 1e-12 * rank_one.norm() * a.norm());
        }
    }

    #[test]
    fn singular_r_is_an_error() {
        let r = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        assert!(worst_case_value(&DVector::from_vec(vec![1.0, 1.0]), &DVector::from_vec(vec![1.0]), &r, 1.0).is_err());
    }
}
