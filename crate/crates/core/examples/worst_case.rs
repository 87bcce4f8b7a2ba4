//! Inner maximizations: the closed-form worst case over a kernel-weighted
//! Frobenius ball and the exact worst Toeplitz perturbation.

use nalgebra::{DMatrix, DVector};
use regkit::estimators::{structured_inner_max, worst_case_delta};
use regkit::kernel::tc_kernel;

fn main() -> regkit::Result<()> {
    let a = DVector::from_vec(vec![1.0, -0.5, 0.25]);
    let b = DVector::from_vec(vec![0.3, 0.1, -0.2, 0.4]);
    let k = tc_kernel(1.0, 0.7, 3)?;
    let wc = worst_case_delta(&a, &b, k.factor(), 0.5)?;
    let achieved = (&wc.delta * &a + &b).norm();
    println!("kernel ball: value {:.6}, achieved {:.6}, ‖ΔR‖_F = {:.6}", wc.value, achieved, (&wc.delta * k.factor()).norm());

    let psi = DMatrix::from_fn(6, 3, |i, j| ((i * 3 + j) as f64 * 0.7).sin());
    let y = DVector::from_fn(6, |i, _| (i as f64 * 0.4).cos());
    let g = DVector::from_vec(vec![0.8, -0.3, 0.1]);
    let im = structured_inner_max(&g, &psi, &y, 0.2)?;
    println!("Toeplitz ball: worst squared residual {:.6}, ‖δ‖ = {:.6}, hard case: {}", im.value, im.delta.norm(), im.hard_case);
    Ok(())
}
