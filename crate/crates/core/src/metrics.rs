//! Fit scores and Monte Carlo bias/variance summaries.

use nalgebra::DVector;

use crate::error::{Error, Result};

fn check(g: &DVector<f64>, g_hat: &DVector<f64>) -> Result<f64> {
    if g.len() != g_hat.len() {
        return Err(Error::Dimension(format!("true response has length {}, estimate {}", g.len(), g_hat.len())));
    }
    if g.is_empty() {
        return Err(Error::Dimension("empty impulse response".into()));
    }
    let mean = g.mean();
    let spread = g.iter().map(|v| (v - mean).powi(2)).sum::<f64>();
    if spread == 0.0 {
        return Err(Error::ConstantReference);
    }
    Ok(spread)
}

/// `W = 100·(1 − sqrt(Σ(g − ĝ)² / Σ(g − ḡ)²))`, 100 for a perfect fit.
pub fn fit_w(g: &DVector<f64>, g_hat: &DVector<f64>) -> Result<f64> {
    let spread = check(g, g_hat)?;
    Ok(100.0 * (1.0 - ((g - g_hat).norm_squared() / spread).sqrt()))
}

/// `R² = 100·(1 − ‖ĝ − g‖ / ‖g − ḡ‖)`.
pub fn r_squared(g: &DVector<f64>, g_hat: &DVector<f64>) -> Result<f64> {
    let spread = check(g, g_hat)?;
    Ok(100.0 * (1.0 - (g_hat - g).norm() / spread.sqrt()))
}

/// Squared error `‖ĝ − g‖²`.
pub fn sq_err(g: &DVector<f64>, g_hat: &DVector<f64>) -> Result<f64> {
    if g.len() != g_hat.len() {
        return Err(Error::Dimension(format!("true response has length {}, estimate {}", g.len(), g_hat.len())));
    }
    Ok((g - g_hat).norm_squared())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BiasVar {
    pub bias2: f64,
    pub var: f64,
    pub mse: f64,
}

/// Over estimates `ĝ_k` of a fixed `g`: `Bias² = ‖m − g‖²/n_g` with `m` the
/// sample mean, `MSE = mean_k ‖ĝ_k − g‖²/n_g`, and `Var = MSE − Bias²`.
pub fn bias_var_mse(g: &DVector<f64>, estimates: &[DVector<f64>]) -> Result<BiasVar> {
    if estimates.is_empty() {
        return Err(Error::InsufficientData("no estimates".into()));
    }
    let n_g = g.len() as f64;
    let mut mean = DVector::zeros(g.len());
    let mut mse = 0.0;
    for e in estimates {
        if e.len() != g.len() {
            return Err(Error::Dimension(format!("estimate has length {}, expected {}", e.len(), g.len())));
        }
        mean += e;
        mse += (e - g).norm_squared();
    }
    let k = estimates.len() as f64;
    mean /= k;
    mse /= k * n_g;
    let bias2 = (&mean - g).norm_squared() / n_g;
    Ok(BiasVar { bias2, var: mse - bias2, mse })
}

/// Median of finite values; `NaN` if there are none.
pub fn median(values: &[f64]) -> f64 {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(x: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(x)
    }

    #[test]
    fn perfect_and_mean_fits() {
        let g = v(&[1.0, 2.0, 3.0]);
        assert_eq!(fit_w(&g, &g).unwrap(), 100.0);
        assert_eq!(r_squared(&g, &g).unwrap(), 100.0);
        let flat = v(&[2.0, 2.0, 2.0]);
        assert!(fit_w(&g, &flat).unwrap().abs() < 1e-12);
        assert!(r_squared(&g, &flat).unwrap().abs() < 1e-12);
    }

    #[test]
    fn hand_computed_score() {
        // spread = 2, error² = 0.5 → W = 100(1 − 0.5)
        let g = v(&[1.0, 2.0, 3.0]);
        let e = v(&[1.5, 2.0, 2.5]);
        assert!((fit_w(&g, &e).unwrap() - 50.0).abs() < 1e-12);
        assert_eq!(sq_err(&g, &e).unwrap(), 0.5);
    }

    #[test]
    fn constant_reference_rejected() {
        let g = v(&[1.0, 1.0]);
        assert_eq!(fit_w(&g, &g), Err(Error::ConstantReference));
        assert!(fit_w(&v(&[1.0, 2.0]), &v(&[1.0])).is_err());
    }

    #[test]
    fn bias_variance_split() {
        let g = v(&[0.0, 0.0]);
        let est = [v(&[1.0, 0.0]), v(&[3.0, 0.0])];
        let bv = bias_var_mse(&g, &est).unwrap();
        // mean (2, 0): bias² = 4/2, mse = (1 + 9)/2/2
        assert_eq!(bv.bias2, 2.0);
        assert_eq!(bv.mse, 2.5);
        assert_eq!(bv.var, 0.5);
        assert!(bias_var_mse(&g, &[]).is_err());
    }

    #[test]
    fn median_ignores_nan() {
        assert_eq!(median(&[3.0, f64::NAN, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0]), 2.5);
        assert!(median(&[f64::NAN]).is_nan());
    }
}
