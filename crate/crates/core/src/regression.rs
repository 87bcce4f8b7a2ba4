//! Datasets, the Toeplitz regressor and the least-squares baseline.

use std::io::{BufRead, Write};
use std::ops::Deref;
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::fmt17;
use crate::lti::ImpulseResponse;

/// Smallest reciprocal condition number accepted by [`ls_estimate`].
pub const RCOND_TOL: f64 = 1e-12;

/// Input/output record `{(u_t, y_t)}` together with the FIR order to fit.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    u: Vec<f64>,
    y: Vec<f64>,
    n_g: usize,
}

impl Dataset {
    pub fn new(u: Vec<f64>, y: Vec<f64>, n_g: usize) -> Result<Self> {
        if u.len() != y.len() {
            return Err(Error::Dimension(format!("len(u) = {} but len(y) = {}", u.len(), y.len())));
        }
        if u.is_empty() {
            return Err(Error::InsufficientData("empty record".into()));
        }
        if n_g == 0 {
            return Err(Error::InvalidOrder);
        }
        Ok(Self { u, y, n_g })
    }

    pub fn u(&self) -> &[f64] {
        &self.u
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn n_g(&self) -> usize {
        self.n_g
    }

    pub fn len(&self) -> usize {
        self.u.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u.is_empty()
    }

    pub fn y_vector(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.y)
    }

    pub fn phi(&self) -> RegressorMatrix {
        // n_g >= 1 and u nonempty are guaranteed by construction
        build_phi(&self.u, self.n_g).expect("validated dataset")
    }

    /// Leading `n` samples as a new dataset.
    pub fn head(&self, n: usize) -> Result<Self> {
        Self::new(self.u[..n].to_vec(), self.y[..n].to_vec(), self.n_g)
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "t,u,y")?;
        for (t, (u, y)) in self.u.iter().zip(&self.y).enumerate() {
            writeln!(w, "{t},{},{}", fmt17(*u), fmt17(*y))?;
        }
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path)?;
        self.write_csv(std::io::BufWriter::new(f))
    }

    /// Read a CSV with a header naming at least `t`, `y` and `input_column`.
    pub fn read_csv<R: BufRead>(r: R, input_column: &str, n_g: usize) -> Result<Self> {
        let mut lines = r.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("empty dataset file".into()))??;
        let cols: Vec<&str> = header.split(',').map(str::trim).collect();
        let find = |name: &str| {
            cols.iter()
                .position(|c| *c == name)
                .ok_or_else(|| Error::Parse(format!("missing column `{name}`")))
        };
        let iu = find(input_column)?;
        let iy = find("y")?;
        find("t")?;
        let (mut u, mut y) = (Vec::new(), Vec::new());
        for (lineno, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != cols.len() {
                return Err(Error::Parse(format!("row {} has {} fields, expected {}", lineno + 2, fields.len(), cols.len())));
            }
            let parse = |s: &str| {
                s.parse::<f64>()
                    .map_err(|e| Error::Parse(format!("row {}: {e}", lineno + 2)))
            };
            u.push(parse(fields[iu])?);
            y.push(parse(fields[iy])?);
        }
        Self::new(u, y, n_g)
    }

    pub fn load_csv(path: &Path, input_column: &str, n_g: usize) -> Result<Self> {
        let f = std::fs::File::open(path)?;
        Self::read_csv(std::io::BufReader::new(f), input_column, n_g)
    }
}

/// Toeplitz regressor Φ with rows `φ_tᵀ = [u_t, u_{t−1}, …, u_{t−n_g+1}]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressorMatrix(DMatrix<f64>);

impl RegressorMatrix {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }

    pub fn n_d(&self) -> usize {
        self.0.nrows()
    }

    pub fn n_g(&self) -> usize {
        self.0.ncols()
    }
}

impl Deref for RegressorMatrix {
    type Target = DMatrix<f64>;

    fn deref(&self) -> &DMatrix<f64> {
        &self.0
    }
}

impl From<DMatrix<f64>> for RegressorMatrix {
    fn from(m: DMatrix<f64>) -> Self {
        Self(m)
    }
}

pub fn build_phi(u: &[f64], n_g: usize) -> Result<RegressorMatrix> {
    if n_g == 0 {
        return Err(Error::InvalidOrder);
    }
    if u.is_empty() {
        return Err(Error::InsufficientData("empty input".into()));
    }
    let phi = DMatrix::from_fn(u.len(), n_g, |i, j| if i >= j { u[i - j] } else { 0.0 });
    Ok(RegressorMatrix(phi))
}

/// Ratio of extreme singular values; 0 when the matrix has fewer rows than columns.
pub fn reciprocal_condition(a: &DMatrix<f64>) -> f64 {
    if a.nrows() < a.ncols() {
        return 0.0;
    }
    let sv = a.singular_values();
    let max = sv.max();
    if max == 0.0 {
        return 0.0;
    }
    sv.min() / max
}

/// Least-squares fit `argmin ‖y − Φg‖²` via Householder QR.
pub fn ls_estimate(phi: &DMatrix<f64>, y: &DVector<f64>) -> Result<ImpulseResponse> {
    if phi.nrows() != y.len() {
        return Err(Error::Dimension(format!("Phi has {} rows, y has {}", phi.nrows(), y.len())));
    }
    let rcond = reciprocal_condition(phi);
    if rcond < RCOND_TOL {
        return Err(Error::SingularRegressor { rcond });
    }
    let qr = phi.clone().qr();
    let rhs = qr.q().transpose() * y;
    let g = qr
        .r()
        .solve_upper_triangular(&rhs)
        .ok_or(Error::SingularRegressor { rcond })?;
    ImpulseResponse::new(g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lti::simulate;
    use crate::testutil::{random_matrix, random_vector};

    #[test]
    fn unit_impulse_regressor() {
        let phi = build_phi(&[1.0, 0.0, 0.0], 2).unwrap();
        assert_eq!(*phi.matrix(), DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 0.0, 0.0]));
        let phi = build_phi(&[2.0, 3.0], 3).unwrap();
        assert_eq!(*phi.matrix(), DMatrix::from_row_slice(2, 3, &[2.0, 0.0, 0.0, 3.0, 2.0, 0.0]));
        assert_eq!(build_phi(&[1.0], 0), Err(Error::InvalidOrder));
    }

    #[test]
    fn phi_times_g_is_convolution() {
        let u = random_vector(8, 1);
        let g = random_vector(3, 2);
        let phi = build_phi(u.as_slice(), 3).unwrap();
        let y = phi.matrix() * &g;
        let oracle = simulate(g.as_slice(), u.as_slice());
        for (a, b) in y.iter().zip(&oracle) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn phi_is_toeplitz_with_lagged_rows() {
        let u = random_vector(9, 4);
        let phi = build_phi(u.as_slice(), 4).unwrap();
        for i in 0..8 {
            for j in 0..3 {
                assert_eq!(phi[(i, j)], phi[(i + 1, j + 1)]);
            }
        }
        for t in 0..9 {
            for k in 0..4 {
                let expect = if t >= k { u[t - k] } else { 0.0 };
                assert_eq!(phi[(t, k)], expect);
            }
        }
    }

    #[test]
    fn ls_identity_and_consistency() {
        let y = random_vector(4, 3);
        let g = ls_estimate(&DMatrix::identity(4, 4), &y).unwrap();
        assert!((g.as_vector() - &y).norm() < 1e-14);

        let phi = random_matrix(20, 5, 5);
        let g0 = random_vector(5, 6);
        let g = ls_estimate(&phi, &(&phi * &g0)).unwrap();
        assert!((g.as_vector() - &g0).norm() <= 1e-10 * g0.norm());
    }

    #[test]
    fn ls_matches_normal_equations() {
        let phi = random_matrix(20, 5, 7);
        let y = random_vector(20, 8);
        let g = ls_estimate(&phi, &y).unwrap();
        let oracle = (phi.transpose() * &phi).try_inverse().unwrap() * phi.transpose() * &y;
        assert!((g.as_vector() - &oracle).norm() <= 1e-10 * oracle.norm());
        let resid = &y - &phi * g.as_vector();
        assert!((phi.transpose() * resid).norm() <= 1e-8 * (phi.transpose() * &y).norm());
    }

    #[test]
    fn rank_deficient_is_rejected() {
        let mut phi = random_matrix(10, 3, 9);
        let c0 = phi.column(0).clone_owned();
        phi.set_column(2, &(c0 * 2.0));
        assert!(matches!(ls_estimate(&phi, &random_vector(10, 1)), Err(Error::SingularRegressor { .. })));
        assert!(matches!(
            ls_estimate(&random_matrix(2, 3, 1), &random_vector(2, 1)),
            Err(Error::SingularRegressor { .. })
        ));
    }

    #[test]
    fn csv_round_trip() {
        let ds = Dataset::new(vec![1.0, -0.5, 0.25], vec![0.1, 0.2, 1.0 / 3.0], 2).unwrap();
        let mut buf = Vec::new();
        ds.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("t,u,y\n"));
        let back = Dataset::read_csv(std::io::Cursor::new(buf), "u", 2).unwrap();
        assert_eq!(back, ds);
        assert!(Dataset::read_csv(std::io::Cursor::new("t,y\n0,1\n"), "u", 2).is_err());
        assert!(Dataset::new(vec![1.0], vec![], 1).is_err());
    }
}
