//! Kernel matrices: the TC kernel, the atomic pole dictionary, the
//! multi-kernel covariance `S_η`, square-root factors and prior sampling.

use std::f64::consts::PI;
use std::io::Write;

use nalgebra::{Complex, DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fmt17;
use crate::lti::ImpulseResponse;

pub type C64 = Complex<f64>;

/// Radii at or beyond the unit circle are pulled back to this value.
pub const MAX_RADIUS: f64 = 1.0 - 1e-9;

/// Imaginary residue tolerated when assembling a real covariance.
const IMAG_TOL: f64 = 1e-10;

/// Atom of pole `w`: `(1 − |w|²)·[1, w, …, w^{n_g−1}]ᵀ`.
pub fn atomic_response(w: C64, n_g: usize) -> Result<DVector<C64>> {
    let r = w.norm();
    if !(r < 1.0) {
        return Err(Error::UnstablePole(r));
    }
    let alpha = 1.0 - r * r;
    let mut out = DVector::from_element(n_g, C64::new(0.0, 0.0));
    let mut p = C64::new(alpha, 0.0);
    for k in 0..n_g {
        out[k] = p;
        p *= w;
    }
    Ok(out)
}

/// Conjugate-closed pole set `𝒲` with its atoms.
///
/// Poles are stored with each independent pole (`Im w ≥ 0`) followed
/// directly by its conjugate when the pole is complex.
#[derive(Debug, Clone)]
pub struct AtomicDictionary {
    poles: Vec<C64>,
    atoms: DMatrix<C64>,
    pair_map: Vec<usize>,
    independent: Vec<usize>,
    n_g: usize,
}

impl AtomicDictionary {
    /// Build from the independent poles (each with `Im w ≥ 0`).
    pub fn new(independent_poles: &[C64], n_g: usize) -> Result<Self> {
        if n_g == 0 {
            return Err(Error::InvalidOrder);
        }
        let mut poles = Vec::with_capacity(2 * independent_poles.len());
        let mut pair_map = Vec::with_capacity(2 * independent_poles.len());
        let mut independent = Vec::with_capacity(independent_poles.len());
        for &w in independent_poles {
            if w.im < 0.0 {
                return Err(Error::Grid(format!("independent pole {w} has negative imaginary part")));
            }
            if !(w.norm() < 1.0) {
                return Err(Error::UnstablePole(w.norm()));
            }
            let i = poles.len();
            independent.push(i);
            poles.push(w);
            if w.im == 0.0 {
                pair_map.push(i);
            } else {
                pair_map.push(i + 1);
                poles.push(w.conj());
                pair_map.push(i);
            }
        }
        let mut atoms = DMatrix::from_element(n_g, poles.len(), C64::new(0.0, 0.0));
        for (j, &w) in poles.iter().enumerate() {
            atoms.set_column(j, &atomic_response(w, n_g)?);
        }
        Ok(Self { poles, atoms, pair_map, independent, n_g })
    }

    pub fn poles(&self) -> &[C64] {
        &self.poles
    }

    pub fn atoms(&self) -> &DMatrix<C64> {
        &self.atoms
    }

    pub fn atom(&self, i: usize) -> DVector<C64> {
        self.atoms.column(i).clone_owned()
    }

    pub fn pair_map(&self) -> &[usize] {
        &self.pair_map
    }

    pub fn independent_set(&self) -> &[usize] {
        &self.independent
    }

    /// Number of independent hyperparameters `n_η`.
    pub fn n_eta(&self) -> usize {
        self.independent.len()
    }

    pub fn n_poles(&self) -> usize {
        self.poles.len()
    }

    pub fn n_g(&self) -> usize {
        self.n_g
    }

    pub fn is_real_pole(&self, full_index: usize) -> bool {
        self.pair_map[full_index] == full_index
    }

    /// Real basis spanning the same real impulse responses as the atoms:
    /// real poles as-is, complex pairs as `2·Re g^w` and `−2·Im g^w`.
    pub fn real_atom_matrix(&self) -> DMatrix<f64> {
        let mut cols: Vec<DVector<f64>> = Vec::new();
        for &i in &self.independent {
            let a = self.atoms.column(i);
            if self.is_real_pole(i) {
                cols.push(a.map(|z| z.re));
            } else {
                cols.push(a.map(|z| 2.0 * z.re));
                cols.push(a.map(|z| -2.0 * z.im));
            }
        }
        DMatrix::from_columns(&cols)
    }

    /// Real factor vectors of `S̄ⁱ` for independent index `k`:
    /// `S̄ⁱ = Σ_j f_j f_jᵀ` (one vector for a real pole, two for a pair).
    pub fn real_factors(&self, k: usize) -> Vec<DVector<f64>> {
        let i = self.independent[k];
        let a = self.atoms.column(i);
        if self.is_real_pole(i) {
            vec![a.map(|z| z.re)]
        } else {
            let s = std::f64::consts::SQRT_2;
            vec![a.map(|z| s * z.re), a.map(|z| s * z.im)]
        }
    }
}

/// Polar pole grid: `n_angles` angles on `[0, π]` and `n_radii` radii on
/// `[r_min, r_max]` spaced geometrically toward `r_max`.
pub fn build_grid(n_angles: usize, n_radii: usize, r_min: f64, r_max: f64, logspace_base: f64, n_g: usize) -> Result<AtomicDictionary> {
    let poles = grid_poles(n_angles, n_radii, r_min, r_max, logspace_base)?;
    AtomicDictionary::new(&poles, n_g)
}

/// Grid radii `r_min + (r_max − r_min)·(1 − base^{−m/(N−1)})/(1 − 1/base)`.
pub fn grid_radii(n_radii: usize, r_min: f64, r_max: f64, base: f64) -> Result<Vec<f64>> {
    if n_radii == 0 {
        return Err(Error::Grid("at least one radius required".into()));
    }
    if !(r_min > 0.0 && r_min < r_max && r_max <= 1.0) {
        return Err(Error::Grid(format!("need 0 < r_min < r_max <= 1, got [{r_min}, {r_max}]")));
    }
    if !(base > 1.0) {
        return Err(Error::Grid(format!("logspace base must exceed 1, got {base}")));
    }
    if n_radii == 1 {
        return Ok(vec![r_min]);
    }
    let span = 1.0 - 1.0 / base;
    Ok((0..n_radii)
        .map(|m| {
            let s = (1.0 - base.powf(-(m as f64) / (n_radii - 1) as f64)) / span;
            (r_min + (r_max - r_min) * s).min(MAX_RADIUS)
        })
        .collect())
}

pub fn grid_poles(n_angles: usize, n_radii: usize, r_min: f64, r_max: f64, base: f64) -> Result<Vec<C64>> {
    if n_angles < 2 {
        return Err(Error::Grid("at least two angles (0 and π) required".into()));
    }
    let radii = grid_radii(n_radii, r_min, r_max, base)?;
    let mut poles = Vec::with_capacity(n_angles * radii.len());
    for k in 0..n_angles {
        for &r in &radii {
            let w = if k == 0 {
                C64::new(r, 0.0)
            } else if k == n_angles - 1 {
                C64::new(-r, 0.0)
            } else {
                C64::from_polar(r, k as f64 * PI / (n_angles - 1) as f64)
            };
            poles.push(w);
        }
    }
    Ok(poles)
}

/// Nonnegative hyperparameters over the independent pole set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperParams(Vec<f64>);

impl HyperParams {
    pub fn new(eta: Vec<f64>) -> Result<Self> {
        if let Some(bad) = eta.iter().find(|e| !(**e >= 0.0) || !e.is_finite()) {
            return Err(Error::Parameter(format!("hyperparameters must be finite and nonnegative, got {bad}")));
        }
        Ok(Self(eta))
    }

    pub fn zeros(n: usize) -> Self {
        Self(vec![0.0; n])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Weights over the full conjugate-closed pole set, tied across pairs.
    pub fn full(&self, dict: &AtomicDictionary) -> Result<Vec<f64>> {
        if self.0.len() != dict.n_eta() {
            return Err(Error::Dimension(format!("{} hyperparameters for {} independent poles", self.0.len(), dict.n_eta())));
        }
        let mut full = vec![0.0; dict.n_poles()];
        for (k, &i) in dict.independent_set().iter().enumerate() {
            full[i] = self.0[k];
            full[dict.pair_map()[i]] = self.0[k];
        }
        Ok(full)
    }

    /// `‖η‖₀` over the full pole set, counting entries above `tol·max`.
    pub fn active_poles(&self, dict: &AtomicDictionary, tol: f64) -> usize {
        let max = self.0.iter().cloned().fold(0.0, f64::max);
        dict.independent_set()
            .iter()
            .zip(&self.0)
            .filter(|(_, &e)| e > tol * max && e > 0.0)
            .map(|(&i, _)| if dict.is_real_pole(i) { 1 } else { 2 })
            .sum()
    }
}

/// Symmetric PSD kernel with a square-root factor `K = R·Rᵀ`.
#[derive(Debug, Clone)]
pub struct KernelMatrix {
    k: DMatrix<f64>,
    factor: DMatrix<f64>,
    jitter: f64,
    triangular: Option<Triangle>,
    invertible: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Triangle {
    Lower,
    Upper,
}

impl KernelMatrix {
    /// Cholesky-factored kernel. A singular `K` gets `1e−8·tr(K)/n_g` (grown
    /// tenfold on repeat failures) added to its diagonal; the stored matrix
    /// includes that jitter.
    pub fn new(k: DMatrix<f64>) -> Result<Self> {
        let k = symmetrized(k)?;
        let n = k.nrows();
        if let Some(ch) = k.clone().cholesky() {
            return Ok(Self { factor: ch.unpack(), k, jitter: 0.0, triangular: Some(Triangle::Lower), invertible: true });
        }
        let tr = k.trace();
        if !(tr > 0.0) {
            return Err(Error::NotPositiveDefinite);
        }
        let mut jitter = 1e-8 * tr / n as f64;
        for _ in 0..6 {
            let kj = &k + DMatrix::identity(n, n) * jitter;
            if let Some(ch) = kj.clone().cholesky() {
                return Ok(Self { factor: ch.unpack(), k: kj, jitter, triangular: Some(Triangle::Lower), invertible: true });
            }
            jitter *= 10.0;
        }
        Err(Error::NotPositiveDefinite)
    }

    /// Possibly singular kernel with the symmetric square root
    /// `E·Λ^{1/2}·Eᵀ` (negative eigenvalues clamped at zero).
    pub fn psd(k: DMatrix<f64>) -> Result<Self> {
        let k = symmetrized(k)?;
        let eig = k.clone().symmetric_eigen();
        let scale = eig.eigenvalues.amax();
        if eig.eigenvalues.iter().any(|&l| l < -1e-10 * scale.max(f64::MIN_POSITIVE)) {
            return Err(Error::NotPositiveDefinite);
        }
        let floor = roundoff_floor(&eig.eigenvalues);
        let sqrt = eig.eigenvalues.map(|l| if l > floor { l.sqrt() } else { 0.0 });
        let invertible = sqrt.min() > 0.0;
        let factor = &eig.eigenvectors * DMatrix::from_diagonal(&sqrt) * eig.eigenvectors.transpose();
        Ok(Self { k, factor, jitter: 0.0, triangular: None, invertible })
    }

    fn with_upper_factor(k: DMatrix<f64>, factor: DMatrix<f64>) -> Self {
        Self { k, factor, jitter: 0.0, triangular: Some(Triangle::Upper), invertible: true }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.k
    }

    pub fn factor(&self) -> &DMatrix<f64> {
        &self.factor
    }

    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn n(&self) -> usize {
        self.k.nrows()
    }

    /// Whether `R` (and hence `K`) is invertible.
    pub fn is_invertible(&self) -> bool {
        self.invertible
    }

    /// `R⁻¹·x`.
    pub fn solve_factor(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        if !self.invertible {
            return Err(Error::SingularFactor("kernel factor is not invertible".into()));
        }
        let out = match self.triangular {
            Some(Triangle::Lower) => self.factor.solve_lower_triangular(x),
            Some(Triangle::Upper) => self.factor.solve_upper_triangular(x),
            None => self.factor.clone().lu().solve(x),
        };
        out.filter(|v| v.iter().all(|z| z.is_finite()))
            .ok_or_else(|| Error::SingularFactor("kernel factor is not invertible".into()))
    }

    /// `‖R⁻¹g‖ = (gᵀK⁻¹g)^{1/2}`.
    pub fn inv_norm(&self, g: &DVector<f64>) -> Result<f64> {
        Ok(self.solve_factor(g)?.norm())
    }

    /// `K⁻¹` formed from the factor.
    pub fn inverse(&self) -> Result<DMatrix<f64>> {
        if !self.invertible {
            return Err(Error::SingularFactor("kernel factor is not invertible".into()));
        }
        let n = self.n();
        let rinv = match self.triangular {
            Some(Triangle::Lower) => self.factor.solve_lower_triangular(&DMatrix::identity(n, n)),
            Some(Triangle::Upper) => self.factor.solve_upper_triangular(&DMatrix::identity(n, n)),
            None => self.factor.clone().try_inverse(),
        }
        .ok_or_else(|| Error::SingularFactor("kernel factor is not invertible".into()))?;
        Ok(rinv.transpose() * rinv)
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        for row in self.k.row_iter() {
            let line: Vec<String> = row.iter().map(|x| fmt17(*x)).collect();
            writeln!(w, "{}", line.join(","))?;
        }
        Ok(())
    }
}

/// Eigenvalues at or below `n·ε·λ_max` are round-off and treated as zero.
fn roundoff_floor(eigenvalues: &DVector<f64>) -> f64 {
    eigenvalues.len() as f64 * f64::EPSILON * eigenvalues.amax()
}

fn symmetrized(k: DMatrix<f64>) -> Result<DMatrix<f64>> {
    if !k.is_square() {
        return Err(Error::Dimension(format!("kernel is {}x{}", k.nrows(), k.ncols())));
    }
    let scale = k.amax().max(f64::MIN_POSITIVE);
    let asym = (&k - k.transpose()).amax();
    if asym > 1e-12 * scale {
        return Err(Error::Parameter(format!("kernel is not symmetric (asymmetry {asym:.3e})")));
    }
    Ok((&k + k.transpose()) * 0.5)
}

/// `‖Δ‖_K = tr(ΔKΔᵀ)^{1/2} = ‖ΔR‖_F`.
pub fn kernel_norm(delta: &DMatrix<f64>, kernel: &KernelMatrix) -> f64 {
    (delta * kernel.factor()).norm()
}

/// `S_η = Σ_i η_i g^{w_i} (g^{w_i})ᴴ` with conjugate-tied weights.
pub fn assemble_s_eta(dict: &AtomicDictionary, eta: &HyperParams) -> Result<DMatrix<f64>> {
    assemble_s_eta_full(dict, &eta.full(dict)?)
}

/// Assemble from weights over the full pole set. Weights that break the
/// conjugate tie leave an imaginary residue and are rejected.
pub fn assemble_s_eta_full(dict: &AtomicDictionary, eta_full: &[f64]) -> Result<DMatrix<f64>> {
    if eta_full.len() != dict.n_poles() {
        return Err(Error::Dimension(format!("{} weights for {} poles", eta_full.len(), dict.n_poles())));
    }
    if eta_full.iter().any(|e| !(*e >= 0.0)) {
        return Err(Error::Parameter("hyperparameters must be nonnegative".into()));
    }
    let n = dict.n_g();
    let mut s = DMatrix::from_element(n, n, C64::new(0.0, 0.0));
    for (i, &e) in eta_full.iter().enumerate() {
        if e == 0.0 {
            continue;
        }
        let a = dict.atoms().column(i);
        s += (a * a.adjoint()) * C64::new(e, 0.0);
    }
    let re = s.map(|z| z.re);
    let im = s.map(|z| z.im).amax();
    if im > IMAG_TOL * re.amax().max(1.0) {
        return Err(Error::ConjugateClosure(im));
    }
    Ok(re)
}

/// TC kernel `K_ij = c·α^{max(i,j)}` with its exact upper-triangular factor.
pub fn tc_kernel(c: f64, alpha: f64, n_g: usize) -> Result<KernelMatrix> {
    if !(c > 0.0) || !c.is_finite() {
        return Err(Error::Parameter(format!("TC scale must be positive, got {c}")));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Parameter(format!("TC decay must lie in (0, 1), got {alpha}")));
    }
    if n_g == 0 {
        return Err(Error::InvalidOrder);
    }
    let k = DMatrix::from_fn(n_g, n_g, |i, j| c * alpha.powi(i.max(j) as i32));
    // α^{max(i,j)} = Σ_{m ≥ max(i,j)} w_m with w_m = α^m(1−α), w_{n−1} = α^{n−1}
    let weight = |m: usize| {
        if m + 1 == n_g {
            alpha.powi(m as i32)
        } else {
            alpha.powi(m as i32) * (1.0 - alpha)
        }
    };
    let r = DMatrix::from_fn(n_g, n_g, |i, m| if i <= m { (c * weight(m)).sqrt() } else { 0.0 });
    Ok(KernelMatrix::with_upper_factor(k, r))
}

/// Draw `g ~ N(0, S)` as `E·Λ^{1/2}·z`; eigenvalues below the round-off
/// floor are clamped to zero along with negative ones.
pub fn sample_prior(s: &DMatrix<f64>, seed: u64) -> Result<ImpulseResponse> {
    let eig = s.clone().symmetric_eigen();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let z = DVector::from_fn(s.nrows(), |_, _| {
        let x: f64 = StandardNormal.sample(&mut rng);
        x
    });
    let floor = roundoff_floor(&eig.eigenvalues);
    let scaled = z.component_mul(&eig.eigenvalues.map(|l| if l > floor { l.sqrt() } else { 0.0 }));
    ImpulseResponse::new(&eig.eigenvectors * scaled)
}

/// Result of decomposing a real impulse response on the active atoms.
#[derive(Debug, Clone)]
pub struct Decomposition {
    /// Coefficients over the full pole set (zero on inactive poles).
    pub coeffs: Vec<C64>,
    /// `‖g − Σ c_i g^{w_i}‖`.
    pub residual: f64,
    /// Largest `|c_i − c_j*|` over conjugate pairs before symmetrization.
    pub conjugate_deviation: f64,
    /// Largest imaginary part of the reconstruction.
    pub imag_residue: f64,
}

/// Least-squares coefficients of `g` on the atoms whose weight is nonzero.
pub fn decompose_sample(g: &DVector<f64>, dict: &AtomicDictionary, eta: &HyperParams) -> Result<Decomposition> {
    if g.len() != dict.n_g() {
        return Err(Error::Dimension(format!("g has length {}, dictionary has n_g = {}", g.len(), dict.n_g())));
    }
    let full = eta.full(dict)?;
    let active: Vec<usize> = (0..dict.n_poles()).filter(|&i| full[i] != 0.0).collect();
    let gnorm = g.norm();
    let mut coeffs = vec![C64::new(0.0, 0.0); dict.n_poles()];
    if active.is_empty() {
        if gnorm > 0.0 {
            return Err(Error::NotInSpan(1.0));
        }
        return Ok(Decomposition { coeffs, residual: 0.0, conjugate_deviation: 0.0, imag_residue: 0.0 });
    }
    let cols: Vec<DVector<C64>> = active.iter().map(|&i| dict.atom(i)).collect();
    let a = DMatrix::from_columns(&cols);
    let gc = g.map(|x| C64::new(x, 0.0));
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let c = svd
        .solve(&gc, 1e-13 * smax)
        .map_err(|e| Error::Numerical(e.to_string()))?;
    for (pos, &i) in active.iter().enumerate() {
        coeffs[i] = c[pos];
    }
    let mut deviation: f64 = 0.0;
    let raw = coeffs.clone();
    for i in 0..dict.n_poles() {
        let j = dict.pair_map()[i];
        deviation = deviation.max((raw[i] - raw[j].conj()).norm());
        coeffs[i] = (raw[i] + raw[j].conj()) * 0.5;
    }
    let recon = dict.atoms() * DVector::from_vec(coeffs.clone());
    let residual = (g - recon.map(|z| z.re)).norm();
    let imag_residue = recon.iter().map(|z| z.im.abs()).fold(0.0, f64::max);
    if residual > 1e-6 * gnorm.max(f64::MIN_POSITIVE) {
        return Err(Error::NotInSpan(residual / gnorm.max(f64::MIN_POSITIVE)));
    }
    Ok(Decomposition { coeffs, residual, conjugate_deviation: deviation, imag_residue })
}

/// Count of singular values above `tol·σ_max`.
pub fn numerical_rank(m: &DMatrix<f64>, tol: f64) -> usize {
    let sv = m.singular_values();
    let max = sv.max();
    if max == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > tol * max).count()
}
