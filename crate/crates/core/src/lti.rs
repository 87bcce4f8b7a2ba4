//! Discrete-time LTI models, FIR truncation and signal generation.

use std::ops::Deref;

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Rational transfer function `num(q⁻¹) / den(q⁻¹)`, coefficients in
/// ascending powers of the backward shift.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferFunction {
    num: Vec<f64>,
    den: Vec<f64>,
}

impl TransferFunction {
    pub fn new(num: Vec<f64>, den: Vec<f64>) -> Result<Self> {
        if den.is_empty() {
            return Err(Error::InvalidModel("empty denominator".into()));
        }
        if den[0] == 0.0 {
            return Err(Error::InvalidModel("leading denominator coefficient is zero".into()));
        }
        if num.iter().chain(den.iter()).any(|c| !c.is_finite()) {
            return Err(Error::InvalidModel("non-finite coefficient".into()));
        }
        Ok(Self { num, den })
    }

    pub fn num(&self) -> &[f64] {
        &self.num
    }

    pub fn den(&self) -> &[f64] {
        &self.den
    }

    /// Second-order low-pass benchmark used for the disturbed-input study.
    pub fn bench2() -> Self {
        Self {
            num: vec![0.02008, 0.04017, 0.02008],
            den: vec![1.0, -1.561, 0.6414],
        }
    }

    /// Fourth-order benchmark `(z³ + 0.5z²) / (z⁴ − 2.2z³ + 2.42z² − 1.87z + 0.7225)`.
    pub fn bench4() -> Self {
        Self {
            num: vec![0.0, 1.0, 0.5],
            den: vec![1.0, -2.2, 2.42, -1.87, 0.7225],
        }
    }

    /// Look up a named benchmark (`bench2`, `bench4`).
    pub fn named(name: &str) -> Option<Self> {
        match name {
            "bench2" => Some(Self::bench2()),
            "bench4" => Some(Self::bench4()),
            _ => None,
        }
    }
}

/// Truncated impulse response `g ∈ ℝ^{n_g}`.
#[derive(Debug, Clone, PartialEq)]
pub struct ImpulseResponse(DVector<f64>);

impl ImpulseResponse {
    pub fn new(g: DVector<f64>) -> Result<Self> {
        if g.is_empty() {
            return Err(Error::InvalidOrder);
        }
        Ok(Self(g))
    }

    pub fn from_slice(g: &[f64]) -> Result<Self> {
        Self::new(DVector::from_column_slice(g))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_vector(&self) -> &DVector<f64> {
        &self.0
    }

    pub fn into_vector(self) -> DVector<f64> {
        self.0
    }
}

impl Deref for ImpulseResponse {
    type Target = DVector<f64>;

    fn deref(&self) -> &DVector<f64> {
        &self.0
    }
}

/// First `n_g` power-series coefficients of `num/den`.
pub fn impulse_response(tf: &TransferFunction, n_g: usize) -> Result<ImpulseResponse> {
    if n_g == 0 {
        return Err(Error::InvalidOrder);
    }
    let den = tf.den();
    if den.is_empty() || den[0] == 0.0 {
        return Err(Error::InvalidModel("leading denominator coefficient is zero".into()));
    }
    let mut g = DVector::zeros(n_g);
    for k in 0..n_g {
        let mut acc = tf.num().get(k).copied().unwrap_or(0.0);
        for j in 1..den.len().min(k + 1) {
            acc -= den[j] * g[k - j];
        }
        g[k] = acc / den[0];
    }
    Ok(ImpulseResponse(g))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SignalKind {
    Prbs,
    Gaussian,
}

impl std::str::FromStr for SignalKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "prbs" => Ok(SignalKind::Prbs),
            "gaussian" => Ok(SignalKind::Gaussian),
            other => Err(Error::Parse(format!("unknown signal kind `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignalSpec {
    pub kind: SignalKind,
    pub length: usize,
    pub scale: f64,
    pub seed: u64,
}

impl SignalSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.scale > 0.0) || !self.scale.is_finite() {
            return Err(Error::Parameter(format!("signal scale must be positive, got {}", self.scale)));
        }
        Ok(())
    }
}

const PRBS_ORDER: u32 = 7;
pub const PRBS_PERIOD: usize = (1 << PRBS_ORDER) - 1;

/// Maximal-length sequence from a 7-bit Fibonacci LFSR with taps (7, 6).
/// Bits map 0 → +1 and 1 → −1. The seed selects the nonzero initial state.
pub fn prbs(length: usize, seed: u64) -> Vec<f64> {
    let mut state: u8 = (seed % PRBS_PERIOD as u64) as u8 + 1;
    let mut out = Vec::with_capacity(length);
    for _ in 0..length {
        let bit = state & 1;
        out.push(if bit == 0 { 1.0 } else { -1.0 });
        // taps 7 and 6 of x^7 + x^6 + 1
        let feedback = (state ^ (state >> 1)) & 1;
        state = (state >> 1) | (feedback << (PRBS_ORDER - 1));
    }
    out
}

pub fn generate_signal(spec: &SignalSpec) -> Vec<f64> {
    match spec.kind {
        SignalKind::Prbs => prbs(spec.length, spec.seed).into_iter().map(|b| b * spec.scale).collect(),
        SignalKind::Gaussian => {
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
            (0..spec.length)
                .map(|_| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    z * spec.scale
                })
                .collect()
        }
    }
}

/// Noiseless FIR output `y_t = Σ_k g_k u_{t−k}` with the system at rest before t = 0.
pub fn simulate(g: &[f64], u: &[f64]) -> Vec<f64> {
    (0..u.len())
        .map(|t| {
            g.iter()
                .take(t + 1)
                .enumerate()
                .map(|(k, gk)| gk * u[t - k])
                .sum()
        })
        .collect()
}

/// Add i.i.d. `N(0, σ_d²)` measurement disturbance to `u`; returns `(v, d)`.
pub fn disturb(u: &[f64], sigma_d: f64, seed: u64) -> Result<(Vec<f64>, Vec<f64>)> {
    if !(sigma_d >= 0.0) {
        return Err(Error::Parameter(format!("sigma_d must be nonnegative, got {sigma_d}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d: Vec<f64> = (0..u.len())
        .map(|_| {
            let z: f64 = StandardNormal.sample(&mut rng);
            sigma_d * z
        })
        .collect();
    let v = u.iter().zip(&d).map(|(a, b)| a + b).collect();
    Ok((v, d))
}

/// Add i.i.d. `N(0, σ²)` output noise.
pub fn add_noise(y: &[f64], sigma2: f64, seed: u64) -> Result<Vec<f64>> {
    if !(sigma2 >= 0.0) {
        return Err(Error::Parameter(format!("noise variance must be nonnegative, got {sigma2}")));
    }
    let (v, _) = disturb(y, sigma2.sqrt(), seed)?;
    Ok(v)
}
