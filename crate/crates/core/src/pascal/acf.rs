//! Stationary covariance and autocorrelation of the period counts.
//!
//! Both routes assume `(d_l − d_{l−1}) ω_l = 1` so that every period count has
//! scale `θ`. The direct route evaluates `θ²(δ M Γ^k M 1ᵀ − (δ M 1ᵀ)²)` and
//! works for any ergodic chain; the spectral route expands `Γ^k` over a real
//! simple spectrum and needs [`spectral_decompose`] to succeed.

use std::fmt;

use crate::error::{Error, Result};
use crate::intensity::ModelSpec;
use crate::markov::{k_step, spectral_decompose, stationary_distribution};

const NORMALIZATION_TOL: f64 = 1e-9;

/// Which computation produced an autocorrelation value.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AcfPath {
    Spectral,
    Direct,
}

impl fmt::Display for AcfPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AcfPath::Spectral => "spectral",
            AcfPath::Direct => "direct",
        })
    }
}

/// Fails unless `(d_l − d_{l−1}) ω_l = 1` for every configured period.
pub fn check_normalization(spec: &ModelSpec) -> Result<()> {
    for l in 1..=spec.num_periods() {
        let p = spec.period(l)?;
        let v = p.length() * p.exposure;
        if (v - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::Precondition(format!(
                "stationarity requires (d_l - d_(l-1)) * omega_l = 1 for every period; period {l} has {v}"
            )));
        }
    }
    Ok(())
}

struct Moments {
    delta: Vec<f64>,
    mean_shape: f64,
    /// `Var(N)/θ²`.
    var_over_theta2: f64,
}

fn moments(spec: &ModelSpec) -> Result<Moments> {
    check_normalization(spec)?;
    let delta = stationary_distribution(spec.chain())?.weights().to_vec();
    let theta = spec.theta();
    let shapes: Vec<f64> = spec.shapes().iter().map(|&m| f64::from(m)).collect();
    let mean_shape: f64 = delta.iter().zip(&shapes).map(|(d, m)| d * m).sum();
    let second: f64 = delta
        .iter()
        .zip(&shapes)
        .map(|(d, m)| d * m * (m + (1.0 + theta) / theta))
        .sum();
    Ok(Moments {
        delta,
        mean_shape,
        var_over_theta2: second - mean_shape * mean_shape,
    })
}

fn independent_periods(spec: &ModelSpec) -> bool {
    spec.g() == 1 || spec.chain().has_identical_rows()
}

/// `Cov(N_l, N_{l+k})` in the stationary regime; `k = 0` gives `Var(N)`.
pub fn covariance(spec: &ModelSpec, lag: usize) -> Result<f64> {
    let mo = moments(spec)?;
    let theta2 = spec.theta() * spec.theta();
    if lag == 0 {
        return Ok(theta2 * mo.var_over_theta2);
    }
    if independent_periods(spec) {
        return Ok(0.0);
    }
    let step = k_step(spec.chain(), lag);
    let shapes = spec.shapes();
    let g = spec.g();
    let mut cross = 0.0;
    for i in 0..g {
        let row: f64 = (0..g).map(|j| step[(i, j)] * f64::from(shapes[j])).sum();
        cross += mo.delta[i] * f64::from(shapes[i]) * row;
    }
    Ok(theta2 * (cross - mo.mean_shape * mo.mean_shape))
}

/// Coefficients `c_i` and eigenvalues `e_i`, `i ≥ 2`, of `ρ(k) = Σ c_i e_i^k`.
pub fn acf_coefficients(spec: &ModelSpec) -> Result<Vec<(f64, f64)>> {
    let mo = moments(spec)?;
    if spec.g() == 1 {
        return Ok(Vec::new());
    }
    let sd = spectral_decompose(spec.chain())?;
    let shapes: Vec<f64> = spec.shapes().iter().map(|&m| f64::from(m)).collect();
    Ok((1..spec.g())
        .map(|i| {
            // δ M u_iᵀ · v_i M 1ᵀ
            let left: f64 = mo
                .delta
                .iter()
                .zip(&shapes)
                .zip(&sd.right[i])
                .map(|((d, m), u)| d * m * u)
                .sum();
            let right: f64 = sd.left[i].iter().zip(&shapes).map(|(v, m)| v * m).sum();
            (left * right / mo.var_over_theta2, sd.eigenvalues[i])
        })
        .collect())
}

/// Spectral autocorrelation `ρ(k)`; refuses chains without a real simple spectrum.
pub fn acf(spec: &ModelSpec, lag: usize) -> Result<f64> {
    if lag == 0 {
        moments(spec)?;
        return Ok(1.0);
    }
    if independent_periods(spec) {
        moments(spec)?;
        return Ok(0.0);
    }
    let coeffs = acf_coefficients(spec)?;
    Ok(coeffs.iter().map(|(c, e)| c * e.powi(lag as i32)).sum())
}

/// Direct autocorrelation `Cov(k)/Var`.
pub fn acf_direct(spec: &ModelSpec, lag: usize) -> Result<f64> {
    Ok(covariance(spec, lag)? / covariance(spec, 0)?)
}

/// `ρ(1..=max_lag)`, spectral when possible and direct otherwise.
pub fn acf_series(spec: &ModelSpec, max_lag: usize) -> Result<(Vec<f64>, AcfPath)> {
    match (1..=max_lag).map(|k| acf(spec, k)).collect::<Result<Vec<_>>>() {
        Ok(v) => Ok((v, AcfPath::Spectral)),
        Err(Error::SpectralUnsupported(_)) => Ok((
            (1..=max_lag)
                .map(|k| acf_direct(spec, k))
                .collect::<Result<Vec<_>>>()?,
            AcfPath::Direct,
        )),
        Err(e) => Err(e),
    }
}
