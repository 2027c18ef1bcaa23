//! Reporting-delay distributions.
//!
//! Each family provides its CDF `P_U`, the law at a point (density plus any
//! atom), sampling, and the integrated CDF `∫_a^b P_U(τ − t) dt` that feeds the
//! reported/IBNR Pascal scales.

use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad::adaptive_simpson;

/// Absolute tolerance of the quadrature path.
pub const QUAD_TOL: f64 = 1e-10;

/// Delay law of a single claim.
///
/// Serialized as `{"family": "...", "params": {...}}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", content = "params", try_from = "DelayDoc", into = "DelayDoc")]
pub enum DelayModel {
    /// Every claim is reported exactly `at` after arrival.
    Degenerate { at: f64 },
    Exponential { rate: f64 },
    /// Uniform on `[0, upper]`.
    Uniform { upper: f64 },
    Weibull { shape: f64, scale: f64 },
    /// CDF interpolated linearly between knots. Below the first knot the CDF
    /// is 0, so a positive first value is an atom at `knots[0]`.
    PiecewiseEmpirical { knots: Vec<f64>, cdf: Vec<f64> },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "family", content = "params", rename_all = "kebab-case")]
enum DelayDoc {
    Degenerate { at: f64 },
    Exponential { rate: f64 },
    Uniform { upper: f64 },
    Weibull { shape: f64, scale: f64 },
    PiecewiseEmpirical { knots: Vec<f64>, cdf: Vec<f64> },
}

impl TryFrom<DelayDoc> for DelayModel {
    type Error = Error;

    fn try_from(doc: DelayDoc) -> Result<Self> {
        let model = match doc {
            DelayDoc::Degenerate { at } => DelayModel::Degenerate { at },
            DelayDoc::Exponential { rate } => DelayModel::Exponential { rate },
            DelayDoc::Uniform { upper } => DelayModel::Uniform { upper },
            DelayDoc::Weibull { shape, scale } => DelayModel::Weibull { shape, scale },
            DelayDoc::PiecewiseEmpirical { knots, cdf } => {
                DelayModel::PiecewiseEmpirical { knots, cdf }
            }
        };
        model.validate()?;
        Ok(model)
    }
}

impl From<DelayModel> for DelayDoc {
    fn from(m: DelayModel) -> Self {
        match m {
            DelayModel::Degenerate { at } => DelayDoc::Degenerate { at },
            DelayModel::Exponential { rate } => DelayDoc::Exponential { rate },
            DelayModel::Uniform { upper } => DelayDoc::Uniform { upper },
            DelayModel::Weibull { shape, scale } => DelayDoc::Weibull { shape, scale },
            DelayModel::PiecewiseEmpirical { knots, cdf } => {
                DelayDoc::PiecewiseEmpirical { knots, cdf }
            }
        }
    }
}

/// Law of the delay at a single point: density of the continuous part and
/// the mass of an atom located exactly there.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MarkMass {
    pub density: f64,
    pub atom: f64,
}

impl MarkMass {
    pub fn scaled(self, factor: f64) -> Self {
        Self {
            density: self.density * factor,
            atom: self.atom * factor,
        }
    }
}

fn positive(key: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::field(key, format!("must be positive, got {v}")))
    }
}

impl DelayModel {
    pub fn validate(&self) -> Result<()> {
        match self {
            DelayModel::Degenerate { at } => {
                if !(at.is_finite() && *at >= 0.0) {
                    return Err(Error::field("delay.params.at", format!("must be >= 0, got {at}")));
                }
            }
            DelayModel::Exponential { rate } => positive("delay.params.rate", *rate)?,
            DelayModel::Uniform { upper } => positive("delay.params.upper", *upper)?,
            DelayModel::Weibull { shape, scale } => {
                positive("delay.params.shape", *shape)?;
                positive("delay.params.scale", *scale)?;
            }
            DelayModel::PiecewiseEmpirical { knots, cdf } => {
                if knots.is_empty() || knots.len() != cdf.len() {
                    return Err(Error::field(
                        "delay.params.cdf",
                        "needs one CDF value per knot and at least one knot",
                    ));
                }
                if !(knots[0].is_finite() && knots[0] >= 0.0) {
                    return Err(Error::field("delay.params.knots", "first knot must be >= 0"));
                }
                if knots.windows(2).any(|w| !(w[1] > w[0]) || !w[1].is_finite()) {
                    return Err(Error::field("delay.params.knots", "must be strictly increasing"));
                }
                if cdf.iter().any(|p| !(0.0..=1.0).contains(p)) {
                    return Err(Error::field("delay.params.cdf", "values must lie in [0, 1]"));
                }
                if cdf.windows(2).any(|w| w[1] < w[0]) {
                    return Err(Error::field("delay.params.cdf", "must be nondecreasing"));
                }
                if *cdf.last().unwrap() != 1.0 {
                    return Err(Error::field("delay.params.cdf", "last value must equal 1"));
                }
            }
        }
        Ok(())
    }

    /// `P_U(u)`; zero for negative `u`.
    pub fn cdf(&self, u: f64) -> f64 {
        if u < 0.0 {
            return 0.0;
        }
        match self {
            DelayModel::Degenerate { at } => {
                if u >= *at {
                    1.0
                } else {
                    0.0
                }
            }
            DelayModel::Exponential { rate } => -(-rate * u).exp_m1(),
            DelayModel::Uniform { upper } => (u / upper).min(1.0),
            DelayModel::Weibull { shape, scale } => -(-(u / scale).powf(*shape)).exp_m1(),
            DelayModel::PiecewiseEmpirical { knots, cdf } => {
                if u < knots[0] {
                    return 0.0;
                }
                let last = knots.len() - 1;
                if u >= knots[last] {
                    return 1.0;
                }
                let i = knots.partition_point(|&x| x <= u) - 1;
                let frac = (u - knots[i]) / (knots[i + 1] - knots[i]);
                cdf[i] + (cdf[i + 1] - cdf[i]) * frac
            }
        }
    }

    /// Law at the point `u`.
    pub fn mass_at(&self, u: f64) -> MarkMass {
        if u < 0.0 {
            return MarkMass::default();
        }
        match self {
            DelayModel::Degenerate { at } => MarkMass {
                density: 0.0,
                atom: if u == *at { 1.0 } else { 0.0 },
            },
            DelayModel::Exponential { rate } => MarkMass {
                density: rate * (-rate * u).exp(),
                atom: 0.0,
            },
            DelayModel::Uniform { upper } => MarkMass {
                density: if u <= *upper { 1.0 / upper } else { 0.0 },
                atom: 0.0,
            },
            DelayModel::Weibull { shape, scale } => {
                let z = u / scale;
                let density = if u == 0.0 {
                    match shape.partial_cmp(&1.0) {
                        Some(std::cmp::Ordering::Less) => f64::INFINITY,
                        Some(std::cmp::Ordering::Equal) => 1.0 / scale,
                        _ => 0.0,
                    }
                } else {
                    shape / scale * z.powf(shape - 1.0) * (-z.powf(*shape)).exp()
                };
                MarkMass { density, atom: 0.0 }
            }
            DelayModel::PiecewiseEmpirical { knots, cdf } => {
                let atom = if u == knots[0] { cdf[0] } else { 0.0 };
                let last = knots.len() - 1;
                let density = if u < knots[0] || u >= knots[last] {
                    0.0
                } else {
                    let i = knots.partition_point(|&x| x <= u) - 1;
                    (cdf[i + 1] - cdf[i]) / (knots[i + 1] - knots[i])
                };
                MarkMass { density, atom }
            }
        }
    }

    /// `∫_0^x P_U(s) ds` in closed form, when the family admits one.
    fn cdf_antiderivative(&self, x: f64) -> Option<f64> {
        if x <= 0.0 {
            return Some(0.0);
        }
        match self {
            DelayModel::Degenerate { at } => Some((x - at).max(0.0)),
            DelayModel::Exponential { rate } => Some(x + (-rate * x).exp_m1() / rate),
            DelayModel::Uniform { upper } => Some(if x <= *upper {
                x * x / (2.0 * upper)
            } else {
                x - upper / 2.0
            }),
            DelayModel::Weibull { .. } => None,
            DelayModel::PiecewiseEmpirical { knots, cdf } => {
                if x <= knots[0] {
                    return Some(0.0);
                }
                let mut acc = 0.0;
                for i in 0..knots.len() - 1 {
                    let (x0, x1) = (knots[i], knots[i + 1]);
                    if x >= x1 {
                        acc += 0.5 * (cdf[i] + cdf[i + 1]) * (x1 - x0);
                    } else {
                        let fx = cdf[i] + (cdf[i + 1] - cdf[i]) * (x - x0) / (x1 - x0);
                        acc += 0.5 * (cdf[i] + fx) * (x - x0);
                        return Some(acc);
                    }
                }
                Some(acc + (x - knots[knots.len() - 1]))
            }
        }
    }

    fn check_interval(a: f64, b: f64, tau: f64) -> Result<()> {
        if !(0.0 <= a && a <= b && b <= tau) {
            return Err(Error::Domain(format!(
                "integrated CDF needs 0 <= a <= b <= tau, got a = {a}, b = {b}, tau = {tau}"
            )));
        }
        Ok(())
    }

    /// `∫_a^b P_U(τ − t) dt` for `0 ≤ a ≤ b ≤ τ`: exact for every family except
    /// Weibull, which uses adaptive quadrature.
    pub fn integrated_cdf(&self, a: f64, b: f64, tau: f64) -> Result<f64> {
        Self::check_interval(a, b, tau)?;
        let value = match (self.cdf_antiderivative(tau - a), self.cdf_antiderivative(tau - b)) {
            (Some(hi), Some(lo)) => hi - lo,
            _ => self.integrated_cdf_quadrature(a, b, tau)?,
        };
        Ok(value.clamp(0.0, b - a))
    }

    /// Quadrature evaluation of the same integral, available for every family.
    pub fn integrated_cdf_quadrature(&self, a: f64, b: f64, tau: f64) -> Result<f64> {
        Self::check_interval(a, b, tau)?;
        // split at kinks so Simpson sees smooth pieces
        let mut cuts = vec![a, b];
        let kinks: Vec<f64> = match self {
            DelayModel::Degenerate { at } => vec![tau - at],
            DelayModel::Uniform { upper } => vec![tau - upper],
            DelayModel::PiecewiseEmpirical { knots, .. } => knots.iter().map(|k| tau - k).collect(),
            _ => Vec::new(),
        };
        cuts.extend(kinks.into_iter().filter(|&c| c > a && c < b));
        cuts.sort_by(f64::total_cmp);
        let pieces = (cuts.len() - 1) as f64;
        Ok(cuts
            .windows(2)
            .map(|w| adaptive_simpson(&|t| self.cdf(tau - t), w[0], w[1], QUAD_TOL / pieces))
            .sum())
    }

    /// One delay draw.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            DelayModel::Degenerate { at } => *at,
            DelayModel::Exponential { rate } => {
                let e: f64 = Exp1.sample(rng);
                e / rate
            }
            DelayModel::Uniform { upper } => upper * rng.random::<f64>(),
            DelayModel::Weibull { shape, scale } => {
                let e: f64 = Exp1.sample(rng);
                scale * e.powf(1.0 / shape)
            }
            DelayModel::PiecewiseEmpirical { knots, cdf } => {
                let u: f64 = rng.random();
                if u < cdf[0] {
                    return knots[0];
                }
                let i = cdf.partition_point(|&p| p <= u);
                // cdf[i-1] <= u < cdf[i]; last value is 1 so i is in range
                let (f0, f1) = (cdf[i - 1], cdf[i]);
                knots[i - 1] + (knots[i] - knots[i - 1]) * (u - f0) / (f1 - f0)
            }
        }
    }
}
