//! Erlang-HMM piecewise intensity.
//!
//! The intensity is constant on each period `[d_{l-1}, d_l)`. A hidden chain
//! `C_l` selects an Erlang shape `m_{C_l}` and the period's Erlang scale is
//! `ω_l θ`. Periods are 1-based; hidden states are 0-based indices.

use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::markov::{validate_chain, StateDistribution, TransitionMatrix};

/// Relative tolerance for matching a time against a grid point.
pub const GRID_TOL: f64 = 1e-9;

/// One period of the (possibly extrapolated) observation grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Period {
    pub index: usize,
    pub start: f64,
    pub end: f64,
    pub exposure: f64,
    /// True when the period lies beyond the configured grid and was built by
    /// repeating the last period length and exposure.
    pub extrapolated: bool,
}

impl Period {
    pub fn length(&self) -> f64 {
        self.end - self.start
    }
}

/// Full model parameterization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ModelSpecDoc", into = "ModelSpecDoc")]
pub struct ModelSpec {
    chain: TransitionMatrix,
    initial: StateDistribution,
    shapes: Vec<u32>,
    theta: f64,
    grid: Vec<f64>,
    exposures: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
enum GammaDoc {
    Flat(Vec<f64>),
    Nested(Vec<Vec<f64>>),
}

/// Wire form of [`ModelSpec`]; key names are part of the CLI contract.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct ModelSpecDoc {
    g: usize,
    gamma: GammaDoc,
    pi1: Vec<f64>,
    shapes: Vec<u32>,
    theta: f64,
    grid: Vec<f64>,
    exposures: Vec<f64>,
}

impl TryFrom<ModelSpecDoc> for ModelSpec {
    type Error = Error;

    fn try_from(doc: ModelSpecDoc) -> Result<Self> {
        let chain = match doc.gamma {
            GammaDoc::Flat(v) => TransitionMatrix::from_row_major(doc.g, &v)?,
            GammaDoc::Nested(rows) => TransitionMatrix::from_rows(&rows)?,
        };
        if chain.g() != doc.g {
            return Err(Error::field(
                "gamma",
                format!("has {} states but g = {}", chain.g(), doc.g),
            ));
        }
        ModelSpec::new(
            chain,
            StateDistribution::new(doc.pi1)?,
            doc.shapes,
            doc.theta,
            doc.grid,
            doc.exposures,
        )
    }
}

impl From<ModelSpec> for ModelSpecDoc {
    fn from(spec: ModelSpec) -> Self {
        ModelSpecDoc {
            g: spec.g(),
            gamma: GammaDoc::Flat(spec.chain.row_major()),
            pi1: spec.initial.weights().to_vec(),
            shapes: spec.shapes,
            theta: spec.theta,
            grid: spec.grid,
            exposures: spec.exposures,
        }
    }
}

impl ModelSpec {
    /// Validates and assembles a model. `grid` starts at `d_0 = 0` and carries
    /// one more point than `exposures`.
    pub fn new(
        chain: TransitionMatrix,
        initial: StateDistribution,
        shapes: Vec<u32>,
        theta: f64,
        grid: Vec<f64>,
        exposures: Vec<f64>,
    ) -> Result<Self> {
        let g = chain.g();
        if initial.len() != g {
            return Err(Error::field(
                "pi1",
                format!("has {} entries but g = {g}", initial.len()),
            ));
        }
        if shapes.len() != g {
            return Err(Error::field(
                "shapes",
                format!("has {} entries but g = {g}", shapes.len()),
            ));
        }
        if shapes.iter().any(|&m| m < 1) {
            return Err(Error::field("shapes", "every shape must be an integer >= 1"));
        }
        if !(theta.is_finite() && theta > 0.0) {
            return Err(Error::field("theta", format!("must be positive, got {theta}")));
        }
        if grid.len() < 2 {
            return Err(Error::field("grid", "needs d_0 = 0 and at least one more point"));
        }
        if grid[0] != 0.0 {
            return Err(Error::field("grid", format!("must start at 0, got {}", grid[0])));
        }
        if let Some(w) = grid.windows(2).find(|w| !(w[1] > w[0]) || !w[1].is_finite()) {
            return Err(Error::field(
                "grid",
                format!("must be strictly increasing, found {} then {}", w[0], w[1]),
            ));
        }
        if exposures.len() != grid.len() - 1 {
            return Err(Error::field(
                "exposures",
                format!(
                    "has {} entries, expected one per period ({})",
                    exposures.len(),
                    grid.len() - 1
                ),
            ));
        }
        if let Some((l, w)) = exposures
            .iter()
            .enumerate()
            .find(|(_, w)| !(w.is_finite() && **w > 0.0))
        {
            return Err(Error::field(
                "exposures",
                format!("period {} has non-positive exposure {w}", l + 1),
            ));
        }
        let diag = validate_chain(&chain);
        if !diag.is_ergodic() {
            return Err(Error::field(
                "gamma",
                format!(
                    "chain must be irreducible and aperiodic (irreducible: {}, aperiodic: {})",
                    diag.irreducible, diag.aperiodic
                ),
            ));
        }
        Ok(Self {
            chain,
            initial,
            shapes,
            theta,
            grid,
            exposures,
        })
    }

    pub fn g(&self) -> usize {
        self.chain.g()
    }

    pub fn chain(&self) -> &TransitionMatrix {
        &self.chain
    }

    pub fn initial(&self) -> &StateDistribution {
        &self.initial
    }

    pub fn shapes(&self) -> &[u32] {
        &self.shapes
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn exposures(&self) -> &[f64] {
        &self.exposures
    }

    /// Number of periods covered by the configured grid.
    pub fn num_periods(&self) -> usize {
        self.exposures.len()
    }

    pub fn with_theta(&self, theta: f64) -> Result<Self> {
        Self::new(
            self.chain.clone(),
            self.initial.clone(),
            self.shapes.clone(),
            theta,
            self.grid.clone(),
            self.exposures.clone(),
        )
    }

    pub fn with_initial(&self, initial: StateDistribution) -> Result<Self> {
        Self::new(
            self.chain.clone(),
            initial,
            self.shapes.clone(),
            self.theta,
            self.grid.clone(),
            self.exposures.clone(),
        )
    }

    /// Period `l ≥ 1`; periods past the grid repeat the last length and exposure.
    pub fn period(&self, l: usize) -> Result<Period> {
        if l == 0 {
            return Err(Error::Domain("period index is 1-based".into()));
        }
        let last = self.num_periods();
        if l <= last {
            return Ok(Period {
                index: l,
                start: self.grid[l - 1],
                end: self.grid[l],
                exposure: self.exposures[l - 1],
                extrapolated: false,
            });
        }
        let len = self.grid[last] - self.grid[last - 1];
        let extra = (l - last) as f64;
        Ok(Period {
            index: l,
            start: self.grid[last] + (extra - 1.0) * len,
            end: self.grid[last] + extra * len,
            exposure: self.exposures[last - 1],
            extrapolated: true,
        })
    }

    /// Grid point `d_k` (extended past the configured grid when needed).
    pub fn grid_point(&self, k: usize) -> f64 {
        if k == 0 {
            0.0
        } else {
            self.period(k).map(|p| p.end).unwrap_or(0.0)
        }
    }

    /// Erlang scale `ω_l θ` for period `l`.
    pub fn erlang_scale(&self, l: usize) -> Result<f64> {
        Ok(self.period(l)?.exposure * self.theta)
    }

    /// Pascal scale `(d_l − d_{l−1}) ω_l θ` of the period count.
    pub fn period_scale(&self, l: usize) -> Result<f64> {
        let p = self.period(l)?;
        Ok(p.length() * p.exposure * self.theta)
    }

    /// Hidden-state law `π_l = π_1 Γ^{l−1}`.
    pub fn state_law(&self, l: usize) -> Result<Vec<f64>> {
        if l == 0 {
            return Err(Error::Domain("period index is 1-based".into()));
        }
        Ok(self.initial.propagate(&self.chain, l - 1))
    }

    /// The index `k` with `d_k = τ` within the grid tolerance, if any.
    pub fn grid_index_of(&self, tau: f64) -> Option<usize> {
        if !(tau.is_finite() && tau > 0.0) {
            return None;
        }
        let mut k = 1;
        loop {
            let d = self.grid_point(k);
            if (d - tau).abs() <= GRID_TOL * tau.max(d) {
                return Some(k);
            }
            if d > tau {
                return None;
            }
            k += 1;
        }
    }

    /// Like [`grid_index_of`](Self::grid_index_of) but fails with a domain error.
    pub fn require_grid_index(&self, tau: f64) -> Result<usize> {
        self.grid_index_of(tau).ok_or_else(|| {
            Error::Domain(format!("valuation time {tau} is not a grid point d_k, k >= 1"))
        })
    }

    fn check_state(&self, i: usize) -> Result<()> {
        if i >= self.g() {
            return Err(Error::Domain(format!(
                "state {i} out of range for g = {}",
                self.g()
            )));
        }
        Ok(())
    }
}

/// Erlang density with integer shape `m` and scale `scale` at `lambda`.
pub fn erlang_density(m: u32, scale: f64, lambda: f64) -> f64 {
    if lambda < 0.0 {
        return 0.0;
    }
    if lambda == 0.0 {
        return if m == 1 { 1.0 / scale } else { 0.0 };
    }
    let mf = f64::from(m);
    ((mf - 1.0) * lambda.ln() - lambda / scale - mf * scale.ln() - ln_gamma(mf)).exp()
}

/// `f(λ; m_i, ω_l θ)`: density of `Λ_l` given `C_l = i`.
pub fn state_dependent_density(spec: &ModelSpec, l: usize, i: usize, lambda: f64) -> Result<f64> {
    spec.check_state(i)?;
    if lambda < 0.0 {
        return Err(Error::Domain(format!("intensity must be nonnegative, got {lambda}")));
    }
    Ok(erlang_density(spec.shapes[i], spec.erlang_scale(l)?, lambda))
}

/// Unconditional density of `Λ_l`, an Erlang mixture weighted by `π_l`.
pub fn lambda_marginal_density(spec: &ModelSpec, l: usize, lambda: f64) -> Result<f64> {
    if lambda < 0.0 {
        return Err(Error::Domain(format!("intensity must be nonnegative, got {lambda}")));
    }
    let law = spec.state_law(l)?;
    let scale = spec.erlang_scale(l)?;
    Ok(law
        .iter()
        .zip(&spec.shapes)
        .map(|(w, &m)| w * erlang_density(m, scale, lambda))
        .sum())
}

/// A realized hidden-state and intensity path over `horizon` periods.
#[derive(Debug, Clone, PartialEq)]
pub struct IntensityPath {
    pub states: Vec<usize>,
    pub intensities: Vec<f64>,
    pub horizon: usize,
    /// Number of trailing periods that lie beyond the configured grid.
    pub extrapolated_periods: usize,
}

pub(crate) fn sample_categorical<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, w) in weights.iter().enumerate() {
        acc += w;
        if u < acc {
            return i;
        }
    }
    // rounding: fall back to the last state with positive weight
    weights.iter().rposition(|&w| w > 0.0).unwrap_or(0)
}

/// Erlang draw as a sum of `m` exponentials.
pub(crate) fn sample_erlang<R: Rng + ?Sized>(m: u32, scale: f64, rng: &mut R) -> f64 {
    let total: f64 = (0..m).map(|_| { let e: f64 = Exp1.sample(rng); e }).sum::<f64>();
    total * scale
}

/// Samples `(C_l, Λ_l)` for `l = 1..=k`.
pub fn sample_path<R: Rng + ?Sized>(spec: &ModelSpec, k: usize, rng: &mut R) -> Result<IntensityPath> {
    if k == 0 {
        return Err(Error::Domain("horizon must be at least 1".into()));
    }
    let mut states = Vec::with_capacity(k);
    let mut intensities = Vec::with_capacity(k);
    let rows = spec.chain.rows();
    let mut state = sample_categorical(spec.initial.weights(), rng);
    for l in 1..=k {
        if l > 1 {
            state = sample_categorical(&rows[state], rng);
        }
        states.push(state);
        intensities.push(sample_erlang(spec.shapes[state], spec.erlang_scale(l)?, rng));
    }
    Ok(IntensityPath {
        states,
        intensities,
        horizon: k,
        extrapolated_periods: k.saturating_sub(spec.num_periods()),
    })
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;

    /// Two-state reference model on a unit grid with `k` periods.
    pub fn reference(k: usize) -> ModelSpec {
        ModelSpec::new(
            TransitionMatrix::from_rows(&[vec![0.9, 0.1], vec![0.2, 0.8]]).unwrap(),
            StateDistribution::new(vec![2.0 / 3.0, 1.0 / 3.0]).unwrap(),
            vec![1, 3],
            0.5,
            (0..=k).map(|x| x as f64).collect(),
            vec![1.0; k],
        )
        .unwrap()
    }

    pub fn single_state(m: u32, theta: f64, k: usize) -> ModelSpec {
        ModelSpec::new(
            TransitionMatrix::from_rows(&[vec![1.0]]).unwrap(),
            StateDistribution::new(vec![1.0]).unwrap(),
            vec![m],
            theta,
            (0..=k).map(|x| x as f64).collect(),
            vec![1.0; k],
        )
        .unwrap()
    }
}
