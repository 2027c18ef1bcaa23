//! Reported/IBNR thinning at a valuation date `τ = d_k`.
//!
//! A claim arriving at `t` is reported by `τ` with probability `P_U(τ − t)`,
//! so the reported and IBNR count scales of period `j` are
//! `(∫_{d_{j-1}}^{d_j} P_U(τ − t) dt) ω_j θ` and its complement.

use serde::{Deserialize, Serialize};

use crate::delay::{DelayModel, MarkMass};
use crate::error::{Error, Result};
use crate::intensity::ModelSpec;

/// Which thinned process a computation refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Which {
    Reported,
    Ibnr,
}

impl std::fmt::Display for Which {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Which::Reported => "reported",
            Which::Ibnr => "ibnr",
        })
    }
}

impl std::str::FromStr for Which {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "reported" => Ok(Which::Reported),
            "ibnr" => Ok(Which::Ibnr),
            other => Err(Error::field("which", format!("unknown process '{other}'"))),
        }
    }
}

/// Per-period Pascal scales of the reported and IBNR count processes.
#[derive(Debug, Clone, PartialEq)]
pub struct ThinnedScales {
    pub reported: Vec<f64>,
    pub ibnr: Vec<f64>,
    pub valuation: f64,
}

impl ThinnedScales {
    pub fn get(&self, which: Which) -> &[f64] {
        match which {
            Which::Reported => &self.reported,
            Which::Ibnr => &self.ibnr,
        }
    }
}

const SNAP: f64 = 1e-12;

/// Thinned scales for periods `1..=k` where `τ = d_k`.
pub fn thinned_scales(spec: &ModelSpec, delay: &DelayModel, tau: f64) -> Result<ThinnedScales> {
    let k = spec.require_grid_index(tau)?;
    let tau = spec.grid_point(k);
    let mut reported = Vec::with_capacity(k);
    let mut ibnr = Vec::with_capacity(k);
    for j in 1..=k {
        let p = spec.period(j)?;
        let end = p.end.min(tau);
        let mut frac = delay.integrated_cdf(p.start, end, tau)?;
        // snap cancellation residue so that "all reported" gives an exact zero
        if frac <= SNAP * p.length() {
            frac = 0.0;
        } else if p.length() - frac <= SNAP * p.length() {
            frac = p.length();
        }
        let factor = p.exposure * spec.theta();
        reported.push(frac * factor);
        ibnr.push((p.length() - frac) * factor);
    }
    Ok(ThinnedScales {
        reported,
        ibnr,
        valuation: tau,
    })
}

fn check_arrival(t: f64, tau: f64) -> Result<()> {
    if !(0.0 <= t && t <= tau) {
        return Err(Error::Domain(format!("arrival {t} must lie in [0, {tau}]")));
    }
    Ok(())
}

/// Mark law of a reported claim arriving at `t`: `p_U(u)/P_U(τ−t)` for
/// `u < τ − t`, with atoms kept on the closed interval `[0, τ − t]`.
pub fn reported_mark_density(delay: &DelayModel, t: f64, tau: f64, u: f64) -> Result<MarkMass> {
    check_arrival(t, tau)?;
    let window = tau - t;
    let p = delay.cdf(window);
    if p <= 0.0 {
        return Err(Error::DegenerateConditioning(format!(
            "no claim arriving at {t} can be reported by {tau}"
        )));
    }
    let base = delay.mass_at(u);
    Ok(MarkMass {
        density: if (0.0..window).contains(&u) { base.density / p } else { 0.0 },
        atom: if (0.0..=window).contains(&u) { base.atom / p } else { 0.0 },
    })
}

/// Mark law of an IBNR claim arriving at `t`: `p_U(u)/(1 − P_U(τ−t))` for
/// `u ≥ τ − t`; atoms only strictly beyond `τ − t`.
pub fn ibnr_mark_density(delay: &DelayModel, t: f64, tau: f64, u: f64) -> Result<MarkMass> {
    check_arrival(t, tau)?;
    let window = tau - t;
    let q = 1.0 - delay.cdf(window);
    if q <= 0.0 {
        return Err(Error::DegenerateConditioning(format!(
            "every claim arriving at {t} is reported by {tau}"
        )));
    }
    let base = delay.mass_at(u);
    Ok(MarkMass {
        density: if u >= window { base.density / q } else { 0.0 },
        atom: if u > window { base.atom / q } else { 0.0 },
    })
}
