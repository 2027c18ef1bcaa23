//! Exact simulation of the marked Cox claim process.
//!
//! Per period the count is drawn given the period intensity, the epochs are
//! scattered uniformly over the period, and i.i.d. delays are attached.

use std::fmt::Write as _;

use rand::Rng;
use rand_distr::{Distribution, Poisson};

use crate::delay::DelayModel;
use crate::error::{Error, Result};
use crate::intensity::{sample_path, ModelSpec, GRID_TOL};

/// One marked point: arrival epoch, reporting delay and derived fields.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClaimRecord {
    pub arrival: f64,
    pub delay: f64,
    pub report_time: f64,
    /// 1-based period with `d_{l-1} ≤ arrival < d_l`.
    pub period: usize,
}

/// Arrival-ordered claims observed up to a valuation time.
#[derive(Debug, Clone, PartialEq)]
pub struct ClaimSet {
    pub records: Vec<ClaimRecord>,
    pub valuation: f64,
    pub horizon: usize,
    /// Grid points `d_0..=d_horizon` used to assign periods.
    pub boundaries: Vec<f64>,
    /// Trailing periods that were extrapolated past the configured grid.
    pub extrapolated_periods: usize,
}

/// Reported and IBNR subsets at a valuation time.
#[derive(Debug, Clone, PartialEq)]
pub struct Classified {
    pub reported: ClaimSet,
    pub ibnr: ClaimSet,
}

/// Per-period counts `N_l`, `N_l^r` and `N_l^{IBNR}` for `l = 1..=k`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct PeriodCounts {
    pub total: Vec<u64>,
    pub reported: Vec<u64>,
    pub ibnr: Vec<u64>,
}

impl PeriodCounts {
    pub fn total_reported(&self) -> u64 {
        self.reported.iter().sum()
    }

    pub fn total_ibnr(&self) -> u64 {
        self.ibnr.iter().sum()
    }
}

/// Simulates claims arriving in `[0, d_k)` with their delays.
pub fn simulate<R: Rng + ?Sized>(
    spec: &ModelSpec,
    delay: &DelayModel,
    k: usize,
    rng: &mut R,
) -> Result<ClaimSet> {
    let path = sample_path(spec, k, rng)?;
    let mut boundaries = Vec::with_capacity(k + 1);
    boundaries.push(0.0);
    let mut records = Vec::new();
    for (idx, &lambda) in path.intensities.iter().enumerate() {
        let period = spec.period(idx + 1)?;
        boundaries.push(period.end);
        let mean = period.length() * lambda;
        let n = if mean > 0.0 {
            Poisson::new(mean)
                .map_err(|e| Error::Domain(format!("poisson mean {mean}: {e}")))?
                .sample(rng) as usize
        } else {
            0
        };
        let mut epochs: Vec<f64> = (0..n)
            .map(|_| {
                let t = period.start + period.length() * rng.random::<f64>();
                // keep the period right-open under rounding
                if t >= period.end {
                    period.end.next_down()
                } else {
                    t
                }
            })
            .collect();
        // stable sort keeps generation order on ties
        epochs.sort_by(f64::total_cmp);
        for arrival in epochs {
            let d = delay.sample(rng);
            records.push(ClaimRecord {
                arrival,
                delay: d,
                report_time: arrival + d,
                period: idx + 1,
            });
        }
    }
    Ok(ClaimSet {
        records,
        valuation: boundaries[k],
        horizon: k,
        boundaries,
        extrapolated_periods: path.extrapolated_periods,
    })
}

impl ClaimSet {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    fn subset(&self, valuation: f64, keep: impl Fn(&ClaimRecord) -> bool) -> ClaimSet {
        ClaimSet {
            records: self.records.iter().copied().filter(keep).collect(),
            valuation,
            horizon: self.horizon,
            boundaries: self.boundaries.clone(),
            extrapolated_periods: self.extrapolated_periods,
        }
    }

    /// CSV with header `arrival,delay,report_time,period`, 12 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("arrival,delay,report_time,period\n");
        for r in &self.records {
            let _ = writeln!(
                out,
                "{},{},{},{}",
                fmt_sig(r.arrival),
                fmt_sig(r.delay),
                fmt_sig(r.report_time),
                r.period
            );
        }
        out
    }
}

/// Formats `x` rounded to 12 significant digits.
pub fn fmt_sig(x: f64) -> String {
    let rounded: f64 = format!("{x:.11e}").parse().unwrap_or(x);
    format!("{rounded}")
}

/// Splits claims that arrived before `tau` into reported (`T + U ≤ τ`) and
/// IBNR (`T < τ < T + U`) sets.
pub fn classify(claims: &ClaimSet, tau: f64) -> Result<Classified> {
    if !(tau >= 0.0) {
        return Err(Error::Domain(format!("valuation time must be >= 0, got {tau}")));
    }
    if tau > claims.valuation * (1.0 + GRID_TOL) {
        return Err(Error::Domain(format!(
            "valuation time {tau} exceeds the simulated window ending at {}",
            claims.valuation
        )));
    }
    Ok(Classified {
        reported: claims.subset(tau, |r| r.arrival < tau && r.report_time <= tau),
        ibnr: claims.subset(tau, |r| r.arrival < tau && r.report_time > tau),
    })
}

/// Per-period counts up to `τ = d_k`.
pub fn discretize(claims: &ClaimSet, tau: f64) -> Result<PeriodCounts> {
    let k = claims
        .boundaries
        .iter()
        .position(|&d| d > 0.0 && (d - tau).abs() <= GRID_TOL * d)
        .ok_or_else(|| Error::Domain(format!("valuation time {tau} is not a grid point")))?;
    let tau = claims.boundaries[k];
    let mut counts = PeriodCounts {
        total: vec![0; k],
        reported: vec![0; k],
        ibnr: vec![0; k],
    };
    for r in claims.records.iter().filter(|r| r.arrival < tau) {
        let l = r.period - 1;
        counts.total[l] += 1;
        if r.report_time <= tau {
            counts.reported[l] += 1;
        } else {
            counts.ibnr[l] += 1;
        }
    }
    Ok(counts)
}
