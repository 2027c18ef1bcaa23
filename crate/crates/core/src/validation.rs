//! Independent oracles: Monte Carlo estimators, literal hidden-path
//! enumeration, Kolmogorov–Smirnov tests and a sign test.
//!
//! Nothing here reuses the forward recursion or the mixture machinery of
//! [`crate::pascal`]; the only shared piece is the Pascal pmf itself.

use std::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::delay::DelayModel;
use crate::error::{Error, Result};
use crate::intensity::ModelSpec;
use crate::pascal::pascal_pmf;
use crate::simulate::{discretize, simulate, PeriodCounts};
use crate::thinning::Which;

/// Random stream `stream` derived from a root seed.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// A Monte Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub value: f64,
    pub std_error: f64,
    pub replications: u64,
}

/// Empirical pmf of a simulated total count with binomial standard errors.
#[derive(Debug, Clone, PartialEq)]
pub struct McCountPmf {
    pub probabilities: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub replications: u64,
}

impl McCountPmf {
    /// Empirical pmf of observed totals.
    pub fn from_totals(totals: &[u64]) -> Self {
        let reps = totals.len() as u64;
        if reps == 0 {
            return Self {
                probabilities: Vec::new(),
                std_errors: Vec::new(),
                replications: 0,
            };
        }
        let max = totals.iter().copied().max().unwrap_or(0) as usize;
        let mut hist = vec![0u64; max + 1];
        for &t in totals {
            hist[t as usize] += 1;
        }
        let probabilities: Vec<f64> = hist.iter().map(|&c| c as f64 / reps as f64).collect();
        let std_errors = probabilities
            .iter()
            .map(|p| (p * (1.0 - p) / reps as f64).sqrt())
            .collect();
        Self {
            probabilities,
            std_errors,
            replications: reps,
        }
    }

    pub fn estimate(&self, n: usize) -> McEstimate {
        McEstimate {
            value: self.probabilities.get(n).copied().unwrap_or(0.0),
            std_error: self.std_errors.get(n).copied().unwrap_or(0.0),
            replications: self.replications,
        }
    }

    pub fn mean_std_error(&self) -> f64 {
        self.std_errors.iter().sum::<f64>() / self.std_errors.len() as f64
    }

    /// CSV `n,probability,std_error`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("n,probability,std_error\n");
        for (n, (p, s)) in self.probabilities.iter().zip(&self.std_errors).enumerate() {
            out.push_str(&format!("{n},{p:?},{s:?}\n"));
        }
        out
    }
}

/// Simulates `replications` independent claim histories up to `d_k` and
/// discretizes each at `d_k`. Replication `r` uses stream `r` of `seed`, and
/// results are returned in replication order whatever the thread count.
pub fn replicate_counts(
    spec: &ModelSpec,
    delay: &DelayModel,
    k: usize,
    replications: u64,
    seed: u64,
) -> Result<Vec<PeriodCounts>> {
    let tau = spec.grid_point(k);
    (0..replications)
        .into_par_iter()
        .map(|r| {
            let mut rng = stream_rng(seed, r);
            let claims = simulate(spec, delay, k, &mut rng)?;
            discretize(&claims, tau)
        })
        .collect()
}

/// Monte Carlo pmf of the total reported or IBNR count at `τ`.
pub fn mc_count_pmf(
    spec: &ModelSpec,
    delay: &DelayModel,
    tau: f64,
    which: Which,
    replications: u64,
    seed: u64,
) -> Result<McCountPmf> {
    if replications < 1000 {
        return Err(Error::Domain(format!(
            "need at least 1000 replications, got {replications}"
        )));
    }
    let k = spec.require_grid_index(tau)?;
    let counts = replicate_counts(spec, delay, k, replications, seed)?;
    let totals: Vec<u64> = counts
        .iter()
        .map(|c| match which {
            Which::Reported => c.total_reported(),
            Which::Ibnr => c.total_ibnr(),
        })
        .collect();
    Ok(McCountPmf::from_totals(&totals))
}

/// Hidden-path enumeration limit for [`brute_force_joint`].
pub const MAX_BRUTE_PATHS: f64 = 1e6;

fn mat_mul(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let g = a.len();
    let mut out = vec![vec![0.0; g]; g];
    for i in 0..g {
        for j in 0..g {
            for l in 0..g {
                out[i][j] += a[i][l] * b[l][j];
            }
        }
    }
    out
}

fn mat_pow(a: &[Vec<f64>], k: usize) -> Vec<Vec<f64>> {
    let g = a.len();
    let mut out: Vec<Vec<f64>> = (0..g)
        .map(|i| (0..g).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    for _ in 0..k {
        out = mat_mul(&out, a);
    }
    out
}

/// Literal sum over all `g^k` hidden paths of `β Π_j p(n_j; m_{i_j}, θ_j)`
/// for consecutive periods `1..=k`.
pub fn brute_force_joint(spec: &ModelSpec, counts: &[u64], scales: &[f64]) -> Result<f64> {
    let periods: Vec<usize> = (1..=counts.len()).collect();
    brute_force_joint_periods(spec, &periods, counts, scales)
}

/// Path sum for strictly increasing periods `l_1 < ⋯ < l_k`, with
/// `β = π_{l_1,i_1} γ_{i_1 i_2}(l_2 − l_1) ⋯`.
pub fn brute_force_joint_periods(
    spec: &ModelSpec,
    periods: &[usize],
    counts: &[u64],
    scales: &[f64],
) -> Result<f64> {
    let k = periods.len();
    if counts.len() != k || scales.len() != k {
        return Err(Error::DimensionMismatch {
            expected: k,
            got: counts.len().min(scales.len()),
        });
    }
    if k == 0 || periods[0] == 0 || periods.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Domain("periods must be 1-based and strictly increasing".into()));
    }
    let g = spec.g();
    let paths = (g as f64).powi(k as i32);
    if paths > MAX_BRUTE_PATHS {
        return Err(Error::StateSpaceTooLarge {
            paths,
            limit: MAX_BRUTE_PATHS,
        });
    }
    let gamma = spec.chain().rows();
    let pi1 = spec.initial().weights();
    let to_first = mat_pow(&gamma, periods[0] - 1);
    let pi_first: Vec<f64> = (0..g)
        .map(|j| (0..g).map(|i| pi1[i] * to_first[i][j]).sum())
        .collect();
    let steps: Vec<Vec<Vec<f64>>> = periods
        .windows(2)
        .map(|w| mat_pow(&gamma, w[1] - w[0]))
        .collect();
    let emission = (0..k)
        .map(|j| {
            (0..g)
                .map(|i| pascal_pmf(counts[j] as i64, spec.shapes()[i], scales[j]))
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<Vec<_>>>()?;

    let mut total = 0.0;
    let mut path = vec![0usize; k];
    loop {
        let mut beta = pi_first[path[0]];
        for j in 1..k {
            beta *= steps[j - 1][path[j - 1]][path[j]];
        }
        let emit: f64 = (0..k).map(|j| emission[j][path[j]]).product();
        total += beta * emit;
        let mut j = 0;
        while j < k {
            path[j] += 1;
            if path[j] < g {
                break;
            }
            path[j] = 0;
            j += 1;
        }
        if j == k {
            break;
        }
    }
    Ok(total)
}

/// One-sample Kolmogorov–Smirnov result at the 1% level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KsReport {
    pub statistic: f64,
    pub n: usize,
    pub critical_1pct: f64,
    pub pass: bool,
}

/// KS test of `samples` against a continuous CDF, with the asymptotic 1%
/// critical value `1.63/√n`.
pub fn ks_test(samples: &[f64], cdf: impl Fn(f64) -> f64) -> Result<KsReport> {
    if samples.is_empty() {
        return Err(Error::Domain("KS test needs a non-empty sample".into()));
    }
    let mut xs = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    let nf = n as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        let f = cdf(x);
        d = d.max(f - i as f64 / nf).max((i + 1) as f64 / nf - f);
    }
    let critical_1pct = 1.63 / nf.sqrt();
    Ok(KsReport {
        statistic: d,
        n,
        critical_1pct,
        pass: d < critical_1pct,
    })
}

/// KS test against `Uniform(a, b)`; needs at least 10 samples.
pub fn ks_uniform(samples: &[f64], a: f64, b: f64) -> Result<KsReport> {
    if !samples.is_empty() && samples.len() < 10 {
        return Err(Error::Domain(format!(
            "KS test needs at least 10 samples, got {}",
            samples.len()
        )));
    }
    if !(b > a) {
        return Err(Error::Domain(format!("empty interval [{a}, {b}]")));
    }
    ks_test(samples, |x| ((x - a) / (b - a)).clamp(0.0, 1.0))
}

/// Two-sided exact sign test at level `alpha`: `positives` successes out of
/// `n` fair coin flips.
pub fn sign_test(positives: usize, n: usize, alpha: f64) -> bool {
    // P(X <= x) for X ~ Binomial(n, 1/2)
    let cdf = |x: usize| -> f64 {
        let mut c = 1.0f64;
        let mut acc = 0.0;
        for i in 0..=x {
            if i > 0 {
                c = c * (n - i + 1) as f64 / i as f64;
            }
            acc += c;
        }
        acc * 0.5f64.powi(n as i32)
    };
    let tail = cdf(positives.min(n - positives));
    (2.0 * tail).min(1.0) > alpha
}

/// Compares an exact pmf with a Monte Carlo estimate bin by bin. Bins whose
/// expected count is at least 5 are tested individually at `sigmas` binomial
/// standard errors; all other bins are pooled into one tested bin.
pub fn compare_pmf_to_mc(exact: impl Fn(usize) -> f64, mc: &McCountPmf, sigmas: f64) -> DiagnosticReport {
    let reps = mc.replications as f64;
    let mut report = DiagnosticReport::default();
    let (mut pooled_mc, mut pooled_exact) = (0.0, 0.0);
    let top = mc.probabilities.len().max(64);
    for n in 0..top {
        let p = exact(n);
        let e = mc.probabilities.get(n).copied().unwrap_or(0.0);
        if p * reps >= 5.0 {
            let se = (p * (1.0 - p) / reps).sqrt();
            report.push(format!("bin {n} |mc - exact| / se"), (e - p).abs() / se, sigmas, (e - p).abs() <= sigmas * se);
        } else {
            pooled_mc += e;
            pooled_exact += p;
        }
    }
    let se = (pooled_exact * (1.0 - pooled_exact) / reps).sqrt().max(1.0 / reps);
    let z = (pooled_mc - pooled_exact).abs() / se;
    report.push("pooled sparse bins |mc - exact| / se", z, sigmas, z <= sigmas);
    report
}

/// One line of a diagnostic report.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticRow {
    pub check: String,
    pub value: f64,
    pub threshold: f64,
    pub pass: bool,
}

/// Plain-text table of diagnostic checks.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DiagnosticReport {
    pub rows: Vec<DiagnosticRow>,
}

impl DiagnosticReport {
    pub fn push(&mut self, check: impl Into<String>, value: f64, threshold: f64, pass: bool) {
        self.rows.push(DiagnosticRow {
            check: check.into(),
            value,
            threshold,
            pass,
        });
    }

    pub fn all_pass(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }
}

impl fmt::Display for DiagnosticReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let width = self.rows.iter().map(|r| r.check.len()).max().unwrap_or(5).max(5);
        writeln!(f, "{:<width$}  {:>14}  {:>14}  result", "check", "value", "threshold")?;
        for r in &self.rows {
            writeln!(
                f,
                "{:<width$}  {:>14.6e}  {:>14.6e}  {}",
                r.check,
                r.value,
                r.threshold,
                if r.pass { "PASS" } else { "FAIL" }
            )?;
        }
        Ok(())
    }
}
