use std::fmt;
use std::fs;
use std::io::Write as _;
use std::path::Path;

use coxclaims::pascal::{
    acf_direct, acf_series, check_normalization, joint_pmf, marginal_law, marginal_law_upto,
    total_count_law, CountLaw,
};
use coxclaims::simulate::simulate as simulate_claims;
use coxclaims::thinning::thinned_scales;
use coxclaims::validation::{
    brute_force_joint, compare_pmf_to_mc, ks_uniform, mc_count_pmf, replicate_counts, stream_rng,
    DiagnosticReport, McCountPmf,
};
use coxclaims::{Error, RunConfig, Which};

use crate::DistKind;

const VERIFY_SIGMAS: f64 = 4.0;
const DEFAULT_VERIFY_REPLICATIONS: u64 = 100_000;

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Precondition(String),
    Accuracy(String),
    Io(String),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "invalid configuration: {m}"),
            CliError::Precondition(m) => write!(f, "{m}"),
            CliError::Accuracy(m) => write!(f, "{m}"),
            CliError::Io(m) => write!(f, "{m}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidRow { .. }
            | Error::InvalidField { .. }
            | Error::UnsupportedChain(_)
            | Error::DimensionMismatch { .. } => CliError::Config(e.to_string()),
            Error::Accuracy { .. } => CliError::Accuracy(e.to_string()),
            Error::SpectralUnsupported(_)
            | Error::Domain(_)
            | Error::Precondition(_)
            | Error::DegenerateConditioning(_)
            | Error::StateSpaceTooLarge { .. } => CliError::Precondition(e.to_string()),
        }
    }
}

/// What a command produced: the main output, an optional report for
/// standard error, and a failure to report after the output is written.
pub struct Output {
    pub text: String,
    pub report: Option<String>,
    pub failure: Option<CliError>,
}

impl Output {
    fn text(text: String) -> Self {
        Self {
            text,
            report: None,
            failure: None,
        }
    }
}

pub fn load(path: Option<&Path>) -> Result<RunConfig, CliError> {
    let path = path.ok_or_else(|| CliError::Config("config: --config <path> is required".into()))?;
    Ok(RunConfig::load(path)?)
}

pub fn emit(path: Option<&Path>, output: &Output) -> Result<(), CliError> {
    match path {
        Some(p) => fs::write(p, &output.text)
            .map_err(|e| CliError::Io(format!("cannot write {}: {e}", p.display())))?,
        None => std::io::stdout()
            .write_all(output.text.as_bytes())
            .map_err(|e| CliError::Io(e.to_string()))?,
    }
    if let Some(report) = &output.report {
        eprint!("{report}");
    }
    Ok(())
}

pub fn simulate(
    config: &RunConfig,
    seed: Option<u64>,
    k: Option<usize>,
    replications: u64,
) -> Result<Output, CliError> {
    let seed = config.require_seed(seed)?;
    let k = k.unwrap_or_else(|| config.horizon());
    if replications == 0 {
        return Err(CliError::Config("replications: must be at least 1".into()));
    }
    if replications == 1 {
        let claims = simulate_claims(&config.model, &config.delay, k, &mut stream_rng(seed, 0))?;
        return Ok(Output::text(claims.to_csv()));
    }
    let mut text = String::from("replication,arrival,delay,report_time,period\n");
    for r in 0..replications {
        let claims = simulate_claims(&config.model, &config.delay, k, &mut stream_rng(seed, r))?;
        for line in claims.to_csv().lines().skip(1) {
            text.push_str(&format!("{r},{line}\n"));
        }
    }
    Ok(Output::text(text))
}

pub struct DistArgs {
    pub which: DistKind,
    pub period: usize,
    pub n_max: Option<usize>,
    pub eps: f64,
    pub mc: Option<u64>,
    pub verify: bool,
}

fn period_marginal(config: &RunConfig, args: &DistArgs) -> Result<CountLaw, CliError> {
    match args.n_max {
        Some(n_max) => {
            let law = marginal_law_upto(&config.model, args.period, n_max)?;
            if law.tail_bound > args.eps {
                return Err(Error::Accuracy {
                    bound: law.tail_bound,
                    eps: args.eps,
                }
                .into());
            }
            Ok(law)
        }
        None => Ok(marginal_law(&config.model, args.period, args.eps)?),
    }
}

fn period_marginal_mc(
    config: &RunConfig,
    period: usize,
    replications: u64,
    seed: u64,
) -> Result<McCountPmf, CliError> {
    let counts = replicate_counts(&config.model, &config.delay, period, replications, seed)?;
    let totals: Vec<u64> = counts.iter().map(|c| c.total[period - 1]).collect();
    Ok(McCountPmf::from_totals(&totals))
}

pub fn dist(config: &RunConfig, seed: Option<u64>, args: &DistArgs) -> Result<Output, CliError> {
    if !(args.eps > 0.0 && args.eps < 0.1) {
        return Err(CliError::Config(format!("eps: must lie in (0, 0.1), got {}", args.eps)));
    }
    if args.period == 0 {
        return Err(CliError::Config("period: must be at least 1".into()));
    }
    let which = match args.which {
        DistKind::Reported => Some(Which::Reported),
        DistKind::Ibnr => Some(Which::Ibnr),
        DistKind::PeriodMarginal => None,
    };
    let exact = match which {
        Some(w) => total_count_law(&config.model, &config.delay, config.valuation, w, args.eps, args.n_max)
            .map_err(CliError::from),
        None => period_marginal(config, args),
    };
    let law = match exact {
        Ok(law) => law,
        Err(CliError::Accuracy(msg)) => {
            let Some(reps) = args.mc else {
                return Err(CliError::Accuracy(format!(
                    "{msg}; rerun with --mc <replications> for a Monte Carlo estimate"
                )));
            };
            let seed = config.require_seed(seed)?;
            let mc = match which {
                Some(w) => mc_count_pmf(&config.model, &config.delay, config.valuation, w, reps, seed)?,
                None => period_marginal_mc(config, args.period, reps, seed)?,
            };
            let text = format!(
                "# method=monte-carlo replications={reps} seed={seed}\n{}",
                mc.to_csv()
            );
            return Ok(Output::text(text));
        }
        Err(e) => return Err(e),
    };

    let mut output = Output::text(law.to_csv());
    if args.verify {
        let seed = config.require_seed(seed)?;
        let reps = args.mc.unwrap_or(DEFAULT_VERIFY_REPLICATIONS);
        let mc = match which {
            Some(w) => mc_count_pmf(&config.model, &config.delay, config.valuation, w, reps, seed)?,
            None => period_marginal_mc(config, args.period, reps, seed)?,
        };
        let report = compare_pmf_to_mc(|n| law.get(n), &mc, VERIFY_SIGMAS);
        if !report.all_pass() {
            output.failure = Some(CliError::Accuracy(format!(
                "exact pmf disagrees with {reps} Monte Carlo replications beyond {VERIFY_SIGMAS} standard errors"
            )));
        }
        output.report = Some(report.to_string());
    }
    Ok(output)
}

pub fn acf(config: &RunConfig, max_lag: usize) -> Result<Output, CliError> {
    check_normalization(&config.model)?;
    let (series, path) = acf_series(&config.model, max_lag)?;
    let mut text = format!("# path={path}\nk,rho\n");
    for (k, rho) in series.iter().enumerate() {
        text.push_str(&format!("{},{rho:?}\n", k + 1));
    }
    Ok(Output::text(text))
}

pub fn verify(config: &RunConfig, seed: Option<u64>, replications: u64) -> Result<Output, CliError> {
    let seed = config.require_seed(seed)?;
    let spec = &config.model;
    let delay = &config.delay;
    let k = config.horizon();
    let mut report = DiagnosticReport::default();

    // forward recursion against the literal path sum on small count tuples
    let mut depth = k.min(4);
    while depth > 1 && (spec.g() as f64).powi(depth as i32) > 1e6 {
        depth -= 1;
    }
    let scales: Vec<f64> = (1..=depth).map(|l| spec.period_scale(l)).collect::<Result<_, _>>()?;
    let mut worst: f64 = 0.0;
    let mut counts = vec![0u64; depth];
    loop {
        let fwd = joint_pmf(spec, &counts, &scales)?;
        let brute = brute_force_joint(spec, &counts, &scales)?;
        worst = worst.max((fwd - brute).abs());
        let mut j = 0;
        while j < depth {
            counts[j] += 1;
            if counts[j] <= 3 {
                break;
            }
            counts[j] = 0;
            j += 1;
        }
        if j == depth {
            break;
        }
    }
    report.push("joint pmf: |forward - path sum|", worst, 1e-12, worst <= 1e-12);

    let mut excess: f64 = f64::NEG_INFINITY;
    for l in 1..=k {
        let law = marginal_law(spec, l, 1e-6)?;
        let total: f64 = law.pmf.iter().sum();
        excess = excess.max((1.0 - total).abs() - law.tail_bound);
    }
    report.push("marginal pmf: |1 - sum| - tail bound", excess, 1e-12, excess <= 1e-12);

    let thinned = thinned_scales(spec, delay, config.valuation)?;
    let mut gap: f64 = 0.0;
    for j in 0..k {
        gap = gap.max((thinned.reported[j] + thinned.ibnr[j] - spec.period_scale(j + 1)?).abs());
    }
    report.push("thinned scales: |reported + ibnr - whole|", gap, 1e-10, gap <= 1e-10);

    for which in [Which::Reported, Which::Ibnr] {
        match total_count_law(spec, delay, config.valuation, which, 1e-6, None) {
            Ok(law) => {
                let mc = mc_count_pmf(spec, delay, config.valuation, which, replications, seed)?;
                let bins = compare_pmf_to_mc(|n| law.get(n), &mc, VERIFY_SIGMAS);
                let z = bins.rows.iter().map(|r| r.value).fold(0.0, f64::max);
                report.push(format!("total {which}: max |mc - exact| / se"), z, VERIFY_SIGMAS, bins.all_pass());
            }
            Err(Error::Accuracy { bound, .. }) => {
                report.push(format!("total {which}: truncation bound"), bound, 1e-6, false);
            }
            Err(e) => return Err(e.into()),
        }
    }

    let reps = replications.min(50_000);
    let mut ratio: f64 = 0.0;
    let mut epochs: Vec<Vec<f64>> = vec![Vec::new(); k];
    for r in 0..reps {
        let claims = simulate_claims(spec, delay, k, &mut stream_rng(seed, r))?;
        for c in &claims.records {
            epochs[c.period - 1].push(c.arrival);
        }
    }
    for (l, xs) in epochs.iter().enumerate() {
        if xs.len() < 10 {
            continue;
        }
        let p = spec.period(l + 1)?;
        let ks = ks_uniform(xs, p.start, p.end)?;
        ratio = ratio.max(ks.statistic / ks.critical_1pct);
    }
    report.push("epochs: KS statistic / 1% critical value", ratio, 1.0, ratio < 1.0);

    if check_normalization(spec).is_ok() {
        let (series, path) = acf_series(spec, 20)?;
        let mut diff: f64 = 0.0;
        for (i, rho) in series.iter().enumerate() {
            diff = diff.max((rho - acf_direct(spec, i + 1)?).abs());
        }
        report.push(format!("acf: |{path} - covariance ratio|"), diff, 1e-10, diff <= 1e-10);
    }

    let failure = (!report.all_pass())
        .then(|| CliError::Accuracy("one or more diagnostics failed".into()));
    Ok(Output {
        text: report.to_string(),
        report: None,
        failure,
    })
}
