//! Acceptance suite: one line per criterion, nonzero exit if any fails.
//!
//! Run with `cargo test -p coxclaims --test acceptance`.

mod common;

use std::collections::HashMap;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use coxclaims::intensity::sample_path;
use coxclaims::markov::spectral_decompose;
use coxclaims::pascal::{
    acf, acf_direct, acf_series, joint_pmf, marginal_law, marginal_pmf_scaled, pascal_pmf,
    total_count_law, total_count_law_detailed, unify_scales, PascalMixtureMulti,
};
use coxclaims::simulate::simulate;
use coxclaims::thinning::{ibnr_mark_density, reported_mark_density, thinned_scales};
use coxclaims::validation::{brute_force_joint, ks_uniform, mc_count_pmf, replicate_counts, stream_rng};
use coxclaims::{DelayModel, ModelSpec, Which};
use rand::Rng;
use rayon::prelude::*;

use common::{ammeter, random_delay, random_spec, reference};

type Outcome = Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn exp1() -> DelayModel {
    DelayModel::Exponential { rate: 1.0 }
}

fn forward_vs_brute_force() -> Outcome {
    let mut rng = stream_rng(20_240_101, 0);
    let mut worst: f64 = 0.0;
    for case in 0..100 {
        let g = 1 + case % 3;
        let k = 1 + (case / 3) % 4;
        let spec = random_spec(&mut rng, g, k, false);
        let counts: Vec<u64> = (0..k).map(|_| rng.random_range(0..=5)).collect();
        let scales: Vec<f64> = (0..k).map(|_| rng.random_range(0.05..3.0)).collect();
        let fwd = joint_pmf(&spec, &counts, &scales).map_err(|e| e.to_string())?;
        let brute = brute_force_joint(&spec, &counts, &scales).map_err(|e| e.to_string())?;
        worst = worst.max((fwd - brute).abs());
    }
    ensure(worst <= 1e-12, || format!("max |forward - brute force| = {worst:e}"))?;
    Ok(format!("100 specs, max difference {worst:e}"))
}

fn normalization() -> Outcome {
    let eps = 1e-6;
    let mut rng = stream_rng(20_240_102, 0);
    let mut checked = 0;
    let mut check = |what: &str, pmf: &[f64], bound: f64| -> Result<(), String> {
        let total: f64 = pmf.iter().sum();
        checked += 1;
        ensure(bound <= eps, || format!("{what}: tail bound {bound:e} > {eps:e}"))?;
        ensure(total <= 1.0 + 1e-12 && 1.0 - total <= bound + 1e-12, || {
            format!("{what}: pmf sums to {total}, tail bound {bound:e}")
        })
    };
    for case in 0..60 {
        let g = 1 + case % 3;
        let spec = random_spec(&mut rng, g, 3, false);
        for l in 1..=3 {
            let law = marginal_law(&spec, l, eps).map_err(|e| e.to_string())?;
            check("marginal", &law.pmf, law.tail_bound)?;
        }
    }
    let spec = reference(3);
    let delays = [
        exp1(),
        DelayModel::Uniform { upper: 2.5 },
        DelayModel::Weibull { shape: 1.5, scale: 0.8 },
        DelayModel::PiecewiseEmpirical {
            knots: vec![0.0, 0.5, 2.0],
            cdf: vec![0.2, 0.6, 1.0],
        },
    ];
    for delay in &delays {
        for which in [Which::Reported, Which::Ibnr] {
            let law = total_count_law(&spec, delay, 3.0, which, eps, None).map_err(|e| e.to_string())?;
            check("total", &law.pmf, law.tail_bound)?;
        }
    }
    for case in 0..30 {
        let spec = random_spec(&mut rng, 1 + case % 3, 1 + case % 3, false);
        let delay = DelayModel::Exponential {
            rate: rng.random_range(0.2..2.0),
        };
        let k = spec.num_periods();
        let law = total_count_law(&spec, &delay, spec.grid_point(k), Which::Reported, eps, None)
            .map_err(|e| e.to_string())?;
        check("total", &law.pmf, law.tail_bound)?;
    }
    Ok(format!("{checked} pmf tables within their tail bounds (eps {eps:e})"))
}

fn acf_dual_path() -> Outcome {
    let mut rng = stream_rng(20_240_103, 0);
    let mut worst: f64 = 0.0;
    let mut specs = 0;
    while specs < 50 {
        let g = 2 + specs % 2;
        let spec = random_spec(&mut rng, g, 2, true);
        if spectral_decompose(spec.chain()).is_err() {
            continue;
        }
        specs += 1;
        for k in 1..=20 {
            let a = acf(&spec, k).map_err(|e| e.to_string())?;
            let b = acf_direct(&spec, k).map_err(|e| e.to_string())?;
            worst = worst.max((a - b).abs());
        }
    }
    ensure(worst <= 1e-10, || format!("max |spectral - direct| = {worst:e}"))?;
    for spec in [ammeter(1, 0.7, 2), ammeter(2, 0.8, 2), ammeter(3, 1.4, 2)] {
        let (series, _) = acf_series(&spec, 20).map_err(|e| e.to_string())?;
        ensure(series.iter().all(|&r| r == 0.0), || {
            format!("independent periods gave nonzero ACF {series:?}")
        })?;
    }
    Ok(format!("50 specs, max difference {worst:e}; independent cases exactly 0"))
}

/// Per-bin comparison restricted to bins with expected count at least 5,
/// with the remaining bins pooled into one.
fn bins_within_4se(
    what: &str,
    empirical: &[f64],
    exact: impl Fn(usize) -> f64,
    reps: f64,
) -> Result<usize, String> {
    let mut tested = 0;
    let mut pooled_emp = 0.0;
    let mut pooled_exact = 0.0;
    let top = empirical.len().max(64);
    for n in 0..top {
        let p = exact(n);
        let e = empirical.get(n).copied().unwrap_or(0.0);
        if p * reps >= 5.0 {
            let se = (p * (1.0 - p) / reps).sqrt();
            ensure((e - p).abs() <= 4.0 * se, || {
                format!("{what} bin {n}: empirical {e} vs exact {p} (se {se:e})")
            })?;
            tested += 1;
        } else {
            pooled_emp += e;
            pooled_exact += p;
        }
    }
    let p = pooled_exact;
    let se = (p * (1.0 - p) / reps).sqrt().max(1.0 / reps);
    ensure((pooled_emp - p).abs() <= 4.0 * se, || {
        format!("{what} pooled tail: empirical {pooled_emp} vs exact {p}")
    })?;
    Ok(tested + 1)
}

fn simulation_law() -> Outcome {
    let spec = reference(3);
    let reps = 1_000_000u64;
    let counts = replicate_counts(&spec, &exp1(), 3, reps, 4004).map_err(|e| e.to_string())?;
    let n = reps as f64;

    let mut joint: HashMap<[u64; 3], u64> = HashMap::new();
    for c in &counts {
        *joint.entry([c.total[0], c.total[1], c.total[2]]).or_default() += 1;
    }
    let scales: Vec<f64> = (1..=3).map(|l| spec.period_scale(l).unwrap()).collect();
    let mut abs_diff = 0.0;
    let mut covered = 0.0;
    for (tuple, &hits) in &joint {
        let p = joint_pmf(&spec, tuple, &scales).map_err(|e| e.to_string())?;
        abs_diff += (hits as f64 / n - p).abs();
        covered += p;
    }
    let tv = 0.5 * (abs_diff + (1.0 - covered).max(0.0));
    ensure(tv <= 0.02, || format!("joint total variation {tv}"))?;

    let thinned = thinned_scales(&spec, &exp1(), 3.0).map_err(|e| e.to_string())?;
    let mut bins = 0;
    for j in 0..3 {
        let max = counts.iter().map(|c| c.reported[j]).max().unwrap_or(0) as usize;
        let mut hist = vec![0.0; max + 1];
        for c in &counts {
            hist[c.reported[j] as usize] += 1.0 / n;
        }
        let scale = thinned.reported[j];
        bins += bins_within_4se(
            &format!("reported period {}", j + 1),
            &hist,
            |m| marginal_pmf_scaled(&spec, j + 1, m as u64, scale).unwrap(),
            n,
        )?;
    }
    Ok(format!("joint TV {tv:.5}; {bins} reported-count bins within 4 se"))
}

fn order_statistics() -> Outcome {
    let spec = reference(3);
    let epochs: Vec<Vec<(usize, f64)>> = (0..150_000u64)
        .into_par_iter()
        .map(|r| {
            simulate(&spec, &exp1(), 3, &mut stream_rng(5005, r))
                .map(|c| c.records.iter().map(|x| (x.period, x.arrival)).collect())
                .unwrap_or_default()
        })
        .collect();
    let mut stats = Vec::new();
    for l in 1..=3 {
        let xs: Vec<f64> = epochs
            .iter()
            .flatten()
            .filter(|(p, _)| *p == l)
            .map(|(_, t)| *t)
            .collect();
        ensure(xs.len() >= 100_000, || format!("period {l}: only {} epochs", xs.len()))?;
        let ks = ks_uniform(&xs, (l - 1) as f64, l as f64).map_err(|e| e.to_string())?;
        ensure(ks.pass, || format!("period {l}: {ks:?}"))?;
        stats.push(format!("D{l}={:.5}/{:.5} (n={})", ks.statistic, ks.critical_1pct, ks.n));
    }
    Ok(stats.join(", "))
}

/// pmf of a mixture evaluated from its definition with a per-dimension table.
fn mixture_pmf_table(mix: &PascalMixtureMulti, max: u64) -> HashMap<Vec<u64>, f64> {
    let dims = mix.dims();
    let max_shape = mix.weights.keys().flatten().copied().max().unwrap_or(1);
    let table: Vec<Vec<Vec<f64>>> = mix
        .scales
        .iter()
        .map(|&s| {
            (0..=max_shape)
                .map(|m| {
                    (0..=max)
                        .map(|n| if m == 0 { 0.0 } else { pascal_pmf(n as i64, m, s).unwrap() })
                        .collect()
                })
                .collect()
        })
        .collect();
    let mut out = HashMap::new();
    let mut idx = vec![0u64; dims];
    loop {
        let p: f64 = mix
            .weights
            .iter()
            .map(|(shape, w)| {
                w * (0..dims)
                    .map(|j| table[j][shape[j] as usize][idx[j] as usize])
                    .product::<f64>()
            })
            .sum();
        out.insert(idx.clone(), p);
        let mut j = 0;
        while j < dims {
            idx[j] += 1;
            if idx[j] <= max {
                break;
            }
            idx[j] = 0;
            j += 1;
        }
        if j == dims {
            return out;
        }
    }
}

fn scale_unification() -> Outcome {
    let mut rng = stream_rng(20_240_106, 0);
    let eps = 1e-6;
    let mut worst_excess: f64 = f64::NEG_INFINITY;
    let mut cases = 0;
    for case in 0..24 {
        let g = 1 + case % 3;
        let k = 1 + (case / 3) % 3;
        let spec = random_spec(&mut rng, g, k, false);
        let low = rng.random_range(0.2..1.0);
        let scales: Vec<f64> = (0..k).map(|_| low * rng.random_range(1.0..2.5)).collect();
        let common = scales.iter().copied().fold(f64::INFINITY, f64::min);
        let mix = PascalMixtureMulti::from_hmm(&spec, &scales).map_err(|e| e.to_string())?;
        let out = unify_scales(&mix, common, eps).map_err(|e| e.to_string())?;
        let mass: f64 = out.weights.values().sum();
        ensure(mass + out.deficit >= 1.0 - 1e-9 && mass + out.deficit <= 1.0 + 1e-12, || {
            format!("case {case}: mass {mass} + deficit {} outside [1-1e-9, 1]", out.deficit)
        })?;
        ensure(out.deficit <= eps, || format!("case {case}: deficit {} > {eps}", out.deficit))?;
        let transformed = mixture_pmf_table(&out, 10);
        for (counts, p) in &transformed {
            let orig = joint_pmf(&spec, counts, &scales).map_err(|e| e.to_string())?;
            let excess = (orig - p).abs() - out.deficit;
            worst_excess = worst_excess.max(excess);
            ensure(excess <= 1e-9, || {
                format!("case {case} counts {counts:?}: {orig} vs {p}, deficit {}", out.deficit)
            })?;
        }
        cases += 1;
    }
    Ok(format!(
        "{cases} mixtures on all tuples with entries <= 10; max |diff| - deficit {worst_excess:e}"
    ))
}

fn aggregate_law() -> Outcome {
    let spec = reference(3);
    let eps = 1e-9;
    let reps = 1_000_000u64;
    let mut notes = Vec::new();
    for which in [Which::Reported, Which::Ibnr] {
        let (law, mix) = total_count_law_detailed(&spec, &exp1(), 3.0, which, eps, None)
            .map_err(|e| e.to_string())?;
        let deficit = mix.map(|m| m.deficit).unwrap_or(0.0);
        let scales = thinned_scales(&spec, &exp1(), 3.0).unwrap().get(which).to_vec();
        let mut worst: f64 = 0.0;
        for n in 0..=15u64 {
            let mut conv = 0.0;
            for a in 0..=n {
                for b in 0..=n - a {
                    conv += joint_pmf(&spec, &[a, b, n - a - b], &scales).unwrap();
                }
            }
            let diff = (law.get(n as usize) - conv).abs();
            worst = worst.max(diff);
            ensure(diff <= deficit + 1e-9, || {
                format!("{which}: n={n} law {} vs convolution {conv}", law.get(n as usize))
            })?;
        }
        let mc = mc_count_pmf(&spec, &exp1(), 3.0, which, reps, 7007).map_err(|e| e.to_string())?;
        let bins = bins_within_4se(&which.to_string(), &mc.probabilities, |n| law.get(n), reps as f64)?;
        notes.push(format!("{which}: convolution diff {worst:e}, {bins} MC bins within 4 se"));
    }
    Ok(notes.join("; "))
}

fn conservation() -> Outcome {
    let mut rng = stream_rng(20_240_108, 0);
    let mut worst_scale: f64 = 0.0;
    let mut worst_mark: f64 = 0.0;
    for case in 0..200 {
        let k = 1 + case % 5;
        let spec: ModelSpec = random_spec(&mut rng, 1 + case % 3, k, false);
        let delay = random_delay(&mut rng);
        let tau = spec.grid_point(k);
        let s = thinned_scales(&spec, &delay, tau).map_err(|e| e.to_string())?;
        for j in 0..k {
            let whole = spec.period_scale(j + 1).unwrap();
            worst_scale = worst_scale.max((s.reported[j] + s.ibnr[j] - whole).abs());
        }
        for _ in 0..20 {
            let t = rng.random_range(0.0..=tau);
            let u = if rng.random_bool(0.2) {
                // probe the boundary and the atoms explicitly
                match &delay {
                    DelayModel::Degenerate { at } => *at,
                    DelayModel::PiecewiseEmpirical { knots, .. } => knots[0],
                    _ => tau - t,
                }
            } else {
                rng.random_range(0.0..tau + 3.0)
            };
            let p = delay.cdf(tau - t);
            let base = delay.mass_at(u);
            let rep = reported_mark_density(&delay, t, tau, u)
                .map(|m| m.scaled(p))
                .unwrap_or_default();
            let ibnr = ibnr_mark_density(&delay, t, tau, u)
                .map(|m| m.scaled(1.0 - p))
                .unwrap_or_default();
            if base.density.is_finite() {
                worst_mark = worst_mark.max((rep.density + ibnr.density - base.density).abs());
            }
            worst_mark = worst_mark.max((rep.atom + ibnr.atom - base.atom).abs());
        }
    }
    ensure(worst_scale <= 1e-10, || format!("scale conservation off by {worst_scale:e}"))?;
    ensure(worst_mark <= 1e-10, || format!("mark mixture identity off by {worst_mark:e}"))?;
    Ok(format!("200 cases; scale {worst_scale:e}, mark {worst_mark:e}"))
}

fn determinism() -> Outcome {
    let spec = reference(3);
    let delay = DelayModel::Weibull { shape: 1.3, scale: 0.9 };
    let run = || -> Result<String, String> {
        let mut out = String::new();
        for r in 0..20 {
            out.push_str(&simulate(&spec, &delay, 3, &mut stream_rng(9, r)).map_err(|e| e.to_string())?.to_csv());
            let path = sample_path(&spec, 5, &mut stream_rng(9, r)).map_err(|e| e.to_string())?;
            out.push_str(&format!("{:?}\n", path.intensities));
        }
        let counts = replicate_counts(&spec, &delay, 3, 20_000, 9).map_err(|e| e.to_string())?;
        out.push_str(&format!("{counts:?}\n"));
        let mc = mc_count_pmf(&spec, &delay, 3.0, Which::Ibnr, 20_000, 9).map_err(|e| e.to_string())?;
        out.push_str(&mc.to_csv());
        Ok(out)
    };
    let first = run()?;
    let second = run()?;
    let single = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .map_err(|e| e.to_string())?
        .install(run)?;
    ensure(first == second, || "two runs with the same seed differ".into())?;
    ensure(first == single, || "single-threaded run differs from parallel run".into())?;
    Ok(format!("{} bytes identical across 3 runs (incl. 1 thread)", first.len()))
}

fn main() -> ExitCode {
    let criteria: [(&str, Duration, fn() -> Outcome); 9] = [
        ("forward vs brute-force joint pmf", Duration::from_secs(10), forward_vs_brute_force),
        ("pmf normalization within tail bounds", Duration::from_secs(5), normalization),
        ("ACF spectral vs direct", Duration::from_secs(5), acf_dual_path),
        ("simulation law vs exact joint/marginals", Duration::from_secs(120), simulation_law),
        ("order-statistics uniformity", Duration::from_secs(60), order_statistics),
        ("scale-unification exactness", Duration::from_secs(30), scale_unification),
        ("aggregate law vs convolution and MC", Duration::from_secs(120), aggregate_law),
        ("conservation identities", Duration::from_secs(5), conservation),
        ("seed determinism", Duration::from_secs(120), determinism),
    ];
    let mut failed = 0;
    for (i, (name, limit, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = check();
        let elapsed = start.elapsed();
        let outcome = outcome.and_then(|msg| {
            if elapsed <= *limit {
                Ok(msg)
            } else {
                Err(format!("{msg}; took {elapsed:.1?}, limit {limit:?}"))
            }
        });
        match outcome {
            Ok(msg) => println!("criterion {}: PASS  {name} [{elapsed:.2?}] {msg}", i + 1),
            Err(msg) => {
                failed += 1;
                println!("criterion {}: FAIL  {name} [{elapsed:.2?}] {msg}", i + 1);
            }
        }
    }
    if failed == 0 {
        println!("acceptance: all 9 criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: {failed} of 9 criteria failed");
        ExitCode::FAILURE
    }
}
