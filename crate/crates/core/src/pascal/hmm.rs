//! Marginal and joint laws of the discretely observed Pascal-HMM.

use crate::error::{Error, Result};
use crate::intensity::ModelSpec;
use crate::markov::k_step;

use super::kernel::{pascal_tail_bound, pmf_unchecked};
use super::law::CountLaw;

/// `P(N_l = n) = Σ_i π_{l,i} p(n; m_i, (d_l − d_{l−1}) ω_l θ)`.
pub fn marginal_pmf(spec: &ModelSpec, l: usize, n: u64) -> Result<f64> {
    marginal_pmf_scaled(spec, l, n, spec.period_scale(l)?)
}

/// Mixed Pascal pmf of period `l` with an explicit scale, e.g. a thinned one.
pub fn marginal_pmf_scaled(spec: &ModelSpec, l: usize, n: u64, scale: f64) -> Result<f64> {
    if !(scale.is_finite() && scale >= 0.0) {
        return Err(Error::Domain(format!("scale must be >= 0, got {scale}")));
    }
    let law = spec.state_law(l)?;
    Ok(law
        .iter()
        .zip(spec.shapes())
        .map(|(w, &m)| w * pmf_unchecked(n, m, scale))
        .sum())
}

/// Marginal law of `N_l` tabulated up to the first `n` whose geometric tail
/// bound is at most `eps`.
pub fn marginal_law(spec: &ModelSpec, l: usize, eps: f64) -> Result<CountLaw> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::Domain(format!("tolerance must lie in (0, 1), got {eps}")));
    }
    let scale = spec.period_scale(l)?;
    let law = spec.state_law(l)?;
    let tail = |n: u64| -> f64 {
        law.iter()
            .zip(spec.shapes())
            .map(|(w, &m)| w * pascal_tail_bound(n, m, scale))
            .sum()
    };
    let mut n_max = 0u64;
    while tail(n_max) > eps {
        n_max += 1;
        if n_max > 50_000_000 {
            return Err(Error::Accuracy {
                bound: tail(n_max),
                eps,
            });
        }
    }
    let pmf = (0..=n_max)
        .map(|n| marginal_pmf_scaled(spec, l, n, scale))
        .collect::<Result<Vec<_>>>()?;
    Ok(CountLaw::new(pmf, tail(n_max)))
}

/// Marginal law of `N_l` on `0..=n_max`, with the geometric tail bound at `n_max`.
pub fn marginal_law_upto(spec: &ModelSpec, l: usize, n_max: usize) -> Result<CountLaw> {
    let scale = spec.period_scale(l)?;
    let law = spec.state_law(l)?;
    let bound = law
        .iter()
        .zip(spec.shapes())
        .map(|(w, &m)| w * pascal_tail_bound(n_max as u64, m, scale))
        .sum();
    let pmf = (0..=n_max as u64)
        .map(|n| marginal_pmf_scaled(spec, l, n, scale))
        .collect::<Result<Vec<_>>>()?;
    Ok(CountLaw::new(pmf, bound))
}

fn check_query(periods: &[usize], counts: &[u64], scales: &[f64]) -> Result<()> {
    if counts.len() != periods.len() {
        return Err(Error::DimensionMismatch {
            expected: periods.len(),
            got: counts.len(),
        });
    }
    if scales.len() != periods.len() {
        return Err(Error::DimensionMismatch {
            expected: periods.len(),
            got: scales.len(),
        });
    }
    if periods.is_empty() {
        return Err(Error::Domain("need at least one period".into()));
    }
    if periods[0] == 0 || periods.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Domain(
            "periods must be 1-based and strictly increasing".into(),
        ));
    }
    if let Some(s) = scales.iter().find(|s| !(s.is_finite() && **s >= 0.0)) {
        return Err(Error::Domain(format!("scale must be >= 0, got {s}")));
    }
    Ok(())
}

/// Joint pmf of `(N_1, …, N_k)` for consecutive periods starting at 1.
///
/// Forward product `π_1 D_1 Γ D_2 Γ ⋯ D_k 1ᵀ` with
/// `D_l = diag(p(n_l; m_i, θ_l))`.
pub fn joint_pmf(spec: &ModelSpec, counts: &[u64], scales: &[f64]) -> Result<f64> {
    let periods: Vec<usize> = (1..=counts.len()).collect();
    joint_pmf_periods(spec, &periods, counts, scales)
}

/// Joint pmf of `(N_{l_1}, …, N_{l_k})` for strictly increasing periods,
/// chaining `Γ^{l_{j+1} − l_j}` between observed periods.
pub fn joint_pmf_periods(
    spec: &ModelSpec,
    periods: &[usize],
    counts: &[u64],
    scales: &[f64],
) -> Result<f64> {
    check_query(periods, counts, scales)?;
    let g = spec.g();
    let shapes = spec.shapes();
    let emit = |j: usize, i: usize| pmf_unchecked(counts[j], shapes[i], scales[j]);

    let mut alpha: Vec<f64> = spec
        .state_law(periods[0])?
        .iter()
        .enumerate()
        .map(|(i, w)| w * emit(0, i))
        .collect();
    for j in 1..periods.len() {
        let step = k_step(spec.chain(), periods[j] - periods[j - 1]);
        alpha = (0..g)
            .map(|b| {
                let flow: f64 = (0..g).map(|a| alpha[a] * step[(a, b)]).sum();
                flow * emit(j, b)
            })
            .collect();
    }
    Ok(alpha.iter().sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::intensity::fixtures::*;
    use crate::markov::StateDistribution;

    #[test]
    fn single_state_marginal_is_pascal() {
        let spec = single_state(3, 0.8, 2);
        for n in 0..20 {
            let a = marginal_pmf(&spec, 2, n).unwrap();
            assert!((a - pmf_unchecked(n, 3, 0.8)).abs() < 1e-16);
        }
    }

    #[test]
    fn marginal_uses_propagated_law() {
        let spec = reference(3)
            .with_initial(StateDistribution::new(vec![1.0, 0.0]).unwrap())
            .unwrap();
        for n in 0..10 {
            let want = 0.83 * pmf_unchecked(n, 1, 0.5) + 0.17 * pmf_unchecked(n, 3, 0.5);
            assert!((marginal_pmf(&spec, 3, n).unwrap() - want).abs() < 1e-15);
        }
    }

    #[test]
    fn marginal_law_normalizes() {
        let spec = reference(3);
        let law = marginal_law(&spec, 2, 1e-12).unwrap();
        assert!((law.pmf.iter().sum::<f64>() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn k1_joint_is_marginal_and_g1_joint_factorizes() {
        let spec = reference(3);
        for n in 0..6 {
            let j = joint_pmf(&spec, &[n], &[0.5]).unwrap();
            assert!((j - marginal_pmf(&spec, 1, n).unwrap()).abs() < 1e-16);
        }
        let spec = single_state(2, 1.0, 3);
        let j = joint_pmf(&spec, &[1, 0, 3], &[0.5, 1.0, 2.0]).unwrap();
        let want = pmf_unchecked(1, 2, 0.5) * pmf_unchecked(0, 2, 1.0) * pmf_unchecked(3, 2, 2.0);
        assert!((j - want).abs() < 1e-16);
    }

    #[test]
    fn joint_matches_path_enumeration() {
        // g = 2, k = 3, unit scales: enumerate the 8 hidden paths by hand
        let spec = reference(3);
        let counts = [2u64, 0, 1];
        let pi = spec.initial().weights();
        let gm = spec.chain();
        let mut want = 0.0;
        for a in 0..2 {
            for b in 0..2 {
                for c in 0..2 {
                    let beta = pi[a] * gm.get(a, b) * gm.get(b, c);
                    want += beta
                        * pmf_unchecked(2, spec.shapes()[a], 1.0)
                        * pmf_unchecked(0, spec.shapes()[b], 1.0)
                        * pmf_unchecked(1, spec.shapes()[c], 1.0);
                }
            }
        }
        let got = joint_pmf(&spec, &counts, &[1.0; 3]).unwrap();
        assert!((got - want).abs() < 1e-13);
    }

    #[test]
    fn summing_out_last_coordinate_recovers_shorter_joint() {
        let spec = reference(3);
        let scales = [0.5, 0.7, 0.3];
        let full: f64 = (0..200)
            .map(|n| joint_pmf(&spec, &[1, 2, n], &scales).unwrap())
            .sum();
        let short = joint_pmf(&spec, &[1, 2], &scales[..2]).unwrap();
        assert!((full - short).abs() < 1e-10);
    }

    #[test]
    fn mismatched_dimensions_rejected() {
        let spec = reference(3);
        assert!(matches!(
            joint_pmf(&spec, &[1, 2], &[0.5]),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(joint_pmf_periods(&spec, &[2, 2], &[1, 1], &[0.5, 0.5]).is_err());
    }
}
