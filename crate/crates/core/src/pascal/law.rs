//! Finite pmf tables and the law of the total reported/IBNR count.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::delay::DelayModel;
use crate::error::{Error, Result};
use crate::intensity::ModelSpec;
use crate::thinning::{thinned_scales, Which};

use super::mixture::PascalMixtureUni;

/// pmf values on `0..=n_max` plus an upper bound on the mass beyond `n_max`.
#[derive(Debug, Clone, PartialEq)]
pub struct CountLaw {
    pub pmf: Vec<f64>,
    pub tail_bound: f64,
}

impl CountLaw {
    pub fn new(pmf: Vec<f64>, tail_bound: f64) -> Self {
        Self { pmf, tail_bound }
    }

    pub fn point_mass_at_zero() -> Self {
        Self {
            pmf: vec![1.0],
            tail_bound: 0.0,
        }
    }

    pub fn n_max(&self) -> usize {
        self.pmf.len() - 1
    }

    pub fn get(&self, n: usize) -> f64 {
        self.pmf.get(n).copied().unwrap_or(0.0)
    }

    pub fn mean(&self) -> f64 {
        self.pmf.iter().enumerate().map(|(n, p)| n as f64 * p).sum()
    }

    /// CSV `n,probability` followed by `# tail_bound=<value>`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("n,probability\n");
        for (n, p) in self.pmf.iter().enumerate() {
            let _ = writeln!(out, "{n},{p:?}");
        }
        let _ = writeln!(out, "# tail_bound={:?}", self.tail_bound);
        out
    }
}

const MAX_TOTAL_SHAPE: usize = 1 << 20;

/// Convolves the per-state shape ladders along the hidden chain.
///
/// Returns the weights of the total shape `Σ_j M_j` for shapes `0..=cap`,
/// where `M_j` is the re-expressed shape of period `j` at common scale.
fn total_shape_weights(spec: &ModelSpec, scales: &[f64], common: f64, cap: usize) -> Vec<f64> {
    let g = spec.g();
    let shapes = spec.shapes();
    let pi = spec.initial().weights();
    let len = cap + 1;

    // The ladder of shape m has generating function (q z / (1 − (1−q) z))^m,
    // so convolving with it is a shift by m followed by m first-order filters.
    let emit = |alpha: &mut Vec<Vec<f64>>, scale: f64| {
        if scale == 0.0 {
            return;
        }
        let q = if scale == common { 1.0 } else { common / scale };
        for (i, row) in alpha.iter_mut().enumerate() {
            let m = shapes[i] as usize;
            let mut out = vec![0.0; len];
            if m < len {
                out[m..].copy_from_slice(&row[..len - m]);
            }
            if q < 1.0 {
                let decay = 1.0 - q;
                for _ in 0..m {
                    for t in 1..len {
                        out[t] += decay * out[t - 1];
                    }
                }
                let gain = q.powi(m as i32);
                out.iter_mut().for_each(|x| *x *= gain);
            }
            *row = out;
        }
    };

    let mut alpha: Vec<Vec<f64>> = (0..g)
        .map(|i| {
            let mut v = vec![0.0; len];
            v[0] = pi[i];
            v
        })
        .collect();
    emit(&mut alpha, scales[0]);
    for &scale in &scales[1..] {
        let mut next = vec![vec![0.0; len]; g];
        for (a, row) in alpha.iter().enumerate() {
            for (b, out) in next.iter_mut().enumerate() {
                let p = spec.chain().get(a, b);
                if p == 0.0 {
                    continue;
                }
                for (o, &x) in out.iter_mut().zip(row) {
                    *o += p * x;
                }
            }
        }
        alpha = next;
        emit(&mut alpha, scale);
    }
    (0..len).map(|s| alpha.iter().map(|row| row[s]).sum()).collect()
}

/// Law of the total reported or IBNR count up to `τ = d_k`.
///
/// The period counts form a multivariate Pascal mixture with per-period
/// thinned scales. Every margin is re-expressed with the common scale
/// `θ* = min_j θ_j` (over periods with positive scale), and the shape weights
/// of the total are accumulated by a forward pass along the hidden chain. The
/// weight series is truncated at a total shape retaining at least
/// `1 − eps/2` of the mass; the pmf table then extends until the unlisted
/// mass is at most `eps`.
pub fn total_count_law(
    spec: &ModelSpec,
    delay: &DelayModel,
    tau: f64,
    which: Which,
    eps: f64,
    n_max: Option<usize>,
) -> Result<CountLaw> {
    Ok(total_count_law_detailed(spec, delay, tau, which, eps, n_max)?.0)
}

/// As [`total_count_law`], also returning the univariate mixture it came from
/// (`None` when every period has zero scale).
pub fn total_count_law_detailed(
    spec: &ModelSpec,
    delay: &DelayModel,
    tau: f64,
    which: Which,
    eps: f64,
    n_max: Option<usize>,
) -> Result<(CountLaw, Option<PascalMixtureUni>)> {
    if !(eps > 0.0 && eps < 0.1) {
        return Err(Error::Domain(format!("tolerance must lie in (0, 0.1), got {eps}")));
    }
    let scales = thinned_scales(spec, delay, tau)?.get(which).to_vec();
    let Some(common) = scales.iter().copied().filter(|&s| s > 0.0).reduce(f64::min) else {
        return Ok((CountLaw::point_mass_at_zero(), None));
    };
    let max_shape = spec.shapes().iter().copied().max().unwrap_or(1) as f64;
    let expected: f64 = scales
        .iter()
        .filter(|&&s| s > 0.0)
        .map(|&s| max_shape * s / common)
        .sum();
    let start = (4.0 * expected + 64.0).min(MAX_TOTAL_SHAPE as f64) as usize;
    let mut cap = start.next_power_of_two();
    let weights = loop {
        let w = total_shape_weights(spec, &scales, common, cap);
        let mass: f64 = w.iter().sum();
        if 1.0 - mass <= eps / 2.0 || cap >= MAX_TOTAL_SHAPE {
            break w;
        }
        cap *= 2;
    };
    let retained: f64 = weights.iter().sum();
    let mix = PascalMixtureUni {
        weights: weights
            .iter()
            .enumerate()
            .filter(|(_, &w)| w > 0.0)
            .map(|(m, &w)| (m as u32, w))
            .collect::<BTreeMap<_, _>>(),
        scale: common,
        deficit: (1.0 - retained).max(0.0),
    };
    let law = mix.law(eps, n_max)?;
    Ok((law, Some(mix)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::intensity::fixtures::*;
    use crate::pascal::hmm::joint_pmf;
    use crate::pascal::kernel::pmf_unchecked;
    use crate::pascal::mixture::{aggregate, unify_scales, PascalMixtureMulti};

    #[test]
    fn instant_reporting_has_no_ibnr() {
        let spec = reference(3);
        let law = total_count_law(&spec, &DelayModel::Degenerate { at: 0.0 }, 3.0, Which::Ibnr, 1e-6, None)
            .unwrap();
        assert_eq!(law, CountLaw::point_mass_at_zero());
        assert_eq!(law.to_csv(), "n,probability\n0,1.0\n# tail_bound=0.0\n");
    }

    #[test]
    fn one_period_one_state_is_plain_pascal() {
        let spec = single_state(3, 0.8, 1);
        let delay = DelayModel::Exponential { rate: 2.0 };
        let scale = thinned_scales(&spec, &delay, 1.0).unwrap().reported[0];
        let law = total_count_law(&spec, &delay, 1.0, Which::Reported, 1e-10, None).unwrap();
        for (n, p) in law.pmf.iter().enumerate() {
            assert!((p - pmf_unchecked(n as u64, 3, scale)).abs() < 1e-14);
        }
        assert!(law.tail_bound <= 1e-10);
    }

    #[test]
    fn forward_weights_match_tensor_route() {
        let spec = reference(3);
        let delay = DelayModel::Exponential { rate: 1.0 };
        let eps = 1e-10;
        let (_, fwd) = total_count_law_detailed(&spec, &delay, 3.0, Which::Reported, eps, None).unwrap();
        let fwd = fwd.unwrap();
        let scales = thinned_scales(&spec, &delay, 3.0).unwrap().reported;
        let mix = PascalMixtureMulti::from_hmm(&spec, &scales).unwrap();
        let common = scales.iter().copied().fold(f64::INFINITY, f64::min);
        let uni = aggregate(&unify_scales(&mix, common, eps).unwrap()).unwrap();
        assert_eq!(fwd.scale, uni.scale);
        for (m, w) in &uni.weights {
            let f = fwd.weights.get(m).copied().unwrap_or(0.0);
            assert!((f - w).abs() <= 1e-9, "shape {m}: {f} vs {w}");
        }
    }

    #[test]
    fn total_matches_convolved_joint() {
        let spec = reference(2);
        let delay = DelayModel::Exponential { rate: 0.8 };
        let law = total_count_law(&spec, &delay, 2.0, Which::Ibnr, 1e-9, None).unwrap();
        let scales = thinned_scales(&spec, &delay, 2.0).unwrap().ibnr;
        for n in 0..12u64 {
            let conv: f64 = (0..=n).map(|a| joint_pmf(&spec, &[a, n - a], &scales).unwrap()).sum();
            assert!((law.get(n as usize) - conv).abs() < 1e-9);
        }
    }

    #[test]
    fn extreme_scale_ratio_is_accuracy_failure() {
        let spec = single_state(5, 1.0, 2);
        let delay = DelayModel::Exponential { rate: 15.0 };
        let scales = thinned_scales(&spec, &delay, 2.0).unwrap().ibnr;
        assert!(scales[0] > 0.0 && scales[1] / scales[0] > 1e6);
        let err = total_count_law(&spec, &delay, 2.0, Which::Ibnr, 1e-6, None).unwrap_err();
        assert!(matches!(err, Error::Accuracy { .. }));
    }

    #[test]
    fn explicit_n_max_too_small_is_accuracy_failure() {
        let spec = reference(3);
        let delay = DelayModel::Exponential { rate: 1.0 };
        let err = total_count_law(&spec, &delay, 3.0, Which::Reported, 1e-6, Some(2)).unwrap_err();
        assert!(matches!(err, Error::Accuracy { .. }));
        assert!(total_count_law(&spec, &delay, 3.0, Which::Reported, 0.2, None).is_err());
    }
}
