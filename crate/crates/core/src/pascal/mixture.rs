//! Pascal mixtures with explicit shape weights, the common-scale transform and
//! aggregation of a common-scale multivariate mixture into a univariate one.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::intensity::ModelSpec;

use super::kernel::{pascal_tail_bound, pmf_unchecked, LnFactorials};
use super::law::CountLaw;

/// Hidden-path enumeration limit for [`PascalMixtureMulti::from_hmm`].
pub const MAX_PATHS: f64 = 1e6;
/// Limit on enumerated shape tuples in [`unify_scales`].
pub const MAX_TENSOR: f64 = 2e7;

/// `Σ_m w_m p(n; m, θ)`, possibly with un-enumerated weight mass `deficit`.
#[derive(Debug, Clone, PartialEq)]
pub struct PascalMixtureUni {
    pub weights: BTreeMap<u32, f64>,
    pub scale: f64,
    pub deficit: f64,
}

impl PascalMixtureUni {
    pub fn pmf(&self, n: u64) -> f64 {
        self.weights
            .iter()
            .map(|(&m, &w)| w * pmf_unchecked(n, m, self.scale))
            .sum()
    }

    fn tail_bound(&self, n: u64) -> f64 {
        self.deficit
            + self
                .weights
                .iter()
                .map(|(&m, &w)| w * pascal_tail_bound(n, m, self.scale))
                .sum::<f64>()
    }

    /// Tabulates the pmf on `0..=n_max`. Without `n_max` the table extends
    /// until the deficit plus the geometric tail bound is at most `eps`; an
    /// explicit `n_max` whose bound exceeds `eps` is an accuracy failure.
    pub fn law(&self, eps: f64, n_max: Option<usize>) -> Result<CountLaw> {
        let n_max = match n_max {
            Some(n) => {
                let bound = self.tail_bound(n as u64);
                if bound > eps {
                    return Err(Error::Accuracy { bound, eps });
                }
                n
            }
            None => {
                if self.deficit > eps {
                    return Err(Error::Accuracy {
                        bound: self.deficit,
                        eps,
                    });
                }
                let mut hi = 16u64;
                while self.tail_bound(hi) > eps {
                    hi *= 2;
                    if hi > 1 << 26 {
                        return Err(Error::Accuracy {
                            bound: self.tail_bound(hi),
                            eps,
                        });
                    }
                }
                let mut lo = 0u64;
                while lo < hi {
                    let mid = (lo + hi) / 2;
                    if self.tail_bound(mid) <= eps {
                        hi = mid;
                    } else {
                        lo = mid + 1;
                    }
                }
                hi as usize
            }
        };
        let max_shape = self.weights.keys().next_back().copied().unwrap_or(1) as usize;
        let table = LnFactorials::new(n_max + max_shape + 1);
        let pmf = (0..=n_max)
            .map(|n| {
                self.weights
                    .iter()
                    .map(|(&m, &w)| w * table.pmf(n, m as usize, self.scale))
                    .sum()
            })
            .collect();
        Ok(CountLaw::new(pmf, self.tail_bound(n_max as u64)))
    }
}

/// `Σ_{(m_1..m_k)} β_{(m_1..m_k)} Π_j p(n_j; m_j, θ_j)` with a sparse weight tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct PascalMixtureMulti {
    pub scales: Vec<f64>,
    pub weights: BTreeMap<Vec<u32>, f64>,
    pub deficit: f64,
}

impl PascalMixtureMulti {
    pub fn dims(&self) -> usize {
        self.scales.len()
    }

    /// Shape-tuple weights of the HMM over periods `1..=k`:
    /// `β = π_{1,i_1} γ_{i_1 i_2} ⋯ γ_{i_{k−1} i_k}`, merged by shape tuple.
    pub fn from_hmm(spec: &ModelSpec, scales: &[f64]) -> Result<Self> {
        let k = scales.len();
        if k == 0 {
            return Err(Error::Domain("need at least one dimension".into()));
        }
        let g = spec.g();
        let paths = (g as f64).powi(k as i32);
        if paths > MAX_PATHS {
            return Err(Error::StateSpaceTooLarge {
                paths,
                limit: MAX_PATHS,
            });
        }
        // layer-by-layer expansion, keeping (last state, shape prefix)
        let pi = spec.initial().weights();
        let shapes = spec.shapes();
        let mut layer: BTreeMap<(usize, Vec<u32>), f64> = BTreeMap::new();
        for i in 0..g {
            if pi[i] > 0.0 {
                *layer.entry((i, vec![shapes[i]])).or_default() += pi[i];
            }
        }
        for _ in 1..k {
            let mut next: BTreeMap<(usize, Vec<u32>), f64> = BTreeMap::new();
            for ((i, prefix), w) in &layer {
                for j in 0..g {
                    let p = spec.chain().get(*i, j);
                    if p > 0.0 {
                        let mut key = prefix.clone();
                        key.push(shapes[j]);
                        *next.entry((j, key)).or_default() += w * p;
                    }
                }
            }
            layer = next;
        }
        let mut weights = BTreeMap::new();
        for ((_, key), w) in layer {
            *weights.entry(key).or_default() += w;
        }
        Ok(Self {
            scales: scales.to_vec(),
            weights,
            deficit: 0.0,
        })
    }

    pub fn pmf(&self, counts: &[u64]) -> Result<f64> {
        if counts.len() != self.dims() {
            return Err(Error::DimensionMismatch {
                expected: self.dims(),
                got: counts.len(),
            });
        }
        Ok(self
            .weights
            .iter()
            .map(|(shape, w)| {
                w * shape
                    .iter()
                    .zip(counts)
                    .zip(&self.scales)
                    .map(|((&m, &n), &s)| pmf_unchecked(n, m, s))
                    .product::<f64>()
            })
            .sum())
    }

    /// Marginalizes out dimensions whose scale is zero; their counts are zero
    /// almost surely and do not affect any sum of counts.
    pub fn without_zero_scales(&self) -> Self {
        let keep: Vec<usize> = (0..self.dims()).filter(|&j| self.scales[j] > 0.0).collect();
        let mut weights = BTreeMap::new();
        for (shape, w) in &self.weights {
            let key: Vec<u32> = keep.iter().map(|&j| shape[j]).collect();
            *weights.entry(key).or_default() += w;
        }
        Self {
            scales: keep.iter().map(|&j| self.scales[j]).collect(),
            weights,
            deficit: self.deficit,
        }
    }
}

/// Distribution of the new shape `m_j + r` when a `Pascal(m_j, θ_j)` margin
/// is re-expressed with scale `θ = q θ_j`: `C(m_j+r−1, m_j−1) q^{m_j} (1−q)^r`.
fn shape_ladder(shape: u32, q: f64, len: usize) -> Vec<f64> {
    if q >= 1.0 {
        let mut v = vec![0.0; len.max(1)];
        v[0] = 1.0;
        return v;
    }
    let s = f64::from(shape);
    let mut v = Vec::with_capacity(len);
    let mut p = (s * q.ln()).exp();
    for r in 0..len {
        v.push(p);
        p *= (s + r as f64) / (r as f64 + 1.0) * (1.0 - q);
    }
    v
}

/// Re-expresses every margin with common scale `θ ≤ min_j θ_j`.
///
/// The weight tensor is enumerated on the box `m_j ≤ m_j⁰ + R` with the
/// smallest radius `R` that retains total mass at least `1 − eps`; the
/// remainder is recorded as the deficit.
pub fn unify_scales(mix: &PascalMixtureMulti, theta: f64, eps: f64) -> Result<PascalMixtureMulti> {
    let min = mix.scales.iter().copied().fold(f64::INFINITY, f64::min);
    if !(theta > 0.0 && theta <= min) {
        return Err(Error::Domain(format!(
            "common scale must satisfy 0 < theta <= min scale {min}, got {theta}"
        )));
    }
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::Domain(format!("tolerance must lie in (0, 1), got {eps}")));
    }
    let ratios: Vec<f64> = mix
        .scales
        .iter()
        .map(|&s| if s == theta { 1.0 } else { theta / s })
        .collect();
    let target = 1.0 - eps;
    let input_mass: f64 = mix.weights.values().sum();
    if input_mass < target {
        return Err(Error::Accuracy {
            bound: 1.0 - input_mass,
            eps,
        });
    }

    let components: Vec<(&Vec<u32>, f64)> = mix.weights.iter().map(|(k, &w)| (k, w)).collect();
    let dims = mix.dims();
    // grow the radius until the retained box mass reaches the target
    let mut radius = 0usize;
    let mut ladders: Vec<Vec<Vec<f64>>>;
    loop {
        let len = radius + 1;
        ladders = components
            .iter()
            .map(|(shape, _)| {
                shape
                    .iter()
                    .zip(&ratios)
                    .map(|(&m, &q)| shape_ladder(m, q, len))
                    .collect()
            })
            .collect();
        let mass: f64 = components
            .iter()
            .zip(&ladders)
            .map(|((_, w), lad)| w * lad.iter().map(|l| l.iter().sum::<f64>()).product::<f64>())
            .sum();
        if mass >= target {
            break;
        }
        let active = ratios.iter().filter(|&&q| q < 1.0).count() as i32;
        radius = if radius == 0 { 1 } else { radius * 2 };
        let size = components.len() as f64 * ((radius + 1) as f64).powi(active);
        if size > MAX_TENSOR {
            return Err(Error::Accuracy {
                bound: 1.0 - mass,
                eps,
            });
        }
    }
    // shrink back to the smallest radius meeting the target
    let mass_at = |r: usize| -> f64 {
        components
            .iter()
            .zip(&ladders)
            .map(|((_, w), lad)| w * lad.iter().map(|l| l[..=r.min(l.len() - 1)].iter().sum::<f64>()).product::<f64>())
            .sum()
    };
    let (mut lo, mut hi) = (0usize, radius);
    while lo < hi {
        let mid = (lo + hi) / 2;
        if mass_at(mid) >= target {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    let radius = hi;

    let mut weights: BTreeMap<Vec<u32>, f64> = BTreeMap::new();
    for ((shape, w), lad) in components.iter().zip(&ladders) {
        let extents: Vec<usize> = (0..dims)
            .map(|j| if ratios[j] >= 1.0 { 1 } else { radius + 1 })
            .collect();
        let mut idx = vec![0usize; dims];
        loop {
            let mut p = *w;
            for j in 0..dims {
                p *= lad[j][idx[j]];
            }
            if p > 0.0 {
                let key: Vec<u32> = (0..dims).map(|j| shape[j] + idx[j] as u32).collect();
                *weights.entry(key).or_default() += p;
            }
            // odometer
            let mut j = 0;
            while j < dims {
                idx[j] += 1;
                if idx[j] < extents[j] {
                    break;
                }
                idx[j] = 0;
                j += 1;
            }
            if j == dims {
                break;
            }
        }
    }
    let retained: f64 = weights.values().sum();
    Ok(PascalMixtureMulti {
        scales: vec![theta; dims],
        weights,
        deficit: (1.0 - retained).max(0.0),
    })
}

/// Collapses a common-scale mixture onto the law of `N_1 + ⋯ + N_k`:
/// weight of shape `m` is the total weight of tuples with `Σ m_j = m`.
pub fn aggregate(mix: &PascalMixtureMulti) -> Result<PascalMixtureUni> {
    let Some(&scale) = mix.scales.first() else {
        return Err(Error::Domain("mixture has no dimensions".into()));
    };
    if mix.scales.iter().any(|&s| s != scale) {
        return Err(Error::Domain(
            "scales differ across dimensions; call unify_scales first".into(),
        ));
    }
    let mut weights = BTreeMap::new();
    for (shape, &w) in &mix.weights {
        *weights.entry(shape.iter().sum::<u32>()).or_default() += w;
    }
    Ok(PascalMixtureUni {
        weights,
        scale,
        deficit: mix.deficit,
    })
}
