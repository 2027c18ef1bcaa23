//! Finite-state discrete-time Markov chain algebra.
//!
//! Validation of stochastic matrices, `k`-step transitions, the limiting
//! distribution and the real spectral decomposition
//! `Γ^k = Σ_i e_i^k u_iᵀ v_i` used by the autocorrelation formula.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const ROW_SUM_TOL: f64 = 1e-12;
const IMAG_TOL: f64 = 1e-10;
const EIGEN_GAP: f64 = 1e-8;

/// A validated `g × g` row-stochastic matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionMatrix {
    entries: DMatrix<f64>,
}

impl TransitionMatrix {
    /// Builds a matrix from rows, rejecting (never renormalizing) malformed input.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let g = rows.len();
        if g == 0 {
            return Err(Error::field("gamma", "state count must be at least 1"));
        }
        for (r, row) in rows.iter().enumerate() {
            if row.len() != g {
                return Err(Error::InvalidRow {
                    row: r,
                    reason: format!("has {} entries, expected {g}", row.len()),
                });
            }
            for (c, &p) in row.iter().enumerate() {
                if !p.is_finite() || !(0.0..=1.0).contains(&p) {
                    return Err(Error::InvalidRow {
                        row: r,
                        reason: format!("entry {c} = {p} is outside [0, 1]"),
                    });
                }
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > ROW_SUM_TOL {
                return Err(Error::InvalidRow {
                    row: r,
                    reason: format!("sums to {sum}, expected 1"),
                });
            }
        }
        Ok(Self {
            entries: DMatrix::from_fn(g, g, |i, j| rows[i][j]),
        })
    }

    /// Builds a matrix from `g*g` entries in row-major order.
    pub fn from_row_major(g: usize, data: &[f64]) -> Result<Self> {
        if data.len() != g * g {
            return Err(Error::field(
                "gamma",
                format!("expected {} entries for g = {g}, got {}", g * g, data.len()),
            ));
        }
        let rows: Vec<Vec<f64>> = data.chunks(g.max(1)).map(<[f64]>::to_vec).collect();
        Self::from_rows(&rows)
    }

    pub fn g(&self) -> usize {
        self.entries.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[(i, j)]
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.g())
            .map(|i| self.entries.row(i).iter().copied().collect())
            .collect()
    }

    pub fn row_major(&self) -> Vec<f64> {
        self.rows().into_iter().flatten().collect()
    }

    /// True when every row is bitwise identical, i.e. consecutive states are independent.
    pub fn has_identical_rows(&self) -> bool {
        let first = self.entries.row(0);
        (1..self.g()).all(|i| self.entries.row(i) == first)
    }
}

/// A probability vector over the `g` hidden states.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct StateDistribution {
    weights: Vec<f64>,
}

impl StateDistribution {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::field("pi1", "must contain at least one state"));
        }
        if let Some((i, w)) = weights
            .iter()
            .enumerate()
            .find(|(_, w)| !w.is_finite() || **w < 0.0)
        {
            return Err(Error::field("pi1", format!("entry {i} = {w} is negative")));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > ROW_SUM_TOL {
            return Err(Error::field("pi1", format!("sums to {sum}, expected 1")));
        }
        Ok(Self { weights })
    }

    /// Point mass on `state`.
    pub fn point_mass(g: usize, state: usize) -> Self {
        let mut weights = vec![0.0; g];
        weights[state] = 1.0;
        Self { weights }
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Law after `steps` transitions: `π Γ^steps`.
    pub fn propagate(&self, chain: &TransitionMatrix, steps: usize) -> Vec<f64> {
        let row = DVector::from_column_slice(&self.weights).transpose();
        let out = row * k_step(chain, steps);
        out.iter().copied().collect()
    }
}

/// Structural properties of a chain's positive-entry digraph.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ChainDiagnosis {
    pub irreducible: bool,
    pub aperiodic: bool,
}

impl ChainDiagnosis {
    pub fn is_ergodic(&self) -> bool {
        self.irreducible && self.aperiodic
    }
}

fn gcd(mut a: usize, mut b: usize) -> usize {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Decides irreducibility (strong connectivity) and aperiodicity (gcd of
/// cycle lengths equal to one in every recurrent class).
pub fn validate_chain(chain: &TransitionMatrix) -> ChainDiagnosis {
    let g = chain.g();
    let edge = |i: usize, j: usize| chain.get(i, j) > 0.0;

    // transitive closure; g is small
    let mut reach = vec![vec![false; g]; g];
    for (i, row) in reach.iter_mut().enumerate() {
        for (j, r) in row.iter_mut().enumerate() {
            *r = edge(i, j);
        }
    }
    for k in 0..g {
        for i in 0..g {
            if reach[i][k] {
                for j in 0..g {
                    if reach[k][j] {
                        reach[i][j] = true;
                    }
                }
            }
        }
    }
    let irreducible = (0..g).all(|i| (0..g).all(|j| i == j || reach[i][j]));

    // period of each strongly connected class via BFS levels
    let mut class_of = vec![usize::MAX; g];
    let mut aperiodic = true;
    for root in 0..g {
        if class_of[root] != usize::MAX || !reach[root][root] {
            continue;
        }
        let members: Vec<usize> = (0..g)
            .filter(|&j| j == root || (reach[root][j] && reach[j][root]))
            .collect();
        for &m in &members {
            class_of[m] = root;
        }
        let mut level = vec![usize::MAX; g];
        level[root] = 0;
        let mut queue = std::collections::VecDeque::from([root]);
        let mut period = 0usize;
        while let Some(u) = queue.pop_front() {
            for &v in &members {
                if !edge(u, v) {
                    continue;
                }
                if level[v] == usize::MAX {
                    level[v] = level[u] + 1;
                    queue.push_back(v);
                } else {
                    period = gcd(period, (level[u] + 1).abs_diff(level[v]));
                }
            }
        }
        if period != 1 {
            aperiodic = false;
        }
    }
    ChainDiagnosis {
        irreducible,
        aperiodic,
    }
}

/// `Γ^k` by repeated squaring.
pub fn k_step(chain: &TransitionMatrix, k: usize) -> DMatrix<f64> {
    let g = chain.g();
    let mut result = DMatrix::<f64>::identity(g, g);
    let mut base = chain.entries.clone();
    let mut e = k;
    while e > 0 {
        if e & 1 == 1 {
            result = &result * &base;
        }
        e >>= 1;
        if e > 0 {
            base = &base * &base;
        }
    }
    result
}

/// Limiting distribution `δ` with `δΓ = δ`, solved as a linear system with
/// one balance equation replaced by the normalization constraint.
pub fn stationary_distribution(chain: &TransitionMatrix) -> Result<StateDistribution> {
    let diag = validate_chain(chain);
    if !diag.is_ergodic() {
        return Err(Error::UnsupportedChain(format!(
            "stationary distribution requires an irreducible aperiodic chain (irreducible: {}, aperiodic: {})",
            diag.irreducible, diag.aperiodic
        )));
    }
    let g = chain.g();
    let mut a = chain.entries.transpose() - DMatrix::<f64>::identity(g, g);
    let mut b = DVector::<f64>::zeros(g);
    for j in 0..g {
        a[(g - 1, j)] = 1.0;
    }
    b[g - 1] = 1.0;
    let x = a
        .lu()
        .solve(&b)
        .ok_or_else(|| Error::UnsupportedChain("singular balance system".into()))?;
    let total: f64 = x.iter().sum();
    let weights: Vec<f64> = x.iter().map(|w| (w / total).max(0.0)).collect();
    Ok(StateDistribution { weights })
}

/// Real spectral decomposition with paired left/right eigenvectors.
///
/// `eigenvalues` are sorted descending, `right[i]` holds `u_i` and `left[i]`
/// holds `v_i`, scaled so that `v_i · u_i = 1`. The leading pair is scaled so
/// that `u_1` is the all-ones vector, which makes `v_1` the limiting law.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralDecomposition {
    pub eigenvalues: Vec<f64>,
    pub right: Vec<Vec<f64>>,
    pub left: Vec<Vec<f64>>,
}

impl SpectralDecomposition {
    /// The rank-one projector `u_iᵀ v_i`.
    pub fn projector(&self, i: usize) -> DMatrix<f64> {
        let g = self.eigenvalues.len();
        DMatrix::from_fn(g, g, |r, c| self.right[i][r] * self.left[i][c])
    }

    /// `Σ_i e_i^k u_iᵀ v_i`.
    pub fn reconstruct_power(&self, k: usize) -> DMatrix<f64> {
        let g = self.eigenvalues.len();
        let mut out = DMatrix::<f64>::zeros(g, g);
        for (i, &e) in self.eigenvalues.iter().enumerate() {
            out += self.projector(i) * e.powi(k as i32);
        }
        out
    }
}

/// Right singular vector of the smallest singular value.
fn null_vector(a: DMatrix<f64>) -> Vec<f64> {
    let svd = a.svd(false, true);
    let (min_at, _) = svd
        .singular_values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("non-empty matrix");
    svd.v_t.expect("requested V^T").row(min_at).iter().copied().collect()
}

/// Decomposes `Γ` when its spectrum is real and simple; refuses otherwise.
pub fn spectral_decompose(chain: &TransitionMatrix) -> Result<SpectralDecomposition> {
    let g = chain.g();
    let gamma = chain.entries.clone();
    let complex = gamma.complex_eigenvalues();
    let mut eigenvalues = Vec::with_capacity(g);
    for z in complex.iter() {
        if z.im.abs() >= IMAG_TOL {
            return Err(Error::SpectralUnsupported(format!(
                "complex eigenvalue {} {:+}i",
                z.re, z.im
            )));
        }
        eigenvalues.push(z.re);
    }
    eigenvalues.sort_by(|a, b| b.total_cmp(a));
    for w in eigenvalues.windows(2) {
        if w[0] - w[1] <= EIGEN_GAP {
            return Err(Error::SpectralUnsupported(format!(
                "eigenvalues {} and {} are not distinct",
                w[0], w[1]
            )));
        }
    }

    let mut right = Vec::with_capacity(g);
    let mut left = Vec::with_capacity(g);
    for (idx, &e) in eigenvalues.iter().enumerate() {
        let shifted = &gamma - DMatrix::<f64>::identity(g, g) * e;
        let mut r = null_vector(shifted.clone());
        let mut l = null_vector(shifted.transpose());

        if idx == 0 {
            let mean = r.iter().sum::<f64>() / g as f64;
            r.iter_mut().for_each(|x| *x /= mean);
        } else {
            let pivot = r
                .iter()
                .copied()
                .max_by(|a, b| a.abs().total_cmp(&b.abs()))
                .unwrap_or(1.0);
            r.iter_mut().for_each(|x| *x /= pivot);
        }
        let dot: f64 = l.iter().zip(&r).map(|(a, b)| a * b).sum();
        if dot.abs() < 1e-14 {
            return Err(Error::SpectralUnsupported(format!(
                "left and right eigenvectors for {e} are orthogonal"
            )));
        }
        l.iter_mut().for_each(|x| *x /= dot);
        right.push(r);
        left.push(l);
    }
    Ok(SpectralDecomposition {
        eigenvalues,
        right,
        left,
    })
}
