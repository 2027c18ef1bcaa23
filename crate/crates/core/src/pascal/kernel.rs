use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

/// `ln C(n, k)`: exact integer arithmetic while it fits in `u128`, log-gamma beyond.
pub(crate) fn ln_binomial(n: u64, k: u64) -> f64 {
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        // acc * (n - i) / (i + 1) stays integral at every step
        match acc.checked_mul(u128::from(n - i)) {
            Some(v) => acc = v / u128::from(i + 1),
            None => {
                return ln_gamma(n as f64 + 1.0) - ln_gamma(k as f64 + 1.0) - ln_gamma((n - k) as f64 + 1.0)
            }
        }
    }
    (acc as f64).ln()
}

/// Pascal pmf without argument checks; `θ = 0` is the point mass at zero.
pub(crate) fn pmf_unchecked(n: u64, m: u32, theta: f64) -> f64 {
    if theta == 0.0 {
        return if n == 0 { 1.0 } else { 0.0 };
    }
    let m64 = u64::from(m);
    let log_q = theta.ln() - theta.ln_1p();
    let ln_p = ln_binomial(n + m64 - 1, m64 - 1) - f64::from(m) * theta.ln_1p() + n as f64 * log_q;
    ln_p.exp()
}

/// `p(n; m, θ) = C(n+m−1, m−1) (1+θ)^{−m} (θ/(1+θ))^n`, evaluated in log space.
pub fn pascal_pmf(n: i64, m: u32, theta: f64) -> Result<f64> {
    if n < 0 {
        return Err(Error::Domain(format!("count must be >= 0, got {n}")));
    }
    if m < 1 {
        return Err(Error::Domain("shape must be >= 1".into()));
    }
    if !(theta.is_finite() && theta >= 0.0) {
        return Err(Error::Domain(format!("scale must be >= 0, got {theta}")));
    }
    Ok(pmf_unchecked(n as u64, m, theta))
}

/// Upper bound on `P(N > n)` for `N ~ Pascal(m, θ)`.
///
/// The ratio `p(j+1)/p(j) = (j+m)/(j+1) · θ/(1+θ)` is nonincreasing in `j`, so
/// once it drops below one the tail is dominated by a geometric series.
pub fn pascal_tail_bound(n: u64, m: u32, theta: f64) -> f64 {
    if theta == 0.0 {
        return 0.0;
    }
    let q = theta / (1.0 + theta);
    let r = (n as f64 + f64::from(m)) / (n as f64 + 1.0) * q;
    if r >= 1.0 {
        return 1.0;
    }
    (pmf_unchecked(n, m, theta) * r / (1.0 - r)).min(1.0)
}

/// `ln Γ(x + 1)` for `x = 0..len`, for bulk mixture evaluation.
pub(crate) struct LnFactorials(Vec<f64>);

impl LnFactorials {
    pub(crate) fn new(len: usize) -> Self {
        Self((0..len).map(|i| ln_gamma(i as f64 + 1.0)).collect())
    }

    pub(crate) fn pmf(&self, n: usize, m: usize, theta: f64) -> f64 {
        if theta == 0.0 {
            return if n == 0 { 1.0 } else { 0.0 };
        }
        let t = &self.0;
        let ln_c = t[n + m - 1] - t[m - 1] - t[n];
        (ln_c - m as f64 * theta.ln_1p() + n as f64 * (theta.ln() - theta.ln_1p())).exp()
    }
}
