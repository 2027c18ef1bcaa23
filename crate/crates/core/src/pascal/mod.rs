//! Discrete-distribution analytics for the period counts.
//!
//! Conditional on the hidden state, a period count is Pascal (negative
//! binomial with integer shape). Marginals are Pascal mixtures, joints follow
//! from a forward recursion along the hidden chain, and totals over periods
//! become univariate Pascal mixtures after re-expressing every margin with a
//! common scale.

mod acf;
mod hmm;
mod kernel;
mod law;
mod mixture;

pub use acf::{acf, acf_coefficients, acf_direct, acf_series, check_normalization, covariance, AcfPath};
pub use hmm::{joint_pmf, joint_pmf_periods, marginal_law, marginal_law_upto, marginal_pmf, marginal_pmf_scaled};
pub use kernel::{pascal_pmf, pascal_tail_bound};
pub use law::{total_count_law, total_count_law_detailed, CountLaw};
pub use mixture::{aggregate, unify_scales, PascalMixtureMulti, PascalMixtureUni, MAX_PATHS, MAX_TENSOR};
