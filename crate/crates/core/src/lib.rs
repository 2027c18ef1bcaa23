//! Marked Cox claim-arrival model with an Erlang-HMM intensity.
//!
//! Claims arrive as a Cox process whose intensity is piecewise constant on a
//! time grid. On each period the level is Erlang distributed with a shape
//! chosen by a hidden Markov chain. Every claim carries a reporting delay, so
//! at a valuation date the claims split into reported and IBNR (incurred but
//! not reported) sets.
//!
//! The crate offers exact simulation ([`simulate`]), thinned scales and mark
//! densities ([`thinning`]), and closed-form Pascal-mixture laws for period
//! counts and their totals ([`pascal`]), together with independent oracles
//! ([`validation`]) to cross-check them.

pub mod config;
pub mod delay;
pub mod error;
pub mod intensity;
pub mod markov;
pub mod pascal;
pub mod quad;
pub mod simulate;
pub mod thinning;
pub mod validation;

pub use config::RunConfig;
pub use delay::{DelayModel, MarkMass};
pub use error::{Error, Result};
pub use intensity::{IntensityPath, ModelSpec, Period};
pub use markov::{StateDistribution, TransitionMatrix};
pub use pascal::CountLaw;
pub use simulate::{ClaimRecord, ClaimSet, Classified, PeriodCounts};
pub use thinning::{ThinnedScales, Which};
