//! Causal deep Q-learning.
//!
//! The crate estimates the causal effect of a discrete treatment on an
//! outcome by stratifying on observed covariates ([`peace`]), validates the
//! estimator against tabulated structural models with known ground truth
//! ([`scm`]), and uses the estimate as a penalty in deep Q-learning on
//! cart-pole ([`agent`], [`cartpole`], [`nn`]). The [`harness`] module runs
//! seeded training, evaluation and duels and writes CSV metrics and SVG
//! charts.

pub mod agent;
pub mod cartpole;
pub mod error;
pub mod harness;
pub mod kv;
pub mod nn;
pub mod peace;
pub mod rng;
pub mod scm;

pub use error::{Error, Result};
pub use peace::{
    build_strata, peace_from_samples, piev_for_stratum, CausalEffectEstimate, ObservationTriple,
    PeaceEstimator, StratumStats,
};
