//! Risk-prediction toolkit for one-year mortality forecasting at hospital
//! admission.
//!
//! The crate covers the full pipeline: a declarative cohort schema and record
//! validation ([`schema`]), CSV ingestion and encoding ([`dataset`]),
//! train-split-only preprocessing ([`preprocess`]), from-scratch learners
//! ([`learners`]), clinical baselines ([`baselines`]), ROC/threshold metrics
//! ([`metrics`]), the repeated stratified-holdout protocol ([`eval`]),
//! a synthetic cohort generator with known ground truth ([`synth`]), and
//! versioned model persistence ([`persist`]).

pub mod baselines;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod learners;
pub mod metrics;
pub mod persist;
pub mod pipeline;
pub mod preprocess;
pub mod schema;
pub mod seed;
pub mod synth;

pub use error::{Error, Result};
