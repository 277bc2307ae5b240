//! Business-risk modelling toolkit: feature selection, a regularized
//! gradient-boosted tree classifier with a logistic-regression baseline,
//! random-search and TPE tuning, repeated cross-validation, and exact
//! Wilcoxon signed-rank comparisons with Bonferroni correction.

pub mod dataset;
pub mod error;
pub mod evaluation;
pub mod experiment;
pub mod feature_selection;
pub mod hpo;
pub mod models;
pub mod numeric;
pub mod rng;
pub mod stats;
pub mod synth;

pub use error::{Error, Result};
