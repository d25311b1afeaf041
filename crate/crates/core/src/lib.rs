//! Bayes-network models of incomplete categorical databases.

pub mod afd;
pub mod bayesnet;
pub mod error;
pub mod harness;
pub mod imputation;
pub mod inference;
pub mod rewriting;
pub mod source;
pub mod tabular;

pub use error::{Error, Result};
