//! Categorical Bayesian-network toolkit.
//!
//! The crate covers a three-stage workflow over categorical tabular data:
//!
//! 1. learn a DAG with a decomposable score ([`structure`]) and estimate the
//!    conditional probability tables over it ([`cpd`]);
//! 2. cluster records on the one-hot encoding of the ancestors of a set of
//!    target variables, choosing K by Dunn's index ([`clustering`]);
//! 3. train a ReLU/softmax classifier on the cluster labels ([`dsid`]) and
//!    map each predicted class to a demographic distribution
//!    ([`demographic`]).
//!
//! [`sampling`] forward-samples synthetic data from a known network so every
//! stage can be checked against ground truth. [`pipeline`] wires the stages
//! together and persists their artifacts.

pub mod clustering;
pub mod cpd;
pub mod dag;
pub mod data;
pub mod demographic;
pub mod dsid;
mod error;
pub mod pipeline;
pub mod rng;
pub mod sampling;
pub mod structure;

pub use error::{Error, ErrorKind, Result};
