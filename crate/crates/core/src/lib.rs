//! Envy-free classification: envy measurement, loss-minimizing envy-free classifiers on a
//! sample, mixtures over finite families, nearest-neighbor extension, the grid-world lower
//! bound construction and an experiment harness.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod envy;
pub mod erm;
pub mod error;
pub mod extension;
pub mod families;
pub mod harness;
pub mod instance;
pub mod lowerbound;
pub mod lp;
pub mod model;
pub mod rng;

pub use envy::{estimate_ef, EnvyReport};
pub use error::{Error, Result};
pub use model::{
    Classifier, DeterministicClassifier, Individual, LossModel, OutcomeDistribution,
    OutcomeSpace, RandomizedAssignment, UtilityModel,
};
