//! Finite-sample valid prediction sets for multinomial data.
//!
//! A sample of counts `x ~ MN_K(θ, N)` is summarised by a set of categories
//! that contains one further draw `Y ~ MN_K(θ, 1)` with probability at least
//! `1 - α`, whatever `θ` is. Sets are built by admitting categories in some
//! order until the admitted (candidate-augmented) empirical mass exceeds
//! `1 - α`:
//!
//! * [`sets::direct_set`] orders categories by the area's own counts,
//! * [`sets::indirect_set`] orders by posterior counts `x + γ`, where `γ` is a
//!   Dirichlet concentration learnt from other areas ([`eb::fit_gamma`]),
//! * [`sets::oracle_set`] uses the true `θ` and is the smallest valid set.
//!
//! Coverage holds for any ordering fixed independently of the sample, so
//! indirect sets keep their guarantee no matter how poor `γ` is; a good `γ`
//! only makes them smaller.
//!
//! The [`sim`] module reproduces cardinality and coverage experiments, and
//! [`pipeline`] runs the full areal analysis (ingest, neighbours, per-area
//! priors, reports). [`cli`] backs the `predset` binary.

pub mod cli;
pub mod eb;
pub mod error;
pub mod pipeline;
pub mod sets;
pub mod sim;
pub mod special;

pub use eb::{fit_gamma, ConcentrationVector, CountMatrix, FitResult, OptimizerConfig};
pub use error::{Error, Result};
pub use sets::{
    conformal_set, direct_set, indirect_set, oracle_set, order_set_known_theta, set_pvalues,
    CountVector, OrderingKey, PredictionSet, ProbabilityVector, Scheme,
};
