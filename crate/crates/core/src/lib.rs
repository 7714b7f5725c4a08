//! Preference-conditioned multi-objective reinforcement learning.
//!
//! A single PPO policy is conditioned on a two-objective preference vector.
//! Its actor routes five experts through a Beta density whose parameters are
//! driven by the preference, and it is trained against three disjoint critics
//! (task, objective 1, objective 2). Evaluation tooling computes Pareto
//! fronts, hypervolume and sparsity over preference sweeps.

// `!(x > 0.0)` style validation is deliberate: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod amp;
pub mod autodiff;
pub mod envs;
pub mod error;
pub mod eval;
pub mod exec;
pub mod io;
pub mod nn;
pub mod pareto;
pub mod preference;
pub mod rng;
pub mod stats;
pub mod train;

pub use error::{Error, Result};
pub use exec::Execution;
pub use preference::{ObjectiveVector, PreferenceVector};
pub use rng::RngStream;
