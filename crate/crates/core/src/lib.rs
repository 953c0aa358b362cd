//! Off-policy evaluation and optimization for contextual bandits.
//!
//! The crate provides the Direct Method, Inverse Propensity Score and Doubly
//! Robust estimators, their exact bias and variance on small enumerable
//! instances, per-action ridge payoff models, loss imputation for bandit
//! feedback, two cost-sensitive learners (direct loss minimization and a
//! filter tree), a covariate-shift simulator, and the experiment harness
//! used by the `offpolicy` binary.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// Per-context loops index several parallel tables with the same index.
#![allow(clippy::needless_range_loop)]

pub mod bandit;
pub mod diagnostics;
pub mod error;
pub mod estimators;
pub mod exec;
pub mod harness;
pub mod learners;
pub mod linalg;
pub mod models;
pub mod numeric;
pub mod oracle;
pub mod rng;
pub mod shift;
pub mod types;

pub use error::{Error, Result};
pub use estimators::{estimate, estimate_dm, estimate_dr, estimate_ips, EstimateReport, EstimatorKind};
pub use exec::Execution;
pub use models::{fit_ridge_full_information, fit_ridge_per_action, PayoffModel};
pub use types::{
    true_policy_value, ActionPolicy, ConstantPolicy, Context, CostVectorExample, LoggedDataset, LoggedRecord,
    MulticlassExample, Policy,
};
