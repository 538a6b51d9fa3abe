//! Measurement toolkit for software metrics.
//!
//! * [`dataset`]: metric tables, reversal, correlation matrices
//! * [`reliability`]: Cronbach's alpha, agreement, Krippendorff's alpha,
//!   composite reliability
//! * [`truescore`]: measurement-error simulation and detectability
//! * [`efa`]: adequacy, factor-count advice, extraction, rotation, diagnosis
//! * [`session`]: stepwise EFA refinement with history and undo
//! * [`cfa`]: maximum-likelihood confirmatory factor analysis and factor
//!   scores

pub mod cfa;
pub mod dataset;
pub mod efa;
mod linalg;
pub mod matrix_serde;
pub mod reliability;
pub mod session;
pub mod synthetic;
pub mod truescore;

pub use linalg::congruence;
