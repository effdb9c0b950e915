//! Numerical inverse kinematics with database-assisted seed selection.
//!
//! The pipeline: precompute a grid of joint configurations for a serial
//! manipulator, store each with its weighted 6-D pose key and the
//! pseudo-inverse of its Jacobian, and index the keys in a k-d tree. At
//! query time the nearest stored configurations are re-ranked by how small
//! a joint-space adjustment the stored pseudo-inverse predicts for closing
//! the residual pose gap, the best one seeds a short damped iteration, and
//! failed attempts trigger re-selection of the pool candidate farthest in
//! joint space from everything already tried.
//!
//! Modules:
//!
//! * [`kinematics`] - robot models, forward kinematics, Jacobians, and the
//!   regularized pseudo-inverse.
//! * [`solver`] - the iteration schemes (damped least squares, truncated
//!   pseudo-inverse, random-restart, and two limit-clamping variants).
//! * [`seed`] - seed-database construction, binary persistence, and exact
//!   nearest-neighbour queries.
//! * [`selector`] - candidate ranking, failure-driven re-selection, and the
//!   end-to-end [`selector::solve`] entry point.

pub mod error;
pub mod kinematics;
pub mod seed;
pub mod selector;
pub mod solver;

pub use error::{Error, Result};
pub use kinematics::{
    pose_error, regularized_pinv, spectral_norm, Jacobian, JacobianPinv, JointConfig, JointSpec,
    Pose, PoseKey, RobotModel,
};
pub use seed::{BuildParams, ScalePreset, SeedDatabase, SeedRecord};
pub use selector::{
    rank_candidates, reselect, solve, Candidate, ReselectPolicy, SelectionMetric, SelectorConfig,
    SolveReport, SolveStatus,
};
pub use solver::{
    iterate, iterate_with_stream, weighted_error_norm, IterationOutcome, IterationStatus,
    SolverConfig, SolverKind,
};
