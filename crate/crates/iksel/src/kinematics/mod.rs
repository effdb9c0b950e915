//! Kinematic foundations: rigid transforms, robot models, forward
//! kinematics, Jacobians, and the regularized pseudo-inverse.

mod model;
mod pinv;
mod pose;
pub mod rotation;

pub use model::{Jacobian, JacobianPinv, JointConfig, JointSpec, RobotModel, MAX_DOF};
pub use pinv::{regularized_pinv, spectral_norm};
pub use pose::{pose_error, Pose, PoseKey, ROTATION_TOL};
