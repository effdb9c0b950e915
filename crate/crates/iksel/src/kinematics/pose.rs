//! Rigid-body poses, the weighted 6-D keys used for seed lookup, and the
//! task-space error vector driving the solvers.

use nalgebra::{Matrix3, Vector3, Vector6};
use serde::{Deserialize, Serialize};

use super::rotation::{is_rotation, rotation_vector};
use crate::error::{Error, Result};

/// Orthonormality tolerance for rotation matrices accepted into a [`Pose`].
pub const ROTATION_TOL: f64 = 1e-9;

/// Position and orientation of a frame relative to the robot base.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub position: Vector3<f64>,
    pub rotation: Matrix3<f64>,
}

impl Pose {
    /// Builds a pose, verifying that `rotation` is orthonormal with
    /// determinant +1 to within [`ROTATION_TOL`].
    pub fn new(position: Vector3<f64>, rotation: Matrix3<f64>) -> Result<Self> {
        if !is_rotation(&rotation, ROTATION_TOL) {
            return Err(Error::InvalidModel(
                "pose rotation is not orthonormal with determinant +1".into(),
            ));
        }
        Ok(Self { position, rotation })
    }

    /// Internal constructor for matrices produced by composition of already
    /// validated rotations.
    pub(crate) fn new_unchecked(position: Vector3<f64>, rotation: Matrix3<f64>) -> Self {
        Self { position, rotation }
    }

    pub fn identity() -> Self {
        Self {
            position: Vector3::zeros(),
            rotation: Matrix3::identity(),
        }
    }

    /// `self * other` as homogeneous transforms.
    pub fn compose(&self, other: &Pose) -> Pose {
        Pose {
            position: self.position + self.rotation * other.position,
            rotation: self.rotation * other.rotation,
        }
    }

    /// Canonical rotation vector of the orientation (angle in `[0, pi]`).
    pub fn rotation_vector(&self) -> Vector3<f64> {
        rotation_vector(&self.rotation)
    }

    /// Weighted 6-D key for nearest-neighbour lookup.
    pub fn key(&self, rotation_weight: f64) -> PoseKey {
        let w = self.rotation_vector();
        PoseKey([
            self.position.x,
            self.position.y,
            self.position.z,
            rotation_weight * w.x,
            rotation_weight * w.y,
            rotation_weight * w.z,
        ])
    }
}

/// Position stacked with the rotation vector scaled by the database's
/// rotation weight. Euclidean distance on keys is the seed-search metric.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PoseKey(pub [f64; 6]);

impl PoseKey {
    pub fn coords(&self) -> &[f64; 6] {
        &self.0
    }

    pub fn squared_distance(&self, other: &PoseKey) -> f64 {
        let mut acc = 0.0;
        for i in 0..6 {
            let d = self.0[i] - other.0[i];
            acc += d * d;
        }
        acc
    }

    pub fn distance(&self, other: &PoseKey) -> f64 {
        self.squared_distance(other).sqrt()
    }
}

/// Task-space error `target - current`: translational difference stacked
/// with the rotation vector of `R_target * R_current^T`, expressed in the
/// base frame. This is the right-hand side of every solver update.
pub fn pose_error(current: &Pose, target: &Pose) -> Vector6<f64> {
    let dp = target.position - current.position;
    let dw = rotation_vector(&(target.rotation * current.rotation.transpose()));
    Vector6::new(dp.x, dp.y, dp.z, dw.x, dw.y, dw.z)
}
