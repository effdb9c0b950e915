//! Serial-chain robot description, file loading, and the kinematic maps.
//!
//! A model is an ordered list of revolute joints. Each joint carries a fixed
//! origin transform (applied first) and a unit rotation axis in the frame
//! that origin establishes; a fixed tool transform follows the last joint.
//! The chain transform for configuration `q` is
//!
//! ```text
//! T(q) = O_1 R(a_1, q_1) O_2 R(a_2, q_2) ... O_n R(a_n, q_n) T_tool
//! ```

use std::ops::Deref;
use std::path::Path;

use nalgebra::{DVector, Dyn, Matrix3, OMatrix, Vector3, U6};
use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::pose::Pose;
use super::rotation::{is_rotation, rotation_from_vector};
use crate::error::{Error, Result};

/// Geometric Jacobian of the tool frame: 6 rows (linear over angular),
/// one column per joint, all in the base frame.
pub type Jacobian = OMatrix<f64, U6, Dyn>;

/// Damped/truncated pseudo-inverse of a [`Jacobian`].
pub type JacobianPinv = OMatrix<f64, Dyn, U6>;

/// Highest joint count accepted by [`RobotModel::new`].
pub const MAX_DOF: usize = 16;

/// Unit-length tolerance for joint axes.
const AXIS_TOL: f64 = 1e-12;

/// Orthonormality tolerance for origin and tool rotations.
const ROTATION_TOL: f64 = 1e-9;

/// One revolute joint: fixed origin transform, rotation axis, and limits.
#[derive(Clone, Debug, PartialEq)]
pub struct JointSpec {
    axis: Vector3<f64>,
    origin_translation: Vector3<f64>,
    origin_rotation: Matrix3<f64>,
    lower_limit: f64,
    upper_limit: f64,
}

impl JointSpec {
    pub fn new(
        axis: Vector3<f64>,
        origin_translation: Vector3<f64>,
        origin_rotation: Matrix3<f64>,
        lower_limit: f64,
        upper_limit: f64,
    ) -> Result<Self> {
        if (axis.norm() - 1.0).abs() > AXIS_TOL {
            return Err(Error::InvalidModel(format!(
                "joint axis must be unit length, |axis| = {}",
                axis.norm()
            )));
        }
        if !is_rotation(&origin_rotation, ROTATION_TOL) {
            return Err(Error::InvalidModel(
                "joint origin rotation is not orthonormal with determinant +1".into(),
            ));
        }
        if !(lower_limit < upper_limit) {
            return Err(Error::InvalidModel(format!(
                "joint limits must satisfy lower < upper, got [{lower_limit}, {upper_limit}]"
            )));
        }
        Ok(Self {
            axis,
            origin_translation,
            origin_rotation,
            lower_limit,
            upper_limit,
        })
    }

    pub fn axis(&self) -> &Vector3<f64> {
        &self.axis
    }

    pub fn origin_translation(&self) -> &Vector3<f64> {
        &self.origin_translation
    }

    pub fn origin_rotation(&self) -> &Matrix3<f64> {
        &self.origin_rotation
    }

    pub fn lower_limit(&self) -> f64 {
        self.lower_limit
    }

    pub fn upper_limit(&self) -> f64 {
        self.upper_limit
    }

    pub fn range(&self) -> f64 {
        self.upper_limit - self.lower_limit
    }
}

/// Joint angles for one model, in radians, ordered base to tool.
///
/// Serializes as a flat array of angles rather than nalgebra's
/// storage-plus-shape encoding.
#[derive(Clone, Debug, PartialEq)]
pub struct JointConfig(DVector<f64>);

impl Serialize for JointConfig {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_seq(self.0.iter())
    }
}

impl<'de> Deserialize<'de> for JointConfig {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let values = Vec::<f64>::deserialize(deserializer)?;
        Ok(Self(DVector::from_vec(values)))
    }
}

impl JointConfig {
    pub fn new(values: DVector<f64>) -> Self {
        Self(values)
    }

    pub fn from_slice(values: &[f64]) -> Self {
        Self(DVector::from_column_slice(values))
    }

    pub fn as_vector(&self) -> &DVector<f64> {
        &self.0
    }

    pub fn into_vector(self) -> DVector<f64> {
        self.0
    }

    /// Euclidean distance in joint space.
    pub fn distance(&self, other: &JointConfig) -> f64 {
        (&self.0 - &other.0).norm()
    }
}

impl Deref for JointConfig {
    type Target = DVector<f64>;

    fn deref(&self) -> &Self::Target {
        &self.0
    }
}

impl From<Vec<f64>> for JointConfig {
    fn from(values: Vec<f64>) -> Self {
        Self(DVector::from_vec(values))
    }
}

/// A validated serial manipulator.
#[derive(Clone, Debug, PartialEq)]
pub struct RobotModel {
    name: String,
    joints: Vec<JointSpec>,
    tcp_translation: Vector3<f64>,
    tcp_rotation: Matrix3<f64>,
}

impl RobotModel {
    pub fn new(
        name: impl Into<String>,
        joints: Vec<JointSpec>,
        tcp_translation: Vector3<f64>,
        tcp_rotation: Matrix3<f64>,
    ) -> Result<Self> {
        if joints.is_empty() || joints.len() > MAX_DOF {
            return Err(Error::InvalidModel(format!(
                "joint count must be in 1..={MAX_DOF}, got {}",
                joints.len()
            )));
        }
        if !is_rotation(&tcp_rotation, ROTATION_TOL) {
            return Err(Error::InvalidModel(
                "tool rotation is not orthonormal with determinant +1".into(),
            ));
        }
        Ok(Self {
            name: name.into(),
            joints,
            tcp_translation,
            tcp_rotation,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dof(&self) -> usize {
        self.joints.len()
    }

    pub fn joints(&self) -> &[JointSpec] {
        &self.joints
    }

    pub fn tcp_translation(&self) -> &Vector3<f64> {
        &self.tcp_translation
    }

    pub fn tcp_rotation(&self) -> &Matrix3<f64> {
        &self.tcp_rotation
    }

    /// Loads a model from a TOML description file.
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref()).map_err(|e| {
            Error::ModelParse(format!("{}: {e}", path.as_ref().display()))
        })?;
        Self::from_toml_str(&text)
    }

    /// Parses a model from TOML text. See the bundled model files for the
    /// schema: `name`, `dof`, one `[[joints]]` table per joint with `axis`,
    /// `origin_translation`, `origin_rotation` (a rotation vector), and
    /// `limits`, then a `[tcp]` table with `translation` and `rotation`.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let file: ModelFile =
            toml::from_str(text).map_err(|e| Error::ModelParse(e.to_string()))?;
        if file.dof != file.joints.len() {
            return Err(Error::ModelParse(format!(
                "declared dof {} but {} joint tables",
                file.dof,
                file.joints.len()
            )));
        }
        let joints = file
            .joints
            .iter()
            .enumerate()
            .map(|(i, j)| {
                JointSpec::new(
                    Vector3::from(j.axis),
                    Vector3::from(j.origin_translation),
                    rotation_from_vector(&Vector3::from(j.origin_rotation)),
                    j.limits[0],
                    j.limits[1],
                )
                .map_err(|e| Error::ModelParse(format!("joint {}: {e}", i + 1)))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(
            file.name,
            joints,
            Vector3::from(file.tcp.translation),
            rotation_from_vector(&Vector3::from(file.tcp.rotation)),
        )
    }

    /// SHA-256 over a canonical little-endian encoding of the parsed model.
    /// Databases store this digest so a file built for one model is refused
    /// by another, even when the TOML differs only in formatting.
    pub fn fingerprint(&self) -> [u8; 32] {
        let mut h = Sha256::new();
        h.update((self.name.len() as u64).to_le_bytes());
        h.update(self.name.as_bytes());
        h.update((self.joints.len() as u64).to_le_bytes());
        let put = |v: f64, h: &mut Sha256| h.update(v.to_le_bytes());
        for j in &self.joints {
            for i in 0..3 {
                put(j.axis[i], &mut h);
            }
            for i in 0..3 {
                put(j.origin_translation[i], &mut h);
            }
            for r in 0..3 {
                for c in 0..3 {
                    put(j.origin_rotation[(r, c)], &mut h);
                }
            }
            put(j.lower_limit, &mut h);
            put(j.upper_limit, &mut h);
        }
        for i in 0..3 {
            put(self.tcp_translation[i], &mut h);
        }
        for r in 0..3 {
            for c in 0..3 {
                put(self.tcp_rotation[(r, c)], &mut h);
            }
        }
        h.finalize().into()
    }

    fn check_dof(&self, q: &JointConfig) -> Result<()> {
        if q.len() != self.dof() {
            return Err(Error::DimensionMismatch {
                expected: self.dof(),
                actual: q.len(),
            });
        }
        Ok(())
    }

    /// Pose of the tool frame at configuration `q`.
    pub fn forward_kinematics(&self, q: &JointConfig) -> Result<Pose> {
        self.check_dof(q)?;
        Ok(self.fk_unchecked(q))
    }

    pub(crate) fn fk_unchecked(&self, q: &DVector<f64>) -> Pose {
        let mut pose = Pose::identity();
        for (joint, &angle) in self.joints.iter().zip(q.iter()) {
            pose = pose.compose(&joint_pose(joint, angle));
        }
        pose.compose(&Pose::new_unchecked(
            self.tcp_translation,
            self.tcp_rotation,
        ))
    }

    /// Geometric Jacobian at `q`: column `i` is the instantaneous linear and
    /// angular tool velocity per unit rate of joint `i`, in the base frame.
    pub fn jacobian(&self, q: &JointConfig) -> Result<Jacobian> {
        self.check_dof(q)?;
        Ok(self.jacobian_unchecked(q))
    }

    pub(crate) fn jacobian_unchecked(&self, q: &DVector<f64>) -> Jacobian {
        let dof = self.dof();
        // Frame of each joint after its own rotation, accumulated base-out.
        let mut axes = Vec::with_capacity(dof);
        let mut origins = Vec::with_capacity(dof);
        let mut pose = Pose::identity();
        for (joint, &angle) in self.joints.iter().zip(q.iter()) {
            let pre = pose.compose(&Pose::new_unchecked(
                joint.origin_translation,
                joint.origin_rotation,
            ));
            axes.push(pre.rotation * joint.axis);
            origins.push(pre.position);
            pose = Pose::new_unchecked(
                pre.position,
                pre.rotation * rotation_from_vector(&(joint.axis * angle)),
            );
        }
        let tool = pose
            .compose(&Pose::new_unchecked(self.tcp_translation, self.tcp_rotation))
            .position;

        let mut jac = Jacobian::zeros(dof);
        for i in 0..dof {
            let linear = axes[i].cross(&(tool - origins[i]));
            for r in 0..3 {
                jac[(r, i)] = linear[r];
                jac[(r + 3, i)] = axes[i][r];
            }
        }
        jac
    }

    /// `true` when every joint value lies inside its closed limit interval.
    /// The configuration must have matching dimension.
    pub fn within_limits(&self, q: &JointConfig) -> bool {
        assert_eq!(q.len(), self.dof(), "joint configuration dimension");
        self.within_limits_vec(q)
    }

    pub(crate) fn within_limits_vec(&self, q: &DVector<f64>) -> bool {
        self.joints
            .iter()
            .zip(q.iter())
            .all(|(j, &v)| v >= j.lower_limit && v <= j.upper_limit)
    }

    /// Clamps each joint value to its limit interval.
    pub fn clamp_to_limits(&self, q: &JointConfig) -> JointConfig {
        assert_eq!(q.len(), self.dof(), "joint configuration dimension");
        JointConfig(DVector::from_iterator(
            self.dof(),
            self.joints
                .iter()
                .zip(q.iter())
                .map(|(j, &v)| v.clamp(j.lower_limit, j.upper_limit)),
        ))
    }

    /// Samples a configuration uniformly inside the joint limits.
    pub fn random_config<R: Rng + ?Sized>(&self, rng: &mut R) -> JointConfig {
        JointConfig(DVector::from_iterator(
            self.dof(),
            self.joints
                .iter()
                .map(|j| rng.gen_range(j.lower_limit..j.upper_limit)),
        ))
    }
}

fn joint_pose(joint: &JointSpec, angle: f64) -> Pose {
    Pose::new_unchecked(
        joint.origin_translation,
        joint.origin_rotation * rotation_from_vector(&(joint.axis * angle)),
    )
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    name: String,
    dof: usize,
    joints: Vec<JointFile>,
    tcp: TcpFile,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct JointFile {
    axis: [f64; 3],
    origin_translation: [f64; 3],
    /// Rotation vector (axis times angle, radians).
    origin_rotation: [f64; 3],
    limits: [f64; 2],
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TcpFile {
    translation: [f64; 3],
    rotation: [f64; 3],
}
