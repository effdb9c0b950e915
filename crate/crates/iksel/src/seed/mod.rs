//! Precomputed seed databases: a uniform grid over joint space, with each
//! sample's pose key and Jacobian pseudo-inverse stored alongside the
//! configuration and indexed by an exact k-d tree.

mod io;
mod kdtree;

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::kinematics::{regularized_pinv, spectral_norm, JacobianPinv, JointConfig, Pose, RobotModel};

use kdtree::KdTree;

pub use io::{FORMAT_VERSION, MAGIC};

/// Default refusal ceiling for grid builds.
pub const DEFAULT_MAX_RECORDS: u64 = 10_000_000;

/// One precomputed seed: a joint configuration, the weighted key of its
/// tool pose, and the regularized pseudo-inverse of its Jacobian.
#[derive(Clone, Debug, PartialEq)]
pub struct SeedRecord {
    pub q: JointConfig,
    pub key: crate::kinematics::PoseKey,
    pub jpinv: JacobianPinv,
}

/// Grid-construction parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct BuildParams {
    /// Samples per joint; the grid is the Cartesian product.
    pub divisions: Vec<u32>,
    /// Scale applied to the rotation-vector block of every key.
    pub rotation_weight: f64,
    /// Relative singular-value cutoff for the stored pseudo-inverses.
    pub rel_cutoff: f64,
    /// Refusal ceiling on the record count.
    pub max_records: u64,
}

impl BuildParams {
    pub fn new(divisions: Vec<u32>) -> Self {
        Self {
            divisions,
            rotation_weight: 1.0,
            rel_cutoff: 1e-4,
            max_records: DEFAULT_MAX_RECORDS,
        }
    }
}

/// Named database sizes matching the benchmark presets.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ScalePreset {
    Small,
    Medium,
    Large,
}

impl ScalePreset {
    pub const ALL: [ScalePreset; 3] = [ScalePreset::Small, ScalePreset::Medium, ScalePreset::Large];

    pub fn as_str(&self) -> &'static str {
        match self {
            ScalePreset::Small => "small",
            ScalePreset::Medium => "medium",
            ScalePreset::Large => "large",
        }
    }

    /// Per-joint division presets. Products: 12,000 / 40,320 / 151,200 for
    /// six joints and 48,000 / 201,600 / 604,800 for seven.
    pub fn divisions(&self, dof: usize) -> Result<Vec<u32>> {
        let divs: &[u32] = match (self, dof) {
            (ScalePreset::Small, 6) => &[6, 5, 5, 5, 4, 4],
            (ScalePreset::Medium, 6) => &[8, 7, 6, 6, 5, 4],
            (ScalePreset::Large, 6) => &[10, 9, 8, 7, 6, 5],
            (ScalePreset::Small, 7) => &[6, 5, 5, 5, 4, 4, 4],
            (ScalePreset::Medium, 7) => &[8, 7, 6, 6, 5, 5, 4],
            (ScalePreset::Large, 7) => &[10, 9, 8, 7, 6, 5, 4],
            _ => {
                return Err(Error::InvalidParameter(format!(
                    "no {} preset for a {dof}-joint model; pass explicit divisions",
                    self.as_str()
                )))
            }
        };
        Ok(divs.to_vec())
    }
}

impl std::str::FromStr for ScalePreset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "small" => Ok(ScalePreset::Small),
            "medium" => Ok(ScalePreset::Medium),
            "large" => Ok(ScalePreset::Large),
            other => Err(Error::InvalidParameter(format!(
                "unknown scale preset '{other}' (expected small, medium, or large)"
            ))),
        }
    }
}

impl std::fmt::Display for ScalePreset {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Immutable store of seed records with an exact nearest-neighbour index.
#[derive(Clone, Debug)]
pub struct SeedDatabase {
    fingerprint: [u8; 32],
    rotation_weight: f64,
    rel_cutoff: f64,
    /// Per-joint divisions for grid-built databases; zeros when the records
    /// were supplied directly.
    divisions: Vec<u32>,
    records: Vec<SeedRecord>,
    tree: KdTree,
}

impl SeedDatabase {
    /// Samples the Cartesian grid of joint values (placed at cell centres so
    /// no seed starts on a limit), computing pose key and pseudo-inverse for
    /// every sample. Records are stored in grid order with the last joint
    /// varying fastest.
    pub fn build(model: &RobotModel, params: &BuildParams) -> Result<Self> {
        let dof = model.dof();
        if params.divisions.len() != dof {
            return Err(Error::InvalidParameter(format!(
                "{} division counts for a {dof}-joint model",
                params.divisions.len()
            )));
        }
        if params.divisions.iter().any(|&d| d == 0) {
            return Err(Error::InvalidParameter(
                "division counts must be positive".into(),
            ));
        }
        if !(params.rotation_weight > 0.0 && params.rotation_weight.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "rotation weight must be positive and finite, got {}",
                params.rotation_weight
            )));
        }
        if !(params.rel_cutoff > 0.0 && params.rel_cutoff < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "rel_cutoff must be in (0, 1), got {}",
                params.rel_cutoff
            )));
        }
        let count = params
            .divisions
            .iter()
            .try_fold(1u64, |acc, &d| acc.checked_mul(d as u64))
            .ok_or(Error::TooManyRecords {
                requested: u64::MAX,
                ceiling: params.max_records,
            })?;
        if count > params.max_records {
            return Err(Error::TooManyRecords {
                requested: count,
                ceiling: params.max_records,
            });
        }

        let mut records = Vec::with_capacity(count as usize);
        let mut q = DVector::zeros(dof);
        for flat in 0..count {
            let mut rem = flat;
            for j in (0..dof).rev() {
                let div = params.divisions[j] as u64;
                let idx = rem % div;
                rem /= div;
                let joint = &model.joints()[j];
                q[j] = joint.lower_limit()
                    + (idx as f64 + 0.5) * joint.range() / div as f64;
            }
            let pose = model.fk_unchecked(&q);
            let jac = model.jacobian_unchecked(&q);
            let jpinv = regularized_pinv(&jac, params.rel_cutoff)?;
            // Gain-bound spot check on ~1% of samples; the full-record check
            // lives in the test suite.
            if flat % 100 == 0 {
                let sigma_max = spectral_norm(&jac);
                if sigma_max > 0.0 {
                    let bound = 1.0 / (params.rel_cutoff * sigma_max) + 1e-9;
                    assert!(
                        spectral_norm(&jpinv) <= bound,
                        "pseudo-inverse gain bound violated at grid index {flat}"
                    );
                }
            }
            records.push(SeedRecord {
                q: JointConfig::new(q.clone()),
                key: pose.key(params.rotation_weight),
                jpinv,
            });
        }

        let tree = KdTree::build(records.iter().map(|r| *r.key.coords()).collect());
        Ok(Self {
            fingerprint: model.fingerprint(),
            rotation_weight: params.rotation_weight,
            rel_cutoff: params.rel_cutoff,
            divisions: params.divisions.clone(),
            records,
            tree,
        })
    }

    /// Builds a database from explicit records, validating that each key
    /// matches the forward kinematics of its configuration (to 1e-9) and
    /// that every configuration respects the limits.
    pub fn from_records(
        model: &RobotModel,
        rotation_weight: f64,
        rel_cutoff: f64,
        records: Vec<SeedRecord>,
    ) -> Result<Self> {
        if records.is_empty() {
            return Err(Error::InvalidParameter(
                "a seed database needs at least one record".into(),
            ));
        }
        let dof = model.dof();
        for (i, rec) in records.iter().enumerate() {
            if rec.q.len() != dof {
                return Err(Error::DimensionMismatch {
                    expected: dof,
                    actual: rec.q.len(),
                });
            }
            if rec.jpinv.nrows() != dof {
                return Err(Error::DimensionMismatch {
                    expected: dof,
                    actual: rec.jpinv.nrows(),
                });
            }
            if !model.within_limits(&rec.q) {
                return Err(Error::InvalidParameter(format!(
                    "record {i} is outside the joint limits"
                )));
            }
            let expected = model.fk_unchecked(rec.q.as_vector()).key(rotation_weight);
            let drift = rec
                .key
                .coords()
                .iter()
                .zip(expected.coords())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0f64, f64::max);
            if !(drift <= 1e-9) {
                return Err(Error::InvalidParameter(format!(
                    "record {i} key disagrees with forward kinematics by {drift:e}"
                )));
            }
        }
        let tree = KdTree::build(records.iter().map(|r| *r.key.coords()).collect());
        Ok(Self {
            fingerprint: model.fingerprint(),
            rotation_weight,
            rel_cutoff,
            divisions: vec![0; dof],
            records,
            tree,
        })
    }

    pub(crate) fn from_loaded_parts(
        fingerprint: [u8; 32],
        rotation_weight: f64,
        rel_cutoff: f64,
        divisions: Vec<u32>,
        records: Vec<SeedRecord>,
    ) -> Self {
        let tree = KdTree::build(records.iter().map(|r| *r.key.coords()).collect());
        Self {
            fingerprint,
            rotation_weight,
            rel_cutoff,
            divisions,
            records,
            tree,
        }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn records(&self) -> &[SeedRecord] {
        &self.records
    }

    pub fn record(&self, index: usize) -> &SeedRecord {
        &self.records[index]
    }

    pub fn rotation_weight(&self) -> f64 {
        self.rotation_weight
    }

    pub fn rel_cutoff(&self) -> f64 {
        self.rel_cutoff
    }

    pub fn divisions(&self) -> &[u32] {
        &self.divisions
    }

    pub fn fingerprint(&self) -> &[u8; 32] {
        &self.fingerprint
    }

    /// The `k` records whose keys are closest to `target`'s key, ascending
    /// by `(distance, record index)`; all records when `k` exceeds the
    /// count. Results are exact (identical to a linear scan).
    pub fn query_k_nearest(&self, target: &Pose, k: usize) -> Vec<(usize, f64)> {
        let key = target.key(self.rotation_weight);
        self.tree
            .k_nearest(key.coords(), k)
            .into_iter()
            .map(|(idx, d2)| (idx as usize, d2.sqrt()))
            .collect()
    }

    /// Every record whose **squared** key distance to `target` is at most
    /// `delta`, ascending by `(distance, record index)`. The returned
    /// distances are unsquared.
    pub fn query_within(&self, target: &Pose, delta: f64) -> Vec<(usize, f64)> {
        if delta < 0.0 {
            return Vec::new();
        }
        let key = target.key(self.rotation_weight);
        self.tree
            .within(key.coords(), delta)
            .into_iter()
            .map(|(idx, d2)| (idx as usize, d2.sqrt()))
            .collect()
    }

    /// Writes the database to `path` in the versioned binary format.
    pub fn save(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        io::save(self, path.as_ref())
    }

    /// Reads a database, verifying the format, the body checksum, and that
    /// the stored model fingerprint matches `model`.
    pub fn load(path: impl AsRef<std::path::Path>, model: &RobotModel) -> Result<Self> {
        io::load(path.as_ref(), model)
    }
}
