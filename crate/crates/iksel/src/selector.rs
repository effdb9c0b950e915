//! Seed selection and the end-to-end solve loop.
//!
//! Selection runs in two stages. A proximity query fetches the candidate
//! set (k nearest stored keys by default, or every record within a squared
//! key-distance ball). Each candidate is then scored by the joint-space
//! adjustment its stored pseudo-inverse predicts for closing the pose gap:
//! `delta_q = jpinv * pose_error(record pose, target)`. Ranking by the norm
//! of that adjustment prefers seeds that are close *in joint space* and
//! well-conditioned, not merely close in the workspace.
//!
//! When an attempt fails, re-selection picks a fresh seed from the top
//! candidates by adjustment norm — by default the one farthest in joint
//! space from every seed that already failed, pushing successive attempts
//! into different basins of attraction.

use std::time::Instant;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kinematics::{pose_error, rotation::rotation_from_vector, JointConfig, Pose, PoseKey};
use crate::seed::{SeedDatabase, SeedRecord};
use crate::solver::{iterate_with_stream, IterationOutcome, SolverConfig};

/// First-stage score used to order candidates.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionMetric {
    /// Weighted 6-D key distance between the record pose and the target.
    WorkspaceProximity,
    /// Norm of the predicted joint-space adjustment.
    JointAdjustment,
}

impl SelectionMetric {
    pub fn as_str(&self) -> &'static str {
        match self {
            SelectionMetric::WorkspaceProximity => "workspace_proximity",
            SelectionMetric::JointAdjustment => "joint_adjustment",
        }
    }
}

impl std::fmt::Display for SelectionMetric {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for SelectionMetric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "workspace_proximity" | "workspace" => Ok(SelectionMetric::WorkspaceProximity),
            "joint_adjustment" | "adjustment" => Ok(SelectionMetric::JointAdjustment),
            other => Err(Error::InvalidParameter(format!(
                "unknown selection metric '{other}' (expected joint_adjustment or workspace_proximity)"
            ))),
        }
    }
}

/// How the next seed is chosen from the pool after a failure.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReselectPolicy {
    /// Maximize the minimum joint-space distance to all failed seeds.
    FarthestFromFailures,
    /// Next unfailed candidate in adjustment-norm order.
    NextSmallestAdjustment,
    /// Unfailed candidate nearest the target in the workspace.
    NextNearestWorkspace,
}

impl ReselectPolicy {
    pub fn as_str(&self) -> &'static str {
        match self {
            ReselectPolicy::FarthestFromFailures => "farthest_from_failures",
            ReselectPolicy::NextSmallestAdjustment => "next_smallest_adjustment",
            ReselectPolicy::NextNearestWorkspace => "next_nearest_workspace",
        }
    }
}

impl std::fmt::Display for ReselectPolicy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for ReselectPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "farthest_from_failures" | "farthest" => Ok(ReselectPolicy::FarthestFromFailures),
            "next_smallest_adjustment" => Ok(ReselectPolicy::NextSmallestAdjustment),
            "next_nearest_workspace" => Ok(ReselectPolicy::NextNearestWorkspace),
            other => Err(Error::InvalidParameter(format!(
                "unknown re-selection policy '{other}'"
            ))),
        }
    }
}

/// Selection and re-selection parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelectorConfig {
    /// Records fetched by the proximity stage.
    pub k_candidates: usize,
    /// Total solver attempts per target; the first attempt counts as 1.
    pub max_attempts: u32,
    /// Re-selection draws from the first this-many candidates by
    /// adjustment norm.
    pub reselect_pool_size: usize,
    pub metric: SelectionMetric,
    pub reselect_policy: ReselectPolicy,
    /// When set, the proximity stage returns every record whose *squared*
    /// key distance is at most this value, instead of the k nearest.
    pub delta_ball: Option<f64>,
}

impl Default for SelectorConfig {
    fn default() -> Self {
        Self {
            k_candidates: 200,
            max_attempts: 1,
            reselect_pool_size: 20,
            metric: SelectionMetric::JointAdjustment,
            reselect_policy: ReselectPolicy::FarthestFromFailures,
            delta_ball: None,
        }
    }
}

impl SelectorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k_candidates == 0 {
            return Err(Error::InvalidParameter("k_candidates must be at least 1".into()));
        }
        if self.max_attempts == 0 {
            return Err(Error::InvalidParameter("max_attempts must be at least 1".into()));
        }
        if self.reselect_pool_size == 0 || self.reselect_pool_size > self.k_candidates {
            return Err(Error::InvalidParameter(format!(
                "reselect_pool_size must be in 1..={}, got {}",
                self.k_candidates, self.reselect_pool_size
            )));
        }
        if let Some(d) = self.delta_ball {
            if !(d >= 0.0 && d.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "delta_ball must be non-negative and finite, got {d}"
                )));
            }
        }
        Ok(())
    }
}

/// A scored seed candidate.
#[derive(Clone, Debug)]
pub struct Candidate {
    pub record: SeedRecord,
    /// Position of the record in the database (tie-break key).
    pub record_index: usize,
    /// Weighted key distance from the record pose to the target.
    pub workspace_distance: f64,
    /// Predicted joint-space adjustment `jpinv * pose_error(record, target)`.
    pub delta_q: DVector<f64>,
    /// Euclidean norm of `delta_q`; the ranking metric.
    pub adjustment_norm: f64,
}

/// Whether [`solve`] found a valid configuration.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Success,
    Failure,
}

/// Full account of one solve call.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SolveReport {
    pub status: SolveStatus,
    /// Present exactly when `status` is `Success`.
    pub solution: Option<JointConfig>,
    pub attempts_used: u32,
    /// Jacobian updates summed over all attempts.
    pub iterations_total: u32,
    pub attempt_outcomes: Vec<IterationOutcome>,
    pub wall_time_s: f64,
}

impl SolveReport {
    pub fn success(&self) -> bool {
        self.status == SolveStatus::Success
    }
}

/// Reconstructs the pose a key encodes, given the database's weight.
fn pose_from_key(key: &PoseKey, rotation_weight: f64) -> Pose {
    let c = key.coords();
    let rotvec = nalgebra::Vector3::new(c[3], c[4], c[5]) / rotation_weight;
    Pose {
        position: nalgebra::Vector3::new(c[0], c[1], c[2]),
        rotation: rotation_from_vector(&rotvec),
    }
}

/// Fetches and scores candidates for `target`, ordered ascending by the
/// configured metric. Ties break on the other metric, then record index.
pub fn rank_candidates(
    db: &SeedDatabase,
    target: &Pose,
    cfg: &SelectorConfig,
) -> Result<Vec<Candidate>> {
    cfg.validate()?;
    let neighbours = match cfg.delta_ball {
        Some(delta) => db.query_within(target, delta),
        None => db.query_k_nearest(target, cfg.k_candidates),
    };
    if neighbours.is_empty() {
        return Err(Error::NoCandidates);
    }
    let mut candidates: Vec<Candidate> = neighbours
        .into_iter()
        .map(|(index, distance)| {
            let record = db.record(index).clone();
            let record_pose = pose_from_key(&record.key, db.rotation_weight());
            let delta_q: DVector<f64> = &record.jpinv * pose_error(&record_pose, target);
            let adjustment_norm = delta_q.norm();
            Candidate {
                record,
                record_index: index,
                workspace_distance: distance,
                delta_q,
                adjustment_norm,
            }
        })
        .collect();
    let rank_key = |c: &Candidate| match cfg.metric {
        SelectionMetric::JointAdjustment => {
            (c.adjustment_norm, c.workspace_distance, c.record_index)
        }
        SelectionMetric::WorkspaceProximity => {
            (c.workspace_distance, c.adjustment_norm, c.record_index)
        }
    };
    candidates.sort_by(|a, b| {
        let (ka, kb) = (rank_key(a), rank_key(b));
        ka.0.partial_cmp(&kb.0)
            .unwrap()
            .then(ka.1.partial_cmp(&kb.1).unwrap())
            .then(ka.2.cmp(&kb.2))
    });
    Ok(candidates)
}

/// Chooses the next seed after failures. The pool is the first
/// `reselect_pool_size` candidates by adjustment norm (taken before
/// excluding failures); failed seeds are then removed and the configured
/// policy picks among the rest.
pub fn reselect<'a>(
    candidates: &'a [Candidate],
    failed: &[JointConfig],
    cfg: &SelectorConfig,
) -> Result<&'a Candidate> {
    if candidates.is_empty() {
        return Err(Error::NoCandidates);
    }
    // Pool membership is always decided by adjustment norm, regardless of
    // the first-stage ranking metric.
    let mut by_adjustment: Vec<&Candidate> = candidates.iter().collect();
    by_adjustment.sort_by(|a, b| {
        a.adjustment_norm
            .partial_cmp(&b.adjustment_norm)
            .unwrap()
            .then(a.workspace_distance.partial_cmp(&b.workspace_distance).unwrap())
            .then(a.record_index.cmp(&b.record_index))
    });
    by_adjustment.truncate(cfg.reselect_pool_size);

    let eligible: Vec<&Candidate> = by_adjustment
        .into_iter()
        .filter(|c| !failed.iter().any(|f| f == &c.record.q))
        .collect();
    if eligible.is_empty() {
        return Err(Error::PoolExhausted);
    }

    match cfg.reselect_policy {
        ReselectPolicy::NextSmallestAdjustment => Ok(eligible[0]),
        ReselectPolicy::NextNearestWorkspace => Ok(eligible
            .iter()
            .min_by(|a, b| {
                a.workspace_distance
                    .partial_cmp(&b.workspace_distance)
                    .unwrap()
                    .then(a.adjustment_norm.partial_cmp(&b.adjustment_norm).unwrap())
                    .then(a.record_index.cmp(&b.record_index))
            })
            .unwrap()),
        ReselectPolicy::FarthestFromFailures => {
            // Max-min distance to the failed set. `eligible` is in
            // adjustment order, so keeping strict improvement only gives
            // the documented tie-break (smaller adjustment, then index)
            // for free.
            let mut best = eligible[0];
            let mut best_score = f64::NEG_INFINITY;
            for cand in eligible {
                let score = failed
                    .iter()
                    .map(|f| cand.record.q.distance(f))
                    .fold(f64::INFINITY, f64::min);
                if score > best_score {
                    best_score = score;
                    best = cand;
                }
            }
            Ok(best)
        }
    }
}

/// Database-seeded inverse kinematics: rank candidates, iterate from the
/// best, re-select on failure, up to `selector_cfg.max_attempts` attempts
/// in total. Non-convergence is reported in the `SolveReport`, not as an
/// error.
pub fn solve(
    model: &crate::kinematics::RobotModel,
    db: &SeedDatabase,
    target: &Pose,
    solver_cfg: &SolverConfig,
    selector_cfg: &SelectorConfig,
) -> Result<SolveReport> {
    let started = Instant::now();
    solver_cfg.validate()?;
    selector_cfg.validate()?;
    if db.fingerprint() != &model.fingerprint() {
        return Err(Error::IncompatibleModel);
    }

    let candidates = match rank_candidates(db, target, selector_cfg) {
        Ok(c) => c,
        Err(Error::NoCandidates) => {
            return Ok(SolveReport {
                status: SolveStatus::Failure,
                solution: None,
                attempts_used: 0,
                iterations_total: 0,
                attempt_outcomes: Vec::new(),
                wall_time_s: started.elapsed().as_secs_f64(),
            })
        }
        Err(e) => return Err(e),
    };

    let mut failed: Vec<JointConfig> = Vec::new();
    let mut outcomes: Vec<IterationOutcome> = Vec::new();
    let mut iterations_total = 0u32;
    for attempt in 0..selector_cfg.max_attempts {
        let candidate = if attempt == 0 {
            &candidates[0]
        } else {
            match reselect(&candidates, &failed, selector_cfg) {
                Ok(c) => c,
                Err(Error::PoolExhausted) => break,
                Err(e) => return Err(e),
            }
        };
        let outcome =
            iterate_with_stream(model, &candidate.record.q, target, solver_cfg, attempt as u64)?;
        iterations_total += outcome.iterations;
        let converged = outcome.converged();
        let q_final = outcome.q.clone();
        outcomes.push(outcome);
        if converged {
            let attempts_used = attempt + 1;
            return Ok(SolveReport {
                status: SolveStatus::Success,
                solution: Some(q_final),
                attempts_used,
                iterations_total,
                attempt_outcomes: outcomes,
                wall_time_s: started.elapsed().as_secs_f64(),
            });
        }
        failed.push(candidate.record.q.clone());
    }

    Ok(SolveReport {
        status: SolveStatus::Failure,
        solution: None,
        attempts_used: outcomes.len() as u32,
        iterations_total,
        attempt_outcomes: outcomes,
        wall_time_s: started.elapsed().as_secs_f64(),
    })
}
