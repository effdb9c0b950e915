//! Damped and pseudo-inverse iteration schemes for a single seed.
//!
//! Every scheme shares the same skeleton: evaluate the 6-D task error,
//! stop on convergence, otherwise apply one Jacobian-based update, with a
//! fixed iteration budget and no step-size scaling. The schemes differ only
//! in how the update is computed and how joint limits are handled:
//!
//! * `Dls` - damped least squares; limit violations surface as a status.
//! * `Pinv` - truncated-SVD pseudo-inverse; limits surface as a status.
//! * `PinvRr` - pseudo-inverse that restarts from a random in-limit
//!   configuration when it stalls or converges outside the limits, reusing
//!   the remaining iteration budget.
//! * `Cwln` - weighted least-norm updates whose per-joint weights grow near
//!   the limits; violating joints are clamped to the nearest limit and
//!   frozen for the following iteration.
//! * `Cwpi` - the same weighting applied through a scaled pseudo-inverse.

use nalgebra::{DVector, Matrix6, Vector6};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kinematics::{pose_error, regularized_pinv, Jacobian, JointConfig, Pose, RobotModel};

/// Updates with Euclidean norm below this are treated as a stall.
pub const UPDATE_FLOOR: f64 = 1e-12;

/// Iteration scheme selector.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverKind {
    Dls,
    Pinv,
    PinvRr,
    Cwln,
    Cwpi,
}

impl SolverKind {
    pub const ALL: [SolverKind; 5] = [
        SolverKind::Dls,
        SolverKind::Pinv,
        SolverKind::PinvRr,
        SolverKind::Cwln,
        SolverKind::Cwpi,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            SolverKind::Dls => "DLS",
            SolverKind::Pinv => "PINV",
            SolverKind::PinvRr => "PINV_RR",
            SolverKind::Cwln => "CWLN",
            SolverKind::Cwpi => "CWPI",
        }
    }
}

impl std::fmt::Display for SolverKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for SolverKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().replace('-', "_").as_str() {
            "DLS" => Ok(SolverKind::Dls),
            "PINV" => Ok(SolverKind::Pinv),
            "PINV_RR" => Ok(SolverKind::PinvRr),
            "CWLN" => Ok(SolverKind::Cwln),
            "CWPI" => Ok(SolverKind::Cwpi),
            other => Err(Error::InvalidParameter(format!(
                "unknown solver kind '{other}' (expected DLS, PINV, PINV_RR, CWLN, or CWPI)"
            ))),
        }
    }
}

/// Parameters shared by all iteration schemes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub kind: SolverKind,
    /// Hard cap on Jacobian updates per call, restarts included.
    pub max_iterations: u32,
    /// Convergence threshold on the translational error norm, metres.
    pub position_tolerance: f64,
    /// Convergence threshold on the rotational error norm, radians.
    pub rotation_tolerance: f64,
    /// Damping factor for `Dls`. The default is sized for SI-unit models
    /// (metres), where Jacobian singular values sit around 1e-1..1e0:
    /// damping then only engages in the same near-singular band the
    /// pseudo-inverse cutoff truncates, instead of dragging terminal
    /// convergence everywhere.
    pub dls_damping: f64,
    /// Relative singular-value cutoff for the pseudo-inverse schemes.
    pub rel_cutoff: f64,
    /// Abort with `Diverged` when the weighted error norm strictly
    /// increases between iterations. On by default for `Dls`, `Pinv`, and
    /// `PinvRr`; off for the clamping schemes, whose clamp can raise the
    /// error transiently.
    pub enforce_monotone_decrease: bool,
    /// Weight applied to the rotational block when combining the 6-D error
    /// into a single norm for the divergence check.
    pub rotation_weight: f64,
    /// Base seed for the random restarts of `PinvRr`.
    pub rng_seed: u64,
}

impl SolverConfig {
    /// Defaults for the given scheme: 7 iterations, 1e-6 m and 1e-6 rad
    /// tolerances, damping 1e-4, relative cutoff 1e-4, unit rotation weight.
    pub fn new(kind: SolverKind) -> Self {
        Self {
            kind,
            max_iterations: 7,
            position_tolerance: 1e-6,
            rotation_tolerance: 1e-6,
            dls_damping: 1e-4,
            rel_cutoff: 1e-4,
            enforce_monotone_decrease: !matches!(kind, SolverKind::Cwln | SolverKind::Cwpi),
            rotation_weight: 1.0,
            rng_seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 {
            return Err(Error::InvalidParameter(
                "max_iterations must be at least 1".into(),
            ));
        }
        for (name, v) in [
            ("position_tolerance", self.position_tolerance),
            ("rotation_tolerance", self.rotation_tolerance),
            ("dls_damping", self.dls_damping),
            ("rotation_weight", self.rotation_weight),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be positive and finite, got {v}"
                )));
            }
        }
        if !(self.rel_cutoff > 0.0 && self.rel_cutoff < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "rel_cutoff must be in (0, 1), got {}",
                self.rel_cutoff
            )));
        }
        Ok(())
    }
}

/// How a single-seed iteration run ended.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IterationStatus {
    /// Both error tolerances met and every joint inside its limits.
    Converged,
    /// The weighted error norm strictly increased (or went non-finite)
    /// while monotone enforcement was active.
    Diverged,
    /// The iteration budget ran out before convergence.
    IterationLimit,
    /// The pose tolerances were met but a joint sits outside its limits.
    LimitViolation,
    /// The update norm fell below [`UPDATE_FLOOR`] without convergence.
    LocalMinimum,
}

/// Result of iterating from one seed.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct IterationOutcome {
    pub status: IterationStatus,
    /// Final configuration (clamped for the clamping schemes).
    pub q: JointConfig,
    /// Jacobian updates actually spent, restarts included.
    pub iterations: u32,
    /// Task error at `q`.
    pub final_error: Vector6<f64>,
    /// Weighted error norm at every evaluated configuration, seed first.
    pub error_norms: Vec<f64>,
}

impl IterationOutcome {
    pub fn converged(&self) -> bool {
        self.status == IterationStatus::Converged
    }
}

/// Norm combining the translational error with the rotational error scaled
/// by `rotation_weight`.
pub fn weighted_error_norm(e: &Vector6<f64>, rotation_weight: f64) -> f64 {
    let p = e.fixed_rows::<3>(0).norm_squared();
    let r = e.fixed_rows::<3>(3).norm_squared();
    (p + rotation_weight * rotation_weight * r).sqrt()
}

/// Runs one scheme from `seed` toward `target`. Restart randomness (for
/// `PinvRr`) uses stream 0; see [`iterate_with_stream`].
pub fn iterate(
    model: &RobotModel,
    seed: &JointConfig,
    target: &Pose,
    cfg: &SolverConfig,
) -> Result<IterationOutcome> {
    iterate_with_stream(model, seed, target, cfg, 0)
}

/// As [`iterate`], with an explicit RNG stream so that successive attempts
/// on the same target draw independent but reproducible restart sequences.
pub fn iterate_with_stream(
    model: &RobotModel,
    seed: &JointConfig,
    target: &Pose,
    cfg: &SolverConfig,
    rng_stream: u64,
) -> Result<IterationOutcome> {
    cfg.validate()?;
    if seed.len() != model.dof() {
        return Err(Error::DimensionMismatch {
            expected: model.dof(),
            actual: seed.len(),
        });
    }

    let dof = model.dof();
    let w = cfg.rotation_weight;
    let clamping = matches!(cfg.kind, SolverKind::Cwln | SolverKind::Cwpi);
    let mut rng = match cfg.kind {
        SolverKind::PinvRr => {
            let mut r = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
            r.set_stream(rng_stream);
            Some(r)
        }
        _ => None,
    };

    let mut q = seed.as_vector().clone();
    let mut frozen = vec![false; dof];
    let mut e = pose_error(&model.fk_unchecked(&q), target);
    let mut prev_norm = weighted_error_norm(&e, w);
    let mut norms = vec![prev_norm];
    let mut iterations = 0u32;
    let mut pending_restart = false;

    let finish = |status, q: DVector<f64>, iterations, e, norms| {
        Ok(IterationOutcome {
            status,
            q: JointConfig::new(q),
            iterations,
            final_error: e,
            error_norms: norms,
        })
    };

    // The seed itself may already satisfy the tolerances.
    if converged(&e, cfg) {
        if model.within_limits_vec(&q) {
            return finish(IterationStatus::Converged, q, 0, e, norms);
        }
        match cfg.kind {
            SolverKind::Dls | SolverKind::Pinv => {
                return finish(IterationStatus::LimitViolation, q, 0, e, norms);
            }
            SolverKind::PinvRr => pending_restart = true,
            // The clamping schemes pull the configuration back inside the
            // limits as part of iterating.
            SolverKind::Cwln | SolverKind::Cwpi => {}
        }
    }

    loop {
        if pending_restart {
            pending_restart = false;
            q = model
                .random_config(rng.as_mut().expect("restarts imply PinvRr"))
                .into_vector();
            frozen.fill(false);
            e = pose_error(&model.fk_unchecked(&q), target);
            prev_norm = weighted_error_norm(&e, w);
            norms.push(prev_norm);
            if converged(&e, cfg) {
                // Restart points are drawn inside the limits.
                return finish(IterationStatus::Converged, q, iterations, e, norms);
            }
        }

        if iterations >= cfg.max_iterations {
            return finish(IterationStatus::IterationLimit, q, iterations, e, norms);
        }

        let jac = model.jacobian_unchecked(&q);
        let dq = compute_update(model, cfg, &jac, &e, &q, &frozen)?;
        iterations += 1;

        let Some(dq) = dq else {
            return finish(IterationStatus::Diverged, q, iterations, e, norms);
        };
        if dq.iter().any(|x| !x.is_finite()) {
            return finish(IterationStatus::Diverged, q, iterations, e, norms);
        }
        if dq.norm() < UPDATE_FLOOR {
            if cfg.kind == SolverKind::PinvRr && iterations < cfg.max_iterations {
                pending_restart = true;
                continue;
            }
            return finish(IterationStatus::LocalMinimum, q, iterations, e, norms);
        }

        q += &dq;
        if clamping {
            frozen.fill(false);
            for (j, joint) in model.joints().iter().enumerate() {
                if q[j] < joint.lower_limit() {
                    q[j] = joint.lower_limit();
                    frozen[j] = true;
                } else if q[j] > joint.upper_limit() {
                    q[j] = joint.upper_limit();
                    frozen[j] = true;
                }
            }
        }

        e = pose_error(&model.fk_unchecked(&q), target);
        let norm = weighted_error_norm(&e, w);
        norms.push(norm);
        if !norm.is_finite() {
            return finish(IterationStatus::Diverged, q, iterations, e, norms);
        }

        if converged(&e, cfg) {
            if model.within_limits_vec(&q) {
                return finish(IterationStatus::Converged, q, iterations, e, norms);
            }
            match cfg.kind {
                SolverKind::Dls | SolverKind::Pinv => {
                    return finish(IterationStatus::LimitViolation, q, iterations, e, norms);
                }
                SolverKind::PinvRr => {
                    if iterations < cfg.max_iterations {
                        pending_restart = true;
                        continue;
                    }
                    return finish(IterationStatus::LimitViolation, q, iterations, e, norms);
                }
                SolverKind::Cwln | SolverKind::Cwpi => {}
            }
        }

        if cfg.enforce_monotone_decrease && norm > prev_norm {
            return finish(IterationStatus::Diverged, q, iterations, e, norms);
        }
        prev_norm = norm;
    }
}

fn converged(e: &Vector6<f64>, cfg: &SolverConfig) -> bool {
    e.fixed_rows::<3>(0).norm() <= cfg.position_tolerance
        && e.fixed_rows::<3>(3).norm() <= cfg.rotation_tolerance
}

/// One update step. `None` signals a numerical failure (treated as
/// divergence by the caller).
fn compute_update(
    model: &RobotModel,
    cfg: &SolverConfig,
    jac: &Jacobian,
    e: &Vector6<f64>,
    q: &DVector<f64>,
    frozen: &[bool],
) -> Result<Option<DVector<f64>>> {
    match cfg.kind {
        SolverKind::Dls => {
            let a = jac * jac.transpose()
                + Matrix6::identity() * (cfg.dls_damping * cfg.dls_damping);
            Ok(a
                .cholesky()
                .map(|ch| jac.transpose() * ch.solve(e)))
        }
        SolverKind::Pinv | SolverKind::PinvRr => {
            Ok(Some(regularized_pinv(jac, cfg.rel_cutoff)? * e))
        }
        SolverKind::Cwln => {
            // dq = W^-1 J^T pinv(J W^-1 J^T) e, with W^-1 -> 0 for frozen
            // or saturated joints. The normal matrix carries the *squares*
            // of the weighted Jacobian's singular values, so the relative
            // cutoff is squared to truncate the same subspace the weighted
            // pseudo-inverse would.
            let winv = inverse_weights(model, q, frozen);
            let jw = scale_columns(jac, &winv);
            let normal: Matrix6<f64> = &jw * jac.transpose();
            let mut a = Jacobian::zeros(6);
            a.copy_from(&normal);
            let x = regularized_pinv(&a, cfg.rel_cutoff * cfg.rel_cutoff)? * e;
            Ok(Some(jw.transpose() * Vector6::from_iterator(x.iter().copied())))
        }
        SolverKind::Cwpi => {
            // dq = W^-1/2 pinv(J W^-1/2) e.
            let winv_sqrt = inverse_weights(model, q, frozen).map(f64::sqrt);
            let jw = scale_columns(jac, &winv_sqrt);
            let y = regularized_pinv(&jw, cfg.rel_cutoff)? * e;
            Ok(Some(y.component_mul(&winv_sqrt)))
        }
    }
}

/// Reciprocal joint weights `1 / (1 + |dH/dq_j|)` for the limit-avoidance
/// potential `H = sum_j range_j^2 / (4 (q_j - l_j)(u_j - q_j))`. The weight
/// grows without bound as a joint approaches a limit, so its reciprocal
/// reaches zero at (or beyond) the boundary; frozen joints get zero as well.
fn inverse_weights(model: &RobotModel, q: &DVector<f64>, frozen: &[bool]) -> DVector<f64> {
    DVector::from_iterator(
        model.dof(),
        model.joints().iter().enumerate().map(|(j, joint)| {
            if frozen[j] {
                return 0.0;
            }
            let (l, u) = (joint.lower_limit(), joint.upper_limit());
            if q[j] <= l || q[j] >= u {
                return 0.0;
            }
            let r = u - l;
            let below = q[j] - l;
            let above = u - q[j];
            let grad = r * r * (2.0 * q[j] - l - u) / (4.0 * below * below * above * above);
            1.0 / (1.0 + grad.abs())
        }),
    )
}

fn scale_columns(jac: &Jacobian, scale: &DVector<f64>) -> Jacobian {
    let mut out = jac.clone();
    for c in 0..out.ncols() {
        let mut col = out.column_mut(c);
        col *= scale[c];
    }
    out
}
