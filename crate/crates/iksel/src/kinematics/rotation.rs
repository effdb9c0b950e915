//! Rotation-vector (axis-angle) conversions.
//!
//! The matrix-to-vector direction needs care near the two singular angles:
//! close to zero the sine denominator vanishes, and close to pi the
//! antisymmetric part of the matrix no longer determines the axis. Both
//! regions get dedicated branches so the conversion stays deterministic and
//! accurate; seed-database keys are built from these vectors, so the same
//! matrix must always map to the same bits.

use nalgebra::{Matrix3, Rotation3, Unit, Vector3};

/// Below this angle the first-order series `w = v / 2` is used directly,
/// avoiding the ill-conditioned `acos` near 1.
const SMALL_ANGLE: f64 = 1e-7;

/// Within this distance of pi the axis is recovered from the symmetric part
/// of the matrix instead of the vanishing antisymmetric part.
const NEAR_PI: f64 = 1e-4;

/// When the antisymmetric part is this small, the sign of the axis is fixed
/// by convention (largest-magnitude component non-negative) rather than read
/// from noise.
const SIGN_FLOOR: f64 = 1e-9;

/// Rotation matrix for a unit `axis` and `angle` in radians.
pub fn rotation_about(axis: &Vector3<f64>, angle: f64) -> Matrix3<f64> {
    Rotation3::from_axis_angle(&Unit::new_normalize(*axis), angle).into_inner()
}

/// Rotation matrix from a rotation vector (axis scaled by angle).
pub fn rotation_from_vector(w: &Vector3<f64>) -> Matrix3<f64> {
    Rotation3::from_scaled_axis(*w).into_inner()
}

/// `true` if `r` is orthonormal with determinant +1, to within `tol`.
pub fn is_rotation(r: &Matrix3<f64>, tol: f64) -> bool {
    let defect = (r.transpose() * r - Matrix3::identity()).abs().max();
    defect <= tol && (r.determinant() - 1.0).abs() <= tol
}

/// Canonical rotation vector of `r`, with angle in `[0, pi]`.
///
/// At exactly pi both `w` and `-w` represent the rotation; the representative
/// whose largest-magnitude component is non-negative is returned, so equal
/// matrices always produce bitwise-equal vectors.
pub fn rotation_vector(r: &Matrix3<f64>) -> Vector3<f64> {
    // Twice the antisymmetric part: v = 2 sin(theta) * axis.
    let v = Vector3::new(
        r[(2, 1)] - r[(1, 2)],
        r[(0, 2)] - r[(2, 0)],
        r[(1, 0)] - r[(0, 1)],
    );
    let cos_theta = ((r.trace() - 1.0) * 0.5).clamp(-1.0, 1.0);
    let theta = cos_theta.acos();

    if theta < SMALL_ANGLE {
        // First-order series; exact enough that the angle itself is not needed.
        return v * 0.5;
    }

    if theta < std::f64::consts::PI - NEAR_PI {
        return v * (theta / (2.0 * theta.sin()));
    }

    // Near pi the antisymmetric part no longer pins the axis, and acos of
    // the trace is only sqrt(eps)-accurate. Recover the dominant axis
    // component from the (well-conditioned) diagonal, the others from
    // off-diagonal sums, and the angle from |v| = 2 sin(theta) via asin.
    let k = 1.0 - cos_theta;
    let diag = [
        (r[(0, 0)] - cos_theta) / k,
        (r[(1, 1)] - cos_theta) / k,
        (r[(2, 2)] - cos_theta) / k,
    ];
    // First index on ties, so the sign convention below stays stable.
    let mut dominant = 0;
    for i in 1..3 {
        if diag[i] > diag[dominant] {
            dominant = i;
        }
    }
    let mut axis = Vector3::zeros();
    axis[dominant] = diag[dominant].max(0.0).sqrt();
    for i in 0..3 {
        if i != dominant {
            axis[i] = (r[(dominant, i)] + r[(i, dominant)]) / (2.0 * k * axis[dominant]);
        }
    }
    axis.normalize_mut();
    let theta = std::f64::consts::PI - ((v.norm() * 0.5).min(1.0)).asin();

    // Global sign: from the antisymmetric part when it is meaningful,
    // otherwise by convention: the largest-magnitude component (first index
    // on ties, judged after rounding) is made non-negative.
    let s = axis.dot(&v);
    if s < -SIGN_FLOOR {
        axis = -axis;
    } else if s <= SIGN_FLOOR {
        let mut top = 0;
        for i in 1..3 {
            if axis[i].abs() > axis[top].abs() {
                top = i;
            }
        }
        if axis[top] < 0.0 {
            axis = -axis;
        }
    }
    axis * theta
}
