//! Rank-truncated Moore-Penrose pseudo-inverse for task Jacobians.
//!
//! Singular values below `rel_cutoff` times the largest one are dropped
//! outright instead of damped, which caps the gain of the inverse at
//! `1 / (rel_cutoff * sigma_max)` near singular configurations.

use nalgebra::OMatrix;

use super::model::{Jacobian, JacobianPinv};
use crate::error::{Error, Result};

/// Pseudo-inverse of `jac` with singular values strictly below
/// `rel_cutoff * sigma_max` zeroed. An all-zero Jacobian yields the zero
/// matrix. `rel_cutoff` must lie in `(0, 1)`.
pub fn regularized_pinv(jac: &Jacobian, rel_cutoff: f64) -> Result<JacobianPinv> {
    if !(rel_cutoff > 0.0 && rel_cutoff < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "relative singular-value cutoff must be in (0, 1), got {rel_cutoff}"
        )));
    }
    let dof = jac.ncols();
    let svd = jac.clone().svd(true, true);
    let sigma_max = svd.singular_values.max();
    if !(sigma_max > 0.0) {
        return Ok(JacobianPinv::zeros(dof));
    }
    let floor = rel_cutoff * sigma_max;
    let inv = svd
        .singular_values
        .map(|s| if s < floor { 0.0 } else { 1.0 / s });
    let u = svd.u.expect("svd requested u");
    let v_t = svd.v_t.expect("svd requested v_t");
    Ok(v_t.transpose() * OMatrix::from_diagonal(&inv) * u.transpose())
}

/// Largest singular value of a matrix; used to check pseudo-inverse gain
/// bounds during database construction and in tests.
pub fn spectral_norm<R, C, S>(m: &nalgebra::Matrix<f64, R, C, S>) -> f64
where
    R: nalgebra::Dim,
    C: nalgebra::Dim,
    S: nalgebra::storage::Storage<f64, R, C>,
{
    nalgebra::DMatrix::from_fn(m.nrows(), m.ncols(), |r, c| m[(r, c)])
        .singular_values()
        .max()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::{DVector, Vector6};

    fn jac_from_columns(cols: &[[f64; 6]]) -> Jacobian {
        let mut j = Jacobian::zeros(cols.len());
        for (c, col) in cols.iter().enumerate() {
            for r in 0..6 {
                j[(r, c)] = col[r];
            }
        }
        j
    }

    #[test]
    fn full_rank_matches_inverse_action() {
        // Diagonal-ish full-rank 6x6: pinv must act as the exact inverse.
        let cols: Vec<[f64; 6]> = (0..6)
            .map(|i| {
                let mut c = [0.0; 6];
                c[i] = (i + 1) as f64;
                c
            })
            .collect();
        let j = jac_from_columns(&cols);
        let p = regularized_pinv(&j, 1e-4).unwrap();
        let e = Vector6::new(1.0, -2.0, 3.0, 0.5, 0.0, -1.0);
        let dq = &p * e;
        let back = &j * dq;
        assert_relative_eq!(back, e, epsilon = 1e-12);
    }

    #[test]
    fn zero_jacobian_gives_zero_pinv() {
        let j = Jacobian::zeros(4);
        let p = regularized_pinv(&j, 1e-4).unwrap();
        assert_eq!(p, JacobianPinv::zeros(4));
    }

    #[test]
    fn cutoff_is_strict() {
        // sigma = {1, exactly cutoff*1}: the borderline value is kept.
        let cutoff = 1e-4;
        let cols = vec![
            {
                let mut c = [0.0; 6];
                c[0] = 1.0;
                c
            },
            {
                let mut c = [0.0; 6];
                c[1] = cutoff;
                c
            },
        ];
        let j = jac_from_columns(&cols);
        let p = regularized_pinv(&j, cutoff).unwrap();
        // Kept: gain is 1/cutoff in the second direction.
        assert_relative_eq!(p[(1, 1)], 1.0 / cutoff, max_relative = 1e-9);

        // Just below the floor: dropped, the whole row is zero.
        let mut cols2 = cols;
        cols2[1][1] = cutoff * 0.999;
        let j2 = jac_from_columns(&cols2);
        let p2 = regularized_pinv(&j2, cutoff).unwrap();
        assert_eq!(p2.row(1).amax(), 0.0);
    }

    #[test]
    fn gain_is_bounded() {
        let cutoff = 1e-4;
        // Nearly singular: second direction far below the floor.
        let mut cols = vec![[0.0; 6]; 3];
        cols[0][0] = 2.0;
        cols[1][1] = 1e-9;
        cols[2][2] = 0.5;
        let j = jac_from_columns(&cols);
        let p = regularized_pinv(&j, cutoff).unwrap();
        let sigma_max = spectral_norm(&j);
        let bound = 1.0 / (cutoff * sigma_max) + 1e-9;
        assert!(spectral_norm(&p) <= bound);
    }

    #[test]
    fn rejects_bad_cutoff() {
        let j = Jacobian::zeros(2);
        assert!(regularized_pinv(&j, 0.0).is_err());
        assert!(regularized_pinv(&j, 1.0).is_err());
        assert!(regularized_pinv(&j, -0.5).is_err());
    }

    #[test]
    fn redundant_chain_least_norm_property() {
        // 6x7 full row rank: J * pinv(J) must be the identity on task space.
        let mut cols = vec![[0.0; 6]; 7];
        for (i, col) in cols.iter_mut().enumerate().take(6) {
            col[i] = 1.0 + 0.1 * i as f64;
        }
        cols[6] = [0.3, -0.2, 0.1, 0.05, 0.4, -0.1];
        let j = jac_from_columns(&cols);
        let p = regularized_pinv(&j, 1e-6).unwrap();
        let jp = &j * &p;
        for r in 0..6 {
            for c in 0..6 {
                let want = if r == c { 1.0 } else { 0.0 };
                assert_relative_eq!(jp[(r, c)], want, epsilon = 1e-10);
            }
        }
        // Least-norm: the update must be orthogonal to the null space,
        // i.e. dq lies in the row space: dq = J^T y for some y.
        let e = Vector6::new(0.1, 0.2, -0.3, 0.0, 0.1, 0.05);
        let dq = &p * e;
        let jt = j.transpose();
        let gram = &j * &jt;
        let y = gram.lu().solve(&(&j * &dq)).unwrap();
        let proj: DVector<f64> = &jt * y;
        assert_relative_eq!(proj, dq, epsilon = 1e-10);
    }
}
