//! Cross-checks the kinematics stack against independent constructions:
//! forward kinematics against explicit homogeneous-matrix products, the
//! geometric Jacobian against central finite differences, and the truncated
//! pseudo-inverse against the Moore-Penrose identities.

use iksel::{
    pose_error, regularized_pinv, spectral_norm, Jacobian, JointConfig, Pose, RobotModel,
};
use nalgebra::{Dyn, Matrix3, Matrix4, Matrix6, OMatrix, Unit, UnitQuaternion, Vector3, U6};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use std::path::PathBuf;

fn model_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../models")
        .join(name)
}

fn bundled_models() -> Vec<RobotModel> {
    ["planar_2r.toml", "ur3_class.toml", "redundant_7r.toml"]
        .iter()
        .map(|name| RobotModel::from_file(model_path(name)).unwrap())
        .collect()
}

fn homogeneous(rotation: &Matrix3<f64>, translation: &Vector3<f64>) -> Matrix4<f64> {
    let mut m = Matrix4::identity();
    m.fixed_view_mut::<3, 3>(0, 0).copy_from(rotation);
    m.fixed_view_mut::<3, 1>(0, 3).copy_from(translation);
    m
}

/// Forward kinematics rebuilt from scratch: 4x4 matrix products with the
/// joint rotations routed through unit quaternions.
fn oracle_fk(model: &RobotModel, q: &JointConfig) -> Matrix4<f64> {
    let mut t = Matrix4::identity();
    for (spec, &angle) in model.joints().iter().zip(q.iter()) {
        t *= homogeneous(spec.origin_rotation(), spec.origin_translation());
        let rot = UnitQuaternion::from_axis_angle(&Unit::new_normalize(*spec.axis()), angle)
            .to_rotation_matrix();
        t *= homogeneous(rot.matrix(), &Vector3::zeros());
    }
    t *= homogeneous(model.tcp_rotation(), model.tcp_translation());
    t
}

fn max_abs_diff(a: &Matrix4<f64>, b: &Matrix4<f64>) -> f64 {
    (a - b).abs().max()
}

#[test]
fn bundled_models_load_and_reach_makes_sense() {
    let models = bundled_models();
    assert_eq!(models[0].dof(), 2);
    assert_eq!(models[1].dof(), 6);
    assert_eq!(models[2].dof(), 7);

    let mut rng = StdRng::seed_from_u64(11);
    for (model, max_reach) in models.iter().zip([2.001, 1.0, 1.35]) {
        let mut farthest: f64 = 0.0;
        for _ in 0..500 {
            let q = model.random_config(&mut rng);
            let pose = model.forward_kinematics(&q).unwrap();
            farthest = farthest.max(pose.position.norm());
        }
        assert!(
            farthest < max_reach && farthest > 0.25 * max_reach,
            "{}: farthest sample {farthest}",
            model.name()
        );
    }
}

#[test]
fn forward_kinematics_matches_homogeneous_products() {
    let mut rng = StdRng::seed_from_u64(42);
    for model in bundled_models() {
        for _ in 0..1000 {
            let q = model.random_config(&mut rng);
            let pose = model.forward_kinematics(&q).unwrap();
            let got = homogeneous(&pose.rotation, &pose.position);
            let want = oracle_fk(&model, &q);
            let diff = max_abs_diff(&got, &want);
            assert!(diff <= 1e-12, "{}: q={:?} diff={diff:e}", model.name(), q);
        }
    }
}

#[test]
fn jacobian_matches_central_differences() {
    const H: f64 = 1e-6;
    let mut rng = StdRng::seed_from_u64(7);
    for model in bundled_models() {
        for _ in 0..100 {
            // Stay a step away from the limits so q +/- h remains valid.
            let q = model.random_config(&mut rng);
            let q: Vec<f64> = model
                .joints()
                .iter()
                .zip(q.iter())
                .map(|(spec, &v)| v.clamp(spec.lower_limit() + H, spec.upper_limit() - H))
                .collect();
            let jac = model
                .jacobian(&JointConfig::from_slice(&q))
                .unwrap();

            let mut fd = Jacobian::zeros(model.dof());
            for j in 0..model.dof() {
                let mut fwd = q.clone();
                let mut bwd = q.clone();
                fwd[j] += H;
                bwd[j] -= H;
                let pf = model.forward_kinematics(&JointConfig::from_slice(&fwd)).unwrap();
                let pb = model.forward_kinematics(&JointConfig::from_slice(&bwd)).unwrap();
                let dp = (pf.position - pb.position) / (2.0 * H);
                // Relative rotation over the 2h interval, as a rotation vector.
                let dr = Pose::new(Vector3::zeros(), pf.rotation * pb.rotation.transpose())
                    .unwrap()
                    .rotation_vector()
                    / (2.0 * H);
                for r in 0..3 {
                    fd[(r, j)] = dp[r];
                    fd[(r + 3, j)] = dr[r];
                }
            }

            let scale = jac.abs().max().max(1.0);
            let rel = (&fd - &jac).abs().max() / scale;
            assert!(rel <= 1e-5, "{}: rel={rel:e}", model.name());
        }
    }
}

fn random_orthogonal(rng: &mut StdRng) -> Matrix6<f64> {
    let m = Matrix6::from_fn(|_, _| rng.gen_range(-1.0..1.0));
    m.qr().q()
}

fn square_with_singular_values(rng: &mut StdRng, sigma: &[f64; 6]) -> Jacobian {
    let u = random_orthogonal(rng);
    let v = random_orthogonal(rng);
    let m = u * Matrix6::from_diagonal(&nalgebra::Vector6::from_row_slice(sigma)) * v.transpose();
    OMatrix::<f64, U6, Dyn>::from_fn(6, |r, c| m[(r, c)])
}

#[test]
fn pseudo_inverse_satisfies_moore_penrose_identities() {
    let mut rng = StdRng::seed_from_u64(99);
    for _ in 0..100 {
        let mut sigma = [0.0; 6];
        for s in &mut sigma {
            *s = rng.gen_range(0.5..2.0);
        }
        let jac = square_with_singular_values(&mut rng, &sigma);
        let pinv = regularized_pinv(&jac, 1e-4).unwrap();

        let jp = &jac * &pinv;
        let pj = &pinv * &jac;
        assert!((&jac * &pj - &jac).abs().max() <= 1e-9);
        assert!((&pinv * &jp - &pinv).abs().max() <= 1e-9);
        assert!((&jp - jp.transpose()).abs().max() <= 1e-9);
        assert!((&pj - pj.transpose()).abs().max() <= 1e-9);
    }
}

#[test]
fn truncated_pseudo_inverse_bounds_ill_conditioned_error() {
    const CUTOFF: f64 = 1e-4;
    let mut rng = StdRng::seed_from_u64(100);
    for _ in 0..100 {
        // Three healthy directions, three far below the relative cutoff.
        let sigma = [
            1.0,
            rng.gen_range(0.5..1.0),
            rng.gen_range(0.5..1.0),
            rng.gen_range(1e-9..1e-6),
            rng.gen_range(1e-9..1e-6),
            rng.gen_range(1e-12..1e-9),
        ];
        let jac = square_with_singular_values(&mut rng, &sigma);
        let pinv = regularized_pinv(&jac, CUTOFF).unwrap();
        let sigma_max = spectral_norm(&jac);

        // The truncated inverse is the exact pseudo-inverse of a nearby
        // matrix: the self-consistency identities still hold, and the
        // residual of the first identity is bounded by the dropped spectrum.
        // The identity tolerance is looser than in the well-conditioned test
        // because two kept singular values can land arbitrarily close
        // together, and clustered values leave the factor pairing of the
        // decomposition determined only to roughly eps over the gap.
        let jp = &jac * &pinv;
        let pj = &pinv * &jac;
        assert!((&pinv * &jp - &pinv).abs().max() <= 1e-8);
        assert!((&jp - jp.transpose()).abs().max() <= 1e-8);
        assert!((&pj - pj.transpose()).abs().max() <= 1e-8);
        let residual = spectral_norm(&(&jac * &pj - &jac));
        assert!(residual <= CUTOFF * sigma_max * (1.0 + 1e-6));

        assert!(spectral_norm(&pinv) <= 1.0 / (CUTOFF * sigma_max) + 1e-9);
    }
}

#[test]
fn pose_error_rotation_part_matches_nalgebra_log() {
    let mut rng = StdRng::seed_from_u64(5);
    for _ in 0..200 {
        // Keep the relative angle away from pi, where logarithm branches
        // legitimately differ in sign convention.
        let axis = Unit::new_normalize(Vector3::new(
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
        ));
        let angle = rng.gen_range(-3.0..3.0);
        let base = UnitQuaternion::from_axis_angle(
            &Unit::new_normalize(Vector3::new(0.3, -0.2, 0.9)),
            rng.gen_range(-3.0..3.0),
        )
        .to_rotation_matrix();
        let rel = nalgebra::Rotation3::from_axis_angle(&axis, angle);
        let current = Pose::new(Vector3::zeros(), *base.matrix()).unwrap();
        let target = Pose::new(Vector3::zeros(), rel.into_inner() * base.matrix()).unwrap();

        let err = pose_error(&current, &target);
        let want = rel.scaled_axis();
        for i in 0..3 {
            assert!((err[i + 3] - want[i]).abs() <= 1e-9, "{err} vs {want}");
        }
    }
}
