//! Shared setup for the criterion benches: bundled-model loading and
//! deterministic target generation.

use iksel::{Pose, RobotModel};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::path::PathBuf;

pub fn bundled(name: &str) -> RobotModel {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../models")
        .join(name);
    RobotModel::from_file(path).unwrap()
}

pub fn six_axis() -> RobotModel {
    bundled("ur3_class.toml")
}

/// Reachable poses: forward kinematics of uniformly drawn in-limit
/// configurations.
pub fn random_targets(model: &RobotModel, n: usize, seed: u64) -> Vec<Pose> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let q = model.random_config(&mut rng);
            model.forward_kinematics(&q).unwrap()
        })
        .collect()
}
