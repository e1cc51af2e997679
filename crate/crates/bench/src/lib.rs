//! Fixtures shared by the benchmarks.

use toolxfer::frames::{FrameTrajectory, FunctionFrame};
use toolxfer::geometry::exp_so3;
use toolxfer::trajopt::{Obstacle, OptimConfig, OptimProblem};
use toolxfer::{UnitVec3, Vec3};

fn frame(origin: Vec3, w: Vec3) -> FunctionFrame {
    let basis = exp_so3(&w);
    FunctionFrame {
        origin,
        basis,
        grasp_vector: UnitVec3::new_normalize(basis.rotate(&Vec3::new(0.3, 1.0, 0.0)))
            .expect("nonzero"),
    }
}

/// A smooth curved reference of `n` frames at 30 Hz.
pub fn curved_reference(n: usize) -> FrameTrajectory {
    let frames = (0..n)
        .map(|t| {
            let s = t as f64 / (n - 1) as f64;
            frame(
                Vec3::new(0.3 * s, 0.1 * (3.0 * s).sin(), 0.2 - 0.1 * s * s),
                Vec3::new(0.0, 0.4 * s, 0.6 * s),
            )
        })
        .collect();
    FrameTrajectory {
        frames,
        dt: 1.0 / 30.0,
    }
}

/// A 100-step tracking problem whose reference passes through two obstacles.
pub fn obstacle_problem() -> OptimProblem {
    let reference = curved_reference(100);
    let mid = reference.frames[25].origin;
    let late = reference.frames[85].origin;
    OptimProblem {
        pi_init: reference.frames[0],
        pi_func: reference.frames[55],
        t_func: 55,
        obstacles: vec![
            Obstacle::new(
                mid + Vec3::new(0.0, 0.0, -0.03),
                Vec3::new(0.02, 0.02, 0.02),
            )
            .expect("positive"),
            Obstacle::new(
                late + Vec3::new(0.0, 0.03, 0.0),
                Vec3::new(0.03, 0.015, 0.03),
            )
            .expect("positive"),
        ],
        tool_proxy_points: vec![
            Vec3::zeros(),
            Vec3::new(-0.02, 0.0, 0.0),
            Vec3::new(-0.03, 0.01, 0.0),
            Vec3::new(-0.04, 0.0, 0.01),
        ],
        config: OptimConfig::default(),
        reference,
    }
}
