//! Fixtures and random generators shared by the integration tests.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use toolxfer::frames::{build_function_frame, FrameTrajectory, FunctionFrame};
use toolxfer::geometry::{exp_so3, PoseSE3, Rotation3, UnitVec3, Vec3};
use toolxfer::keypoints::FunctionalKeypoints;
use toolxfer::trajopt::{Obstacle, OptimConfig, OptimProblem};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn vec3(rng: &mut impl Rng, scale: f64) -> Vec3 {
    Vec3::new(
        rng.random_range(-scale..scale),
        rng.random_range(-scale..scale),
        rng.random_range(-scale..scale),
    )
}

pub fn unit(rng: &mut impl Rng) -> UnitVec3 {
    loop {
        let v = vec3(rng, 1.0);
        let n = v.norm();
        if n > 0.1 && n <= 1.0 {
            return UnitVec3::new_normalize(v).unwrap();
        }
    }
}

/// Random rotation; angles cover `[0, π]` including values close to π.
pub fn rotation(rng: &mut impl Rng) -> Rotation3 {
    let angle = if rng.random_bool(0.1) {
        std::f64::consts::PI - rng.random_range(0.0..1e-6)
    } else {
        rng.random_range(0.0..std::f64::consts::PI)
    };
    exp_so3(&(unit(rng).into_inner() * angle))
}

pub fn pose(rng: &mut impl Rng, scale: f64) -> PoseSE3 {
    PoseSE3::new(rotation(rng), vec3(rng, scale))
}

/// Keypoints with well separated points and a well defined plane.
pub fn keypoints(rng: &mut impl Rng) -> FunctionalKeypoints {
    loop {
        let (f, g, c) = (vec3(rng, 0.5), vec3(rng, 0.5), vec3(rng, 0.5));
        let (u, v) = (g - f, f - c);
        if u.norm() > 0.05 && v.norm() > 0.05 && u.normalize().cross(&v.normalize()).norm() > 0.1 {
            return FunctionalKeypoints::new(f, g, c).unwrap();
        }
    }
}

pub fn frame(rng: &mut impl Rng) -> FunctionFrame {
    build_function_frame(&keypoints(rng)).unwrap()
}

/// Regular lattice filling a box centered at the origin.
pub fn box_cloud(half: Vec3, counts: [usize; 3]) -> Vec<Vec3> {
    let mut out = Vec::new();
    for i in 0..counts[0] {
        for j in 0..counts[1] {
            for k in 0..counts[2] {
                let f = |i: usize, n: usize, h: f64| -h + 2.0 * h * i as f64 / (n - 1) as f64;
                out.push(Vec3::new(
                    f(i, counts[0], half.x),
                    f(j, counts[1], half.y),
                    f(k, counts[2], half.z),
                ));
            }
        }
    }
    out
}

pub fn frame_at(origin: Vec3, w: Vec3) -> FunctionFrame {
    let basis = exp_so3(&w);
    FunctionFrame {
        origin,
        basis,
        grasp_vector: UnitVec3::new_normalize(basis.rotate(&Vec3::new(0.3, 1.0, 0.0))).unwrap(),
    }
}

pub fn curved_reference(n: usize) -> FrameTrajectory {
    let frames = (0..n)
        .map(|t| {
            let s = t as f64 / (n - 1) as f64;
            frame_at(
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

pub fn problem_from(
    reference: FrameTrajectory,
    t_func: usize,
    config: OptimConfig,
) -> OptimProblem {
    OptimProblem {
        pi_init: reference.frames[0],
        pi_func: reference.frames[t_func],
        t_func,
        reference,
        obstacles: vec![],
        tool_proxy_points: vec![],
        config,
    }
}

/// Three frames with pinned ends 0.3 m apart; the middle step limit is `step_limit`.
pub fn three_step(step_limit: f64) -> OptimProblem {
    let frames = vec![
        frame_at(Vec3::zeros(), Vec3::zeros()),
        frame_at(Vec3::new(0.15, 0.2, 0.05), Vec3::zeros()),
        frame_at(Vec3::new(0.3, 0.0, 0.0), Vec3::zeros()),
    ];
    let dt = 0.1;
    problem_from(
        FrameTrajectory { frames, dt },
        2,
        OptimConfig {
            relax_fraction: 0.0,
            rot_weight: 0.0,
            v_max: step_limit / dt,
            ..OptimConfig::default()
        },
    )
}

/// Minimizes ‖m − r‖² over the lens ‖m − a‖ ≤ L, ‖m − b‖ ≤ L by
/// coarse-to-fine grid refinement.
pub fn grid_oracle(a: Vec3, b: Vec3, r: Vec3, limit: f64) -> Vec3 {
    let feasible = |m: &Vec3| (m - a).norm() <= limit && (m - b).norm() <= limit;
    let mut center = (a + b) / 2.0;
    let mut half = limit;
    while half > 1e-5 {
        let step = half / 10.0;
        let mut best = (f64::INFINITY, center);
        for i in -10..=10 {
            for j in -10..=10 {
                for k in -10..=10 {
                    let m = center + Vec3::new(i as f64, j as f64, k as f64) * step;
                    let c = (m - r).norm_squared();
                    if feasible(&m) && c < best.0 {
                        best = (c, m);
                    }
                }
            }
        }
        center = best.1;
        half = step * 2.0;
    }
    center
}

/// 100 steps, keyframe at 55, with two obstacles on the reference path.
pub fn obstacle_problem() -> OptimProblem {
    let mut p = problem_from(
        curved_reference(100),
        55,
        OptimConfig {
            v_max: 0.5,
            omega_max: 2.0,
            ..OptimConfig::default()
        },
    );
    let mid = p.reference.frames[25].origin;
    let late = p.reference.frames[85].origin;
    p.obstacles = vec![
        Obstacle::new(
            mid + Vec3::new(0.0, 0.0, -0.03),
            Vec3::new(0.02, 0.02, 0.02),
        )
        .unwrap(),
        Obstacle::new(
            late + Vec3::new(0.0, 0.03, 0.0),
            Vec3::new(0.03, 0.015, 0.03),
        )
        .unwrap(),
    ];
    p.tool_proxy_points = vec![
        Vec3::zeros(),
        Vec3::new(-0.02, 0.0, 0.0),
        Vec3::new(-0.03, 0.01, 0.0),
        Vec3::new(-0.04, 0.0, 0.01),
    ];
    p
}

/// Perturbs every frame of `traj` by `(dp, dw)` pairs.
pub fn perturbed(traj: &FrameTrajectory, offsets: &[(Vec3, Vec3)]) -> FrameTrajectory {
    let mut out = traj.clone();
    for (f, (dp, dw)) in out.frames.iter_mut().zip(offsets) {
        *f = FunctionFrame::from_pose(
            &PoseSE3::new(exp_so3(dw) * f.basis, f.origin + dp),
            &f.local_grasp_vector(),
        );
    }
    out
}

/// Generated scenario with the test tool placed exactly where the demo tool
/// started, seen from the demo camera, without obstacles.
pub fn identical_layout(kind: toolxfer::TaskKind, seed: u64) -> toolxfer::Scenario {
    let mut s = toolxfer::generate_scenario(kind, toolxfer::Variation::Spatial, seed).scenario;
    let demo0 = s.demo.steps[0];
    let g =
        toolxfer::geometry::fit_rigid_transform(&s.test_keypoints.as_array(), &demo0.as_array())
            .unwrap();
    s.test_cloud = s.test_cloud.iter().map(|p| g.transform_point(p)).collect();
    s.test_keypoints = demo0;
    s.target_cloud = s.demo_target_cloud.clone().unwrap();
    s.up_hint = s.demo_up_hint.unwrap();
    s.obstacles.clear();
    s
}
