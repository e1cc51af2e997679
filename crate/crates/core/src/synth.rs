//! Synthetic tabletop scenes for the five tool functions.
//!
//! Everything is laid out in the frame of an anisotropic target box (z up,
//! origin at its center, table at `z = -H/2`) and then observed from random
//! cameras. Demo keypoints are produced the way real data would be: tracked
//! points are fitted step to step and the fitted motions are applied to the
//! first keypoint set.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::alignment::RefinementConfig;
use crate::frames::{build_function_frame, detect_target_frame};
use crate::geometry::{exp_so3, log_so3, rotation_between, PoseSE3, Rotation3, UnitVec3, Vec3};
use crate::keypoints::{
    propagate_keypoints, relative_transforms_from_tracks, FunctionPlan, FunctionalKeypoints,
    DEFAULT_DT,
};
use crate::scenario::{GraspSettings, Scenario};
use crate::trajopt::{farthest_point_sample, point_box_distance, Obstacle, OptimConfig, WarpSpec};

pub const DEMO_STEPS: usize = 120;
pub const DEMO_T_GRASP: usize = 10;
pub const DEMO_T_FUNC: usize = 85;
/// Target box half extents.
pub const TARGET_HALF: [f64; 3] = [0.10, 0.06, 0.03];
/// Height of the function point above the target top at the keyframe.
const KEYFRAME_CLEARANCE: f64 = 0.07;
const LIFT: f64 = 0.04;
const TRACKED_POINTS: usize = 24;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskKind {
    Pour,
    Scoop,
    Cut,
    Brush,
    Pound,
}

impl TaskKind {
    pub const ALL: [TaskKind; 5] = [
        TaskKind::Pour,
        TaskKind::Scoop,
        TaskKind::Cut,
        TaskKind::Brush,
        TaskKind::Pound,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            TaskKind::Pour => "pour",
            TaskKind::Scoop => "scoop",
            TaskKind::Cut => "cut",
            TaskKind::Brush => "brush",
            TaskKind::Pound => "pound",
        }
    }

    /// Downward tilt of the function axis at the keyframe.
    fn keyframe_pitch(&self) -> f64 {
        match self {
            TaskKind::Pour => 55f64.to_radians(),
            TaskKind::Scoop => 60f64.to_radians(),
            _ => 90f64.to_radians(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variation {
    Spatial,
    Instance,
    Category,
}

impl Variation {
    pub const ALL: [Variation; 3] = [Variation::Spatial, Variation::Instance, Variation::Category];

    pub fn name(&self) -> &'static str {
        match self {
            Variation::Spatial => "spatial",
            Variation::Instance => "instance",
            Variation::Category => "category",
        }
    }
}

impl fmt::Display for TaskKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl fmt::Display for Variation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnknownName(pub String);

impl fmt::Display for UnknownName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "unknown name '{}'", self.0)
    }
}

impl std::error::Error for UnknownName {}

impl FromStr for TaskKind {
    type Err = UnknownName;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        TaskKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| UnknownName(s.to_string()))
    }
}

impl FromStr for Variation {
    type Err = UnknownName;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Variation::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| UnknownName(s.to_string()))
    }
}

/// Generator parameters that are not part of the scenario itself.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GeneratorMeta {
    pub kind: TaskKind,
    pub variation: Variation,
    pub seed: u64,
    pub demo_family: &'static str,
    pub test_family: &'static str,
    /// Uniform scale of the test tool relative to its family model.
    pub tool_scale: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedScenario {
    pub scenario: Scenario,
    pub meta: GeneratorMeta,
}

/// Tool geometry in its own coordinates: handle along −x, head toward +x.
#[derive(Debug, Clone)]
struct ToolModel {
    family: &'static str,
    cloud: Vec<Vec3>,
    keypoints: FunctionalKeypoints,
}

impl ToolModel {
    fn scaled(&self, s: f64) -> ToolModel {
        let k = &self.keypoints;
        ToolModel {
            family: self.family,
            cloud: self.cloud.iter().map(|p| p * s).collect(),
            keypoints: FunctionalKeypoints {
                func: k.func * s,
                grasp: k.grasp * s,
                center: k.center * s,
            },
        }
    }

    fn lowest(&self) -> f64 {
        self.cloud.iter().map(|p| p.z).fold(f64::INFINITY, f64::min)
    }
}

fn lattice(center: Vec3, half: Vec3, counts: [usize; 3]) -> Vec<Vec3> {
    let coord = |i: usize, n: usize, h: f64| {
        if n == 1 {
            0.0
        } else {
            -h + 2.0 * h * i as f64 / (n - 1) as f64
        }
    };
    let mut out = Vec::with_capacity(counts.iter().product());
    for i in 0..counts[0] {
        for j in 0..counts[1] {
            for k in 0..counts[2] {
                out.push(
                    center
                        + Vec3::new(
                            coord(i, counts[0], half.x),
                            coord(j, counts[1], half.y),
                            coord(k, counts[2], half.z),
                        ),
                );
            }
        }
    }
    out
}

/// Cylinder surface (wall plus both caps) about the axis through `center`
/// along `axis` (0 = x, 2 = z).
fn cylinder(center: Vec3, radius: f64, half_len: f64, axis: usize) -> Vec<Vec3> {
    let place = |r: f64, a: f64, h: f64| -> Vec3 {
        let (c, s) = (r * a.cos(), r * a.sin());
        let local = if axis == 0 {
            Vec3::new(h, c, s)
        } else {
            Vec3::new(c, s, h)
        };
        center + local
    };
    let mut out = Vec::new();
    let n_a = 16;
    for k in 0..5 {
        let h = -half_len + 2.0 * half_len * k as f64 / 4.0;
        for i in 0..n_a {
            out.push(place(
                radius,
                std::f64::consts::TAU * i as f64 / n_a as f64,
                h,
            ));
        }
    }
    for h in [-half_len, half_len] {
        out.push(place(0.0, 0.0, h));
        for i in 0..8 {
            out.push(place(
                radius * 0.5,
                std::f64::consts::TAU * i as f64 / 8.0,
                h,
            ));
        }
    }
    out
}

fn ellipsoid(center: Vec3, radii: Vec3, n: usize) -> Vec<Vec3> {
    crate::alignment::fibonacci_sphere(n, 0.0)
        .into_iter()
        .map(|d| center + d.component_mul(&radii))
        .collect()
}

fn handle(length: f64) -> Vec<Vec3> {
    lattice(
        Vec3::new(-length / 2.0, 0.0, 0.0),
        Vec3::new(length / 2.0, 0.01, 0.008),
        [9, 2, 2],
    )
}

fn tool(
    family: &'static str,
    parts: Vec<Vec<Vec3>>,
    func: Vec3,
    grasp: Vec3,
    center: Vec3,
) -> ToolModel {
    ToolModel {
        family,
        cloud: parts.into_iter().flatten().collect(),
        keypoints: FunctionalKeypoints::new(func, grasp, center)
            .expect("model keypoints are distinct"),
    }
}

fn tool_model(kind: TaskKind, alternate: bool) -> ToolModel {
    match (kind, alternate) {
        (TaskKind::Pour, false) => {
            let c = Vec3::new(0.05, 0.0, 0.0);
            tool(
                "mug",
                vec![handle(0.07), cylinder(c, 0.04, 0.045, 2)],
                c + Vec3::new(0.04, 0.0, 0.045),
                Vec3::new(-0.04, 0.0, 0.0),
                c,
            )
        }
        (TaskKind::Pour, true) => {
            let c = Vec3::new(0.04, 0.0, 0.02);
            tool(
                "bottle",
                vec![handle(0.06), cylinder(c, 0.03, 0.07, 2)],
                c + Vec3::new(0.012, 0.0, 0.07),
                Vec3::new(-0.035, 0.0, 0.0),
                c,
            )
        }
        (TaskKind::Scoop, false) => {
            let c = Vec3::new(0.03, 0.0, 0.0);
            tool(
                "spoon",
                vec![handle(0.14), ellipsoid(c, Vec3::new(0.03, 0.02, 0.008), 60)],
                c + Vec3::new(0.03, 0.0, -0.004),
                Vec3::new(-0.09, 0.0, 0.0),
                c,
            )
        }
        (TaskKind::Scoop, true) => {
            let c = Vec3::new(0.045, 0.0, -0.01);
            tool(
                "ladle",
                vec![
                    handle(0.18),
                    ellipsoid(c, Vec3::new(0.045, 0.045, 0.025), 80),
                ],
                c + Vec3::new(0.045, 0.0, -0.008),
                Vec3::new(-0.12, 0.0, 0.0),
                c,
            )
        }
        (TaskKind::Cut, false) => {
            let c = Vec3::new(0.07, 0.0, 0.0);
            tool(
                "knife",
                vec![
                    handle(0.10),
                    lattice(c, Vec3::new(0.07, 0.002, 0.015), [15, 2, 4]),
                ],
                c + Vec3::new(0.0, 0.0, -0.015),
                Vec3::new(-0.06, 0.0, 0.0),
                c,
            )
        }
        (TaskKind::Cut, true) => {
            let c = Vec3::new(0.05, 0.0, -0.01);
            tool(
                "cleaver",
                vec![
                    handle(0.09),
                    lattice(c, Vec3::new(0.05, 0.003, 0.035), [11, 2, 8]),
                ],
                c + Vec3::new(0.0, 0.0, -0.035),
                Vec3::new(-0.05, 0.0, 0.0),
                c,
            )
        }
        (TaskKind::Brush, false) => {
            let c = Vec3::new(0.03, 0.0, 0.0);
            tool(
                "scrub brush",
                vec![
                    handle(0.12),
                    lattice(c, Vec3::new(0.03, 0.015, 0.012), [7, 4, 3]),
                ],
                c + Vec3::new(0.0, 0.0, -0.012),
                Vec3::new(-0.07, 0.0, 0.0),
                c,
            )
        }
        (TaskKind::Brush, true) => {
            let c = Vec3::new(0.025, 0.0, 0.0);
            tool(
                "round brush",
                vec![handle(0.15), cylinder(c, 0.025, 0.015, 2)],
                c + Vec3::new(0.0, 0.0, -0.015),
                Vec3::new(-0.09, 0.0, 0.0),
                c,
            )
        }
        (TaskKind::Pound, false) => {
            let c = Vec3::new(0.015, 0.0, 0.0);
            tool(
                "hammer",
                vec![
                    handle(0.20),
                    lattice(c, Vec3::new(0.015, 0.015, 0.04), [3, 3, 9]),
                ],
                c + Vec3::new(0.0, 0.0, -0.04),
                Vec3::new(-0.14, 0.0, 0.0),
                c,
            )
        }
        (TaskKind::Pound, true) => {
            let c = Vec3::new(0.03, 0.0, 0.0);
            tool(
                "mallet",
                vec![handle(0.18), cylinder(c, 0.03, 0.045, 2)],
                c + Vec3::new(0.0, 0.0, -0.045),
                Vec3::new(-0.12, 0.0, 0.0),
                c,
            )
        }
    }
}

fn min_jerk(t: f64) -> f64 {
    let t = t.clamp(0.0, 1.0);
    t * t * t * (10.0 - 15.0 * t + 6.0 * t * t)
}

fn rz(a: f64) -> Rotation3 {
    exp_so3(&Vec3::new(0.0, 0.0, a))
}

/// Resting pose of a tool beside the target: head toward the target,
/// handle pointing outward, lowest point just above the table.
fn resting_pose(model: &ToolModel, azimuth: f64, radius: f64, yaw_jitter: f64) -> PoseSE3 {
    let rotation = rz(azimuth + std::f64::consts::PI + yaw_jitter);
    let table = -TARGET_HALF[2];
    PoseSE3::new(
        rotation,
        Vec3::new(
            radius * azimuth.cos(),
            radius * azimuth.sin(),
            table + 0.001 - model.lowest(),
        ),
    )
}

/// Tool poses of the demonstration. Motion is interpolated about the
/// function point so its speed follows the min-jerk profile exactly.
fn demo_motion(
    kind: TaskKind,
    model: &ToolModel,
    start: &PoseSE3,
    keyframe_offset: Vec3,
) -> Vec<PoseSE3> {
    let kf = model.keypoints.func;
    let f_start = start.transform_point(&kf);
    let f_key = Vec3::new(0.0, 0.0, TARGET_HALF[2] + KEYFRAME_CLEARANCE) + keyframe_offset;

    let local_frame = build_function_frame(&model.keypoints).expect("model frame");
    let v_start = start.rotation.rotate(local_frame.function_axis().as_vec());
    let mut heading = Vec3::new(v_start.x, v_start.y, 0.0);
    if heading.norm() < 1e-6 {
        heading = start.rotation.rotate(&Vec3::x());
    }
    let heading = heading.normalize();
    let pitch = kind.keyframe_pitch();
    let v_key = heading * pitch.cos() - Vec3::z() * pitch.sin();
    let r_key = rotation_between(
        &UnitVec3::new_normalize(v_start).expect("unit"),
        &UnitVec3::new_normalize(v_key).expect("unit"),
    ) * start.rotation;
    let approach = log_so3(&(r_key * start.rotation.transpose()));
    let side = r_key.rotate(local_frame.normal().as_vec());

    let pose_at = |r: Rotation3, f: Vec3| PoseSE3::new(r, f - r.rotate(&kf));
    let span = (DEMO_T_FUNC - DEMO_T_GRASP) as f64;
    let tail = (DEMO_STEPS - 1 - DEMO_T_FUNC) as f64;
    (0..DEMO_STEPS)
        .map(|t| {
            if t <= DEMO_T_GRASP {
                return *start;
            }
            if t <= DEMO_T_FUNC {
                let s = min_jerk((t - DEMO_T_GRASP) as f64 / span);
                let f =
                    f_start.lerp(&f_key, s) + Vec3::z() * (LIFT * (std::f64::consts::PI * s).sin());
                return pose_at(exp_so3(&(approach * s)) * start.rotation, f);
            }
            let tau = (t - DEMO_T_FUNC) as f64 / tail;
            let s = min_jerk(tau);
            let bump = (std::f64::consts::PI * tau).sin();
            match kind {
                TaskKind::Pour => pose_at(exp_so3(&(side * (0.5 * s))) * r_key, f_key),
                TaskKind::Scoop => pose_at(
                    exp_so3(&(side * (-0.35 * s))) * r_key,
                    f_key + heading * (0.05 * s) - Vec3::z() * (0.02 * bump),
                ),
                TaskKind::Cut => pose_at(r_key, f_key + heading * (0.08 * s)),
                TaskKind::Brush => pose_at(
                    r_key,
                    f_key + Vec3::z().cross(&heading) * (0.03 * (std::f64::consts::TAU * s).sin()),
                ),
                TaskKind::Pound => pose_at(r_key, f_key - Vec3::z() * (0.03 * bump * bump)),
            }
        })
        .collect()
}

/// Random viewpoint looking at the table; returns the camera pose in the box frame.
fn random_camera(rng: &mut ChaCha8Rng) -> PoseSE3 {
    let yaw = rng.random_range(0.0..std::f64::consts::TAU);
    let tilt = Vec3::new(
        rng.random_range(-0.2..0.2),
        rng.random_range(-0.2..0.2),
        0.0,
    );
    PoseSE3::new(
        rz(yaw) * exp_so3(&tilt),
        Vec3::new(
            rng.random_range(-0.3..0.3),
            rng.random_range(-0.3..0.3),
            rng.random_range(0.4..0.7),
        ),
    )
}

fn target_cloud() -> Vec<Vec3> {
    lattice(Vec3::zeros(), Vec3::from(TARGET_HALF), [11, 7, 4])
}

fn mix_seed(kind: TaskKind, variation: Variation, seed: u64) -> u64 {
    let k = TaskKind::ALL.iter().position(|x| *x == kind).unwrap() as u64;
    let v = Variation::ALL.iter().position(|x| *x == variation).unwrap() as u64;
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ (k << 40) ^ (v << 48)
}

/// Builds a deterministic scenario for `(kind, variation, seed)`.
pub fn generate_scenario(kind: TaskKind, variation: Variation, seed: u64) -> GeneratedScenario {
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(kind, variation, seed));

    let demo_tool = tool_model(kind, false);
    let (test_base, scale) = match variation {
        Variation::Spatial => (demo_tool.clone(), 1.0),
        Variation::Instance => (demo_tool.clone(), rng.random_range(0.8..1.25)),
        Variation::Category => (tool_model(kind, true), 1.0),
    };
    let test_tool = test_base.scaled(scale);

    // Demonstration.
    let demo_az = rng.random_range(0.0..std::f64::consts::TAU);
    let demo_start = resting_pose(
        &demo_tool,
        demo_az,
        rng.random_range(0.22..0.3),
        rng.random_range(-0.3..0.3),
    );
    let kf_offset = Vec3::new(
        rng.random_range(-0.01..0.01),
        rng.random_range(-0.01..0.01),
        0.0,
    );
    let motion = demo_motion(kind, &demo_tool, &demo_start, kf_offset);

    let demo_cam = random_camera(&mut rng);
    let to_demo_cam = demo_cam.inverse();
    let tracked = farthest_point_sample(&demo_tool.cloud, TRACKED_POINTS);
    let tracks: Vec<Vec<Vec3>> = motion
        .iter()
        .map(|pose| {
            let g = to_demo_cam.compose(pose);
            tracked.iter().map(|p| g.transform_point(p)).collect()
        })
        .collect();
    let rels =
        relative_transforms_from_tracks(&tracks).expect("tracked points are rigid and spread");
    let kp0 = demo_tool
        .keypoints
        .transformed(&to_demo_cam.compose(&motion[0]));
    let demo = propagate_keypoints(kp0, &rels, DEFAULT_DT).expect("finite keypoints");

    // Test scene.
    let test_az = rng.random_range(0.0..std::f64::consts::TAU);
    let test_start = resting_pose(
        &test_tool,
        test_az,
        rng.random_range(0.22..0.3),
        rng.random_range(-0.3..0.3),
    );
    let test_cam = random_camera(&mut rng);
    let to_test_cam = test_cam.inverse();
    let to_cam = to_test_cam.compose(&test_start);
    let up_hint = UnitVec3::new_normalize(to_test_cam.transform_vector(&Vec3::z())).expect("unit");
    let target_cam: Vec<Vec3> = target_cloud()
        .iter()
        .map(|p| to_test_cam.transform_point(p))
        .collect();

    // A post beside the midpoint of the approach, in the detected frame.
    let detected =
        detect_target_frame(&target_cam, &up_hint).expect("box cloud is well conditioned");
    let box_to_detected = detected.pose.inverse().compose(&to_test_cam);
    let side = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
    let start_f = test_start.transform_point(&test_tool.keypoints.func);
    let radial = Vec3::new(start_f.x, start_f.y, 0.0);
    let lateral = Vec3::z().cross(&radial).normalize() * side;
    let ob_half = Vec3::new(0.02, 0.02, 0.05);
    let grasp_box = test_start.transform_point(&test_tool.keypoints.grasp);
    let keep_clear: Vec<Vec3> = test_tool
        .cloud
        .iter()
        .map(|p| test_start.transform_point(p))
        .chain((0..=6).map(|k| grasp_box + Vec3::z() * (0.02 * k as f64)))
        .collect();
    let mut offset = rng.random_range(0.03..0.06);
    let ob_center_box = loop {
        let c = radial * 0.5 + lateral * offset - Vec3::z() * (TARGET_HALF[2] - ob_half.z);
        let post = Obstacle::new(c, ob_half).expect("positive extents");
        if keep_clear
            .iter()
            .all(|p| point_box_distance(p, &post) >= 0.03)
        {
            break c;
        }
        offset += 0.01;
    };
    let obstacle = Obstacle::new(box_to_detected.transform_point(&ob_center_box), ob_half)
        .expect("positive extents");

    let scenario = Scenario {
        function: Some(kind.name().to_string()),
        plan: FunctionPlan::new(DEMO_STEPS, DEMO_T_GRASP, DEMO_T_FUNC)
            .expect("constant plan is ordered"),
        demo,
        demo_target_cloud: Some(
            target_cloud()
                .iter()
                .map(|p| to_demo_cam.transform_point(p))
                .collect(),
        ),
        demo_up_hint: Some(
            UnitVec3::new_normalize(to_demo_cam.transform_vector(&Vec3::z())).expect("unit"),
        ),
        test_keypoints: test_tool.keypoints.transformed(&to_cam),
        test_cloud: test_tool
            .cloud
            .iter()
            .map(|p| to_cam.transform_point(p))
            .collect(),
        target_cloud: target_cam,
        up_hint,
        obstacles: vec![obstacle],
        warp: WarpSpec::default(),
        optim: OptimConfig::default(),
        refine: RefinementConfig {
            rng_seed: seed,
            ..RefinementConfig::default()
        },
        grasp: GraspSettings::default(),
        target_in_base: PoseSE3::new(rz(0.3), Vec3::new(0.55, -0.1, 0.05)),
        seed,
    };
    GeneratedScenario {
        scenario,
        meta: GeneratorMeta {
            kind,
            variation,
            seed,
            demo_family: demo_tool.family,
            test_family: test_tool.family,
            tool_scale: scale,
        },
    }
}
