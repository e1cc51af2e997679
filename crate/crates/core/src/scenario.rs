//! Scenario and trajectory files.
//!
//! Both are JSON documents carrying a `schema_version`. Lengths are meters,
//! angles radians, and 3×3 matrices are stored as arrays of rows.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::alignment::RefinementConfig;
use crate::execution::{EndEffectorTrajectory, DEFAULT_ROLL_SAMPLES, DEFAULT_STANDOFF};
use crate::geometry::{PoseSE3, Rotation3, UnitVec3, Vec3};
use crate::keypoints::{FunctionPlan, FunctionalKeypoints, KeypointTrajectory, DEFAULT_DT};
use crate::trajopt::{AlignAxis, Obstacle, OptimConfig, WarpSpec};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("schema version {found} is not supported (expected {expected})")]
    SchemaVersionMismatch { found: u32, expected: u32 },
    #[error("schema error in {field}: {message}")]
    Schema { field: String, message: String },
}

impl IoError {
    fn schema(field: &str, message: impl ToString) -> Self {
        IoError::Schema {
            field: field.to_string(),
            message: message.to_string(),
        }
    }

    fn from_json(e: serde_json::Error) -> Self {
        IoError::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        }
    }
}

/// Grasp parameters as given in a scenario. Unset fields are filled by the
/// pipeline: the grasp point defaults to the test grasp keypoint and the
/// approach to the target frame's up axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GraspSettings {
    pub grasp_point: Option<Vec3>,
    pub approach: Option<UnitVec3>,
    pub standoff: f64,
    pub roll_samples: usize,
}

impl Default for GraspSettings {
    fn default() -> Self {
        GraspSettings {
            grasp_point: None,
            approach: None,
            standoff: DEFAULT_STANDOFF,
            roll_samples: DEFAULT_ROLL_SAMPLES,
        }
    }
}

/// A complete transfer problem.
///
/// Demo keypoints are in the demo camera frame, or already in the target
/// frame when `demo_target_cloud` is absent. Test keypoints and both clouds
/// are in the test camera frame. Obstacles, grasp settings and the warp are
/// expressed in the detected target frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub function: Option<String>,
    pub demo: KeypointTrajectory,
    pub plan: FunctionPlan,
    pub demo_target_cloud: Option<Vec<Vec3>>,
    pub demo_up_hint: Option<UnitVec3>,
    pub test_keypoints: FunctionalKeypoints,
    pub test_cloud: Vec<Vec3>,
    pub target_cloud: Vec<Vec3>,
    pub up_hint: UnitVec3,
    pub obstacles: Vec<Obstacle>,
    pub warp: WarpSpec,
    pub optim: OptimConfig,
    pub refine: RefinementConfig,
    pub grasp: GraspSettings,
    pub target_in_base: PoseSE3,
    pub seed: u64,
}

type V3 = [f64; 3];
type M3 = [[f64; 3]; 3];

fn v3(v: &Vec3) -> V3 {
    [v.x, v.y, v.z]
}

fn vec3(a: &V3) -> Vec3 {
    Vec3::new(a[0], a[1], a[2])
}

fn finite(field: &str, a: &V3) -> Result<Vec3, IoError> {
    if a.iter().all(|c| c.is_finite()) {
        Ok(vec3(a))
    } else {
        Err(IoError::schema(field, "non-finite value"))
    }
}

fn cloud(field: &str, pts: &[V3]) -> Result<Vec<Vec3>, IoError> {
    pts.iter().map(|p| finite(field, p)).collect()
}

fn unit(field: &str, a: &V3) -> Result<UnitVec3, IoError> {
    let v = finite(field, a)?;
    // Already-unit input is kept bit-exact so that files round-trip.
    if (v.norm() - 1.0).abs() <= 1e-12 {
        return Ok(UnitVec3::new_unchecked(v));
    }
    UnitVec3::new_normalize(v).map_err(|e| IoError::schema(field, e))
}

fn rotation(field: &str, m: &M3) -> Result<Rotation3, IoError> {
    Rotation3::from_rows(*m).map_err(|e| IoError::schema(field, e))
}

fn keypoints(field: &str, k: &[V3; 3]) -> Result<FunctionalKeypoints, IoError> {
    FunctionalKeypoints::new(
        finite(field, &k[0])?,
        finite(field, &k[1])?,
        finite(field, &k[2])?,
    )
    .map_err(|e| IoError::schema(field, e))
}

fn default_dt() -> f64 {
    DEFAULT_DT
}

fn default_up() -> V3 {
    [0.0, 0.0, 1.0]
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PoseDoc {
    r: M3,
    t: V3,
}

impl PoseDoc {
    fn from_pose(p: &PoseSE3) -> Self {
        PoseDoc {
            r: p.rotation.to_rows(),
            t: v3(&p.translation),
        }
    }

    fn to_pose(&self, field: &str) -> Result<PoseSE3, IoError> {
        Ok(PoseSE3::new(
            rotation(field, &self.r)?,
            finite(field, &self.t)?,
        ))
    }
}

impl Default for PoseDoc {
    fn default() -> Self {
        PoseDoc::from_pose(&PoseSE3::identity())
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PlanDoc {
    n: usize,
    t_g: usize,
    t_f: usize,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DemoDoc {
    /// Per step: function, grasp, center.
    keypoints: Vec<[V3; 3]>,
    plan: PlanDoc,
    #[serde(default = "default_dt")]
    dt: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    target_cloud: Option<Vec<V3>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    up_hint: Option<V3>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TestDoc {
    keypoints: [V3; 3],
    cloud: Vec<V3>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TargetDoc {
    cloud: Vec<V3>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ObstacleDoc {
    center: V3,
    half_extents: V3,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct WarpDoc {
    r_sym: M3,
    align_axis: AlignAxis,
    scale: f64,
    offset: V3,
}

impl Default for WarpDoc {
    fn default() -> Self {
        WarpDoc::from_spec(&WarpSpec::default())
    }
}

impl WarpDoc {
    fn from_spec(w: &WarpSpec) -> Self {
        WarpDoc {
            r_sym: w.symmetry_rotation.to_rows(),
            align_axis: w.align_axis,
            scale: w.scale,
            offset: v3(&w.offset),
        }
    }

    fn to_spec(&self) -> Result<WarpSpec, IoError> {
        if !(self.scale > 0.0 && self.scale.is_finite()) {
            return Err(IoError::schema("warp.scale", "must be positive"));
        }
        Ok(WarpSpec {
            symmetry_rotation: rotation("warp.r_sym", &self.r_sym)?,
            align_axis: self.align_axis,
            scale: self.scale,
            offset: finite("warp.offset", &self.offset)?,
        })
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct OptimDoc {
    relax_fraction: f64,
    v_max: f64,
    omega_max: f64,
    d_min: f64,
    rot_weight: f64,
    constraint_tol: f64,
    grad_tol: f64,
    max_outer: usize,
    max_inner: usize,
}

impl Default for OptimDoc {
    fn default() -> Self {
        OptimDoc::from_config(&OptimConfig::default())
    }
}

impl OptimDoc {
    fn from_config(c: &OptimConfig) -> Self {
        OptimDoc {
            relax_fraction: c.relax_fraction,
            v_max: c.v_max,
            omega_max: c.omega_max,
            d_min: c.d_min,
            rot_weight: c.rot_weight,
            constraint_tol: c.constraint_tol,
            grad_tol: c.grad_tol,
            max_outer: c.max_outer,
            max_inner: c.max_inner,
        }
    }

    fn to_config(&self) -> Result<OptimConfig, IoError> {
        let c = OptimConfig {
            relax_fraction: self.relax_fraction,
            v_max: self.v_max,
            omega_max: self.omega_max,
            d_min: self.d_min,
            rot_weight: self.rot_weight,
            constraint_tol: self.constraint_tol,
            grad_tol: self.grad_tol,
            max_outer: self.max_outer,
            max_inner: self.max_inner,
        };
        c.validate().map_err(|e| IoError::schema("optim", e))?;
        Ok(c)
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RefineDoc {
    point_radii: Vec<f64>,
    axis_cone_angles: Vec<f64>,
    samples_per_shell: usize,
    max_iterations: usize,
}

impl Default for RefineDoc {
    fn default() -> Self {
        RefineDoc::from_config(&RefinementConfig::default())
    }
}

impl RefineDoc {
    fn from_config(c: &RefinementConfig) -> Self {
        RefineDoc {
            point_radii: c.point_radii.clone(),
            axis_cone_angles: c.axis_cone_angles.clone(),
            samples_per_shell: c.samples_per_shell,
            max_iterations: c.max_iterations,
        }
    }

    fn to_config(&self, seed: u64) -> Result<RefinementConfig, IoError> {
        let c = RefinementConfig {
            point_radii: self.point_radii.clone(),
            axis_cone_angles: self.axis_cone_angles.clone(),
            samples_per_shell: self.samples_per_shell,
            max_iterations: self.max_iterations,
            rng_seed: seed,
        };
        c.validate().map_err(|e| IoError::schema("refine", e))?;
        Ok(c)
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct GraspDoc {
    #[serde(skip_serializing_if = "Option::is_none")]
    grasp_point: Option<V3>,
    #[serde(skip_serializing_if = "Option::is_none")]
    approach: Option<V3>,
    standoff: f64,
    roll_samples: usize,
}

impl Default for GraspDoc {
    fn default() -> Self {
        GraspDoc {
            grasp_point: None,
            approach: None,
            standoff: DEFAULT_STANDOFF,
            roll_samples: DEFAULT_ROLL_SAMPLES,
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioDoc {
    schema_version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    function: Option<String>,
    demo: DemoDoc,
    test: TestDoc,
    target: TargetDoc,
    #[serde(default = "default_up")]
    up_hint: V3,
    #[serde(default)]
    obstacles: Vec<ObstacleDoc>,
    #[serde(default)]
    warp: WarpDoc,
    #[serde(default)]
    optim: OptimDoc,
    #[serde(default)]
    refine: RefineDoc,
    #[serde(default)]
    grasp: GraspDoc,
    #[serde(default)]
    target_in_base: PoseDoc,
    #[serde(default)]
    seed: u64,
}

impl ScenarioDoc {
    fn from_scenario(s: &Scenario) -> Self {
        ScenarioDoc {
            schema_version: SCHEMA_VERSION,
            function: s.function.clone(),
            demo: DemoDoc {
                keypoints: s
                    .demo
                    .steps
                    .iter()
                    .map(|k| [v3(&k.func), v3(&k.grasp), v3(&k.center)])
                    .collect(),
                plan: PlanDoc {
                    n: s.plan.n_steps(),
                    t_g: s.plan.t_grasp(),
                    t_f: s.plan.t_func(),
                },
                dt: s.demo.dt,
                target_cloud: s
                    .demo_target_cloud
                    .as_ref()
                    .map(|c| c.iter().map(v3).collect()),
                up_hint: s.demo_up_hint.map(|u| v3(u.as_vec())),
            },
            test: TestDoc {
                keypoints: [
                    v3(&s.test_keypoints.func),
                    v3(&s.test_keypoints.grasp),
                    v3(&s.test_keypoints.center),
                ],
                cloud: s.test_cloud.iter().map(v3).collect(),
            },
            target: TargetDoc {
                cloud: s.target_cloud.iter().map(v3).collect(),
            },
            up_hint: v3(s.up_hint.as_vec()),
            obstacles: s
                .obstacles
                .iter()
                .map(|o| ObstacleDoc {
                    center: v3(&o.center),
                    half_extents: v3(&o.half_extents),
                })
                .collect(),
            warp: WarpDoc::from_spec(&s.warp),
            optim: OptimDoc::from_config(&s.optim),
            refine: RefineDoc::from_config(&s.refine),
            grasp: GraspDoc {
                grasp_point: s.grasp.grasp_point.as_ref().map(v3),
                approach: s.grasp.approach.map(|a| v3(a.as_vec())),
                standoff: s.grasp.standoff,
                roll_samples: s.grasp.roll_samples,
            },
            target_in_base: PoseDoc::from_pose(&s.target_in_base),
            seed: s.seed,
        }
    }

    fn into_scenario(self) -> Result<Scenario, IoError> {
        let d = &self.demo;
        let plan = FunctionPlan::new(d.plan.n, d.plan.t_g, d.plan.t_f)
            .map_err(|e| IoError::schema("demo.plan", e))?;
        if d.keypoints.len() != d.plan.n {
            return Err(IoError::schema(
                "demo.keypoints",
                format!("{} steps but plan.n is {}", d.keypoints.len(), d.plan.n),
            ));
        }
        let steps = d
            .keypoints
            .iter()
            .enumerate()
            .map(|(i, k)| keypoints(&format!("demo.keypoints[{i}]"), k))
            .collect::<Result<Vec<_>, _>>()?;
        let demo =
            KeypointTrajectory::new(steps, d.dt).map_err(|e| IoError::schema("demo.dt", e))?;

        let obstacles = self
            .obstacles
            .iter()
            .enumerate()
            .map(|(i, o)| {
                let field = format!("obstacles[{i}]");
                Obstacle::new(finite(&field, &o.center)?, finite(&field, &o.half_extents)?)
                    .ok_or_else(|| IoError::schema(&field, "half extents must be positive"))
            })
            .collect::<Result<Vec<_>, _>>()?;

        let g = &self.grasp;
        if !(g.standoff >= 0.0 && g.standoff.is_finite()) {
            return Err(IoError::schema("grasp.standoff", "must be non-negative"));
        }
        if g.roll_samples == 0 {
            return Err(IoError::schema("grasp.roll_samples", "must be at least 1"));
        }
        let grasp = GraspSettings {
            grasp_point: g
                .grasp_point
                .as_ref()
                .map(|p| finite("grasp.grasp_point", p))
                .transpose()?,
            approach: g
                .approach
                .as_ref()
                .map(|a| unit("grasp.approach", a))
                .transpose()?,
            standoff: g.standoff,
            roll_samples: g.roll_samples,
        };

        Ok(Scenario {
            function: self.function,
            plan,
            demo_target_cloud: d
                .target_cloud
                .as_ref()
                .map(|c| cloud("demo.target_cloud", c))
                .transpose()?,
            demo_up_hint: d
                .up_hint
                .as_ref()
                .map(|u| unit("demo.up_hint", u))
                .transpose()?,
            demo,
            test_keypoints: keypoints("test.keypoints", &self.test.keypoints)?,
            test_cloud: cloud("test.cloud", &self.test.cloud)?,
            target_cloud: cloud("target.cloud", &self.target.cloud)?,
            up_hint: unit("up_hint", &self.up_hint)?,
            obstacles,
            warp: self.warp.to_spec()?,
            optim: self.optim.to_config()?,
            refine: self.refine.to_config(self.seed)?,
            grasp,
            target_in_base: self.target_in_base.to_pose("target_in_base")?,
            seed: self.seed,
        })
    }
}

/// Checks the version field before the full parse so that old files get a
/// version error rather than a field error.
fn check_version(text: &str) -> Result<(), IoError> {
    #[derive(Deserialize)]
    struct Version {
        schema_version: Option<u32>,
    }
    let v: Version = serde_json::from_str(text).map_err(IoError::from_json)?;
    match v.schema_version {
        Some(SCHEMA_VERSION) => Ok(()),
        Some(found) => Err(IoError::SchemaVersionMismatch {
            found,
            expected: SCHEMA_VERSION,
        }),
        None => Err(IoError::schema("schema_version", "missing")),
    }
}

pub fn parse_scenario(text: &str) -> Result<Scenario, IoError> {
    check_version(text)?;
    let doc: ScenarioDoc = serde_json::from_str(text).map_err(IoError::from_json)?;
    doc.into_scenario()
}

pub fn scenario_to_json(s: &Scenario) -> String {
    serde_json::to_string_pretty(&ScenarioDoc::from_scenario(s)).expect("plain data serializes")
}

fn read(path: &Path) -> Result<String, IoError> {
    fs::read_to_string(path).map_err(|source| IoError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn write(path: &Path, text: &str) -> Result<(), IoError> {
    fs::write(path, text).map_err(|source| IoError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn load_scenario(path: &Path) -> Result<Scenario, IoError> {
    parse_scenario(&read(path)?)
}

pub fn save_scenario(path: &Path, s: &Scenario) -> Result<(), IoError> {
    write(path, &scenario_to_json(s))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigDoc {
    #[serde(default)]
    optim: OptimDoc,
}

/// Solver settings file `{"optim": {...}}`; missing fields take defaults.
pub fn parse_optim_config(text: &str) -> Result<OptimConfig, IoError> {
    let doc: ConfigDoc = serde_json::from_str(text).map_err(IoError::from_json)?;
    doc.optim.to_config()
}

pub fn load_optim_config(path: &Path) -> Result<OptimConfig, IoError> {
    parse_optim_config(&read(path)?)
}

/// An end-effector trajectory together with the plan order it belongs to.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryFile {
    pub trajectory: EndEffectorTrajectory,
    pub manifest: Vec<usize>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TrajectoryDoc {
    schema_version: u32,
    dt: f64,
    actions: Vec<PoseDoc>,
    pregrasp: PoseDoc,
    grasp: PoseDoc,
    #[serde(default)]
    manifest: Vec<usize>,
}

pub fn trajectory_to_json(t: &TrajectoryFile) -> String {
    let tr = &t.trajectory;
    let doc = TrajectoryDoc {
        schema_version: SCHEMA_VERSION,
        dt: tr.dt,
        actions: tr.actions.iter().map(PoseDoc::from_pose).collect(),
        pregrasp: PoseDoc::from_pose(&tr.pregrasp),
        grasp: PoseDoc::from_pose(&tr.grasp),
        manifest: t.manifest.clone(),
    };
    serde_json::to_string_pretty(&doc).expect("plain data serializes")
}

pub fn parse_trajectory(text: &str) -> Result<TrajectoryFile, IoError> {
    check_version(text)?;
    let doc: TrajectoryDoc = serde_json::from_str(text).map_err(IoError::from_json)?;
    let actions = doc
        .actions
        .iter()
        .enumerate()
        .map(|(i, a)| a.to_pose(&format!("actions[{i}]")))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(TrajectoryFile {
        trajectory: EndEffectorTrajectory {
            actions,
            dt: doc.dt,
            pregrasp: doc.pregrasp.to_pose("pregrasp")?,
            grasp: doc.grasp.to_pose("grasp")?,
        },
        manifest: doc.manifest,
    })
}

pub fn save_trajectory(path: &Path, t: &TrajectoryFile) -> Result<(), IoError> {
    write(path, &trajectory_to_json(t))
}

pub fn load_trajectory(path: &Path) -> Result<TrajectoryFile, IoError> {
    parse_trajectory(&read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn optim_config_file() {
        let c = parse_optim_config(r#"{"optim": {"v_max": 0.25}}"#).unwrap();
        assert_eq!(
            c,
            OptimConfig {
                v_max: 0.25,
                ..OptimConfig::default()
            }
        );
        assert_eq!(parse_optim_config("{}").unwrap(), OptimConfig::default());
        assert!(matches!(
            parse_optim_config(r#"{"optim": {"v_max": -1}}"#),
            Err(IoError::Schema { .. })
        ));
        assert!(matches!(
            parse_optim_config(r#"{"solver": {}}"#),
            Err(IoError::Parse { .. })
        ));
    }

    const MINIMAL: &str = r#"{
        "schema_version": 1,
        "demo": {
            "keypoints": [
                [[1,0,0],[0.5,0.3,0],[0,0,0]],
                [[1,0,0.1],[0.5,0.3,0.1],[0,0,0.1]],
                [[1,0,0.2],[0.5,0.3,0.2],[0,0,0.2]],
                [[1,0,0.3],[0.5,0.3,0.3],[0,0,0.3]]
            ],
            "plan": {"n": 4, "t_g": 1, "t_f": 2}
        },
        "test": {"keypoints": [[1,0,0],[0.5,0.3,0],[0,0,0]], "cloud": [[0,0,0]]},
        "target": {"cloud": [[0,0,0],[1,0,0],[0,1,0]]}
    }"#;

    #[test]
    fn minimal_file_gets_defaults() {
        let s = parse_scenario(MINIMAL).unwrap();
        assert_eq!(s.demo.len(), 4);
        assert_eq!(s.demo.dt, DEFAULT_DT);
        assert_eq!(s.optim, OptimConfig::default());
        assert_eq!(s.warp, WarpSpec::default());
        assert_eq!(s.up_hint, UnitVec3::Z);
        assert_eq!(s.target_in_base, PoseSE3::identity());
        assert_eq!(s.grasp, GraspSettings::default());
        assert!(s.obstacles.is_empty());
    }

    #[test]
    fn temporal_order_is_checked() {
        let bad = MINIMAL.replace(r#""t_g": 1, "t_f": 2"#, r#""t_g": 2, "t_f": 2"#);
        match parse_scenario(&bad) {
            Err(IoError::Schema { field, .. }) => assert_eq!(field, "demo.plan"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn version_mismatch() {
        let bad = MINIMAL.replace(r#""schema_version": 1"#, r#""schema_version": 7"#);
        assert!(matches!(
            parse_scenario(&bad),
            Err(IoError::SchemaVersionMismatch {
                found: 7,
                expected: 1
            })
        ));
    }

    #[test]
    fn parse_errors_carry_position() {
        let bad = MINIMAL.replace(r#""n": 4"#, r#""n": "four""#);
        match parse_scenario(&bad) {
            Err(IoError::Parse { line, message, .. }) => {
                assert_eq!(line, 10);
                assert!(message.contains("invalid type"), "{message}");
            }
            other => panic!("{other:?}"),
        }
        let unknown = MINIMAL.replace(r#""target": {"#, r#""bogus": 1, "target": {"#);
        assert!(matches!(
            parse_scenario(&unknown),
            Err(IoError::Parse { .. })
        ));
    }

    #[test]
    fn scenario_round_trip() {
        let mut s = parse_scenario(MINIMAL).unwrap();
        s.obstacles
            .push(Obstacle::new(Vec3::new(0.1, 0.2, 0.3), Vec3::new(0.01, 0.02, 0.03)).unwrap());
        s.grasp.approach = Some(UnitVec3::new_normalize(Vec3::new(0.1, 0.2, 0.9)).unwrap());
        s.target_in_base = PoseSE3::new(
            crate::geometry::exp_so3(&Vec3::new(0.3, -0.2, 1.1)),
            Vec3::new(0.4, 0.0, 0.7),
        );
        s.seed = 42;
        s.refine.rng_seed = 42;
        let back = parse_scenario(&scenario_to_json(&s)).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn trajectory_round_trip_through_disk() {
        let p = PoseSE3::new(
            crate::geometry::exp_so3(&Vec3::new(0.1, 2.0, -0.4)),
            Vec3::new(1.0 / 3.0, 0.2, 0.1),
        );
        let t = TrajectoryFile {
            trajectory: EndEffectorTrajectory {
                actions: vec![p, PoseSE3::identity(), p],
                dt: 1.0 / 30.0,
                pregrasp: p,
                grasp: PoseSE3::identity(),
            },
            manifest: vec![0],
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("traj.json");
        save_trajectory(&path, &t).unwrap();
        assert_eq!(load_trajectory(&path).unwrap(), t);
    }
}
