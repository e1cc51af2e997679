//! Function-keyframe alignment.
//!
//! The test tool's initial function frame is placed onto the demonstration's
//! function keyframe by three interaction primitives: the axis (function axes
//! made parallel), the plane (normals made parallel by a roll about the
//! axis), and the point (function points made coincident). Rotations pivot
//! about the test function point, so each primitive is satisfied exactly and
//! independently of the others.
//!
//! A [`StateEvaluator`] then judges the aligned state. When it rejects, the
//! failing primitives are resampled: function points on spherical shells
//! around the keyframe function point, and axes on cones around the keyframe
//! axis. Candidates are visited in `(shell, sample)` order and the first
//! accepted one wins.

use crate::frames::FunctionFrame;
use crate::geometry::{
    rotation_about_axis, rotation_between, signed_angle_about, PoseSE3, UnitVec3, Vec3,
};
use crate::keypoints::aabb;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Primitive {
    Point,
    Axis,
    Plane,
}

impl std::fmt::Display for Primitive {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Primitive::Point => "point",
            Primitive::Axis => "axis",
            Primitive::Plane => "plane",
        })
    }
}

/// Residuals of the three primitives against the demonstration keyframe.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PrimitiveResiduals {
    /// Function point distance, meters.
    pub point: f64,
    /// Function axis angle, radians.
    pub axis: f64,
    /// Plane normal angle, radians.
    pub plane: f64,
}

impl PrimitiveResiduals {
    pub fn between(aligned: &FunctionFrame, demo: &FunctionFrame) -> Self {
        PrimitiveResiduals {
            point: (aligned.origin - demo.origin).norm(),
            axis: aligned.function_axis().angle_to(&demo.function_axis()),
            plane: aligned.normal().angle_to(&demo.normal()),
        }
    }

    pub fn max_angle(&self) -> f64 {
        self.axis.max(self.plane)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlignmentResult {
    /// Maps the test tool from its initial pose to the function keyframe.
    pub transform: PoseSE3,
    pub aligned_frame: FunctionFrame,
    pub primitive_report: PrimitiveResiduals,
    pub refinement_iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct EvaluatorVerdict {
    pub valid: bool,
    pub failing_primitives: Vec<Primitive>,
    pub note: String,
}

impl EvaluatorVerdict {
    pub fn accept() -> Self {
        EvaluatorVerdict {
            valid: true,
            failing_primitives: Vec::new(),
            note: String::new(),
        }
    }

    pub fn reject(mut failing: Vec<Primitive>, note: impl Into<String>) -> Self {
        failing.sort();
        failing.dedup();
        EvaluatorVerdict {
            valid: false,
            failing_primitives: failing,
            note: note.into(),
        }
    }

    /// Failing primitives; an invalid verdict with none listed counts as all.
    fn effective_failures(&self) -> Vec<Primitive> {
        if self.valid {
            Vec::new()
        } else if self.failing_primitives.is_empty() {
            vec![Primitive::Point, Primitive::Axis, Primitive::Plane]
        } else {
            self.failing_primitives.clone()
        }
    }
}

/// Everything an evaluator may inspect, in the target frame.
#[derive(Debug, Clone)]
pub struct AlignmentContext {
    pub test_frame0: FunctionFrame,
    pub demo_frame_tf: FunctionFrame,
    /// Test tool cloud at its initial pose.
    pub test_cloud: Vec<Vec3>,
    pub target_cloud: Vec<Vec3>,
}

/// Judges whether an aligned function keyframe is functionally valid.
pub trait StateEvaluator {
    fn evaluate(&self, result: &AlignmentResult, ctx: &AlignmentContext) -> EvaluatorVerdict;
}

impl<F> StateEvaluator for F
where
    F: Fn(&AlignmentResult, &AlignmentContext) -> EvaluatorVerdict,
{
    fn evaluate(&self, result: &AlignmentResult, ctx: &AlignmentContext) -> EvaluatorVerdict {
        self(result, ctx)
    }
}

/// Geometric stand-in for a semantic state check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeometricEvaluator {
    /// Allowed penetration of the tool cloud into the target AABB, meters.
    pub max_penetration: f64,
    /// Allowed distance between aligned and demonstrated function points.
    pub max_point_offset: f64,
    /// Allowed axis / normal deviation, radians.
    pub max_angle: f64,
}

impl Default for GeometricEvaluator {
    fn default() -> Self {
        GeometricEvaluator {
            max_penetration: 0.005,
            max_point_offset: 0.03,
            max_angle: 15f64.to_radians(),
        }
    }
}

impl StateEvaluator for GeometricEvaluator {
    fn evaluate(&self, result: &AlignmentResult, ctx: &AlignmentContext) -> EvaluatorVerdict {
        let mut failing = Vec::new();
        let mut notes = Vec::new();

        if let Some((lo, hi)) = aabb(&ctx.target_cloud) {
            let depth = ctx
                .test_cloud
                .iter()
                .map(|p| aabb_penetration(&result.transform.transform_point(p), &lo, &hi))
                .fold(0.0, f64::max);
            if depth > self.max_penetration {
                failing.push(Primitive::Point);
                notes.push(format!("penetrates target by {:.4} m", depth));
            }
        }

        let offset = (result.aligned_frame.origin - ctx.demo_frame_tf.origin).norm();
        if offset > self.max_point_offset {
            failing.push(Primitive::Point);
            notes.push(format!("function point off by {:.4} m", offset));
        }
        let axis = result
            .aligned_frame
            .function_axis()
            .angle_to(&ctx.demo_frame_tf.function_axis());
        if axis > self.max_angle {
            failing.push(Primitive::Axis);
            notes.push(format!("axis off by {:.2} deg", axis.to_degrees()));
        }
        let plane = result
            .aligned_frame
            .normal()
            .angle_to(&ctx.demo_frame_tf.normal());
        if plane > self.max_angle {
            failing.push(Primitive::Plane);
            notes.push(format!("normal off by {:.2} deg", plane.to_degrees()));
        }

        if failing.is_empty() {
            EvaluatorVerdict::accept()
        } else {
            EvaluatorVerdict::reject(failing, notes.join("; "))
        }
    }
}

pub fn geometric_evaluator(result: &AlignmentResult, ctx: &AlignmentContext) -> EvaluatorVerdict {
    GeometricEvaluator::default().evaluate(result, ctx)
}

/// Depth of `p` inside the box `[lo, hi]`, zero outside.
fn aabb_penetration(p: &Vec3, lo: &Vec3, hi: &Vec3) -> f64 {
    (0..3)
        .map(|i| (p[i] - lo[i]).min(hi[i] - p[i]))
        .fold(f64::INFINITY, f64::min)
        .max(0.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RefinementConfig {
    pub point_radii: Vec<f64>,
    pub axis_cone_angles: Vec<f64>,
    pub samples_per_shell: usize,
    pub max_iterations: usize,
    pub rng_seed: u64,
}

impl Default for RefinementConfig {
    fn default() -> Self {
        RefinementConfig {
            point_radii: vec![0.01, 0.02, 0.03, 0.04, 0.05],
            axis_cone_angles: [10.0f64, 20.0, 30.0, 40.0]
                .iter()
                .map(|d| d.to_radians())
                .collect(),
            samples_per_shell: 8,
            max_iterations: 20,
            rng_seed: 0,
        }
    }
}

impl RefinementConfig {
    pub fn validate(&self) -> Result<(), AlignError> {
        let positive = |v: &[f64]| v.iter().all(|x| *x > 0.0 && x.is_finite());
        if !positive(&self.point_radii)
            || !positive(&self.axis_cone_angles)
            || self.samples_per_shell == 0
            || self.max_iterations == 0
        {
            return Err(AlignError::InvalidConfig);
        }
        Ok(())
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AlignError {
    #[error("refinement exhausted after {evaluations} candidate evaluations: {}", verdict.note)]
    RefinementExhausted {
        best: Box<AlignmentResult>,
        verdict: EvaluatorVerdict,
        evaluations: usize,
    },
    #[error("refinement config must have positive radii, angles, samples and iterations")]
    InvalidConfig,
}

/// Pure translation taking the test function point onto the demo one.
pub fn align_point(test_func: &Vec3, demo_func_at_tf: &Vec3) -> PoseSE3 {
    PoseSE3::from_translation(demo_func_at_tf - test_func)
}

/// Axis alignment followed by a roll about the demo axis that matches the
/// normals, pivoting about the test function point.
pub fn align_axes(test_frame: &FunctionFrame, demo_frame_at_tf: &FunctionFrame) -> PoseSE3 {
    let v_test = test_frame.function_axis();
    let v_demo = demo_frame_at_tf.function_axis();
    let r_axis = rotation_between(&v_test, &v_demo);
    let n_rot = r_axis.rotate(test_frame.normal().as_vec());
    let roll = signed_angle_about(&n_rot, demo_frame_at_tf.normal().as_vec(), &v_demo, 1e-12)
        .unwrap_or(0.0);
    let r_plane = rotation_about_axis(&v_demo, roll);
    PoseSE3::rotation_about_point(r_plane * r_axis, &test_frame.origin)
}

pub fn initial_alignment(
    test_frame0: &FunctionFrame,
    demo_frame_tf: &FunctionFrame,
) -> AlignmentResult {
    let transform = align_point(&test_frame0.origin, &demo_frame_tf.origin)
        .compose(&align_axes(test_frame0, demo_frame_tf));
    let aligned_frame = test_frame0.transformed(&transform);
    AlignmentResult {
        transform,
        primitive_report: PrimitiveResiduals::between(&aligned_frame, demo_frame_tf),
        aligned_frame,
        refinement_iterations: 0,
    }
}

/// Uniform points on the unit sphere (Fibonacci lattice), rotated about z by
/// `phase`.
pub fn fibonacci_sphere(n: usize, phase: f64) -> Vec<Vec3> {
    let golden = PI * (3.0 - 5f64.sqrt());
    (0..n)
        .map(|i| {
            let z = 1.0 - 2.0 * (i as f64 + 0.5) / n as f64;
            let r = (1.0 - z * z).max(0.0).sqrt();
            let th = golden * i as f64 + phase;
            Vec3::new(r * th.cos(), r * th.sin(), z)
        })
        .collect()
}

/// `n` unit vectors at half-angle `angle` around `axis`, evenly spaced in
/// azimuth starting at `phase`.
pub fn cone_directions(axis: &UnitVec3, angle: f64, n: usize, phase: f64) -> Vec<UnitVec3> {
    let a = *axis.as_vec();
    let e1 = a
        .cross(&crate::geometry::smallest_component_basis(&a))
        .normalize();
    let e2 = a.cross(&e1);
    (0..n)
        .map(|j| {
            let phi = phase + 2.0 * PI * j as f64 / n as f64;
            let d = a * angle.cos() + (e1 * phi.cos() + e2 * phi.sin()) * angle.sin();
            UnitVec3::new_unchecked(d.normalize())
        })
        .collect()
}

#[derive(Debug, Clone, Copy)]
enum Candidate {
    Point(Vec3),
    Axis(UnitVec3),
}

/// Enumerates resampling candidates in `(shell, sample)` order.
fn enumerate_candidates(
    demo: &FunctionFrame,
    failing: &[Primitive],
    cfg: &RefinementConfig,
) -> Vec<Candidate> {
    let want_point = failing.contains(&Primitive::Point);
    let want_axis = failing.contains(&Primitive::Axis) || failing.contains(&Primitive::Plane);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let shells = cfg.point_radii.len().max(cfg.axis_cone_angles.len());
    let mut out = Vec::new();
    for k in 0..shells {
        let point_phase = rng.random_range(0.0..2.0 * PI);
        let axis_phase = rng.random_range(0.0..2.0 * PI);
        if want_point {
            if let Some(&r) = cfg.point_radii.get(k) {
                out.extend(
                    fibonacci_sphere(cfg.samples_per_shell, point_phase)
                        .into_iter()
                        .map(|d| Candidate::Point(demo.origin + d * r)),
                );
            }
        }
        if want_axis {
            if let Some(&a) = cfg.axis_cone_angles.get(k) {
                out.extend(
                    cone_directions(&demo.function_axis(), a, cfg.samples_per_shell, axis_phase)
                        .into_iter()
                        .map(Candidate::Axis),
                );
            }
        }
    }
    out
}

fn candidate_target(demo: &FunctionFrame, c: &Candidate) -> FunctionFrame {
    match c {
        Candidate::Point(p) => FunctionFrame {
            origin: *p,
            ..*demo
        },
        Candidate::Axis(axis) => {
            let r = rotation_between(&demo.function_axis(), axis);
            demo.transformed(&PoseSE3::rotation_about_point(r, &demo.origin))
        }
    }
}

/// Evaluator-guided refinement of an initial alignment.
pub fn refine_alignment(
    initial: AlignmentResult,
    evaluator: &dyn StateEvaluator,
    cfg: &RefinementConfig,
    ctx: &AlignmentContext,
) -> Result<AlignmentResult, AlignError> {
    cfg.validate()?;
    let verdict = evaluator.evaluate(&initial, ctx);
    if verdict.valid {
        return Ok(initial);
    }
    let failing = verdict.effective_failures();
    let candidates = enumerate_candidates(&ctx.demo_frame_tf, &failing, cfg);

    let score = |v: &EvaluatorVerdict| v.effective_failures().len();
    let mut best = (initial, verdict);
    let mut evaluations = 0;
    for c in candidates.iter().take(cfg.max_iterations) {
        evaluations += 1;
        let target = candidate_target(&ctx.demo_frame_tf, c);
        let mut result = initial_alignment(&ctx.test_frame0, &target);
        result.primitive_report =
            PrimitiveResiduals::between(&result.aligned_frame, &ctx.demo_frame_tf);
        result.refinement_iterations = evaluations;
        let v = evaluator.evaluate(&result, ctx);
        if v.valid {
            return Ok(result);
        }
        if score(&v) < score(&best.1) {
            best = (result, v);
        }
    }
    Err(AlignError::RefinementExhausted {
        best: Box::new(best.0),
        verdict: best.1,
        evaluations,
    })
}
