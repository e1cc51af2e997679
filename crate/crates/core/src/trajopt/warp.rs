//! Adapting a demonstration frame trajectory to a new scene: symmetry
//! repositioning, rotation about a target axis so the initial function
//! points line up in azimuth, then scaling and offset of the origins.

use super::OptimError;
use crate::frames::{FrameTrajectory, FunctionFrame};
use crate::geometry::{
    rotation_about_axis, signed_angle_about, PoseSE3, Rotation3, UnitVec3, Vec3,
};
use serde::{Deserialize, Serialize};

/// Minimum projected length of a function point onto the alignment plane.
pub const MIN_PROJECTION: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AlignAxis {
    X,
    Y,
    #[default]
    Z,
}

impl AlignAxis {
    pub fn unit(&self) -> UnitVec3 {
        match self {
            AlignAxis::X => UnitVec3::X,
            AlignAxis::Y => UnitVec3::Y,
            AlignAxis::Z => UnitVec3::Z,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WarpSpec {
    pub symmetry_rotation: Rotation3,
    pub align_axis: AlignAxis,
    pub scale: f64,
    pub offset: Vec3,
}

impl Default for WarpSpec {
    fn default() -> Self {
        WarpSpec {
            symmetry_rotation: Rotation3::identity(),
            align_axis: AlignAxis::Z,
            scale: 1.0,
            offset: Vec3::zeros(),
        }
    }
}

/// Signed alignment angle about `axis` from the demo to the test function
/// point.
pub fn alignment_angle(
    demo_func0: &Vec3,
    test_func0: &Vec3,
    axis: AlignAxis,
) -> Result<f64, OptimError> {
    signed_angle_about(demo_func0, test_func0, &axis.unit(), MIN_PROJECTION)
        .ok_or(OptimError::DegenerateProjection)
}

pub fn warp_reference(
    demo: &FrameTrajectory,
    demo_func0: &Vec3,
    test_func0: &Vec3,
    spec: &WarpSpec,
) -> Result<FrameTrajectory, OptimError> {
    if !(spec.scale > 0.0 && spec.scale.is_finite()) {
        return Err(OptimError::InvalidProblem(format!(
            "warp scale must be positive, got {}",
            spec.scale
        )));
    }
    let theta = alignment_angle(demo_func0, test_func0, spec.align_axis)?;
    let rotation = rotation_about_axis(&spec.align_axis.unit(), theta) * spec.symmetry_rotation;
    let g = PoseSE3::from_rotation(rotation);
    let frames = demo
        .frames
        .iter()
        .map(|f| {
            let r = f.transformed(&g);
            FunctionFrame {
                origin: r.origin * spec.scale + spec.offset,
                ..r
            }
        })
        .collect();
    Ok(FrameTrajectory {
        frames,
        dt: demo.dt,
    })
}

/// Suggested scale: ratio of test to demo tool length (function point to
/// center).
pub fn tool_length_ratio(
    test_func: &Vec3,
    test_center: &Vec3,
    demo_func: &Vec3,
    demo_center: &Vec3,
) -> f64 {
    (test_func - test_center).norm() / (demo_func - demo_center).norm()
}
