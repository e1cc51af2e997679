//! Function frames built from keypoint triples, and target-frame detection.
//!
//! A function frame has its origin at the function point. Its basis columns
//! are `[v, n × v, n]`, where `v` is the function axis (center → function
//! point), `u` is the grasp vector (function point → grasp point) and
//! `n = normalize(u × v)` is the normal of the function plane.

use crate::geometry::{GeometryError, PoseSE3, Rotation3, UnitVec3, Vec3};
use crate::keypoints::{aabb, FunctionalKeypoints, KeypointTrajectory};
use nalgebra::SymmetricEigen;
use thiserror::Error;

/// Below this length keypoints are treated as coincident.
pub const DEGENERATE_KEYPOINT_DIST: f64 = 1e-6;
/// Below this `‖u × v‖` the grasp vector is treated as collinear with the axis.
pub const COLLINEAR_TOL: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FrameError {
    #[error("degenerate keypoints: {0}")]
    DegenerateKeypoints(&'static str),
    #[error("step {step}: {source}")]
    AtStep {
        step: usize,
        #[source]
        source: Box<FrameError>,
    },
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FunctionFrame {
    pub origin: Vec3,
    pub basis: Rotation3,
    pub grasp_vector: UnitVec3,
}

impl FunctionFrame {
    pub fn function_axis(&self) -> UnitVec3 {
        UnitVec3::new_unchecked(self.basis.column(0))
    }

    pub fn normal(&self) -> UnitVec3 {
        UnitVec3::new_unchecked(self.basis.column(2))
    }

    /// The frame as a rigid transform from frame-local to parent coordinates.
    pub fn pose(&self) -> PoseSE3 {
        PoseSE3::new(self.basis, self.origin)
    }

    /// Grasp vector in frame-local coordinates.
    pub fn local_grasp_vector(&self) -> Vec3 {
        self.basis.transpose().rotate(self.grasp_vector.as_vec())
    }

    /// Frame at `pose`, carrying a grasp vector given in local coordinates.
    pub fn from_pose(pose: &PoseSE3, local_grasp_vector: &Vec3) -> FunctionFrame {
        FunctionFrame {
            origin: pose.translation,
            basis: pose.rotation,
            grasp_vector: UnitVec3::new_unchecked(pose.rotation.rotate(local_grasp_vector)),
        }
    }

    /// Rigidly moves the frame: `g ∘ frame`.
    pub fn transformed(&self, g: &PoseSE3) -> FunctionFrame {
        FunctionFrame {
            origin: g.transform_point(&self.origin),
            basis: g.rotation * self.basis,
            grasp_vector: UnitVec3::new_unchecked(g.rotation.rotate(self.grasp_vector.as_vec())),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameTrajectory {
    pub frames: Vec<FunctionFrame>,
    pub dt: f64,
}

impl FrameTrajectory {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn origins(&self) -> impl Iterator<Item = &Vec3> {
        self.frames.iter().map(|f| &f.origin)
    }

    pub fn transformed(&self, g: &PoseSE3) -> FrameTrajectory {
        FrameTrajectory {
            frames: self.frames.iter().map(|f| f.transformed(g)).collect(),
            dt: self.dt,
        }
    }

    /// Root-mean-square distance between corresponding origins.
    pub fn origin_rmse(&self, other: &FrameTrajectory) -> f64 {
        let n = self.len().min(other.len());
        if n == 0 {
            return 0.0;
        }
        let sum: f64 = self
            .origins()
            .zip(other.origins())
            .map(|(a, b)| (a - b).norm_squared())
            .sum();
        (sum / n as f64).sqrt()
    }
}

/// Object-centered frame of the target, expressed in the camera frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TargetFrame {
    pub pose: PoseSE3,
}

pub fn build_function_frame(k: &FunctionalKeypoints) -> Result<FunctionFrame, FrameError> {
    build_function_frame_with_hint(k, None)
}

/// As [`build_function_frame`]; `up_hint` seeds the normal when the grasp
/// point lies on the function axis.
pub fn build_function_frame_with_hint(
    k: &FunctionalKeypoints,
    up_hint: Option<&UnitVec3>,
) -> Result<FunctionFrame, FrameError> {
    let axis = k.func - k.center;
    if axis.norm() <= DEGENERATE_KEYPOINT_DIST {
        return Err(FrameError::DegenerateKeypoints(
            "function point equals center point",
        ));
    }
    let to_grasp = k.grasp - k.func;
    if to_grasp.norm() <= DEGENERATE_KEYPOINT_DIST {
        return Err(FrameError::DegenerateKeypoints(
            "function point equals grasp point",
        ));
    }
    let v = axis.normalize();
    let u = to_grasp.normalize();

    let uv = u.cross(&v);
    let n = if uv.norm() >= COLLINEAR_TOL {
        uv.normalize()
    } else {
        collinear_normal(&v, up_hint)
    };
    let y = n.cross(&v);
    let basis = Rotation3::from_columns(&v, &y, &n).or_else(|_| {
        Rotation3::from_matrix_projected(nalgebra::Matrix3::from_columns(&[v, y, n]))
    })?;
    Ok(FunctionFrame {
        origin: k.func,
        basis,
        grasp_vector: UnitVec3::new_unchecked(u),
    })
}

fn collinear_normal(v: &Vec3, up_hint: Option<&UnitVec3>) -> Vec3 {
    let e = up_hint.map(|u| *u.as_vec()).unwrap_or_else(Vec3::z);
    let c = e.cross(v);
    if c.norm() >= COLLINEAR_TOL {
        return c.normalize();
    }
    Vec3::y().cross(v).normalize()
}

pub fn build_frame_trajectory(traj: &KeypointTrajectory) -> Result<FrameTrajectory, FrameError> {
    build_frame_trajectory_with_hint(traj, None)
}

pub fn build_frame_trajectory_with_hint(
    traj: &KeypointTrajectory,
    up_hint: Option<&UnitVec3>,
) -> Result<FrameTrajectory, FrameError> {
    let frames = traj
        .steps
        .iter()
        .enumerate()
        .map(|(step, k)| {
            build_function_frame_with_hint(k, up_hint).map_err(|e| FrameError::AtStep {
                step,
                source: Box::new(e),
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(FrameTrajectory {
        frames,
        dt: traj.dt,
    })
}

/// Flips `v` so that its largest-magnitude component is positive (lowest
/// index wins ties).
pub fn canonical_sign(v: &Vec3) -> Vec3 {
    let mut idx = 0;
    for i in 1..3 {
        if v[i].abs() > v[idx].abs() + 1e-12 {
            idx = i;
        }
    }
    if v[idx] < 0.0 {
        -v
    } else {
        *v
    }
}

/// Target frame from a segmented cloud: AABB-center origin, z along the
/// principal axis closest to `up_hint`, x along the remaining axis of largest
/// variance, y completing a right-handed basis.
pub fn detect_target_frame(cloud: &[Vec3], up_hint: &UnitVec3) -> Result<TargetFrame, FrameError> {
    if cloud.len() < 3 {
        return Err(FrameError::DegenerateInput(format!(
            "need at least 3 points, got {}",
            cloud.len()
        )));
    }
    let (lo, hi) = aabb(cloud).expect("non-empty");
    let origin = (lo + hi) * 0.5;

    let n = cloud.len() as f64;
    let mean = cloud.iter().sum::<Vec3>() / n;
    let cov = cloud.iter().fold(nalgebra::Matrix3::zeros(), |acc, p| {
        let d = p - mean;
        acc + d * d.transpose()
    }) / n;

    let eig = SymmetricEigen::new(cov);
    let mut axes: Vec<(f64, Vec3)> = (0..3)
        .map(|i| {
            (
                eig.eigenvalues[i],
                canonical_sign(&eig.eigenvectors.column(i).into_owned()),
            )
        })
        .collect();
    axes.sort_by(|a, b| b.0.total_cmp(&a.0));
    if axes[0].0 <= 0.0 || axes[1].0 <= axes[0].0 * 1e-12 {
        return Err(FrameError::DegenerateInput(
            "cloud is collinear or coincident".into(),
        ));
    }

    let up = up_hint.as_vec();
    let zi = (0..3)
        .max_by(|&i, &j| {
            axes[i]
                .1
                .dot(up)
                .abs()
                .total_cmp(&axes[j].1.dot(up).abs())
                .then(j.cmp(&i))
        })
        .unwrap();
    let mut z = axes[zi].1;
    if z.dot(up) < 0.0 {
        z = -z;
    }
    // Remaining axes stay in descending-eigenvalue order.
    let x = axes
        .iter()
        .enumerate()
        .find(|(i, _)| *i != zi)
        .map(|(_, a)| a.1)
        .unwrap();
    let y = z.cross(&x);
    let rotation = Rotation3::from_columns(&x, &y, &z).or_else(|_| {
        Rotation3::from_matrix_projected(nalgebra::Matrix3::from_columns(&[x, y, z]))
    })?;
    Ok(TargetFrame {
        pose: PoseSE3::new(rotation, origin),
    })
}
