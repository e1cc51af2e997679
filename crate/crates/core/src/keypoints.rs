//! Functional keypoints (function, grasp, center) and their trajectories.

use crate::geometry::{fit_rigid_transform, GeometryError, PoseSE3, Vec3};
use thiserror::Error;

/// Minimum separation between the function and center points, in meters.
pub const MIN_KEYPOINT_SEPARATION: f64 = 1e-6;

/// Default step duration when a file does not specify one.
pub const DEFAULT_DT: f64 = 1.0 / 30.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KeypointError {
    #[error("point cloud is empty")]
    EmptyCloud,
    #[error("keyframes violate 0 < t_grasp < t_func < n_steps - 1 (n_steps={n_steps}, t_grasp={t_grasp}, t_func={t_func})")]
    InvalidPlan {
        n_steps: usize,
        t_grasp: usize,
        t_func: usize,
    },
    #[error("function and center points coincide")]
    CoincidentKeypoints,
    #[error("non-finite keypoint coordinate")]
    NonFinite,
    #[error("expected {expected} relative transforms, got {got}")]
    TransformCount { expected: usize, got: usize },
    #[error("dt must be positive and finite, got {0}")]
    InvalidDt(f64),
    #[error("frame {frame}: {source}")]
    Fit {
        frame: usize,
        #[source]
        source: GeometryError,
    },
    #[error("track frame {frame} has {got} points, expected {expected}")]
    TrackLength {
        frame: usize,
        expected: usize,
        got: usize,
    },
}

/// The (function, grasp, center) abstraction of one tool at one instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FunctionalKeypoints {
    pub func: Vec3,
    pub grasp: Vec3,
    pub center: Vec3,
}

impl FunctionalKeypoints {
    pub fn new(func: Vec3, grasp: Vec3, center: Vec3) -> Result<Self, KeypointError> {
        let k = FunctionalKeypoints {
            func,
            grasp,
            center,
        };
        k.validate()?;
        Ok(k)
    }

    pub fn validate(&self) -> Result<(), KeypointError> {
        let finite = [self.func, self.grasp, self.center]
            .iter()
            .all(|p| p.iter().all(|c| c.is_finite()));
        if !finite {
            return Err(KeypointError::NonFinite);
        }
        if (self.func - self.center).norm() <= MIN_KEYPOINT_SEPARATION {
            return Err(KeypointError::CoincidentKeypoints);
        }
        Ok(())
    }

    pub fn transformed(&self, pose: &PoseSE3) -> FunctionalKeypoints {
        FunctionalKeypoints {
            func: pose.transform_point(&self.func),
            grasp: pose.transform_point(&self.grasp),
            center: pose.transform_point(&self.center),
        }
    }

    pub fn as_array(&self) -> [Vec3; 3] {
        [self.func, self.grasp, self.center]
    }
}

/// Keyframe indices for one function plan.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FunctionPlan {
    n_steps: usize,
    t_grasp: usize,
    t_func: usize,
}

impl FunctionPlan {
    pub fn new(n_steps: usize, t_grasp: usize, t_func: usize) -> Result<Self, KeypointError> {
        if !(0 < t_grasp && t_grasp < t_func && t_func + 1 < n_steps) {
            return Err(KeypointError::InvalidPlan {
                n_steps,
                t_grasp,
                t_func,
            });
        }
        Ok(FunctionPlan {
            n_steps,
            t_grasp,
            t_func,
        })
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn t_grasp(&self) -> usize {
        self.t_grasp
    }

    pub fn t_func(&self) -> usize {
        self.t_func
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KeypointTrajectory {
    pub steps: Vec<FunctionalKeypoints>,
    pub dt: f64,
}

impl KeypointTrajectory {
    pub fn new(steps: Vec<FunctionalKeypoints>, dt: f64) -> Result<Self, KeypointError> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(KeypointError::InvalidDt(dt));
        }
        Ok(KeypointTrajectory { steps, dt })
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn transformed(&self, pose: &PoseSE3) -> KeypointTrajectory {
        KeypointTrajectory {
            steps: self.steps.iter().map(|k| k.transformed(pose)).collect(),
            dt: self.dt,
        }
    }
}

/// Midpoint of the axis-aligned bounding box of `cloud`.
pub fn center_from_points(cloud: &[Vec3]) -> Result<Vec3, KeypointError> {
    let (lo, hi) = aabb(cloud).ok_or(KeypointError::EmptyCloud)?;
    Ok((lo + hi) * 0.5)
}

/// Axis-aligned bounds `(min, max)`, or `None` for an empty cloud.
pub fn aabb(cloud: &[Vec3]) -> Option<(Vec3, Vec3)> {
    let first = cloud.first()?;
    Some(
        cloud
            .iter()
            .skip(1)
            .fold((*first, *first), |(lo, hi), p| (lo.inf(p), hi.sup(p))),
    )
}

/// Applies each relative motion in turn, starting from `initial`.
pub fn propagate_keypoints(
    initial: FunctionalKeypoints,
    relative_transforms: &[PoseSE3],
    dt: f64,
) -> Result<KeypointTrajectory, KeypointError> {
    let mut steps = Vec::with_capacity(relative_transforms.len() + 1);
    steps.push(initial);
    let mut current = initial;
    for rel in relative_transforms {
        current = current.transformed(rel);
        steps.push(current);
    }
    KeypointTrajectory::new(steps, dt)
}

/// Rigid motion between each pair of consecutive frames of tracked points.
/// Points are paired by index.
pub fn relative_transforms_from_tracks(
    tracks: &[Vec<Vec3>],
) -> Result<Vec<PoseSE3>, KeypointError> {
    let Some(first) = tracks.first() else {
        return Ok(Vec::new());
    };
    let expected = first.len();
    for (frame, pts) in tracks.iter().enumerate() {
        if pts.len() != expected {
            return Err(KeypointError::TrackLength {
                frame,
                expected,
                got: pts.len(),
            });
        }
    }
    tracks
        .windows(2)
        .enumerate()
        .map(|(frame, w)| {
            fit_rigid_transform(&w[0], &w[1]).map_err(|source| KeypointError::Fit { frame, source })
        })
        .collect()
}

/// Re-expresses a camera-frame trajectory in the target frame.
pub fn to_target_frame(
    traj: &KeypointTrajectory,
    target_pose_in_camera: &PoseSE3,
) -> KeypointTrajectory {
    traj.transformed(&target_pose_in_camera.inverse())
}
