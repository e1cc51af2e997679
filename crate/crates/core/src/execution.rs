//! Grasp sampling and the mapping from function frames to end-effector poses.

use crate::frames::{FrameTrajectory, FunctionFrame};
use crate::geometry::{
    rotation_about_axis, smallest_component_basis, PoseSE3, Rotation3, UnitVec3, Vec3,
};
use crate::trajopt::{point_box_distance, Obstacle, OptimSolution};
use thiserror::Error;

pub const DEFAULT_STANDOFF: f64 = 0.10;
pub const DEFAULT_ROLL_SAMPLES: usize = 8;
/// Half the opening of the parallel-jaw proxy used when screening grasps.
pub const FINGER_HALF_WIDTH: f64 = 0.04;
/// Samples along the approach corridor, grasp to pregrasp inclusive.
const CORRIDOR_SAMPLES: usize = 6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExecutionError {
    #[error("frame trajectory is empty")]
    LengthZero,
    #[error("invalid grasp spec: {0}")]
    InvalidGrasp(String),
    #[error("all {candidates} grasp candidates collide with obstacles")]
    GraspInfeasible { candidates: usize },
    #[error("solution did not converge")]
    NotConverged,
    #[error("no plans to chain")]
    EmptyChain,
    #[error("plan {index}: {source}")]
    Plan {
        index: usize,
        #[source]
        source: Box<ExecutionError>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GraspSpec {
    /// Grasp point on the tool at step 0, target frame.
    pub grasp_point: Vec3,
    /// Direction from the grasp toward the pregrasp; the gripper points along its negation.
    pub approach: UnitVec3,
    pub standoff: f64,
    pub roll_samples: usize,
}

impl GraspSpec {
    pub fn new(grasp_point: Vec3, approach: UnitVec3) -> Self {
        GraspSpec {
            grasp_point,
            approach,
            standoff: DEFAULT_STANDOFF,
            roll_samples: DEFAULT_ROLL_SAMPLES,
        }
    }

    pub fn validate(&self) -> Result<(), ExecutionError> {
        if !(self.standoff >= 0.0 && self.standoff.is_finite()) {
            return Err(ExecutionError::InvalidGrasp(format!(
                "standoff {}",
                self.standoff
            )));
        }
        if self.roll_samples == 0 {
            return Err(ExecutionError::InvalidGrasp(
                "roll_samples must be at least 1".into(),
            ));
        }
        if !self.grasp_point.iter().all(|c| c.is_finite()) {
            return Err(ExecutionError::InvalidGrasp(
                "non-finite grasp point".into(),
            ));
        }
        Ok(())
    }

    /// Pregrasp for a grasp pose: the same orientation, backed off along `approach`.
    pub fn pregrasp_for(&self, grasp: &PoseSE3) -> PoseSE3 {
        PoseSE3::new(
            grasp.rotation,
            grasp.translation + self.approach.as_vec() * self.standoff,
        )
    }
}

/// Candidate grasp orientations about `approach`. Roll 0 puts the gripper
/// x-axis along the tool's function axis projected onto the grasp plane.
pub fn sample_grasp_poses(spec: &GraspSpec, tool_frame0: &FunctionFrame) -> Vec<PoseSE3> {
    let z = -spec.approach.into_inner();
    let v = tool_frame0.function_axis().into_inner();
    let mut x0 = v - z * z.dot(&v);
    if x0.norm() < 1e-6 {
        let e = smallest_component_basis(&z);
        x0 = e - z * z.dot(&e);
    }
    let x0 = x0.normalize();
    let base =
        Rotation3::from_columns(&x0, &z.cross(&x0), &z).expect("orthonormal by construction");
    let zu = UnitVec3::new_unchecked(z);
    let n = spec.roll_samples;
    (0..n)
        .map(|k| {
            let roll = rotation_about_axis(&zu, std::f64::consts::TAU * k as f64 / n as f64);
            PoseSE3::new(roll * base, spec.grasp_point)
        })
        .collect()
}

/// Points standing in for the gripper: the approach corridor and both fingertips.
pub fn gripper_proxy_points(spec: &GraspSpec, grasp: &PoseSE3) -> Vec<Vec3> {
    let a = spec.approach.into_inner();
    let mut pts: Vec<Vec3> = (0..CORRIDOR_SAMPLES)
        .map(|i| grasp.translation + a * (spec.standoff * i as f64 / (CORRIDOR_SAMPLES - 1) as f64))
        .skip(1)
        .collect();
    let x = grasp.rotation.column(0);
    pts.push(grasp.translation + x * FINGER_HALF_WIDTH);
    pts.push(grasp.translation - x * FINGER_HALF_WIDTH);
    pts
}

/// A selected grasp with its pregrasp, both in the target frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GraspChoice {
    pub roll_index: usize,
    pub grasp: PoseSE3,
    pub pregrasp: PoseSE3,
}

/// First roll candidate whose gripper proxy keeps `d_min` from every obstacle.
pub fn select_grasp(
    spec: &GraspSpec,
    tool_frame0: &FunctionFrame,
    obstacles: &[Obstacle],
    d_min: f64,
) -> Result<GraspChoice, ExecutionError> {
    spec.validate()?;
    let candidates = sample_grasp_poses(spec, tool_frame0);
    candidates
        .iter()
        .enumerate()
        .find(|(_, g)| {
            gripper_proxy_points(spec, g)
                .iter()
                .all(|p| obstacles.iter().all(|o| point_box_distance(p, o) >= d_min))
        })
        .map(|(roll_index, g)| GraspChoice {
            roll_index,
            grasp: *g,
            pregrasp: spec.pregrasp_for(g),
        })
        .ok_or(ExecutionError::GraspInfeasible {
            candidates: candidates.len(),
        })
}

#[derive(Debug, Clone, PartialEq)]
pub struct EndEffectorTrajectory {
    /// One pose per timestep, robot base frame.
    pub actions: Vec<PoseSE3>,
    pub dt: f64,
    pub pregrasp: PoseSE3,
    pub grasp: PoseSE3,
}

impl EndEffectorTrajectory {
    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }
}

/// Rigidly attaches the gripper to the tool at step 0 and carries it along
/// the frame trajectory: `a_t = B · F_t · F_0⁻¹ · G`.
pub fn to_end_effector(
    frames: &FrameTrajectory,
    grasp: &PoseSE3,
    pregrasp: &PoseSE3,
    target_in_base: &PoseSE3,
) -> Result<EndEffectorTrajectory, ExecutionError> {
    let first = frames.frames.first().ok_or(ExecutionError::LengthZero)?;
    let g_rel = first.pose().inverse().compose(grasp);
    let actions = frames
        .frames
        .iter()
        .map(|f| target_in_base.compose(&f.pose()).compose(&g_rel))
        .collect();
    Ok(EndEffectorTrajectory {
        actions,
        dt: frames.dt,
        pregrasp: target_in_base.compose(pregrasp),
        grasp: target_in_base.compose(grasp),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainedPlan {
    pub trajectories: Vec<EndEffectorTrajectory>,
    /// Plan index of each trajectory, in execution order.
    pub manifest: Vec<usize>,
}

/// Maps each solved plan to end-effector actions in order, using the first
/// roll candidate of its grasp. Stops at the first unconverged plan.
pub fn chain_plans(
    plans: &[(OptimSolution, GraspSpec, PoseSE3)],
) -> Result<ChainedPlan, ExecutionError> {
    if plans.is_empty() {
        return Err(ExecutionError::EmptyChain);
    }
    let mut out = ChainedPlan {
        trajectories: Vec::with_capacity(plans.len()),
        manifest: Vec::with_capacity(plans.len()),
    };
    for (index, (solution, spec, target_in_base)) in plans.iter().enumerate() {
        let wrap = |e| ExecutionError::Plan {
            index,
            source: Box::new(e),
        };
        if !solution.converged {
            return Err(wrap(ExecutionError::NotConverged));
        }
        let frame0 = solution
            .trajectory
            .frames
            .first()
            .ok_or(wrap(ExecutionError::LengthZero))?;
        let choice = select_grasp(spec, frame0, &[], 0.0).map_err(wrap)?;
        let traj = to_end_effector(
            &solution.trajectory,
            &choice.grasp,
            &choice.pregrasp,
            target_in_base,
        )
        .map_err(wrap)?;
        out.trajectories.push(traj);
        out.manifest.push(index);
    }
    Ok(out)
}
