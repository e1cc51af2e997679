//! Function-centric tool manipulation transfer.
//!
//! A demonstrated keypoint trajectory is turned into a trajectory of function
//! frames, a novel tool is aligned to the demonstrated keyframe, and a
//! constrained optimizer produces a target-relative trajectory that is then
//! mapped to end-effector poses.

pub mod alignment;
pub mod benchmark;
pub mod execution;
pub mod frames;
pub mod geometry;
pub mod keypoints;
pub mod metrics;
pub mod pipeline;
pub mod scenario;
pub mod synth;
pub mod trajopt;

pub use alignment::{
    AlignError, AlignmentResult, GeometricEvaluator, RefinementConfig, StateEvaluator,
};
pub use execution::{EndEffectorTrajectory, ExecutionError, GraspSpec};
pub use frames::{FrameError, FrameTrajectory, FunctionFrame, TargetFrame};
pub use geometry::{GeometryError, Mat3, PoseSE3, Rotation3, UnitVec3, Vec3};
pub use keypoints::{FunctionPlan, FunctionalKeypoints, KeypointError, KeypointTrajectory};
pub use pipeline::{run_pipeline, PipelineError, PipelineOutput, PipelineReport, Stage};
pub use scenario::{IoError, Scenario};
pub use synth::{generate_scenario, TaskKind, Variation};
pub use trajopt::{Obstacle, OptimConfig, OptimError, OptimProblem, OptimSolution, WarpSpec};
