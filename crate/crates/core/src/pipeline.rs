//! End-to-end transfer: target frame, keypoints, frames, warp, alignment,
//! optimization and end-effector mapping.

use std::fmt;
use std::time::Instant;

use serde::Serialize;
use thiserror::Error;

use crate::alignment::{
    initial_alignment, refine_alignment, AlignError, AlignmentContext, AlignmentResult,
    GeometricEvaluator, StateEvaluator,
};
use crate::execution::{
    select_grasp, to_end_effector, EndEffectorTrajectory, ExecutionError, GraspSpec,
};
use crate::frames::{
    build_frame_trajectory_with_hint, build_function_frame_with_hint, detect_target_frame,
    FrameError, FrameTrajectory,
};
use crate::geometry::{PoseSE3, UnitVec3};
use crate::keypoints::to_target_frame;
use crate::scenario::Scenario;
use crate::trajopt::{
    alignment_angle, solve, tool_proxy_points, warp_reference, OptimError, OptimProblem,
    OptimSolution, TraceRecord,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    TargetFrame,
    Keypoints,
    Frames,
    Warp,
    Alignment,
    Optimization,
    Execution,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Stage::TargetFrame => "target_frame",
            Stage::Keypoints => "keypoints",
            Stage::Frames => "frames",
            Stage::Warp => "warp",
            Stage::Alignment => "alignment",
            Stage::Optimization => "optimization",
            Stage::Execution => "execution",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Error)]
pub enum StageError {
    #[error(transparent)]
    Frame(#[from] FrameError),
    #[error(transparent)]
    Align(#[from] AlignError),
    #[error(transparent)]
    Optim(#[from] OptimError),
    #[error(transparent)]
    Execution(#[from] ExecutionError),
}

#[derive(Debug, Error)]
#[error("{stage} stage failed")]
pub struct PipelineError {
    pub stage: Stage,
    #[source]
    pub source: StageError,
}

impl PipelineError {
    fn at(stage: Stage) -> impl FnOnce(StageError) -> PipelineError {
        move |source| PipelineError { stage, source }
    }

    /// Short failure tag used in benchmark tables.
    pub fn tag(&self) -> &'static str {
        match &self.source {
            StageError::Frame(FrameError::DegenerateKeypoints(_)) => "DegenerateKeypoints",
            StageError::Frame(_) => "DegenerateInput",
            StageError::Align(AlignError::RefinementExhausted { .. }) => "RefinementExhausted",
            StageError::Align(AlignError::InvalidConfig) => "InvalidConfig",
            StageError::Optim(OptimError::InfeasibleBoundary(_)) => "InfeasibleBoundary",
            StageError::Optim(OptimError::SolverDiverged { .. }) => "SolverDiverged",
            StageError::Optim(OptimError::DegenerateProjection) => "DegenerateProjection",
            StageError::Optim(_) => "InvalidProblem",
            StageError::Execution(ExecutionError::GraspInfeasible { .. }) => "GraspInfeasible",
            StageError::Execution(_) => "ExecutionError",
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct StageTiming {
    pub stage: Stage,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AlignmentSummary {
    pub point_residual: f64,
    pub axis_residual: f64,
    pub plane_residual: f64,
    pub refinement_iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolverSummary {
    pub converged: bool,
    pub final_cost: f64,
    pub max_constraint_violation: f64,
    pub iterations: usize,
    pub outer_iterations: usize,
    pub max_velocity_excess: f64,
    pub max_angular_excess: f64,
    pub min_clearance: Option<f64>,
    pub trace: Vec<TraceRecord>,
}

#[derive(Debug, Clone, Serialize)]
pub struct PipelineReport {
    pub timings: Vec<StageTiming>,
    pub warp_angle: f64,
    pub alignment: AlignmentSummary,
    pub solver: SolverSummary,
    pub relaxation_cutoff: usize,
    pub grasp_roll_index: usize,
}

#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub trajectory: EndEffectorTrajectory,
    /// Demo function frames in the target frame, before warping.
    pub demo_frames: FrameTrajectory,
    pub reference: FrameTrajectory,
    pub alignment: AlignmentResult,
    pub problem: OptimProblem,
    pub solution: OptimSolution,
    pub report: PipelineReport,
}

struct Clock {
    timings: Vec<StageTiming>,
    last: Instant,
}

impl Clock {
    fn new() -> Self {
        Clock {
            timings: Vec::new(),
            last: Instant::now(),
        }
    }

    fn lap(&mut self, stage: Stage) {
        let now = Instant::now();
        self.timings.push(StageTiming {
            stage,
            seconds: (now - self.last).as_secs_f64(),
        });
        self.last = now;
    }
}

/// Runs the full transfer with the default geometric evaluator.
pub fn run_pipeline(s: &Scenario) -> Result<PipelineOutput, PipelineError> {
    run_pipeline_with(s, &GeometricEvaluator::default())
}

pub fn run_pipeline_with(
    s: &Scenario,
    evaluator: &dyn StateEvaluator,
) -> Result<PipelineOutput, PipelineError> {
    let mut clock = Clock::new();

    let target = detect_target_frame(&s.target_cloud, &s.up_hint)
        .map_err(|e| PipelineError::at(Stage::TargetFrame)(e.into()))?;
    let demo_target = match &s.demo_target_cloud {
        Some(cloud) => {
            detect_target_frame(cloud, s.demo_up_hint.as_ref().unwrap_or(&s.up_hint))
                .map_err(|e| PipelineError::at(Stage::TargetFrame)(e.into()))?
                .pose
        }
        None => PoseSE3::identity(),
    };
    clock.lap(Stage::TargetFrame);

    let to_target = target.pose.inverse();
    let demo_kp = to_target_frame(&s.demo, &demo_target);
    let test_kp = s.test_keypoints.transformed(&to_target);
    let test_cloud: Vec<_> = s
        .test_cloud
        .iter()
        .map(|p| to_target.transform_point(p))
        .collect();
    let target_cloud: Vec<_> = s
        .target_cloud
        .iter()
        .map(|p| to_target.transform_point(p))
        .collect();
    clock.lap(Stage::Keypoints);

    let up = UnitVec3::Z;
    let demo_frames = build_frame_trajectory_with_hint(&demo_kp, Some(&up))
        .map_err(|e| PipelineError::at(Stage::Frames)(e.into()))?;
    let test_frame0 = build_function_frame_with_hint(&test_kp, Some(&up))
        .map_err(|e| PipelineError::at(Stage::Frames)(e.into()))?;
    clock.lap(Stage::Frames);

    let demo_func0 = demo_kp.steps[0].func;
    let warp_angle = alignment_angle(&demo_func0, &test_kp.func, s.warp.align_axis)
        .map_err(|e| PipelineError::at(Stage::Warp)(e.into()))?;
    let reference = warp_reference(&demo_frames, &demo_func0, &test_kp.func, &s.warp)
        .map_err(|e| PipelineError::at(Stage::Warp)(e.into()))?;
    clock.lap(Stage::Warp);

    let t_func = s.plan.t_func();
    let ctx = AlignmentContext {
        test_frame0,
        demo_frame_tf: reference.frames[t_func],
        test_cloud: test_cloud.clone(),
        target_cloud,
    };
    let alignment = refine_alignment(
        initial_alignment(&test_frame0, &reference.frames[t_func]),
        evaluator,
        &s.refine,
        &ctx,
    )
    .map_err(|e| PipelineError::at(Stage::Alignment)(e.into()))?;
    clock.lap(Stage::Alignment);

    let problem = OptimProblem {
        pi_init: test_frame0,
        pi_func: alignment.aligned_frame,
        t_func,
        obstacles: s.obstacles.clone(),
        tool_proxy_points: tool_proxy_points(&test_kp, &test_cloud, &test_frame0),
        config: s.optim,
        reference: reference.clone(),
    };
    let solution = solve(&problem).map_err(|e| PipelineError::at(Stage::Optimization)(e.into()))?;
    clock.lap(Stage::Optimization);

    let spec = GraspSpec {
        grasp_point: s.grasp.grasp_point.unwrap_or(test_kp.grasp),
        approach: s.grasp.approach.unwrap_or(up),
        standoff: s.grasp.standoff,
        roll_samples: s.grasp.roll_samples,
    };
    let choice = select_grasp(&spec, &test_frame0, &s.obstacles, s.optim.d_min)
        .map_err(|e| PipelineError::at(Stage::Execution)(e.into()))?;
    let trajectory = to_end_effector(
        &solution.trajectory,
        &choice.grasp,
        &choice.pregrasp,
        &s.target_in_base,
    )
    .map_err(|e| PipelineError::at(Stage::Execution)(e.into()))?;
    clock.lap(Stage::Execution);

    let res = &alignment.primitive_report;
    let c = &solution.constraints;
    let report = PipelineReport {
        timings: clock.timings,
        warp_angle,
        alignment: AlignmentSummary {
            point_residual: res.point,
            axis_residual: res.axis,
            plane_residual: res.plane,
            refinement_iterations: alignment.refinement_iterations,
        },
        solver: SolverSummary {
            converged: solution.converged,
            final_cost: solution.final_cost,
            max_constraint_violation: solution.max_constraint_violation,
            iterations: solution.iterations,
            outer_iterations: solution.outer_iterations,
            max_velocity_excess: c.velocity,
            max_angular_excess: c.angular,
            min_clearance: (!s.obstacles.is_empty()).then(|| c.min_clearance(s.optim.d_min)),
            trace: solution.trace.clone(),
        },
        relaxation_cutoff: problem.cutoff(),
        grasp_roll_index: choice.roll_index,
    };
    Ok(PipelineOutput {
        trajectory,
        demo_frames,
        reference,
        alignment,
        problem,
        solution,
        report,
    })
}
