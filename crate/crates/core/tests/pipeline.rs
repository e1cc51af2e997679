mod common;

use common::identical_layout;
use toolxfer::alignment::{AlignmentContext, AlignmentResult, EvaluatorVerdict, Primitive};
use toolxfer::execution::ExecutionError;
use toolxfer::frames::detect_target_frame;
use toolxfer::geometry::{UnitVec3, Vec3};
use toolxfer::pipeline::{run_pipeline, run_pipeline_with, Stage, StageError};
use toolxfer::synth::{generate_scenario, TaskKind, Variation};
use toolxfer::trajopt::Obstacle;

#[test]
fn identical_tool_and_layout_reproduces_demo() {
    for kind in TaskKind::ALL {
        let s = identical_layout(kind, 11);
        let out = run_pipeline(&s).unwrap();
        assert!(out.report.warp_angle.abs() < 1e-9);
        assert!(out.solution.converged);
        let rmse = out.solution.trajectory.origin_rmse(&out.demo_frames);
        assert!(rmse <= 1e-4, "{kind}: rmse {rmse}");
    }
}

#[test]
fn spatial_alignment_residuals_vanish() {
    for seed in 0..3 {
        let out =
            run_pipeline(&generate_scenario(TaskKind::Cut, Variation::Spatial, seed).scenario)
                .unwrap();
        let a = &out.report.alignment;
        assert!(a.point_residual <= 1e-9, "{}", a.point_residual);
        assert!(a.axis_residual <= 1e-9, "{}", a.axis_residual);
        assert!(a.plane_residual <= 1e-9, "{}", a.plane_residual);
        assert_eq!(a.refinement_iterations, 0);
    }
}

#[test]
fn end_effector_trajectory_covers_every_step() {
    let s = generate_scenario(TaskKind::Pour, Variation::Instance, 4).scenario;
    let out = run_pipeline(&s).unwrap();
    assert_eq!(out.trajectory.len(), s.plan.n_steps());
    assert_eq!(out.solution.trajectory.len(), s.plan.n_steps());
    let stages: Vec<Stage> = out.report.timings.iter().map(|t| t.stage).collect();
    assert_eq!(
        stages,
        [
            Stage::TargetFrame,
            Stage::Keypoints,
            Stage::Frames,
            Stage::Warp,
            Stage::Alignment,
            Stage::Optimization,
            Stage::Execution
        ]
    );
    let json = serde_json::to_string(&out.report).unwrap();
    assert!(json.contains("\"stage\":\"target_frame\""));
}

#[test]
fn blocked_grasp_corridor_fails_at_execution() {
    let mut s = generate_scenario(TaskKind::Cut, Variation::Spatial, 2).scenario;
    let target = detect_target_frame(&s.target_cloud, &s.up_hint).unwrap();
    let kp = s.test_keypoints.transformed(&target.pose.inverse());
    let along = kp.grasp - kp.func;
    let side = UnitVec3::new_normalize(Vec3::z().cross(&along)).unwrap();
    s.grasp.approach = Some(side);
    let block = kp.grasp + side.as_vec() * 0.07;
    s.obstacles = vec![Obstacle::new(block, Vec3::new(0.015, 0.015, 0.015)).unwrap()];

    let err = run_pipeline(&s).unwrap_err();
    assert_eq!(err.stage, Stage::Execution);
    assert!(matches!(
        err.source,
        StageError::Execution(ExecutionError::GraspInfeasible { .. })
    ));
    assert_eq!(err.tag(), "GraspInfeasible");
}

#[test]
fn rejecting_evaluator_exhausts_refinement() {
    let s = generate_scenario(TaskKind::Brush, Variation::Category, 1).scenario;
    let never = |_: &AlignmentResult, _: &AlignmentContext| {
        EvaluatorVerdict::reject(vec![Primitive::Point], "never")
    };
    let err = run_pipeline_with(&s, &never).unwrap_err();
    assert_eq!(err.stage, Stage::Alignment);
    assert_eq!(err.tag(), "RefinementExhausted");
}

#[test]
fn demo_camera_choice_does_not_change_the_result() {
    let s = generate_scenario(TaskKind::Scoop, Variation::Spatial, 5).scenario;
    let a = run_pipeline(&s).unwrap();

    // Pre-express the demo in its target frame and drop the demo cloud.
    let mut t = s.clone();
    let demo_target = detect_target_frame(
        s.demo_target_cloud.as_ref().unwrap(),
        &s.demo_up_hint.unwrap(),
    )
    .unwrap();
    t.demo = s.demo.transformed(&demo_target.pose.inverse());
    t.demo_target_cloud = None;
    t.demo_up_hint = None;
    let b = run_pipeline(&t).unwrap();
    assert!(a.solution.trajectory.origin_rmse(&b.solution.trajectory) < 1e-9);
}
