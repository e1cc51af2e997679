//! Function-frame trajectory optimization.
//!
//! The decision variables are one pose per timestep. The cost tracks a
//! reference trajectory in position and in rotation (through the SO(3)
//! logarithm), skipping an initial fraction of the horizon. The first frame
//! and the function keyframe are pinned; velocity and obstacle clearance are
//! inequality constraints handled by [`solver`].

mod collision;
mod solver;
mod warp;

pub use collision::{
    farthest_point_sample, point_box_distance, signed_distance_with_gradient, tool_proxy_points,
    Obstacle, PROXY_CLOUD_SAMPLES,
};
pub use solver::{solve, TraceRecord};
pub use warp::{alignment_angle, tool_length_ratio, warp_reference, AlignAxis, WarpSpec};

use crate::frames::{FrameTrajectory, FunctionFrame};
use crate::geometry::{exp_so3, left_jacobian_inverse, log_so3, PoseSE3, Vec3};
use nalgebra::Vector6;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OptimError {
    #[error("trajectory length {got} does not match reference length {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("boundary frames cannot be connected within the limits: {0}")]
    InfeasibleBoundary(String),
    #[error("solver diverged after {} outer iterations", trace.len())]
    SolverDiverged { trace: Vec<TraceRecord> },
    #[error("function point projects to zero length on the alignment plane")]
    DegenerateProjection,
    #[error("invalid problem: {0}")]
    InvalidProblem(String),
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct OptimConfig {
    /// Leading fraction of the horizon excluded from the tracking cost.
    pub relax_fraction: f64,
    /// Translational speed limit of the function point, m/s.
    pub v_max: f64,
    /// Angular speed limit, rad/s.
    pub omega_max: f64,
    /// Minimum clearance between proxy points and obstacles, m.
    pub d_min: f64,
    pub rot_weight: f64,
    pub constraint_tol: f64,
    pub grad_tol: f64,
    pub max_outer: usize,
    pub max_inner: usize,
}

impl Default for OptimConfig {
    fn default() -> Self {
        OptimConfig {
            relax_fraction: 0.30,
            v_max: 0.5,
            omega_max: 2.0,
            d_min: 0.01,
            rot_weight: 1.0,
            constraint_tol: 1e-6,
            grad_tol: 1e-6,
            max_outer: 50,
            max_inner: 100,
        }
    }
}

impl OptimConfig {
    pub fn validate(&self) -> Result<(), OptimError> {
        let ok = (0.0..1.0).contains(&self.relax_fraction)
            && self.v_max > 0.0
            && self.omega_max > 0.0
            && self.d_min >= 0.0
            && self.rot_weight >= 0.0
            && self.constraint_tol > 0.0
            && self.grad_tol > 0.0
            && self.max_outer >= 1
            && self.max_inner >= 1;
        if ok {
            Ok(())
        } else {
            Err(OptimError::InvalidProblem(format!(
                "invalid config {self:?}"
            )))
        }
    }
}

/// First timestep that contributes to the tracking cost: `ceil(f · N)`.
pub fn relaxation_cutoff(relax_fraction: f64, n: usize) -> usize {
    // The small bias keeps products such as 0.3 · 10 from rounding up.
    ((relax_fraction * n as f64) - 1e-9).ceil().max(0.0) as usize
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimProblem {
    pub reference: FrameTrajectory,
    pub pi_init: FunctionFrame,
    pub pi_func: FunctionFrame,
    pub t_func: usize,
    pub obstacles: Vec<Obstacle>,
    /// Tool sample points in the tool's function-frame coordinates.
    pub tool_proxy_points: Vec<Vec3>,
    pub config: OptimConfig,
}

impl OptimProblem {
    pub fn n_steps(&self) -> usize {
        self.reference.len()
    }

    pub fn dt(&self) -> f64 {
        self.reference.dt
    }

    pub fn is_pinned(&self, t: usize) -> bool {
        t == 0 || t == self.t_func
    }

    pub fn cutoff(&self) -> usize {
        relaxation_cutoff(self.config.relax_fraction, self.n_steps())
    }

    pub fn validate(&self) -> Result<(), OptimError> {
        self.config.validate()?;
        let n = self.n_steps();
        // The keyframe may be the last step here; the stricter keyframe-plan
        // ordering is enforced where plans are built.
        if n < 2 || self.t_func == 0 || self.t_func >= n {
            return Err(OptimError::InvalidProblem(format!(
                "t_func={} outside 1..{n}",
                self.t_func
            )));
        }
        if !(self.dt() > 0.0 && self.dt().is_finite()) {
            return Err(OptimError::InvalidProblem(format!("dt={}", self.dt())));
        }
        Ok(())
    }

    /// Frames as poses with the boundary frames substituted.
    fn pinned_pose(&self, t: usize) -> Option<PoseSE3> {
        if t == 0 {
            Some(self.pi_init.pose())
        } else if t == self.t_func {
            Some(self.pi_func.pose())
        } else {
            None
        }
    }
}

fn check_length(traj: &FrameTrajectory, problem: &OptimProblem) -> Result<(), OptimError> {
    if traj.len() != problem.n_steps() {
        return Err(OptimError::LengthMismatch {
            expected: problem.n_steps(),
            got: traj.len(),
        });
    }
    Ok(())
}

fn cost_of_poses(poses: &[PoseSE3], problem: &OptimProblem) -> f64 {
    let w = problem.config.rot_weight;
    poses
        .iter()
        .zip(&problem.reference.frames)
        .skip(problem.cutoff())
        .map(|(p, r)| {
            let dp = (p.translation - r.origin).norm_squared();
            let dr = log_so3(&(p.rotation * r.basis.transpose())).norm_squared();
            dp + w * dr
        })
        .sum()
}

/// Tracking cost of `traj` against the problem's reference.
pub fn evaluate_cost(traj: &FrameTrajectory, problem: &OptimProblem) -> Result<f64, OptimError> {
    check_length(traj, problem)?;
    let poses: Vec<PoseSE3> = traj.frames.iter().map(|f| f.pose()).collect();
    Ok(cost_of_poses(&poses, problem))
}

/// Per-timestep gradient `[∂/∂p; ∂/∂ω]` of the tracking cost under the
/// perturbation `p ← p + δp`, `R ← exp(δω) R`. Pinned steps get zeros.
pub fn cost_gradient(
    traj: &FrameTrajectory,
    problem: &OptimProblem,
) -> Result<Vec<Vector6<f64>>, OptimError> {
    check_length(traj, problem)?;
    let w = problem.config.rot_weight;
    let cutoff = problem.cutoff();
    Ok(traj
        .frames
        .iter()
        .zip(&problem.reference.frames)
        .enumerate()
        .map(|(t, (f, r))| {
            let mut g = Vector6::zeros();
            if t < cutoff || problem.is_pinned(t) {
                return g;
            }
            let dp = (f.origin - r.origin) * 2.0;
            let phi = log_so3(&(f.basis * r.basis.transpose()));
            let dw = left_jacobian_inverse(&phi).transpose() * phi * (2.0 * w);
            g.fixed_rows_mut::<3>(0).copy_from(&dp);
            g.fixed_rows_mut::<3>(3).copy_from(&dw);
            g
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradientCheck {
    /// `‖g_analytic − g_fd‖∞ / max(‖g_analytic‖∞, ‖g_fd‖∞)`.
    pub max_relative_error: f64,
    pub analytic_norm: f64,
    pub fd_norm: f64,
}

/// Step used for the central differences in [`check_gradient`].
pub const FD_STEP: f64 = 1e-6;

/// Compares [`cost_gradient`] with central finite differences taken through
/// the same retraction, over the free timesteps.
pub fn check_gradient(
    problem: &OptimProblem,
    traj: &FrameTrajectory,
) -> Result<GradientCheck, OptimError> {
    let analytic = cost_gradient(traj, problem)?;
    let base: Vec<PoseSE3> = traj.frames.iter().map(|f| f.pose()).collect();
    let mut poses = base.clone();
    let mut max_abs_err: f64 = 0.0;
    let mut a_inf: f64 = 0.0;
    let mut f_inf: f64 = 0.0;
    let mut a_sq = 0.0;
    let mut f_sq = 0.0;
    for t in (0..base.len()).filter(|t| !problem.is_pinned(*t)) {
        for k in 0..6 {
            let mut delta = Vector6::zeros();
            delta[k] = FD_STEP;
            poses[t] = retract(&base[t], &delta);
            let plus = cost_of_poses(&poses, problem);
            poses[t] = retract(&base[t], &(-delta));
            let minus = cost_of_poses(&poses, problem);
            poses[t] = base[t];
            let fd = (plus - minus) / (2.0 * FD_STEP);
            let an = analytic[t][k];
            max_abs_err = max_abs_err.max((fd - an).abs());
            a_inf = a_inf.max(an.abs());
            f_inf = f_inf.max(fd.abs());
            a_sq += an * an;
            f_sq += fd * fd;
        }
    }
    let scale = a_inf.max(f_inf);
    Ok(GradientCheck {
        max_relative_error: if scale > 0.0 {
            max_abs_err / scale
        } else {
            0.0
        },
        analytic_norm: f64::sqrt(a_sq),
        fd_norm: f64::sqrt(f_sq),
    })
}

/// `p ← p + δp`, `R ← exp(δω) R`.
pub(crate) fn retract(pose: &PoseSE3, delta: &Vector6<f64>) -> PoseSE3 {
    let dp = Vec3::new(delta[0], delta[1], delta[2]);
    let dw = Vec3::new(delta[3], delta[4], delta[5]);
    PoseSE3::new(exp_so3(&dw) * pose.rotation, pose.translation + dp)
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ConstraintReport {
    /// Largest `‖p_{t+1} − p_t‖ − v_max·dt`, m.
    pub velocity: f64,
    /// Largest `‖log(R_{t+1} R_tᵀ)‖ − ω_max·dt`, rad.
    pub angular: f64,
    /// Largest `d_min − distance`, m.
    pub clearance: f64,
    /// Distance of the first frame from `pi_init` (m, rad).
    pub init_boundary: (f64, f64),
    /// Distance of the keyframe from `pi_func` (m, rad).
    pub func_boundary: (f64, f64),
}

impl ConstraintReport {
    /// Largest violation over all constraints; zero when all hold.
    pub fn max_violation(&self) -> f64 {
        [
            self.velocity,
            self.angular,
            self.clearance,
            self.init_boundary.0,
            self.init_boundary.1,
            self.func_boundary.0,
            self.func_boundary.1,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }

    /// Smallest proxy-to-obstacle distance implied by `clearance`.
    pub fn min_clearance(&self, d_min: f64) -> f64 {
        d_min - self.clearance
    }
}

/// Post-hoc constraint evaluation of a frame trajectory.
pub fn check_constraints(
    traj: &FrameTrajectory,
    problem: &OptimProblem,
) -> Result<ConstraintReport, OptimError> {
    check_length(traj, problem)?;
    let cfg = &problem.config;
    let dt = problem.dt();
    let poses: Vec<PoseSE3> = traj.frames.iter().map(|f| f.pose()).collect();
    let mut rep = ConstraintReport {
        velocity: f64::NEG_INFINITY,
        angular: f64::NEG_INFINITY,
        clearance: f64::NEG_INFINITY,
        init_boundary: poses[0].distance_to(&problem.pi_init.pose()),
        func_boundary: poses[problem.t_func].distance_to(&problem.pi_func.pose()),
    };
    for w in poses.windows(2) {
        rep.velocity = rep
            .velocity
            .max((w[1].translation - w[0].translation).norm() - cfg.v_max * dt);
        rep.angular = rep
            .angular
            .max(w[1].rotation.angle_to(&w[0].rotation) - cfg.omega_max * dt);
    }
    for pose in &poses {
        for x in &problem.tool_proxy_points {
            let world = pose.transform_point(x);
            for ob in &problem.obstacles {
                rep.clearance = rep
                    .clearance
                    .max(cfg.d_min - point_box_distance(&world, ob));
            }
        }
    }
    Ok(rep)
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimSolution {
    pub trajectory: FrameTrajectory,
    pub final_cost: f64,
    pub max_constraint_violation: f64,
    /// Total inner (Gauss-Newton) iterations.
    pub iterations: usize,
    pub outer_iterations: usize,
    pub converged: bool,
    pub constraints: ConstraintReport,
    pub trace: Vec<TraceRecord>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::UnitVec3;

    fn frame(origin: Vec3, w: Vec3) -> FunctionFrame {
        FunctionFrame {
            origin,
            basis: exp_so3(&w),
            grasp_vector: UnitVec3::new_unchecked(exp_so3(&w) * Vec3::y()),
        }
    }

    fn straight_problem(n: usize) -> OptimProblem {
        let frames: Vec<FunctionFrame> = (0..n)
            .map(|t| frame(Vec3::new(0.01 * t as f64, 0.0, 0.1), Vec3::zeros()))
            .collect();
        OptimProblem {
            pi_init: frames[0],
            pi_func: frames[n / 2],
            t_func: n / 2,
            reference: FrameTrajectory { frames, dt: 0.1 },
            obstacles: vec![],
            tool_proxy_points: vec![],
            config: OptimConfig::default(),
        }
    }

    #[test]
    fn cutoff_arithmetic() {
        assert_eq!(relaxation_cutoff(0.3, 10), 3);
        assert_eq!(relaxation_cutoff(0.3, 11), 4);
        assert_eq!(relaxation_cutoff(0.0, 10), 0);
        assert_eq!(relaxation_cutoff(0.3, 100), 30);
    }

    #[test]
    fn cost_examples() {
        let p = straight_problem(10);
        assert_eq!(evaluate_cost(&p.reference, &p).unwrap(), 0.0);

        let mut t = p.reference.clone();
        t.frames[2].origin.y += 0.1;
        assert_eq!(evaluate_cost(&t, &p).unwrap(), 0.0);

        let mut t = p.reference.clone();
        t.frames[5].origin.y += 0.1;
        approx::assert_relative_eq!(evaluate_cost(&t, &p).unwrap(), 0.01, epsilon = 1e-15);

        let short = FrameTrajectory {
            frames: p.reference.frames[..3].to_vec(),
            dt: 0.1,
        };
        assert!(matches!(
            evaluate_cost(&short, &p),
            Err(OptimError::LengthMismatch { .. })
        ));
    }

    #[test]
    fn gradient_zero_at_reference_and_decoupled() {
        let mut p = straight_problem(10);
        let g = cost_gradient(&p.reference, &p).unwrap();
        assert!(g.iter().all(|v| v.norm() <= 1e-9));

        p.config.rot_weight = 0.0;
        let mut t = p.reference.clone();
        for f in t.frames.iter_mut() {
            f.basis = exp_so3(&Vec3::new(0.2, 0.1, -0.3)) * f.basis;
            f.origin.z += 0.05;
        }
        for v in cost_gradient(&t, &p).unwrap() {
            assert_eq!(v.fixed_rows::<3>(3).norm(), 0.0);
        }
    }

    #[test]
    fn gradient_check_on_perturbed_trajectory() {
        let p = straight_problem(12);
        let mut t = p.reference.clone();
        for (i, f) in t.frames.iter_mut().enumerate() {
            let s = i as f64;
            f.basis = exp_so3(&Vec3::new(0.3 * s.sin(), 0.2, -0.4 * s.cos())) * f.basis;
            f.origin += Vec3::new(0.02 * s.cos(), -0.03, 0.01 * s);
        }
        let chk = check_gradient(&p, &t).unwrap();
        assert!(chk.max_relative_error <= 1e-4, "{chk:?}");
        assert!(chk.analytic_norm > 0.0);
    }

    #[test]
    fn constraint_report_on_reference() {
        let mut p = straight_problem(10);
        p.obstacles
            .push(Obstacle::new(Vec3::new(0.0, 0.0, 0.0), Vec3::new(0.05, 0.05, 0.05)).unwrap());
        p.tool_proxy_points.push(Vec3::zeros());
        let rep = check_constraints(&p.reference, &p).unwrap();
        // Points sit 5 cm above the box top, well clear of d_min.
        approx::assert_relative_eq!(rep.min_clearance(p.config.d_min), 0.05, epsilon = 1e-12);
        assert_eq!(rep.max_violation(), 0.0);
    }
}
