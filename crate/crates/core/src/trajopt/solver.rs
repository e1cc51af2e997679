//! Augmented-Lagrangian solver on the product of SE(3) timesteps.
//!
//! Pinned timesteps (first frame and function keyframe) are removed from the
//! variable set. Every inequality `g(x) ≤ 0` enters the merit through the
//! Powell–Hestenes–Rockafellar term `ρ/2 · (max(0, g + λ/ρ)² − (λ/ρ)²)`,
//! which makes the whole merit a sum of squares. Each outer iteration runs a
//! damped Gauss-Newton (Levenberg–Marquardt) minimization with per-timestep
//! tangent increments `[δp; δω]` and retraction `R ← exp(δω) R`. All residuals
//! couple at most two consecutive timesteps, so the normal equations are
//! block tridiagonal with 6×6 blocks.

use super::{
    check_constraints, cost_of_poses, retract, signed_distance_with_gradient, OptimError,
    OptimProblem, OptimSolution,
};
use crate::frames::{FrameTrajectory, FunctionFrame};
use crate::geometry::{
    exp_so3, hat, left_jacobian_inverse, log_so3, right_jacobian_inverse, PoseSE3,
};
use nalgebra::{Cholesky, Matrix6, SMatrix, SVector, Vector6};
use std::fmt;

type Jac<const R: usize> = SMatrix<f64, R, 6>;

const INITIAL_PENALTY: f64 = 10.0;
const MAX_PENALTY: f64 = 1e12;
const PENALTY_GROWTH: f64 = 10.0;
/// Required shrink factor of the violation before the penalty is left alone.
const VIOLATION_SHRINK: f64 = 0.25;

/// One outer iteration of the solver.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct TraceRecord {
    pub outer: usize,
    pub inner_iterations: usize,
    /// Merit at the start of the inner solve, with this iteration's multipliers.
    pub merit_before: f64,
    /// Merit at the end of the inner solve, same multipliers.
    pub merit_after: f64,
    pub cost: f64,
    pub max_violation: f64,
    pub penalty: f64,
}

impl fmt::Display for TraceRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "outer={} inner={} merit={:.9e} merit_before={:.9e} cost={:.9e} max_violation={:.3e} penalty={:.1e}",
            self.outer,
            self.inner_iterations,
            self.merit_after,
            self.merit_before,
            self.cost,
            self.max_violation,
            self.penalty
        )
    }
}

struct Multipliers {
    vel: Vec<f64>,
    ang: Vec<f64>,
    col: Vec<f64>,
}

/// Block-tridiagonal normal equations `JᵀJ`, `Jᵀr`.
struct Normal {
    diag: Vec<Matrix6<f64>>,
    /// `off[t]` couples timestep `t` (rows) with `t + 1` (columns).
    off: Vec<Matrix6<f64>>,
    grad: Vec<Vector6<f64>>,
}

impl Normal {
    fn new(n: usize) -> Self {
        Normal {
            diag: vec![Matrix6::zeros(); n],
            off: vec![Matrix6::zeros(); n.saturating_sub(1)],
            grad: vec![Vector6::zeros(); n],
        }
    }

    fn add_unary<const R: usize>(&mut self, t: usize, j: &Jac<R>, r: &SVector<f64, R>) {
        self.diag[t] += j.transpose() * j;
        self.grad[t] += j.transpose() * r;
    }

    /// Residual depending on timesteps `t` and `t + 1`.
    fn add_binary<const R: usize>(
        &mut self,
        t: usize,
        ja: &Jac<R>,
        jb: &Jac<R>,
        r: &SVector<f64, R>,
    ) {
        self.diag[t] += ja.transpose() * ja;
        self.diag[t + 1] += jb.transpose() * jb;
        self.off[t] += ja.transpose() * jb;
        self.grad[t] += ja.transpose() * r;
        self.grad[t + 1] += jb.transpose() * r;
    }

    /// Removes pinned timesteps from the system.
    fn eliminate(&mut self, pinned: &[bool]) {
        for (t, &p) in pinned.iter().enumerate() {
            if p {
                self.diag[t] = Matrix6::identity();
                self.grad[t] = Vector6::zeros();
                if t > 0 {
                    self.off[t - 1] = Matrix6::zeros();
                }
                if t < self.off.len() {
                    self.off[t] = Matrix6::zeros();
                }
            }
        }
    }

    fn grad_inf_norm(&self) -> f64 {
        self.grad.iter().map(|g| g.amax()).fold(0.0, f64::max)
    }

    /// Solves `(H + μ I) δ = −g` by block forward elimination. Pinned blocks
    /// are identity with zero right-hand side and so stay at zero.
    fn solve_damped(&self, mu: f64, pinned: &[bool]) -> Option<Vec<Vector6<f64>>> {
        let n = self.diag.len();
        let mut chols: Vec<Cholesky<f64, nalgebra::U6>> = Vec::with_capacity(n);
        let mut y: Vec<Vector6<f64>> = Vec::with_capacity(n);
        for t in 0..n {
            let mut s = self.diag[t];
            if !pinned[t] {
                for i in 0..6 {
                    s[(i, i)] += mu;
                }
            }
            let mut rhs = -self.grad[t];
            if t > 0 {
                let c = &self.off[t - 1];
                let prev = &chols[t - 1];
                s -= c.transpose() * prev.solve(c);
                rhs -= c.transpose() * prev.solve(&y[t - 1]);
            }
            chols.push(Cholesky::new(s)?);
            y.push(rhs);
        }
        let mut x = vec![Vector6::zeros(); n];
        for t in (0..n).rev() {
            let mut rhs = y[t];
            if t + 1 < n {
                rhs -= self.off[t] * x[t + 1];
            }
            x[t] = chols[t].solve(&rhs);
        }
        Some(x)
    }
}

fn hinge(g: f64, lambda: f64, rho: f64) -> f64 {
    (g + lambda / rho).max(0.0)
}

struct Evaluator<'a> {
    problem: &'a OptimProblem,
    cutoff: usize,
    pinned: Vec<bool>,
}

#[derive(Default)]
struct Eval {
    merit: f64,
    cost: f64,
}

impl<'a> Evaluator<'a> {
    fn new(problem: &'a OptimProblem) -> Self {
        let n = problem.n_steps();
        Evaluator {
            problem,
            cutoff: problem.cutoff(),
            pinned: (0..n).map(|t| problem.is_pinned(t)).collect(),
        }
    }

    fn n_col(&self) -> usize {
        self.problem.tool_proxy_points.len() * self.problem.obstacles.len()
    }

    /// Raw inequality values, in multiplier order.
    fn constraints(&self, poses: &[PoseSE3]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let cfg = &self.problem.config;
        let dt = self.problem.dt();
        let vel = poses
            .windows(2)
            .map(|w| (w[1].translation - w[0].translation).norm() - cfg.v_max * dt)
            .collect();
        let ang = poses
            .windows(2)
            .map(|w| {
                log_so3(&(w[1].rotation * w[0].rotation.transpose())).norm() - cfg.omega_max * dt
            })
            .collect();
        let mut col = Vec::with_capacity(poses.len() * self.n_col());
        for pose in poses {
            for x in &self.problem.tool_proxy_points {
                let world = pose.transform_point(x);
                for ob in &self.problem.obstacles {
                    col.push(cfg.d_min - signed_distance_with_gradient(&world, ob).0);
                }
            }
        }
        (vel, ang, col)
    }

    fn evaluate(
        &self,
        poses: &[PoseSE3],
        lam: &Multipliers,
        rho: f64,
        mut normal: Option<&mut Normal>,
    ) -> Eval {
        let p = self.problem;
        let cfg = &p.config;
        let dt = p.dt();
        let sqrt2 = std::f64::consts::SQRT_2;
        let wrot = (2.0 * cfg.rot_weight).sqrt();
        let sqrt_rho = rho.sqrt();
        let mut out = Eval::default();

        for (t, (pose, r)) in poses
            .iter()
            .zip(&p.reference.frames)
            .enumerate()
            .skip(self.cutoff)
        {
            let dp = pose.translation - r.origin;
            let phi = log_so3(&(pose.rotation * r.basis.transpose()));
            out.cost += dp.norm_squared() + cfg.rot_weight * phi.norm_squared();
            if let Some(nm) = normal.as_deref_mut() {
                if !self.pinned[t] {
                    let mut j = Jac::<6>::zeros();
                    j.fixed_view_mut::<3, 3>(0, 0).fill_diagonal(sqrt2);
                    j.fixed_view_mut::<3, 3>(3, 3)
                        .copy_from(&(left_jacobian_inverse(&phi) * wrot));
                    let mut res = Vector6::zeros();
                    res.fixed_rows_mut::<3>(0).copy_from(&(dp * sqrt2));
                    res.fixed_rows_mut::<3>(3).copy_from(&(phi * wrot));
                    nm.add_unary(t, &j, &res);
                }
            }
        }
        out.merit = out.cost;

        let mut penalty = 0.0;
        let mut constant = 0.0;
        for t in 0..poses.len().saturating_sub(1) {
            let (a, b) = (&poses[t], &poses[t + 1]);

            // translational speed
            let d = b.translation - a.translation;
            let dn = d.norm();
            let lam_v = lam.vel[t];
            constant += lam_v * lam_v / (2.0 * rho);
            let h = hinge(dn - cfg.v_max * dt, lam_v, rho);
            if h > 0.0 {
                penalty += 0.5 * rho * h * h;
                if let Some(nm) = normal.as_deref_mut() {
                    if dn > 1e-15 {
                        let u = d / dn * sqrt_rho;
                        let mut ja = Jac::<1>::zeros();
                        let mut jb = Jac::<1>::zeros();
                        ja.fixed_view_mut::<1, 3>(0, 0).copy_from(&(-u).transpose());
                        jb.fixed_view_mut::<1, 3>(0, 0).copy_from(&u.transpose());
                        nm.add_binary(t, &ja, &jb, &SVector::<f64, 1>::new(sqrt_rho * h));
                    }
                }
            }

            // angular speed
            let rel = log_so3(&(b.rotation * a.rotation.transpose()));
            let an = rel.norm();
            let lam_w = lam.ang[t];
            constant += lam_w * lam_w / (2.0 * rho);
            let h = hinge(an - cfg.omega_max * dt, lam_w, rho);
            if h > 0.0 {
                penalty += 0.5 * rho * h * h;
                if let Some(nm) = normal.as_deref_mut() {
                    if an > 1e-12 {
                        let unit = rel / an;
                        let gb = (left_jacobian_inverse(&rel).transpose() * unit) * sqrt_rho;
                        let ga = (right_jacobian_inverse(&rel).transpose() * unit) * (-sqrt_rho);
                        let mut ja = Jac::<1>::zeros();
                        let mut jb = Jac::<1>::zeros();
                        ja.fixed_view_mut::<1, 3>(0, 3).copy_from(&ga.transpose());
                        jb.fixed_view_mut::<1, 3>(0, 3).copy_from(&gb.transpose());
                        nm.add_binary(t, &ja, &jb, &SVector::<f64, 1>::new(sqrt_rho * h));
                    }
                }
            }
        }

        let n_ob = p.obstacles.len();
        let n_col = self.n_col();
        for (t, pose) in poses.iter().enumerate() {
            for (k, x) in p.tool_proxy_points.iter().enumerate() {
                let rx = pose.rotation.rotate(x);
                let world = rx + pose.translation;
                for (o, ob) in p.obstacles.iter().enumerate() {
                    let lam_c = lam.col[t * n_col + k * n_ob + o];
                    constant += lam_c * lam_c / (2.0 * rho);
                    let (sd, grad) = signed_distance_with_gradient(&world, ob);
                    let h = hinge(cfg.d_min - sd, lam_c, rho);
                    if h > 0.0 {
                        penalty += 0.5 * rho * h * h;
                        if let Some(nm) = normal.as_deref_mut() {
                            if !self.pinned[t] {
                                let dp = -grad * sqrt_rho;
                                let dw = (grad.transpose() * hat(&rx)).transpose() * sqrt_rho;
                                let mut j = Jac::<1>::zeros();
                                j.fixed_view_mut::<1, 3>(0, 0).copy_from(&dp.transpose());
                                j.fixed_view_mut::<1, 3>(0, 3).copy_from(&dw.transpose());
                                nm.add_unary(t, &j, &SVector::<f64, 1>::new(sqrt_rho * h));
                            }
                        }
                    }
                }
            }
        }
        out.merit += penalty - constant;
        out
    }
}

/// Initial guess: the reference with the boundary frames substituted and the
/// boundary offsets blended into neighbouring steps over ±max(2, N/10).
fn warm_start(problem: &OptimProblem) -> Vec<PoseSE3> {
    let n = problem.n_steps();
    let window = (n / 10).max(2);
    let mut poses: Vec<PoseSE3> = problem.reference.frames.iter().map(|f| f.pose()).collect();
    for k in [0, problem.t_func] {
        let pin = problem.pinned_pose(k).expect("boundary step");
        let reference = problem.reference.frames[k].pose();
        let dp = pin.translation - reference.translation;
        let dw = log_so3(&(pin.rotation * reference.rotation.transpose()));
        let lo = k.saturating_sub(window);
        let hi = (k + window).min(n - 1);
        for (t, pose) in poses.iter_mut().enumerate().take(hi + 1).skip(lo) {
            let alpha = 1.0 - (t.abs_diff(k) as f64) / (window as f64 + 1.0);
            *pose = PoseSE3::new(
                exp_so3(&(dw * alpha)) * pose.rotation,
                pose.translation + dp * alpha,
            );
        }
    }
    for k in [0, problem.t_func] {
        poses[k] = problem.pinned_pose(k).expect("boundary step");
    }
    poses
}

/// Rejects problems whose boundary frames cannot be joined within the speed
/// limits, or which start or arrive in collision.
fn check_boundary_feasibility(problem: &OptimProblem) -> Result<(), OptimError> {
    let cfg = &problem.config;
    let tol = cfg.constraint_tol;
    let steps = problem.t_func as f64;
    let (dist, angle) = problem.pi_init.pose().distance_to(&problem.pi_func.pose());
    let lin_budget = steps * cfg.v_max * problem.dt();
    if dist > lin_budget + tol {
        return Err(OptimError::InfeasibleBoundary(format!(
            "function point must travel {dist:.4} m in {} steps but the limit allows {lin_budget:.4} m",
            problem.t_func
        )));
    }
    let ang_budget = steps * cfg.omega_max * problem.dt();
    if angle > ang_budget + tol {
        return Err(OptimError::InfeasibleBoundary(format!(
            "frame must turn {angle:.4} rad in {} steps but the limit allows {ang_budget:.4} rad",
            problem.t_func
        )));
    }
    for k in [0, problem.t_func] {
        let pose = problem.pinned_pose(k).expect("boundary step");
        for x in &problem.tool_proxy_points {
            let world = pose.transform_point(x);
            for ob in &problem.obstacles {
                let sd = signed_distance_with_gradient(&world, ob).0;
                if cfg.d_min - sd > tol {
                    return Err(OptimError::InfeasibleBoundary(format!(
                        "tool is {sd:.4} m from an obstacle at pinned step {k} (minimum {:.4} m)",
                        cfg.d_min
                    )));
                }
            }
        }
    }
    Ok(())
}

enum InnerExit {
    Gradient,
    Stalled,
    MaxIterations,
}

struct InnerResult {
    iterations: usize,
    exit: InnerExit,
    merit: f64,
    cost: f64,
}

fn minimize_inner(
    ev: &Evaluator,
    poses: &mut Vec<PoseSE3>,
    lam: &Multipliers,
    rho: f64,
) -> Result<InnerResult, ()> {
    let cfg = &ev.problem.config;
    let n = poses.len();
    let mut mu: Option<f64> = None;
    let mut nu = 2.0;
    let mut iterations = 0;
    loop {
        let mut normal = Normal::new(n);
        let cur = ev.evaluate(poses, lam, rho, Some(&mut normal));
        if !cur.merit.is_finite() {
            return Err(());
        }
        normal.eliminate(&ev.pinned);
        if normal.grad_inf_norm() <= cfg.grad_tol {
            return Ok(InnerResult {
                iterations,
                exit: InnerExit::Gradient,
                merit: cur.merit,
                cost: cur.cost,
            });
        }
        if iterations >= cfg.max_inner {
            return Ok(InnerResult {
                iterations,
                exit: InnerExit::MaxIterations,
                merit: cur.merit,
                cost: cur.cost,
            });
        }
        let damping = *mu.get_or_insert_with(|| {
            1e-6 * normal
                .diag
                .iter()
                .map(|d| d.diagonal().amax())
                .fold(1e-12, f64::max)
        });
        let _ = damping;

        // Retry with growing damping until the merit decreases.
        loop {
            let m = mu.unwrap();
            let Some(step) = normal.solve_damped(m, &ev.pinned) else {
                mu = Some(m * nu);
                nu *= 2.0;
                continue;
            };
            let step_norm: f64 = step.iter().map(|s| s.norm_squared()).sum::<f64>().sqrt();
            let candidate: Vec<PoseSE3> = poses
                .iter()
                .zip(&step)
                .map(|(p, s)| retract(p, s))
                .collect();
            let next = ev.evaluate(&candidate, lam, rho, None);
            let predicted: f64 = step
                .iter()
                .zip(&normal.grad)
                .map(|(s, g)| 0.5 * (m * s.norm_squared() - g.dot(s)))
                .sum();
            let actual = cur.merit - next.merit;
            if next.merit.is_finite() && actual > 0.0 {
                *poses = candidate;
                iterations += 1;
                let ratio = if predicted > 0.0 {
                    actual / predicted
                } else {
                    0.0
                };
                mu = Some(m * (1.0f64 / 3.0).max(1.0 - (2.0 * ratio - 1.0).powi(3)));
                nu = 2.0;
                if actual <= 1e-15 * cur.merit.abs().max(1e-300) || step_norm <= 1e-14 {
                    return Ok(InnerResult {
                        iterations,
                        exit: InnerExit::Stalled,
                        merit: next.merit,
                        cost: next.cost,
                    });
                }
                break;
            }
            if step_norm <= 1e-14 || m > 1e20 {
                return Ok(InnerResult {
                    iterations,
                    exit: InnerExit::Stalled,
                    merit: cur.merit,
                    cost: cur.cost,
                });
            }
            mu = Some(m * nu);
            nu *= 2.0;
        }
    }
}

/// Solves the pinned, speed- and clearance-constrained tracking problem.
pub fn solve(problem: &OptimProblem) -> Result<OptimSolution, OptimError> {
    problem.validate()?;
    check_boundary_feasibility(problem)?;
    let cfg = &problem.config;
    let n = problem.n_steps();
    let ev = Evaluator::new(problem);
    let mut poses = warm_start(problem);
    let mut lam = Multipliers {
        vel: vec![0.0; n - 1],
        ang: vec![0.0; n - 1],
        col: vec![0.0; n * ev.n_col()],
    };
    let mut rho = INITIAL_PENALTY;
    let mut trace = Vec::new();
    let mut total_inner = 0;
    let mut prev_violation = f64::INFINITY;
    let mut converged = false;

    for outer in 0..cfg.max_outer {
        let merit_before = ev.evaluate(&poses, &lam, rho, None).merit;
        let inner = match minimize_inner(&ev, &mut poses, &lam, rho) {
            Ok(r) => r,
            Err(()) => return Err(OptimError::SolverDiverged { trace }),
        };
        total_inner += inner.iterations;

        let (vel, ang, col) = ev.constraints(&poses);
        let violation = vel
            .iter()
            .chain(&ang)
            .chain(&col)
            .fold(0.0f64, |m, g| m.max(*g));
        let record = TraceRecord {
            outer,
            inner_iterations: inner.iterations,
            merit_before,
            merit_after: inner.merit,
            cost: inner.cost,
            max_violation: violation,
            penalty: rho,
        };
        log::debug!("{record}");
        trace.push(record);

        let inner_done = !matches!(inner.exit, InnerExit::MaxIterations);
        if violation <= cfg.constraint_tol && inner_done {
            converged = true;
            break;
        }

        for (l, g) in lam.vel.iter_mut().zip(&vel) {
            *l = (*l + rho * g).max(0.0);
        }
        for (l, g) in lam.ang.iter_mut().zip(&ang) {
            *l = (*l + rho * g).max(0.0);
        }
        for (l, g) in lam.col.iter_mut().zip(&col) {
            *l = (*l + rho * g).max(0.0);
        }
        if violation > VIOLATION_SHRINK * prev_violation {
            rho = (rho * PENALTY_GROWTH).min(MAX_PENALTY);
        }
        prev_violation = violation;
    }

    let local_u = problem.pi_init.local_grasp_vector();
    let trajectory = FrameTrajectory {
        frames: poses
            .iter()
            .map(|p| FunctionFrame::from_pose(p, &local_u))
            .collect(),
        dt: problem.dt(),
    };
    let constraints = check_constraints(&trajectory, problem)?;
    let max_constraint_violation = constraints.max_violation();
    Ok(OptimSolution {
        final_cost: cost_of_poses(&poses, problem),
        max_constraint_violation,
        iterations: total_inner,
        outer_iterations: trace.len(),
        converged: converged && max_constraint_violation <= cfg.constraint_tol,
        constraints,
        trajectory,
        trace,
    })
}
