//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

mod common;

use std::cell::Cell;
use std::process::ExitCode;
use std::time::Instant;

use common::{
    box_cloud, curved_reference, frame, grid_oracle, identical_layout, keypoints, obstacle_problem,
    perturbed, pose, problem_from, rng, three_step,
};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use toolxfer::alignment::{
    initial_alignment, refine_alignment, AlignmentContext, AlignmentResult, EvaluatorVerdict,
    Primitive, RefinementConfig,
};
use toolxfer::benchmark::{run_benchmark, BenchConfig};
use toolxfer::frames::{build_function_frame, detect_target_frame};
use toolxfer::geometry::{
    exp_so3, fit_rigid_transform, log_so3, rotation_between, PoseSE3, Rotation3, UnitVec3, Vec3,
};
use toolxfer::metrics::{akd, ap_at, KeypointAnnotationSet, DEFAULT_THRESHOLDS};
use toolxfer::pipeline::run_pipeline;
use toolxfer::synth::{TaskKind, Variation};
use toolxfer::trajopt::{
    check_constraints, check_gradient, evaluate_cost, relaxation_cutoff, solve, OptimConfig,
};

#[derive(Default)]
struct Suite {
    passed: usize,
    failed: usize,
}

impl Suite {
    fn check(&mut self, id: &str, name: &str, ok: bool, detail: String) {
        if ok {
            self.passed += 1;
            println!("PASS [{id}] {name}: {detail}");
        } else {
            self.failed += 1;
            println!("FAIL [{id}] {name}: {detail}");
        }
    }
}

fn ortho_err(r: &Rotation3) -> f64 {
    r.orthonormality_error()
        .max((r.matrix().determinant() - 1.0).abs())
}

fn pose_err(a: &PoseSE3, b: &PoseSE3) -> f64 {
    let (dp, dr) = a.distance_to(b);
    dp.max(dr)
}

fn geometry(s: &mut Suite) {
    let start = Instant::now();
    let mut g = rng(1);
    let mut worst_ortho: f64 = 0.0;

    let mut err: f64 = 0.0;
    for _ in 0..10_000 {
        let r = common::rotation(&mut g);
        let back = exp_so3(&log_so3(&r));
        err = err.max((back.matrix() - r.matrix()).norm());
        worst_ortho = worst_ortho.max(ortho_err(&back));
    }
    s.check(
        "1a",
        "exp/log round trip, 10^4 rotations",
        err <= 1e-9,
        format!("max {err:.2e} (tol 1e-9)"),
    );

    let mut err: f64 = 0.0;
    for i in 0..10_000 {
        let a = common::unit(&mut g);
        let b = match i % 4 {
            0 => UnitVec3::new_normalize(-a.into_inner()).unwrap(),
            1 => UnitVec3::new_normalize(-a.into_inner() + common::vec3(&mut g, 1e-7)).unwrap(),
            _ => common::unit(&mut g),
        };
        let r = rotation_between(&a, &b);
        err = err.max((r.rotate(a.as_vec()) - b.as_vec()).norm());
        worst_ortho = worst_ortho.max(ortho_err(&r));
    }
    s.check(
        "1b",
        "rotation between unit vectors incl. antiparallel, 10^4 pairs",
        err <= 1e-9,
        format!("max {err:.2e} (tol 1e-9)"),
    );

    let mut exact: f64 = 0.0;
    let mut noisy: f64 = 0.0;
    let noise = Normal::new(0.0, 1e-3).unwrap();
    for _ in 0..100 {
        let truth = pose(&mut g, 1.0);
        let src: Vec<Vec3> = (0..100).map(|_| common::vec3(&mut g, 0.5)).collect();
        let dst: Vec<Vec3> = src.iter().map(|p| truth.transform_point(p)).collect();
        let fit = fit_rigid_transform(&src, &dst).unwrap();
        exact = exact.max(pose_err(&fit, &truth));
        worst_ortho = worst_ortho.max(ortho_err(&fit.rotation));

        let jittered: Vec<Vec3> = dst
            .iter()
            .map(|p| {
                p + Vec3::new(
                    noise.sample(&mut g),
                    noise.sample(&mut g),
                    noise.sample(&mut g),
                )
            })
            .collect();
        let fit = fit_rigid_transform(&src, &jittered).unwrap();
        noisy = noisy.max((fit.translation - truth.translation).norm());
    }
    s.check(
        "1c",
        "rigid fit, noiseless",
        exact <= 1e-9,
        format!("max {exact:.2e} (tol 1e-9)"),
    );
    s.check(
        "1d",
        "rigid fit, sigma 1e-3 on 100 points",
        noisy <= 5e-3,
        format!("max translation error {noisy:.2e} (tol 5e-3)"),
    );
    s.check(
        "1e",
        "rotations orthonormal with unit determinant",
        worst_ortho <= 1e-9,
        format!("max {worst_ortho:.2e} (tol 1e-9)"),
    );
    let secs = start.elapsed().as_secs_f64();
    s.check(
        "1f",
        "geometry checks runtime",
        secs < 5.0,
        format!("{secs:.2} s (limit 5 s)"),
    );
}

fn frames(s: &mut Suite) {
    let mut g = rng(2);
    let (mut ortho, mut plane, mut equiv) = (0f64, 0f64, 0f64);
    for _ in 0..1000 {
        let k = keypoints(&mut g);
        let f = build_function_frame(&k).unwrap();
        ortho = ortho.max(ortho_err(&f.basis));
        let n = f.normal().into_inner();
        plane = plane
            .max(n.dot(f.function_axis().as_vec()).abs())
            .max((k.grasp - f.origin).dot(&n).abs())
            .max((k.center - f.origin).dot(&n).abs());
        let world = pose(&mut g, 1.0);
        let moved = build_function_frame(&k.transformed(&world)).unwrap();
        equiv = equiv.max(pose_err(&moved.pose(), &world.compose(&f.pose())));
    }
    s.check(
        "2a",
        "function frames orthonormal, 10^3 triples",
        ortho <= 1e-9,
        format!("max {ortho:.2e} (tol 1e-9)"),
    );
    s.check(
        "2b",
        "frame plane contains function axis, grasp and center",
        plane <= 1e-9,
        format!("max {plane:.2e} (tol 1e-9)"),
    );
    s.check(
        "2c",
        "function frames rigidly equivariant",
        equiv <= 1e-9,
        format!("max {equiv:.2e} (tol 1e-9)"),
    );

    let mut err: f64 = 0.0;
    let lattice = box_cloud(Vec3::new(0.1, 0.06, 0.03), [9, 7, 5]);
    for _ in 0..200 {
        let place = pose(&mut g, 0.5);
        let cloud: Vec<Vec3> = lattice.iter().map(|p| place.transform_point(p)).collect();
        let up = UnitVec3::new_normalize(place.rotation.column(2)).unwrap();
        let t = detect_target_frame(&cloud, &up).unwrap();
        let (x, z) = (t.pose.rotation.column(0), t.pose.rotation.column(2));
        let (bx, bz) = (place.rotation.column(0), place.rotation.column(2));
        let angle = |a: &Vec3, b: &Vec3| a.cross(b).norm().atan2(a.dot(b).abs());
        err = err
            .max((t.pose.translation - place.translation).norm())
            .max(angle(&x, &bx))
            .max((1.0 - z.dot(&bz)).max(0.0));
        err = err.max(ortho_err(&t.pose.rotation));
    }
    s.check(
        "2d",
        "target frame recovers box axes",
        err <= 1e-6,
        format!("max {err:.2e} (tol 1e-6)"),
    );
}

fn alignment(s: &mut Suite) {
    let mut g = rng(3);
    let (mut res, mut conj) = (0f64, 0f64);
    for _ in 0..1000 {
        let (a, b) = (frame(&mut g), frame(&mut g));
        let r = initial_alignment(&a, &b);
        let p = r.primitive_report;
        res = res.max(p.point).max(p.axis).max(p.plane);
        let world = pose(&mut g, 1.0);
        let moved = initial_alignment(&a.transformed(&world), &b.transformed(&world)).transform;
        conj = conj.max(pose_err(
            &moved,
            &world.compose(&r.transform).compose(&world.inverse()),
        ));
    }
    s.check(
        "3a",
        "initial alignment residuals, 10^3 pairs",
        res <= 1e-9,
        format!("max {res:.2e} (tol 1e-9)"),
    );
    s.check(
        "3b",
        "alignment conjugation equivariance",
        conj <= 1e-9,
        format!("max {conj:.2e} (tol 1e-9)"),
    );

    let mut ok = true;
    let mut worst = 0usize;
    let mut bound = 0usize;
    for seed in 0..20u64 {
        let (test, demo) = (frame(&mut g), frame(&mut g));
        let ctx = AlignmentContext {
            test_frame0: test,
            demo_frame_tf: demo,
            test_cloud: vec![],
            target_cloud: vec![],
        };
        let cfg = RefinementConfig {
            rng_seed: seed,
            ..RefinementConfig::default()
        };
        let accept_after = g.random_range(1..400usize);
        let run = || {
            let calls = Cell::new(0usize);
            let eval = |_: &AlignmentResult, _: &AlignmentContext| {
                calls.set(calls.get() + 1);
                if calls.get() > accept_after {
                    EvaluatorVerdict::accept()
                } else {
                    EvaluatorVerdict::reject(vec![Primitive::Point, Primitive::Axis], "")
                }
            };
            (
                refine_alignment(initial_alignment(&test, &demo), &eval, &cfg, &ctx),
                calls.get(),
            )
        };
        let (a, ca) = run();
        let (b, cb) = run();
        ok &= a == b && ca == cb && ca <= 1 + cfg.max_iterations;
        worst = worst.max(ca);
        bound = cfg.max_iterations + 1;
    }
    s.check(
        "3c",
        "refinement deterministic with bounded candidates",
        ok,
        format!("20 seeded runs, max {worst} evaluations (bound {bound})"),
    );
}

fn optimizer(s: &mut Suite) {
    let mut g = rng(4);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let n = g.random_range(4..30usize);
        let reference = curved_reference(n);
        let cfg = OptimConfig {
            relax_fraction: g.random_range(0.0..0.6),
            rot_weight: g.random_range(0.0..3.0),
            ..OptimConfig::default()
        };
        let p = problem_from(reference.clone(), n / 2, cfg);
        let offsets: Vec<(Vec3, Vec3)> = (0..n)
            .map(|_| (common::vec3(&mut g, 0.05), common::vec3(&mut g, 0.5)))
            .collect();
        let chk = check_gradient(&p, &perturbed(&reference, &offsets)).unwrap();
        worst = worst.max(chk.max_relative_error);
    }
    s.check(
        "4a",
        "gradient vs finite differences, 100 problems",
        worst <= 1e-4,
        format!("max rel {worst:.2e} (tol 1e-4)"),
    );

    let p = three_step(1.0);
    let err = match solve(&p) {
        Ok(sol) if sol.converged => {
            (sol.trajectory.frames[1].origin - p.reference.frames[1].origin).norm()
        }
        _ => f64::INFINITY,
    };
    s.check(
        "4b",
        "N=3 unconstrained closed form",
        err <= 1e-9,
        format!("error {err:.2e} (tol 1e-9)"),
    );

    let p = three_step(0.2);
    let err = match solve(&p) {
        Ok(sol) if sol.converged => {
            let f = &p.reference.frames;
            (sol.trajectory.frames[1].origin
                - grid_oracle(f[0].origin, f[2].origin, f[1].origin, 0.2))
            .norm()
        }
        _ => f64::INFINITY,
    };
    s.check(
        "4c",
        "N=3 velocity-limited vs grid oracle",
        err <= 1e-3,
        format!("error {err:.2e} (tol 1e-3)"),
    );

    let p = obstacle_problem();
    let start = Instant::now();
    let sol = solve(&p);
    let secs = start.elapsed().as_secs_f64();
    let (ok_bound, ok_limits, detail) = match &sol {
        Ok(sol) if sol.converged => {
            let rep = check_constraints(&sol.trajectory, &p).unwrap();
            let tol = p.config.constraint_tol;
            let boundary = rep
                .init_boundary
                .0
                .max(rep.init_boundary.1)
                .max(rep.func_boundary.0)
                .max(rep.func_boundary.1);
            let limits = rep.velocity <= tol
                && rep.angular <= tol
                && rep.min_clearance(p.config.d_min) >= p.config.d_min - tol;
            (
                boundary <= 1e-6,
                limits,
                format!(
                    "boundary {boundary:.2e}, velocity excess {:.2e}, angular excess {:.2e}, min clearance {:.4}",
                    rep.velocity,
                    rep.angular,
                    rep.min_clearance(p.config.d_min)
                ),
            )
        }
        Ok(_) => (false, false, "not converged".to_string()),
        Err(e) => (false, false, e.to_string()),
    };
    s.check(
        "4d",
        "boundary frames pinned (tol 1e-6)",
        ok_bound,
        detail.clone(),
    );
    s.check(
        "4e",
        "velocity, angular and clearance limits hold post hoc",
        ok_limits,
        detail,
    );
    s.check(
        "4f",
        "N=100 with 2 obstacles solve time",
        secs <= 5.0 && sol.is_ok(),
        format!("{secs:.3} s (limit 5 s)"),
    );

    let mut worst: f64 = 0.0;
    for kind in TaskKind::ALL {
        worst = worst.max(match run_pipeline(&identical_layout(kind, 11)) {
            Ok(out) if out.solution.converged => {
                out.solution.trajectory.origin_rmse(&out.demo_frames)
            }
            _ => f64::INFINITY,
        });
    }
    s.check(
        "4g",
        "identical layout reproduces the demo",
        worst <= 1e-4,
        format!("max RMSE {worst:.2e} m (tol 1e-4)"),
    );
}

fn relaxation(s: &mut Suite) {
    let offset_cost = |n: usize, t: usize| {
        let reference = curved_reference(n);
        let p = problem_from(
            reference.clone(),
            n - 1,
            OptimConfig {
                relax_fraction: 0.3,
                ..OptimConfig::default()
            },
        );
        let mut traj = reference;
        traj.frames[t].origin.y += 0.1;
        evaluate_cost(&traj, &p).unwrap()
    };
    let (early, late) = (offset_cost(10, 2), offset_cost(10, 5));
    s.check(
        "6a",
        "N=10: offset at t=2 is free, at t=5 costs 0.01",
        early == 0.0 && (late - 0.01).abs() <= 1e-12,
        format!("cost {early:.3e} and {late:.6}"),
    );
    let bad: Vec<usize> = (1..=500)
        .filter(|&n| relaxation_cutoff(0.3, n) != (3 * n).div_ceil(10))
        .collect();
    s.check(
        "6b",
        "cutoff equals ceil(0.3 N) for N in 1..=500",
        bad.is_empty(),
        format!("mismatches {bad:?}"),
    );
}

fn metrics(s: &mut Suite) {
    let ann =
        KeypointAnnotationSet::new(vec![[0.0, 0.0], [10.0, 0.0]], vec![[3.0, 4.0], [10.0, 0.0]])
            .unwrap();
    let (d, ap) = (akd(&ann).unwrap(), ap_at(&ann, 4.0).unwrap());
    s.check(
        "7a",
        "AKD and AP on hand-computed pairs",
        d == 2.5 && ap == 0.5,
        format!("AKD {d}, AP@4 {ap}"),
    );
    let same =
        KeypointAnnotationSet::new(vec![[1.0, 2.0], [5.0, 7.0]], vec![[1.0, 2.0], [5.0, 7.0]])
            .unwrap();
    let (d, ap) = (akd(&same).unwrap(), ap_at(&same, 0.0).unwrap());
    s.check(
        "7b",
        "identical predictions",
        d == 0.0 && ap == 1.0,
        format!("AKD {d}, AP@0 {ap}"),
    );
    s.check(
        "7c",
        "default thresholds",
        DEFAULT_THRESHOLDS == [15.0, 30.0, 45.0],
        format!("{DEFAULT_THRESHOLDS:?} px"),
    );
}

fn benchmark(s: &mut Suite) {
    let cfg = BenchConfig::default();
    let first = run_benchmark(&cfg);
    let t = &first.table;
    let spatial = t.variation_rate(Variation::Spatial).unwrap_or(0.0);
    let runs = first.runs.len();
    s.check(
        "5a",
        "spatial variation success rate",
        spatial == 1.0,
        format!("{spatial:.3} over {runs} runs"),
    );
    s.check(
        "5b",
        "overall success rate",
        t.overall >= 0.9,
        format!("{:.3} (min 0.9)", t.overall),
    );
    let controls: Vec<_> = t.rows.iter().filter(|r| r.control.is_some()).collect();
    let controls_ok = !controls.is_empty()
        && controls
            .iter()
            .all(|r| r.successes == 0 && r.failures.get("InfeasibleBoundary") == Some(&r.runs));
    let labels: Vec<String> = controls
        .iter()
        .map(|r| format!("{} {:.1}", r.label(), r.success_rate))
        .collect();
    s.check(
        "5c",
        "control cells fail with InfeasibleBoundary",
        controls_ok,
        labels.join(", "),
    );
    s.check(
        "5d",
        "benchmark wall time",
        first.seconds <= 600.0,
        format!("{:.1} s (limit 600 s)", first.seconds),
    );
    let second = run_benchmark(&cfg);
    s.check(
        "5e",
        "benchmark table reproducible",
        second.table == first.table,
        format!("{} cells", t.rows.len()),
    );
}

fn main() -> ExitCode {
    let mut s = Suite::default();
    geometry(&mut s);
    frames(&mut s);
    alignment(&mut s);
    optimizer(&mut s);
    benchmark(&mut s);
    relaxation(&mut s);
    metrics(&mut s);
    println!("acceptance: {} passed, {} failed", s.passed, s.failed);
    if s.failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
