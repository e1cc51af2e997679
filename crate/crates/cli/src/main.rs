use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};

use toolxfer::alignment::AlignError;
use toolxfer::benchmark::{run_benchmark, BenchConfig};
use toolxfer::execution::ExecutionError;
use toolxfer::frames::{build_frame_trajectory, build_function_frame, detect_target_frame};
use toolxfer::metrics::{evaluate, KeypointAnnotationSet, DEFAULT_THRESHOLDS};
use toolxfer::pipeline::{run_pipeline, PipelineError, StageError};
use toolxfer::scenario::{
    load_optim_config, load_scenario, save_scenario, scenario_to_json, trajectory_to_json, IoError,
    TrajectoryFile,
};
use toolxfer::synth::{generate_scenario, TaskKind, Variation};
use toolxfer::{OptimError, Scenario};

const EXIT_INPUT: u8 = 2;
const EXIT_INFEASIBLE: u8 = 3;
const EXIT_NOT_CONVERGED: u8 = 4;
const EXIT_INTERNAL: u8 = 5;

#[derive(Parser)]
#[command(
    name = "toolxfer",
    version,
    about = "Transfer tool-use demonstrations to novel tools"
)]
struct Cli {
    /// More log output (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    /// Print per-iteration solver records to stderr.
    #[arg(long, global = true)]
    trace: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute an end-effector trajectory for a scenario file.
    Run(RunArgs),
    /// Write a synthetic scenario.
    Gen(GenArgs),
    /// Run the synthetic benchmark matrix.
    Bench(BenchArgs),
    /// AKD and AP for keypoint annotation files.
    Metrics(MetricsArgs),
    /// Validate a scenario file without solving.
    Check(CheckArgs),
}

#[derive(Args)]
struct RunArgs {
    scenario: PathBuf,
    /// Trajectory output path; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write the run report as JSON.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Solver settings file replacing the scenario's optim section.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override the scenario seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long)]
    kind: TaskKind,
    #[arg(long)]
    variation: Variation,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output path; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    /// Seeds per cell.
    #[arg(long, default_value_t = 10)]
    seeds: usize,
    /// First seed of each cell.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_delimiter = ',')]
    kinds: Option<Vec<TaskKind>>,
    #[arg(long, value_delimiter = ',')]
    variations: Option<Vec<Variation>>,
    /// Skip the infeasible control cells.
    #[arg(long)]
    no_controls: bool,
    #[arg(long)]
    config: Option<PathBuf>,
    /// Directory for table, runs and plot series.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct MetricsArgs {
    #[arg(required = true)]
    files: Vec<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    thresholds: Option<Vec<f64>>,
    /// Write the table as JSON.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CheckArgs {
    scenario: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
}

struct Failure {
    code: u8,
    error: anyhow::Error,
}

impl Failure {
    fn new(code: u8, error: impl Into<anyhow::Error>) -> Self {
        Failure {
            code,
            error: error.into(),
        }
    }
}

impl From<IoError> for Failure {
    fn from(e: IoError) -> Self {
        Failure::new(EXIT_INPUT, e)
    }
}

impl From<PipelineError> for Failure {
    fn from(e: PipelineError) -> Self {
        let code = match &e.source {
            StageError::Frame(_) => EXIT_INPUT,
            StageError::Align(AlignError::InvalidConfig) => EXIT_INPUT,
            StageError::Align(_) => EXIT_INFEASIBLE,
            StageError::Optim(OptimError::InfeasibleBoundary(_)) => EXIT_INFEASIBLE,
            StageError::Optim(OptimError::SolverDiverged { .. }) => EXIT_NOT_CONVERGED,
            StageError::Optim(OptimError::InvalidProblem(_)) => EXIT_INPUT,
            StageError::Optim(_) => EXIT_INTERNAL,
            StageError::Execution(ExecutionError::GraspInfeasible { .. }) => EXIT_INFEASIBLE,
            StageError::Execution(_) => EXIT_INTERNAL,
        };
        Failure::new(code, e)
    }
}

type CliResult = Result<(), Failure>;

fn internal<E: Into<anyhow::Error>>(e: E) -> Failure {
    Failure::new(EXIT_INTERNAL, e)
}

fn write_or_print(path: Option<&Path>, text: &str) -> CliResult {
    match path {
        Some(p) => fs::write(p, text)
            .with_context(|| format!("writing {}", p.display()))
            .map_err(internal),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn load_with_overrides(
    path: &Path,
    config: Option<&Path>,
    seed: Option<u64>,
) -> Result<Scenario, Failure> {
    let mut s = load_scenario(path)?;
    if let Some(c) = config {
        s.optim = load_optim_config(c)?;
    }
    if let Some(seed) = seed {
        s.seed = seed;
        s.refine.rng_seed = seed;
    }
    Ok(s)
}

fn cmd_run(args: &RunArgs, trace: bool) -> CliResult {
    let s = load_with_overrides(&args.scenario, args.config.as_deref(), args.seed)?;
    let out = run_pipeline(&s)?;
    if trace {
        for rec in &out.solution.trace {
            eprintln!("{rec}");
        }
    }
    let r = &out.report;
    for t in &r.timings {
        log::info!("{:<13} {:.4} s", t.stage.to_string(), t.seconds);
    }
    eprintln!(
        "converged={} cost={:.3e} max_violation={:.3e} iterations={} grasp_roll={}",
        r.solver.converged,
        r.solver.final_cost,
        r.solver.max_constraint_violation,
        r.solver.iterations,
        r.grasp_roll_index
    );
    let file = TrajectoryFile {
        trajectory: out.trajectory,
        manifest: vec![0],
    };
    write_or_print(args.out.as_deref(), &trajectory_to_json(&file))?;
    if let Some(p) = &args.report {
        let json = serde_json::to_string_pretty(r).map_err(internal)?;
        write_or_print(Some(p), &json)?;
    }
    if !r.solver.converged {
        return Err(Failure::new(
            EXIT_NOT_CONVERGED,
            anyhow!(
                "solver did not converge (max violation {:.3e})",
                r.solver.max_constraint_violation
            ),
        ));
    }
    Ok(())
}

fn cmd_gen(args: &GenArgs) -> CliResult {
    let g = generate_scenario(args.kind, args.variation, args.seed);
    log::info!(
        "demo tool {}, test tool {} at scale {:.4}",
        g.meta.demo_family,
        g.meta.test_family,
        g.meta.tool_scale
    );
    match &args.out {
        Some(p) => save_scenario(p, &g.scenario).map_err(internal),
        None => write_or_print(None, &scenario_to_json(&g.scenario)),
    }
}

fn cmd_bench(args: &BenchArgs, trace: bool) -> CliResult {
    if args.seeds == 0 {
        return Err(Failure::new(
            EXIT_INPUT,
            anyhow!("--seeds must be at least 1"),
        ));
    }
    let mut cfg = BenchConfig {
        n_seeds: args.seeds,
        first_seed: args.seed,
        ..BenchConfig::default()
    };
    if let Some(k) = &args.kinds {
        cfg.kinds = k.clone();
    }
    if let Some(v) = &args.variations {
        cfg.variations = v.clone();
    }
    if args.no_controls {
        cfg.controls.clear();
    }
    if let Some(c) = &args.config {
        cfg.optim = load_optim_config(c)?;
    }
    let rep = run_benchmark(&cfg);
    if trace {
        for r in &rep.runs {
            eprintln!(
                "{}/{} seed={} success={} failure={} cost={:?} iterations={} seconds={:.3}",
                r.kind,
                r.variation,
                r.seed,
                r.success,
                r.failure.as_deref().unwrap_or("-"),
                r.final_cost,
                r.iterations,
                r.seconds
            );
        }
    }
    println!("{:<34} {:>5} {:>9}  failures", "cell", "runs", "success");
    for row in &rep.table.rows {
        let failures: Vec<String> = row
            .failures
            .iter()
            .map(|(k, n)| format!("{k}={n}"))
            .collect();
        println!(
            "{:<34} {:>5} {:>9.3}  {}",
            row.label(),
            row.runs,
            row.success_rate,
            failures.join(" ")
        );
    }
    for (v, rate) in &rep.table.by_variation {
        println!("{:<34} {:>5} {:>9.3}", format!("[{v}]"), "", rate);
    }
    println!("{:<34} {:>5} {:>9.3}", "[overall]", "", rep.table.overall);
    println!("elapsed {:.1} s", rep.seconds);

    if let Some(dir) = &args.out {
        fs::create_dir_all(dir)
            .with_context(|| format!("creating {}", dir.display()))
            .map_err(internal)?;
        let files = [
            ("table.json", serde_json::to_string_pretty(&rep.table)),
            ("runs.json", serde_json::to_string_pretty(&rep.runs)),
            ("series.json", serde_json::to_string_pretty(&rep.series)),
            ("table.csv", Ok(rep.table.to_csv())),
        ];
        for (name, text) in files {
            write_or_print(Some(&dir.join(name)), &text.map_err(internal)?)?;
        }
    }
    Ok(())
}

fn cmd_metrics(args: &MetricsArgs) -> CliResult {
    let thresholds = args
        .thresholds
        .clone()
        .unwrap_or_else(|| DEFAULT_THRESHOLDS.to_vec());
    let mut pooled = KeypointAnnotationSet {
        ground_truth: Vec::new(),
        predictions: Vec::new(),
    };
    let mut rows = Vec::new();
    for path in &args.files {
        let text = fs::read_to_string(path)
            .with_context(|| format!("reading {}", path.display()))
            .map_err(|e| Failure::new(EXIT_INPUT, e))?;
        let ann: KeypointAnnotationSet = serde_json::from_str(&text)
            .with_context(|| format!("parsing {}", path.display()))
            .map_err(|e| Failure::new(EXIT_INPUT, e))?;
        let row = evaluate(&ann, &thresholds)
            .with_context(|| path.display().to_string())
            .map_err(|e| Failure::new(EXIT_INPUT, e))?;
        pooled.ground_truth.extend(&ann.ground_truth);
        pooled.predictions.extend(&ann.predictions);
        rows.push((path.display().to_string(), row));
    }
    if rows.len() > 1 {
        rows.push((
            "all".into(),
            evaluate(&pooled, &thresholds).map_err(internal)?,
        ));
    }

    let header: Vec<String> = thresholds.iter().map(|t| format!("AP@{t}")).collect();
    println!(
        "{:<32} {:>6} {:>10} {}",
        "file",
        "n",
        "AKD",
        header.join(" ")
    );
    for (name, row) in &rows {
        let ap: Vec<String> = row
            .ap
            .iter()
            .map(|(t, f)| format!("{:>w$.3}", f, w = format!("AP@{t}").len()))
            .collect();
        println!(
            "{:<32} {:>6} {:>10.3} {}",
            name,
            row.count,
            row.akd,
            ap.join(" ")
        );
    }
    if let Some(p) = &args.out {
        let json = serde_json::to_string_pretty(&rows).map_err(internal)?;
        write_or_print(Some(p), &json)?;
    }
    Ok(())
}

fn cmd_check(args: &CheckArgs) -> CliResult {
    let s = load_with_overrides(&args.scenario, args.config.as_deref(), None)?;
    let input = |e: anyhow::Error| Failure::new(EXIT_INPUT, e);
    detect_target_frame(&s.target_cloud, &s.up_hint)
        .context("target cloud")
        .map_err(input)?;
    if let Some(cloud) = &s.demo_target_cloud {
        detect_target_frame(cloud, s.demo_up_hint.as_ref().unwrap_or(&s.up_hint))
            .context("demo target cloud")
            .map_err(input)?;
    }
    build_frame_trajectory(&s.demo)
        .context("demo keypoints")
        .map_err(input)?;
    build_function_frame(&s.test_keypoints)
        .context("test keypoints")
        .map_err(input)?;
    if s.test_cloud.is_empty() {
        return Err(input(anyhow!("test cloud is empty")));
    }
    s.optim.validate().context("optim").map_err(input)?;
    let p = &s.plan;
    println!(
        "ok: {} steps (t_g={}, t_f={}), {} obstacles, function {}",
        p.n_steps(),
        p.t_grasp(),
        p.t_func(),
        s.obstacles.len(),
        s.function.as_deref().unwrap_or("unspecified")
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    let result = match &cli.command {
        Command::Run(a) => cmd_run(a, cli.trace),
        Command::Gen(a) => cmd_gen(a),
        Command::Bench(a) => cmd_bench(a, cli.trace),
        Command::Metrics(a) => cmd_metrics(a),
        Command::Check(a) => cmd_check(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}
