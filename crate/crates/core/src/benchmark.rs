//! Batch runs over generated scenarios with a geometric success check.
//!
//! A run succeeds when the pipeline completes, the solver converged, the
//! aligned keyframe is within tolerance of the demonstration, and every
//! constraint holds when re-checked on the returned trajectory.

use std::collections::BTreeMap;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::pipeline::run_pipeline;
use crate::synth::{generate_scenario, TaskKind, Variation};
use crate::trajopt::{check_constraints, OptimConfig};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SuccessTolerance {
    /// Function point offset at the keyframe, meters.
    pub point: f64,
    /// Axis and normal deviation at the keyframe, radians.
    pub angle: f64,
}

impl Default for SuccessTolerance {
    fn default() -> Self {
        SuccessTolerance {
            point: 0.03,
            angle: 15f64.to_radians(),
        }
    }
}

/// A cell run with a modified solver configuration, expected to fail.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ControlCell {
    pub name: String,
    pub kind: TaskKind,
    pub variation: Variation,
    pub optim: OptimConfig,
}

impl ControlCell {
    /// Velocity and rotation budgets far too small to reach the keyframe.
    pub fn default_controls() -> Vec<ControlCell> {
        let base = OptimConfig::default();
        vec![
            ControlCell {
                name: "tiny-velocity".into(),
                kind: TaskKind::Pour,
                variation: Variation::Spatial,
                optim: OptimConfig {
                    v_max: 1e-3,
                    ..base
                },
            },
            ControlCell {
                name: "tiny-rotation".into(),
                kind: TaskKind::Cut,
                variation: Variation::Category,
                optim: OptimConfig {
                    omega_max: 1e-3,
                    ..base
                },
            },
        ]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchConfig {
    pub kinds: Vec<TaskKind>,
    pub variations: Vec<Variation>,
    pub n_seeds: usize,
    pub first_seed: u64,
    pub optim: OptimConfig,
    pub tolerance: SuccessTolerance,
    pub controls: Vec<ControlCell>,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            kinds: TaskKind::ALL.to_vec(),
            variations: Variation::ALL.to_vec(),
            n_seeds: 10,
            first_seed: 0,
            optim: OptimConfig::default(),
            tolerance: SuccessTolerance::default(),
            controls: ControlCell::default_controls(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunRecord {
    pub cell: usize,
    pub kind: TaskKind,
    pub variation: Variation,
    pub seed: u64,
    pub success: bool,
    /// Failure tag when `success` is false.
    pub failure: Option<String>,
    pub message: Option<String>,
    pub converged: bool,
    pub final_cost: Option<f64>,
    pub max_violation: Option<f64>,
    pub point_residual: Option<f64>,
    pub angle_residual: Option<f64>,
    pub iterations: usize,
    /// `(cumulative inner iterations, cost)` after each outer iteration.
    pub cost_trace: Vec<(usize, f64)>,
    #[serde(skip)]
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellRow {
    pub index: usize,
    pub kind: TaskKind,
    pub variation: Variation,
    pub control: Option<String>,
    pub runs: usize,
    pub successes: usize,
    pub success_rate: f64,
    pub failures: BTreeMap<String, usize>,
}

impl CellRow {
    pub fn label(&self) -> String {
        match &self.control {
            Some(c) => format!("{}/{} [{c}]", self.kind, self.variation),
            None => format!("{}/{}", self.kind, self.variation),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchTable {
    pub rows: Vec<CellRow>,
    /// Success rate per variation, control cells excluded.
    pub by_variation: Vec<(Variation, f64)>,
    /// Success rate over all non-control runs.
    pub overall: f64,
}

impl BenchTable {
    pub fn variation_rate(&self, v: Variation) -> Option<f64> {
        self.by_variation
            .iter()
            .find(|(x, _)| *x == v)
            .map(|(_, r)| *r)
    }

    pub fn to_csv(&self) -> String {
        let mut out =
            String::from("cell,kind,variation,control,runs,successes,success_rate,failures\n");
        for r in &self.rows {
            let failures: Vec<String> =
                r.failures.iter().map(|(k, n)| format!("{k}:{n}")).collect();
            out.push_str(&format!(
                "{},{},{},{},{},{},{:.4},{}\n",
                r.index,
                r.kind,
                r.variation,
                r.control.as_deref().unwrap_or(""),
                r.runs,
                r.successes,
                r.success_rate,
                failures.join(";")
            ));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Histogram {
    /// Bin edges; bin `i` covers `[edges[i], edges[i+1])`.
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
    /// Values below the first edge, including exact zeros.
    pub underflow: usize,
    pub overflow: usize,
}

impl Histogram {
    /// Decade bins from `10^lo` to `10^hi`.
    pub fn log10(values: &[f64], lo: i32, hi: i32) -> Histogram {
        let edges: Vec<f64> = (lo..=hi).map(|e| 10f64.powi(e)).collect();
        let mut h = Histogram {
            counts: vec![0; edges.len() - 1],
            edges,
            underflow: 0,
            overflow: 0,
        };
        for v in values {
            if *v < h.edges[0] {
                h.underflow += 1;
            } else if *v >= *h.edges.last().unwrap() {
                h.overflow += 1;
            } else {
                let i = h.edges.windows(2).position(|w| *v < w[1]).unwrap();
                h.counts[i] += 1;
            }
        }
        h
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CostSeries {
    pub cell: usize,
    pub seed: u64,
    pub iterations: Vec<usize>,
    pub cost: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlotSeries {
    pub cost_vs_iteration: Vec<CostSeries>,
    pub point_residuals: Histogram,
    pub angle_residuals: Histogram,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchmarkReport {
    pub table: BenchTable,
    pub runs: Vec<RunRecord>,
    pub series: PlotSeries,
    pub seconds: f64,
}

struct Job {
    cell: usize,
    kind: TaskKind,
    variation: Variation,
    seed: u64,
    optim: OptimConfig,
}

fn run_one(job: &Job, tol: &SuccessTolerance) -> RunRecord {
    let start = Instant::now();
    let mut scenario = generate_scenario(job.kind, job.variation, job.seed).scenario;
    scenario.optim = job.optim;
    let mut rec = RunRecord {
        cell: job.cell,
        kind: job.kind,
        variation: job.variation,
        seed: job.seed,
        success: false,
        failure: None,
        message: None,
        converged: false,
        final_cost: None,
        max_violation: None,
        point_residual: None,
        angle_residual: None,
        iterations: 0,
        cost_trace: Vec::new(),
        seconds: 0.0,
    };
    match run_pipeline(&scenario) {
        Err(e) => {
            rec.failure = Some(e.tag().to_string());
            rec.message = Some(format!("{e}: {}", e.source));
        }
        Ok(out) => {
            let sol = &out.solution;
            let a = &out.report.alignment;
            rec.converged = sol.converged;
            rec.final_cost = Some(sol.final_cost);
            rec.iterations = sol.iterations;
            rec.point_residual = Some(a.point_residual);
            rec.angle_residual = Some(a.axis_residual.max(a.plane_residual));
            let mut total = 0;
            rec.cost_trace = sol
                .trace
                .iter()
                .map(|t| {
                    total += t.inner_iterations;
                    (total, t.cost)
                })
                .collect();
            let posthoc =
                check_constraints(&sol.trajectory, &out.problem).map(|c| c.max_violation());
            rec.max_violation = posthoc.as_ref().ok().copied();
            let failure = if !sol.converged {
                Some("NotConverged")
            } else if a.point_residual > tol.point
                || a.axis_residual.max(a.plane_residual) > tol.angle
            {
                Some("ResidualExceeded")
            } else if !matches!(posthoc, Ok(v) if v <= job.optim.constraint_tol) {
                Some("ConstraintViolated")
            } else {
                None
            };
            rec.success = failure.is_none();
            rec.failure = failure.map(str::to_string);
        }
    }
    rec.seconds = start.elapsed().as_secs_f64();
    rec
}

/// Runs every `(kind, variation)` cell for `n_seeds` seeds, then the control cells.
/// Runs execute in parallel; results are assembled in cell order.
pub fn run_benchmark(cfg: &BenchConfig) -> BenchmarkReport {
    let start = Instant::now();
    let mut cells: Vec<(TaskKind, Variation, Option<&ControlCell>)> = Vec::new();
    for k in &cfg.kinds {
        for v in &cfg.variations {
            cells.push((*k, *v, None));
        }
    }
    for c in &cfg.controls {
        cells.push((c.kind, c.variation, Some(c)));
    }
    let jobs: Vec<Job> = cells
        .iter()
        .enumerate()
        .flat_map(|(cell, (kind, variation, control))| {
            let optim = control.map_or(cfg.optim, |c| c.optim);
            (0..cfg.n_seeds as u64).map(move |i| Job {
                cell,
                kind: *kind,
                variation: *variation,
                seed: cfg.first_seed + i,
                optim,
            })
        })
        .collect();

    let runs: Vec<RunRecord> = jobs
        .par_iter()
        .map(|j| run_one(j, &cfg.tolerance))
        .collect();
    for r in &runs {
        log::info!(
            "{}/{} seed {}: {}",
            r.kind,
            r.variation,
            r.seed,
            r.failure.as_deref().unwrap_or("ok")
        );
    }

    let rows: Vec<CellRow> = cells
        .iter()
        .enumerate()
        .map(|(index, (kind, variation, control))| {
            let mine: Vec<&RunRecord> = runs.iter().filter(|r| r.cell == index).collect();
            let successes = mine.iter().filter(|r| r.success).count();
            let mut failures = BTreeMap::new();
            for r in &mine {
                if let Some(f) = &r.failure {
                    *failures.entry(f.clone()).or_insert(0) += 1;
                }
            }
            CellRow {
                index,
                kind: *kind,
                variation: *variation,
                control: control.map(|c| c.name.clone()),
                runs: mine.len(),
                successes,
                success_rate: rate(successes, mine.len()),
                failures,
            }
        })
        .collect();

    let regular: Vec<&RunRecord> = runs
        .iter()
        .filter(|r| rows[r.cell].control.is_none())
        .collect();
    let by_variation = cfg
        .variations
        .iter()
        .map(|v| {
            let of: Vec<_> = regular.iter().filter(|r| r.variation == *v).collect();
            (*v, rate(of.iter().filter(|r| r.success).count(), of.len()))
        })
        .collect();
    let overall = rate(regular.iter().filter(|r| r.success).count(), regular.len());

    let points: Vec<f64> = regular.iter().filter_map(|r| r.point_residual).collect();
    let angles: Vec<f64> = regular.iter().filter_map(|r| r.angle_residual).collect();
    let series = PlotSeries {
        cost_vs_iteration: runs
            .iter()
            .filter(|r| !r.cost_trace.is_empty())
            .map(|r| CostSeries {
                cell: r.cell,
                seed: r.seed,
                iterations: r.cost_trace.iter().map(|(i, _)| *i).collect(),
                cost: r.cost_trace.iter().map(|(_, c)| *c).collect(),
            })
            .collect(),
        point_residuals: Histogram::log10(&points, -16, 0),
        angle_residuals: Histogram::log10(&angles, -16, 0),
    };

    BenchmarkReport {
        table: BenchTable {
            rows,
            by_variation,
            overall,
        },
        runs,
        series,
        seconds: start.elapsed().as_secs_f64(),
    }
}

fn rate(successes: usize, total: usize) -> f64 {
    if total == 0 {
        0.0
    } else {
        successes as f64 / total as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> BenchConfig {
        BenchConfig {
            kinds: vec![TaskKind::Scoop, TaskKind::Pound],
            variations: vec![Variation::Spatial],
            n_seeds: 2,
            ..BenchConfig::default()
        }
    }

    #[test]
    fn controls_fail_with_boundary_tag() {
        let rep = run_benchmark(&small());
        assert_eq!(rep.table.rows.len(), 4);
        for row in &rep.table.rows[2..] {
            assert_eq!(row.success_rate, 0.0);
            assert_eq!(row.failures.get("InfeasibleBoundary"), Some(&2));
        }
        assert_eq!(rep.table.variation_rate(Variation::Spatial), Some(1.0));
    }

    #[test]
    fn table_is_reproducible() {
        let cfg = BenchConfig {
            controls: vec![],
            ..small()
        };
        assert_eq!(run_benchmark(&cfg).table, run_benchmark(&cfg).table);
    }

    #[test]
    fn histogram_bins() {
        let h = Histogram::log10(&[0.0, 1e-20, 5e-3, 2e-3, 0.5, 3.0], -4, 0);
        assert_eq!(h.counts, [0, 2, 0, 1]);
        assert_eq!((h.underflow, h.overflow), (2, 1));
    }
}
