//! Benchmark harness: run every solver over a grid of instance sizes,
//! regularization strengths, and seeds, and emit CSV.
//!
//! Each `(size, alpha, seed)` cell generates one random unit-cost
//! instance. The reference value for relative errors is the active-set
//! solver run to gradient tolerance 1e-12 with no iteration cap, taken as
//! the true optimum. Failures (non-convergence, solver errors) become
//! records with `converged = false`, never panics, so a sweep always
//! produces a full table. Record order — and every field except wall
//! time — is a pure function of the spec.

use crate::baseline::{gradient_ascent, lp_oracle, precond_gradient};
use crate::gen::{random_instance, CostModel};
use crate::graph::{FlowVector, Graph, MassVector};
use crate::par::{par_map, seq_map};
use crate::solver::{solve, SolverConfig};
use crate::util::dot;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::time::Instant;

/// Gradient tolerance of the reference run that defines "the optimum".
const REFERENCE_GRAD_TOL: f64 = 1e-12;
/// Iteration budget of the reference run; effectively uncapped.
const REFERENCE_MAX_ITER: usize = 1_000_000;

/// Solvers the harness can run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverKind {
    /// Active-set ascent with incrementally maintained factorization.
    HessUpdate,
    /// Plain gradient ascent with exact line search.
    GradDescent,
    /// Gradient preconditioned with the fixed full-graph factorization.
    PrecondGrad,
    /// Exact unregularized linear oracle.
    Oracle,
}

impl SolverKind {
    pub const ALL: [SolverKind; 4] = [
        SolverKind::HessUpdate,
        SolverKind::GradDescent,
        SolverKind::PrecondGrad,
        SolverKind::Oracle,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SolverKind::HessUpdate => "hessupdate",
            SolverKind::GradDescent => "graddescent",
            SolverKind::PrecondGrad => "precondgrad",
            SolverKind::Oracle => "oracle",
        }
    }
}

impl fmt::Display for SolverKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// What to sweep. Deserializes from JSON; omitted fields take defaults.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct BenchSpec {
    pub sizes: Vec<usize>,
    pub alphas: Vec<f64>,
    pub seeds_per_cell: u64,
    pub solvers: Vec<SolverKind>,
    pub max_iter: usize,
    pub grad_tol: f64,
}

impl Default for BenchSpec {
    fn default() -> Self {
        BenchSpec {
            sizes: vec![50, 100],
            alphas: vec![1e-2, 1e-1, 1.0],
            seeds_per_cell: 10,
            solvers: SolverKind::ALL.to_vec(),
            max_iter: 3000,
            grad_tol: 1e-8,
        }
    }
}

/// One solver run on one instance.
#[derive(Debug, Clone, Serialize)]
pub struct BenchRecord {
    pub size: usize,
    pub alpha: f64,
    pub seed: u64,
    pub solver: SolverKind,
    pub time_s: f64,
    pub iters: usize,
    pub converged: bool,
    /// Relative distance of the achieved objective from the reference
    /// optimum; absent for the oracle (it solves a different objective)
    /// and when no reference value exists.
    pub rel_err: Option<f64>,
    /// Linear cost of the returned flow.
    pub l1_cost: Option<f64>,
}

/// Per-`(size, alpha, solver)` averages over seeds.
#[derive(Debug, Clone, Serialize)]
pub struct CellSummary {
    pub size: usize,
    pub alpha: f64,
    pub solver: SolverKind,
    pub runs: usize,
    pub converged_frac: f64,
    pub time_s_mean: f64,
    pub iters_mean: f64,
    pub rel_err_mean: Option<f64>,
    pub l1_cost_mean: Option<f64>,
}

/// Runs the sweep with work items fanned out via [`par_map`].
pub fn run(spec: &BenchSpec) -> Vec<BenchRecord> {
    let batches = par_map(work_items(spec), |item| run_item(spec, item));
    batches.into_iter().flatten().collect()
}

/// Runs the identical sweep strictly sequentially.
pub fn run_sequential(spec: &BenchSpec) -> Vec<BenchRecord> {
    let batches = seq_map(work_items(spec), |item| run_item(spec, item));
    batches.into_iter().flatten().collect()
}

type Item = (usize, f64, u64);

fn work_items(spec: &BenchSpec) -> Vec<Item> {
    let mut items = Vec::new();
    for &size in &spec.sizes {
        for &alpha in &spec.alphas {
            for seed in 0..spec.seeds_per_cell {
                items.push((size, alpha, seed));
            }
        }
    }
    items
}

fn run_item(spec: &BenchSpec, (size, alpha, seed): Item) -> Vec<BenchRecord> {
    let (graph, mass) = random_instance(size, seed, CostModel::Unit)
        .expect("benchmark sizes admit a degree sequence");
    let reference = reference_value(&graph, &mass, alpha, seed);
    spec.solvers
        .iter()
        .map(|&solver| run_solver(spec, &graph, &mass, size, alpha, seed, solver, reference))
        .collect()
}

fn reference_value(graph: &Graph, mass: &MassVector, alpha: f64, seed: u64) -> Option<f64> {
    let mut config = SolverConfig::new(alpha);
    config.grad_tol = REFERENCE_GRAD_TOL;
    config.max_iter = REFERENCE_MAX_ITER;
    config.seed = seed;
    solve(graph, mass, &config).ok().map(|r| r.dual_value)
}

#[allow(clippy::too_many_arguments)]
fn run_solver(
    spec: &BenchSpec,
    graph: &Graph,
    mass: &MassVector,
    size: usize,
    alpha: f64,
    seed: u64,
    solver: SolverKind,
    reference: Option<f64>,
) -> BenchRecord {
    let mut record = BenchRecord {
        size,
        alpha,
        seed,
        solver,
        time_s: 0.0,
        iters: 0,
        converged: false,
        rel_err: None,
        l1_cost: None,
    };
    let start = Instant::now();
    match solver {
        SolverKind::Oracle => {
            if let Ok(result) = lp_oracle(graph, mass) {
                record.converged = true;
                record.iters = result.augmentations;
                record.l1_cost = Some(result.objective);
            }
            record.time_s = start.elapsed().as_secs_f64();
        }
        _ => {
            let mut config = SolverConfig::new(alpha);
            config.grad_tol = spec.grad_tol;
            config.max_iter = spec.max_iter;
            config.seed = seed;
            let outcome = match solver {
                SolverKind::HessUpdate => solve(graph, mass, &config),
                SolverKind::GradDescent => gradient_ascent(graph, mass, &config),
                SolverKind::PrecondGrad => precond_gradient(graph, mass, &config),
                SolverKind::Oracle => unreachable!(),
            };
            record.time_s = start.elapsed().as_secs_f64();
            if let Ok(report) = outcome {
                record.iters = report.iterations;
                record.converged = report.converged;
                record.l1_cost = Some(linear_cost(graph, &report.flow));
                record.rel_err = reference
                    .map(|opt| (report.dual_value - opt).abs() / opt.abs().max(1e-12));
                record.time_s = report.wall_time_s;
            }
        }
    }
    record
}

fn linear_cost(graph: &Graph, flow: &FlowVector) -> f64 {
    dot(graph.costs(), flow.values())
}

/// Collapses records into per-cell averages, in first-appearance order.
pub fn aggregate(records: &[BenchRecord]) -> Vec<CellSummary> {
    let mut cells: Vec<CellSummary> = Vec::new();
    for r in records {
        let key = (r.size, r.alpha, r.solver);
        let cell = match cells
            .iter_mut()
            .find(|c| (c.size, c.alpha, c.solver) == key)
        {
            Some(c) => c,
            None => {
                cells.push(CellSummary {
                    size: r.size,
                    alpha: r.alpha,
                    solver: r.solver,
                    runs: 0,
                    converged_frac: 0.0,
                    time_s_mean: 0.0,
                    iters_mean: 0.0,
                    rel_err_mean: None,
                    l1_cost_mean: None,
                });
                cells.last_mut().unwrap()
            }
        };
        cell.runs += 1;
        cell.converged_frac += if r.converged { 1.0 } else { 0.0 };
        cell.time_s_mean += r.time_s;
        cell.iters_mean += r.iters as f64;
        if let Some(e) = r.rel_err {
            *cell.rel_err_mean.get_or_insert(0.0) += e;
        }
        if let Some(c) = r.l1_cost {
            *cell.l1_cost_mean.get_or_insert(0.0) += c;
        }
    }
    for cell in &mut cells {
        let runs = cell.runs as f64;
        cell.converged_frac /= runs;
        cell.time_s_mean /= runs;
        cell.iters_mean /= runs;
        // Optional columns average over the rows that carried them; with a
        // single solver per cell that is either all rows or none.
        if let Some(e) = &mut cell.rel_err_mean {
            *e /= runs;
        }
        if let Some(c) = &mut cell.l1_cost_mean {
            *c /= runs;
        }
    }
    cells
}

fn push_opt(out: &mut String, value: Option<f64>) {
    if let Some(v) = value {
        out.push_str(&v.to_string());
    }
}

/// Per-run records as CSV with the fixed column set.
pub fn records_to_csv(records: &[BenchRecord]) -> String {
    let mut out = String::from("size,alpha,seed,solver,time_s,iters,converged,rel_err,l1_cost\n");
    for r in records {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},",
            r.size, r.alpha, r.seed, r.solver, r.time_s, r.iters, r.converged
        ));
        push_opt(&mut out, r.rel_err);
        out.push(',');
        push_opt(&mut out, r.l1_cost);
        out.push('\n');
    }
    out
}

/// Cell averages as CSV.
pub fn summary_to_csv(cells: &[CellSummary]) -> String {
    let mut out = String::from(
        "size,alpha,solver,runs,converged_frac,time_s_mean,iters_mean,rel_err_mean,l1_cost_mean\n",
    );
    for c in cells {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},",
            c.size, c.alpha, c.solver, c.runs, c.converged_frac, c.time_s_mean, c.iters_mean
        ));
        push_opt(&mut out, c.rel_err_mean);
        out.push(',');
        push_opt(&mut out, c.l1_cost_mean);
        out.push('\n');
    }
    out
}
