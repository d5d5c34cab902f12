//! Two standing experiments.
//!
//! **Sparsity** measures how far the regularized solution's linear cost
//! sits above the exact linear optimum, per `(size, alpha)` cell: small
//! regularization reproduces a linear optimum exactly, larger values pay
//! a measurable premium for spreading flow.
//!
//! **Monotonicity** probes the structure conjecture on a single instance:
//! solutions along an increasing regularization grid should differ by a
//! fixed family of divergence-free exchange loops whose coefficients only
//! grow. The experiment solves the grid, extracts exchange terms from
//! consecutive solution pairs, and *reports* whether the conjectured
//! structure held — it never asserts it.

use crate::baseline::lp_oracle;
use crate::decomp::{decompose, divergence_free_diff, DecompError};
use crate::gen::{random_instance, CostModel};
use crate::graph::{Graph, MassVector};
use crate::par::par_map;
use crate::solver::{solve, SolveError, SolverConfig};
use crate::util::dot;
use serde::Serialize;
use std::fmt::Write as _;
use thiserror::Error;

/// Tolerance for the span membership check in the monotonicity report.
const SPAN_TOL: f64 = 1e-6;
/// Slack when judging coefficient monotonicity.
const MONOTONE_SLACK: f64 = 1e-9;

/// One instance's entry in the sparsity table.
#[derive(Debug, Clone, Serialize)]
pub struct SparsityRow {
    pub size: usize,
    pub alpha: f64,
    pub seed: u64,
    /// Exact linear optimum.
    pub lp_cost: f64,
    /// Linear cost of the regularized solution, when it converged.
    pub reg_cost: Option<f64>,
    /// `|reg_cost - lp_cost| / lp_cost`; absent for unconverged runs.
    pub rel_diff: Option<f64>,
    pub converged: bool,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct SparsityTable {
    pub rows: Vec<SparsityRow>,
}

impl SparsityTable {
    /// Mean relative difference over the cell's converged rows.
    pub fn cell_mean(&self, size: usize, alpha: f64) -> Option<f64> {
        let diffs: Vec<f64> = self
            .rows
            .iter()
            .filter(|r| r.size == size && r.alpha == alpha)
            .filter_map(|r| r.rel_diff)
            .collect();
        if diffs.is_empty() {
            None
        } else {
            Some(diffs.iter().sum::<f64>() / diffs.len() as f64)
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("size,alpha,seed,lp_cost,reg_cost,rel_diff,converged\n");
        for r in &self.rows {
            let _ = write!(out, "{},{},{},{},", r.size, r.alpha, r.seed, r.lp_cost);
            if let Some(c) = r.reg_cost {
                let _ = write!(out, "{c}");
            }
            out.push(',');
            if let Some(d) = r.rel_diff {
                let _ = write!(out, "{d}");
            }
            let _ = writeln!(out, ",{}", r.converged);
        }
        out
    }

    /// Cell means as a text table: one row per alpha, one column per size.
    pub fn to_text(&self, sizes: &[usize], alphas: &[f64]) -> String {
        let mut out = String::from("relative linear-cost difference vs exact optimum\n");
        let _ = write!(out, "{:>10}", "alpha\\n");
        for &s in sizes {
            let _ = write!(out, " {s:>12}");
        }
        out.push('\n');
        for &alpha in alphas {
            let _ = write!(out, "{alpha:>10}");
            for &size in sizes {
                match self.cell_mean(size, alpha) {
                    Some(d) => {
                        let _ = write!(out, " {d:>12.3e}");
                    }
                    None => {
                        let _ = write!(out, " {:>12}", "-");
                    }
                }
            }
            out.push('\n');
        }
        out
    }
}

/// Measures one instance at one regularization strength.
pub fn sparsity_entry(graph: &Graph, mass: &MassVector, alpha: f64) -> (f64, Option<f64>, bool) {
    let lp = lp_oracle(graph, mass).map(|r| r.objective);
    let mut config = SolverConfig::new(alpha);
    config.grad_tol = 1e-10;
    config.max_iter = 100_000;
    let reg = solve(graph, mass, &config)
        .ok()
        .filter(|r| r.converged)
        .map(|r| dot(graph.costs(), r.flow.values()));
    match (lp, reg) {
        (Ok(lp), Some(reg)) => (lp, Some(reg), true),
        (Ok(lp), None) => (lp, None, false),
        (Err(_), _) => (f64::NAN, None, false),
    }
}

/// Sweeps random unit-cost instances over the grid of sizes, strengths,
/// and seeds. Unconverged runs stay in the table, flagged, with no
/// relative difference.
pub fn exp_sparsity(sizes: &[usize], alphas: &[f64], seeds: u64) -> SparsityTable {
    let mut items = Vec::new();
    for &size in sizes {
        for &alpha in alphas {
            for seed in 0..seeds {
                items.push((size, alpha, seed));
            }
        }
    }
    let rows = par_map(items, |(size, alpha, seed)| {
        let (graph, mass) = random_instance(size, seed, CostModel::Unit)
            .expect("experiment sizes admit a degree sequence");
        let (lp_cost, reg_cost, converged) = sparsity_entry(&graph, &mass, alpha);
        let rel_diff = reg_cost.map(|c| (c - lp_cost).abs() / lp_cost.abs().max(1e-12));
        SparsityRow {
            size,
            alpha,
            seed,
            lp_cost,
            reg_cost,
            rel_diff,
            converged,
        }
    });
    SparsityTable { rows }
}

#[derive(Debug, Error)]
pub enum MonotonicityError {
    #[error("solve at alpha {alpha} did not reach the tolerance the experiment needs")]
    Unconverged { alpha: f64 },
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error(transparent)]
    Decomp(#[from] DecompError),
}

/// One exchange term of one consecutive solution pair.
#[derive(Debug, Clone, Serialize)]
pub struct LoopTerm {
    pub epsilon: f64,
    /// Node sequences of paths whose share grows with the regularization.
    pub growing_paths: Vec<Vec<usize>>,
    /// Node sequences of paths whose share shrinks.
    pub shrinking_paths: Vec<Vec<usize>>,
    /// Arc-space exchange direction: the higher-regularization flow equals
    /// the lower one plus `epsilon` times this vector.
    pub direction: Vec<f64>,
}

/// Exchange terms between one consecutive pair of grid points.
#[derive(Debug, Clone, Serialize)]
pub struct PairDiff {
    pub alpha_lo: f64,
    pub alpha_hi: f64,
    pub terms: Vec<LoopTerm>,
}

/// One distinct exchange loop tracked across the whole grid.
#[derive(Debug, Clone, Serialize)]
pub struct LoopTrack {
    /// Canonical arc-space direction (oriented along net growth).
    pub direction: Vec<f64>,
    /// Its coefficient in `J(alpha_j) - J(alpha_0)` for each grid point.
    pub coefficients: Vec<f64>,
    /// Whether the coefficients never decrease along the grid.
    pub monotone: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct MonotonicityReport {
    pub alphas: Vec<f64>,
    pub pairs: Vec<PairDiff>,
    /// Count of distinct exchange directions seen across all pairs.
    pub distinct_directions: usize,
    /// Per-direction coefficient tracks; empty when the directions are
    /// linearly dependent (coefficients not identifiable).
    pub loops: Vec<LoopTrack>,
    /// Largest distance of any `J(alpha_j) - J(alpha_0)` from the span of
    /// the observed loop directions.
    pub max_span_residual: f64,
    /// True when every intermediate solution lies in that span within
    /// tolerance.
    pub span_ok: bool,
    /// True when every tracked loop's coefficient sequence is
    /// nondecreasing; absent when the directions are linearly dependent
    /// and coefficients are not identifiable.
    pub eps_monotone: Option<bool>,
}

impl MonotonicityReport {
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "regularization grid: {:?}", self.alphas);
        for pair in &self.pairs {
            let _ = writeln!(
                out,
                "alpha {} -> {}: {} exchange term(s)",
                pair.alpha_lo,
                pair.alpha_hi,
                pair.terms.len()
            );
            for term in &pair.terms {
                let _ = writeln!(
                    out,
                    "  eps = {:.6e}  growing {:?}  shrinking {:?}",
                    term.epsilon, term.growing_paths, term.shrinking_paths
                );
            }
        }
        let _ = writeln!(
            out,
            "distinct loops: {}; span residual {:.3e} ({}); coefficients monotone: {}",
            self.distinct_directions,
            self.max_span_residual,
            if self.span_ok { "within tolerance" } else { "OUTSIDE tolerance" },
            match self.eps_monotone {
                Some(true) => "yes",
                Some(false) => "NO",
                None => "not identifiable",
            }
        );
        out
    }
}

/// Flips `v` in place so its first nonzero entry is positive.
fn canonicalize(v: &mut [f64]) {
    if let Some(x) = v.iter().find(|x| **x != 0.0) {
        if *x < 0.0 {
            for x in v.iter_mut() {
                *x = -*x;
            }
        }
    }
}

/// Least squares `argmin |B x - d|` via normal equations; `None` when the
/// Gram matrix is numerically singular.
fn least_squares(columns: &[Vec<f64>], d: &[f64]) -> Option<Vec<f64>> {
    let k = columns.len();
    let mut gram = vec![vec![0.0; k]; k];
    let mut rhs = vec![0.0; k];
    for i in 0..k {
        for j in 0..k {
            gram[i][j] = dot(&columns[i], &columns[j]);
        }
        rhs[i] = dot(&columns[i], d);
    }
    // Gaussian elimination with partial pivoting.
    for col in 0..k {
        let pivot = (col..k)
            .max_by(|&a, &b| gram[a][col].abs().total_cmp(&gram[b][col].abs()))
            .unwrap();
        if gram[pivot][col].abs() < 1e-12 {
            return None;
        }
        gram.swap(col, pivot);
        rhs.swap(col, pivot);
        for row in col + 1..k {
            let factor = gram[row][col] / gram[col][col];
            for c in col..k {
                gram[row][c] -= factor * gram[col][c];
            }
            rhs[row] -= factor * rhs[col];
        }
    }
    let mut x = vec![0.0; k];
    for row in (0..k).rev() {
        let mut acc = rhs[row];
        for c in row + 1..k {
            acc -= gram[row][c] * x[c];
        }
        x[row] = acc / gram[row][row];
    }
    Some(x)
}

/// Solves the instance along an increasing regularization grid and
/// reports the exchange-loop structure of consecutive solution
/// differences. A single-point grid yields an empty report.
pub fn exp_monotonicity(
    graph: &Graph,
    mass: &MassVector,
    alpha_grid: &[f64],
) -> Result<MonotonicityReport, MonotonicityError> {
    assert!(!alpha_grid.is_empty(), "grid must be nonempty");
    assert!(
        alpha_grid.windows(2).all(|w| w[0] < w[1]),
        "grid must be strictly increasing"
    );

    let mut flows = Vec::with_capacity(alpha_grid.len());
    let mut decomps = Vec::with_capacity(alpha_grid.len());
    for &alpha in alpha_grid {
        // The decomposition validates divergence to 1e-9 and the
        // divergence error is bounded by grad_tol / alpha, so the
        // tolerance scales down with alpha (floored near machine noise).
        let mut config = SolverConfig::new(alpha);
        config.grad_tol = (alpha * 1e-10).clamp(1e-14, 1e-10);
        config.max_iter = 200_000;
        let report = solve(graph, mass, &config)?;
        if !report.converged {
            return Err(MonotonicityError::Unconverged { alpha });
        }
        decomps.push(decompose(graph, &report.flow, mass)?);
        flows.push(report.flow);
    }

    let mut pairs = Vec::new();
    let mut directions: Vec<Vec<f64>> = Vec::new();
    for i in 0..alpha_grid.len().saturating_sub(1) {
        let diff = divergence_free_diff(graph, &decomps[i], &decomps[i + 1], mass)?;
        let mut terms = Vec::new();
        for (t, term) in diff.terms.iter().enumerate() {
            // Orient the exchange so the higher-regularization flow is the
            // lower one plus epsilon times the direction.
            let direction: Vec<f64> = diff
                .term_arc_flow(graph, t)
                .into_iter()
                .map(|x| -x)
                .collect();
            let mut canonical = direction.clone();
            canonicalize(&mut canonical);
            if !directions.iter().any(|d| d == &canonical) {
                directions.push(canonical);
            }
            terms.push(LoopTerm {
                epsilon: term.epsilon,
                growing_paths: term
                    .plus_paths
                    .iter()
                    .map(|&p| diff.universe[p].nodes.clone())
                    .collect(),
                shrinking_paths: term
                    .minus_paths
                    .iter()
                    .map(|&p| diff.universe[p].nodes.clone())
                    .collect(),
                direction,
            });
        }
        pairs.push(PairDiff {
            alpha_lo: alpha_grid[i],
            alpha_hi: alpha_grid[i + 1],
            terms,
        });
    }

    // Fit every offset from the first solution in the span of the observed
    // loop directions.
    let mut max_span_residual = 0.0_f64;
    let mut coefficient_rows: Option<Vec<Vec<f64>>> =
        Some(vec![vec![0.0; alpha_grid.len()]; directions.len()]);
    for j in 1..alpha_grid.len() {
        let d: Vec<f64> = flows[j]
            .values()
            .iter()
            .zip(flows[0].values())
            .map(|(a, b)| a - b)
            .collect();
        if directions.is_empty() {
            max_span_residual = max_span_residual
                .max(d.iter().fold(0.0_f64, |m, x| m.max(x.abs())));
            continue;
        }
        match least_squares(&directions, &d) {
            Some(x) => {
                let mut residual = d.clone();
                for (k, column) in directions.iter().enumerate() {
                    for (r, c) in residual.iter_mut().zip(column) {
                        *r -= x[k] * c;
                    }
                }
                max_span_residual = max_span_residual
                    .max(residual.iter().fold(0.0_f64, |m, v| m.max(v.abs())));
                if let Some(rows) = &mut coefficient_rows {
                    for (k, &xk) in x.iter().enumerate() {
                        rows[k][j] = xk;
                    }
                }
            }
            None => {
                coefficient_rows = None;
                // Span membership can still be judged without unique
                // coefficients, via orthogonal projection.
                let residual = projection_residual(&directions, &d);
                max_span_residual = max_span_residual.max(residual);
            }
        }
    }

    let loops = match &coefficient_rows {
        Some(rows) => directions
            .iter()
            .zip(rows)
            .map(|(direction, coeffs)| {
                // Orient along net growth so "monotone" means growing.
                let mut direction = direction.clone();
                let mut coeffs = coeffs.clone();
                if coeffs.last().copied().unwrap_or(0.0) < 0.0 {
                    for x in &mut direction {
                        *x = -*x;
                    }
                    for c in &mut coeffs {
                        *c = -*c;
                    }
                }
                let monotone = coeffs
                    .windows(2)
                    .all(|w| w[1] >= w[0] - MONOTONE_SLACK * (1.0 + w[0].abs()));
                LoopTrack {
                    direction,
                    coefficients: coeffs,
                    monotone,
                }
            })
            .collect(),
        None => Vec::new(),
    };
    let eps_monotone = coefficient_rows
        .as_ref()
        .map(|_| loops.iter().all(|l| l.monotone));

    Ok(MonotonicityReport {
        alphas: alpha_grid.to_vec(),
        pairs,
        distinct_directions: directions.len(),
        loops,
        max_span_residual,
        span_ok: max_span_residual <= SPAN_TOL,
        eps_monotone,
    })
}

/// Max-norm residual of `d` after projecting onto the span of `columns`,
/// via modified Gram-Schmidt.
fn projection_residual(columns: &[Vec<f64>], d: &[f64]) -> f64 {
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for column in columns {
        let mut v = column.clone();
        for b in &basis {
            let coeff = dot(&v, b);
            for (x, y) in v.iter_mut().zip(b) {
                *x -= coeff * y;
            }
        }
        let norm = dot(&v, &v).sqrt();
        if norm > 1e-12 {
            for x in &mut v {
                *x /= norm;
            }
            basis.push(v);
        }
    }
    let mut residual = d.to_vec();
    for b in &basis {
        let coeff = dot(&residual, b);
        for (x, y) in residual.iter_mut().zip(b) {
            *x -= coeff * y;
        }
    }
    residual.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
}
