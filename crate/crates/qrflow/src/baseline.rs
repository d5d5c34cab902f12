//! Reference solvers to compare the factored ascent against.
//!
//! Two first-order baselines share the main solver's line search and
//! stopping rule but replace the maintained second-order direction:
//! [`gradient_ascent`] never builds a factor at all, and
//! [`precond_gradient`] preconditions every second step with a single
//! upfront factorization of the full-graph Laplacian that is never
//! updated afterwards.
//!
//! [`lp_oracle`] solves the *unregularized* problem `min cᵀJ, DᵀJ = f,
//! J ≥ 0` exactly with successive shortest paths on the residual network,
//! maintaining node prices so that Dijkstra only ever sees nonnegative
//! reduced costs. Its result carries an optimality certificate: prices
//! under which every edge has nonnegative reduced cost and every
//! flow-carrying edge has zero reduced cost.

use crate::graph::{DualPotential, FlowVector, Graph, MassVector};
use crate::solver::{run_ascent, AscentMode, SolveError, SolveReport, SolverConfig};
use crate::util::dot;
use std::cmp::Ordering;
use std::collections::BinaryHeap;
use thiserror::Error;

/// Remaining imbalance below this absolute threshold counts as served;
/// matches the mass-balance tolerance on input vectors.
pub const RESIDUAL_TOL: f64 = 1e-9;

/// Reduced costs this far below zero are treated as exact zeros (floating
/// point noise from price updates); anything worse trips a debug assert.
const REDUCED_COST_SLACK: f64 = 1e-12;

/// Pure gradient ascent on the dual: every step takes the mean-centered
/// gradient with the same exact line search as the main solver. No
/// Laplacian factor is ever formed.
pub fn gradient_ascent(
    graph: &Graph,
    mass: &MassVector,
    config: &SolverConfig,
) -> Result<SolveReport, SolveError> {
    run_ascent(graph, mass, config, AscentMode::GradientOnly)
}

/// Gradient ascent with a static preconditioner: even-numbered steps apply
/// the pseudoinverse of the *full-graph* Laplacian (factored once up
/// front, never updated), odd steps take the plain gradient. Shares the
/// main solver's line search and stopping rule.
pub fn precond_gradient(
    graph: &Graph,
    mass: &MassVector,
    config: &SolverConfig,
) -> Result<SolveReport, SolveError> {
    run_ascent(graph, mass, config, AscentMode::PrecondGrad)
}

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("no feasible flow: {unmet:e} units of demand cannot be reached from any remaining supply")]
    Infeasible { unmet: f64 },
    #[error("augmentation limit {0} exceeded")]
    AugmentationLimit(usize),
}

/// Exact solution of the linear (unregularized) problem.
#[derive(Debug, Clone)]
pub struct OracleResult {
    pub flow: FlowVector,
    /// Node prices certifying optimality: reduced costs
    /// `c_e + price[tail] - price[head]` are nonnegative everywhere and
    /// zero on every edge carrying flow.
    pub prices: DualPotential,
    /// Linear objective `cᵀJ`.
    pub objective: f64,
    /// Number of augmenting shortest paths used.
    pub augmentations: usize,
}

/// Largest violation of the optimality system for a candidate linear-
/// problem solution: divergence mismatch against `mass`, negative flow,
/// negative reduced cost, or nonzero reduced cost on a carrying edge.
pub fn certificate_violation(
    graph: &Graph,
    mass: &MassVector,
    flow: &FlowVector,
    prices: &[f64],
) -> f64 {
    let j = flow.values();
    let div = graph.divergence(j);
    let mut worst: f64 = 0.0;
    for (d, f) in div.iter().zip(mass.values()) {
        worst = worst.max((d - f).abs());
    }
    for (e, &(t, h)) in graph.edges().iter().enumerate() {
        let reduced = graph.cost(e) + prices[t] - prices[h];
        worst = worst.max(-j[e]);
        worst = worst.max(-reduced);
        if j[e] > 0.0 {
            worst = worst.max(reduced.abs());
        }
    }
    worst
}

/// Entry on the Dijkstra heap, ordered by smallest distance first.
#[derive(PartialEq)]
struct HeapEntry {
    dist: f64,
    node: usize,
}

impl Eq for HeapEntry {}

impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        // Reverse: BinaryHeap is a max-heap, we want the smallest distance.
        other
            .dist
            .partial_cmp(&self.dist)
            .unwrap_or(Ordering::Equal)
            .then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// How the shortest-path tree reached a node.
#[derive(Clone, Copy)]
enum Step {
    Root,
    Forward { edge: usize, from: usize },
    Backward { edge: usize, from: usize },
}

/// Solves `min cᵀJ` over `J ≥ 0` with `DᵀJ = mass` by successive shortest
/// paths. Runs in O(paths · m log n); uncapacitated instances need few
/// augmentations in practice.
pub fn lp_oracle(graph: &Graph, mass: &MassVector) -> Result<OracleResult, OracleError> {
    let n = graph.node_count();
    let m = graph.edge_count();
    let f = mass.values();

    // Costs are nonnegative by construction, so zero prices already make
    // every reduced cost nonnegative.
    let mut prices = vec![0.0f64; n];
    let mut flow = vec![0.0f64; m];
    // need[v] > 0: the node still awaits inflow; need[v] < 0: it still has
    // supply to push out.
    let mut need: Vec<f64> = f.to_vec();
    let mut augmentations = 0usize;
    let augmentation_limit = n * n + 100;

    loop {
        if !need.iter().any(|&d| d > RESIDUAL_TOL) {
            break;
        }
        if augmentations >= augmentation_limit {
            return Err(OracleError::AugmentationLimit(augmentation_limit));
        }

        // Multi-source Dijkstra over residual arcs with reduced costs,
        // stopped at the first settled node that still awaits inflow.
        let mut dist = vec![f64::INFINITY; n];
        let mut parent = vec![Step::Root; n];
        let mut settled = vec![false; n];
        let mut heap = BinaryHeap::new();
        for v in 0..n {
            if need[v] < -RESIDUAL_TOL {
                dist[v] = 0.0;
                heap.push(HeapEntry { dist: 0.0, node: v });
            }
        }
        let mut reached: Option<usize> = None;
        while let Some(HeapEntry { dist: d, node: u }) = heap.pop() {
            if settled[u] {
                continue;
            }
            settled[u] = true;
            if need[u] > RESIDUAL_TOL {
                reached = Some(u);
                break;
            }
            for &e in graph.out_edges(u) {
                let v = graph.head(e);
                let reduced = reduced_cost(graph.cost(e) + prices[u] - prices[v]);
                if d + reduced < dist[v] {
                    dist[v] = d + reduced;
                    parent[v] = Step::Forward { edge: e, from: u };
                    heap.push(HeapEntry { dist: dist[v], node: v });
                }
            }
            for &e in graph.in_edges(u) {
                if flow[e] <= 0.0 {
                    continue;
                }
                let v = graph.tail(e);
                let reduced = reduced_cost(-(graph.cost(e) + prices[v] - prices[u]));
                if d + reduced < dist[v] {
                    dist[v] = d + reduced;
                    parent[v] = Step::Backward { edge: e, from: u };
                    heap.push(HeapEntry { dist: dist[v], node: v });
                }
            }
        }
        let Some(target) = reached else {
            let unmet: f64 = need.iter().filter(|&&d| d > RESIDUAL_TOL).sum();
            return Err(OracleError::Infeasible { unmet });
        };
        let target_dist = dist[target];

        // Price update capped at the target's distance keeps every residual
        // reduced cost nonnegative and zeroes them along the used path.
        for v in 0..n {
            prices[v] += dist[v].min(target_dist);
        }

        // Walk the tree back to the supplying root and find the bottleneck.
        let mut delta = need[target];
        let mut v = target;
        let source = loop {
            match parent[v] {
                Step::Root => break v,
                Step::Forward { from, .. } => v = from,
                Step::Backward { edge, from } => {
                    delta = delta.min(flow[edge]);
                    v = from;
                }
            }
        };
        delta = delta.min(-need[source]);
        debug_assert!(delta > 0.0, "augmentation must move mass");

        let mut v = target;
        loop {
            match parent[v] {
                Step::Root => break,
                Step::Forward { edge, from } => {
                    flow[edge] += delta;
                    v = from;
                }
                Step::Backward { edge, from } => {
                    // delta == flow[edge] subtracts to exactly zero, taking
                    // the arc out of the residual network.
                    flow[edge] -= delta;
                    v = from;
                }
            }
        }
        need[target] -= delta;
        need[source] += delta;
        augmentations += 1;
    }

    let objective = dot(graph.costs(), &flow);
    Ok(OracleResult {
        flow: FlowVector(flow),
        prices: DualPotential(prices),
        objective,
        augmentations,
    })
}

/// Clamps floating-point noise on reduced costs that are zero in exact
/// arithmetic.
fn reduced_cost(raw: f64) -> f64 {
    debug_assert!(raw > -1e-6, "reduced cost {raw:e} far below zero");
    if raw < REDUCED_COST_SLACK {
        0.0_f64.max(raw)
    } else {
        raw
    }
}
