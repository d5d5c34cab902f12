//! Path/cycle structure of nonnegative arc flows.
//!
//! Any flow `J ≥ 0` with divergence `f` splits into weighted
//! source-to-target paths plus circulation cycles; [`decompose`] produces
//! such a splitting by greedy peeling and [`reconstruct`] sums it back.
//! [`check_bounds`] verifies the boundedness inequalities every such
//! decomposition obeys (each path carries at most its source's supply,
//! each edge at most the total supply), and [`path_objective`] evaluates
//! the transport objective in path space through the shared-edge overlap
//! matrix.
//!
//! [`divergence_free_diff`] expresses the difference of two path flows
//! with equal divergence as a sum of signed, divergence-free path
//! exchanges `Ĵ₁ = Ĵ₂ + Σ ε_k R̂_k`: each term moves mass `ε_k` off the
//! paths where the second flow has excess and onto the paths where it
//! lacks mass, with sources and targets paired so the induced arc flow
//! `R_k` has zero divergence. The experiment harness uses this to compare
//! solutions across regularization strengths.

use crate::graph::{FlowVector, Graph, MassVector};
use crate::util::linf_norm;
use serde::Serialize;
use std::collections::HashMap;
use thiserror::Error;

/// Residual flow below `1e-14 · max(1, |J|_∞)` is treated as exhausted
/// during peeling.
pub const PEEL_EPS_REL: f64 = 1e-14;

/// Two path flows are considered to differ on a path when their amounts
/// differ by more than `1e-10 · max(1, largest amount)`.
pub const DIFF_EPS_REL: f64 = 1e-10;

/// Divergence of the input flow must match the stated mass vector this
/// closely (absolute, per node).
pub const DIVERGENCE_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum DecompError {
    #[error("flow has negative entry {value:e} on edge {edge}")]
    NegativeFlow { edge: usize, value: f64 },
    #[error("flow divergence at node {node} is {got}, stated mass is {want}")]
    DivergenceMismatch { node: usize, got: f64, want: f64 },
    #[error("operation requires a cycle-free decomposition, found {count} cycles")]
    HasCycles { count: usize },
    #[error("peeling stalled at node {node}: inflow without usable outflow")]
    StalledWalk { node: usize },
}

/// A directed path: distinct nodes joined by existing edges.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DirectedPath {
    pub nodes: Vec<usize>,
    pub edges: Vec<usize>,
}

impl DirectedPath {
    /// Builds a path from its node sequence, resolving edge indices.
    /// Panics if consecutive nodes are not joined by an edge or nodes
    /// repeat; intended for literals in tests and small tools.
    pub fn from_nodes(graph: &Graph, nodes: Vec<usize>) -> Self {
        assert!(nodes.len() >= 2, "a path visits at least two nodes");
        let mut seen = vec![false; graph.node_count()];
        for &v in &nodes {
            assert!(!seen[v], "path nodes must be distinct (node {v} repeats)");
            seen[v] = true;
        }
        let edges = nodes
            .windows(2)
            .map(|w| {
                graph
                    .edge_between(w[0], w[1])
                    .unwrap_or_else(|| panic!("no edge {} -> {}", w[0], w[1]))
            })
            .collect();
        DirectedPath { nodes, edges }
    }

    pub fn source(&self) -> usize {
        self.nodes[0]
    }

    pub fn target(&self) -> usize {
        *self.nodes.last().expect("paths are nonempty")
    }

    /// Number of edges.
    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }
}

/// A directed cycle; `nodes` lists each visited node once, `edges[i]`
/// joins `nodes[i]` to `nodes[(i+1) % len]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DirectedCycle {
    pub nodes: Vec<usize>,
    pub edges: Vec<usize>,
}

/// Weighted paths and cycles whose superposition is an arc flow.
#[derive(Debug, Clone, Default, Serialize)]
pub struct PathDecomposition {
    pub paths: Vec<(DirectedPath, f64)>,
    pub cycles: Vec<(DirectedCycle, f64)>,
}

impl PathDecomposition {
    pub fn is_cycle_free(&self) -> bool {
        self.cycles.is_empty()
    }

    /// Machine-readable document: node sequences with flow amounts.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("decomposition serializes")
    }
}

/// Splits a nonnegative flow with divergence `f` into weighted
/// source-to-target paths and leftover circulation cycles.
///
/// Peeling is deterministic: while a node still has unserved supply, walk
/// from it along the outgoing edge with the largest remaining flow
/// (ties to the lowest edge index) until reaching a node with unmet
/// demand, then subtract the bottleneck of the walked path, the supply,
/// and the demand. A walk that revisits a node first peels the closed
/// cycle it found and restarts. Once no supply remains, remaining
/// positive edges are peeled into cycles the same way.
pub fn decompose(
    graph: &Graph,
    flow: &FlowVector,
    mass: &MassVector,
) -> Result<PathDecomposition, DecompError> {
    let j = flow.values();
    assert_eq!(j.len(), graph.edge_count(), "flow length mismatch");
    for (e, &v) in j.iter().enumerate() {
        if v < 0.0 {
            return Err(DecompError::NegativeFlow { edge: e, value: v });
        }
    }
    let div = graph.divergence(j);
    for (v, (&got, &want)) in div.iter().zip(mass.values()).enumerate() {
        if (got - want).abs() > DIVERGENCE_TOL {
            return Err(DecompError::DivergenceMismatch { node: v, got, want });
        }
    }

    let eps = PEEL_EPS_REL * 1.0_f64.max(linf_norm(j));
    let mut residual = j.to_vec();
    let mut decomp = PathDecomposition::default();
    let iteration_guard = 2 * (graph.edge_count() + 2 * graph.node_count()) + 16;
    let mut iterations = 0usize;

    // Path phase: serve supplies until none remains above the threshold.
    loop {
        let need = graph.divergence(&residual);
        let Some(source) = need
            .iter()
            .enumerate()
            .filter(|(_, &d)| d < -eps)
            .min_by(|a, b| a.1.partial_cmp(b.1).expect("finite residual"))
            .map(|(v, _)| v)
        else {
            break;
        };
        iterations += 1;
        if iterations > iteration_guard {
            return Err(DecompError::StalledWalk { node: source });
        }

        match walk(graph, &residual, source, |v| v != source && need[v] > eps)? {
            Walked::Path(nodes, edges) => {
                let target = *nodes.last().expect("nonempty walk");
                let mut delta = (-need[source]).min(need[target]);
                for &e in &edges {
                    delta = delta.min(residual[e]);
                }
                for &e in &edges {
                    residual[e] -= delta;
                }
                decomp.paths.push((DirectedPath { nodes, edges }, delta));
            }
            Walked::Cycle(nodes, edges) => {
                let delta = peel_cycle(&mut residual, &edges);
                decomp.cycles.push((DirectedCycle { nodes, edges }, delta));
            }
        }
    }

    // Cycle phase: the remainder is a circulation.
    loop {
        let Some(start_edge) = residual.iter().position(|&r| r > eps) else {
            break;
        };
        iterations += 1;
        if iterations > iteration_guard {
            return Err(DecompError::StalledWalk { node: graph.tail(start_edge) });
        }
        match walk(graph, &residual, graph.tail(start_edge), |_| false)? {
            Walked::Cycle(nodes, edges) => {
                let delta = peel_cycle(&mut residual, &edges);
                decomp.cycles.push((DirectedCycle { nodes, edges }, delta));
            }
            Walked::Path(nodes, _) => {
                // The stop predicate never fires, so a walk can only end by
                // revisiting a node.
                unreachable!("circulation walk ended at {:?} without closing", nodes)
            }
        }
    }
    Ok(decomp)
}

enum Walked {
    /// Node and edge sequence from the walk's start to the stop node.
    Path(Vec<usize>, Vec<usize>),
    /// A closed cycle discovered by revisiting a node.
    Cycle(Vec<usize>, Vec<usize>),
}

/// Follows the largest-residual outgoing edge from `start` until `stop`
/// accepts the current node or a node repeats (yielding the enclosed
/// cycle).
fn walk(
    graph: &Graph,
    residual: &[f64],
    start: usize,
    stop: impl Fn(usize) -> bool,
) -> Result<Walked, DecompError> {
    let mut position = vec![usize::MAX; graph.node_count()];
    let mut nodes = vec![start];
    let mut edges = Vec::new();
    position[start] = 0;
    loop {
        let here = *nodes.last().expect("walk is nonempty");
        if stop(here) {
            return Ok(Walked::Path(nodes, edges));
        }
        let mut best: Option<usize> = None;
        for &e in graph.out_edges(here) {
            if residual[e] > 0.0 && best.is_none_or(|b| residual[e] > residual[b]) {
                best = Some(e);
            }
        }
        let Some(e) = best else {
            return Err(DecompError::StalledWalk { node: here });
        };
        let next = graph.head(e);
        if position[next] != usize::MAX {
            // Slice out the closed loop: nodes from the first visit of
            // `next` onward, each stored once, plus the closing edge.
            let at = position[next];
            let cycle_nodes = nodes.split_off(at);
            let mut cycle_edges = edges.split_off(at);
            cycle_edges.push(e);
            return Ok(Walked::Cycle(cycle_nodes, cycle_edges));
        }
        position[next] = nodes.len();
        nodes.push(next);
        edges.push(e);
    }
}

fn peel_cycle(residual: &mut [f64], edges: &[usize]) -> f64 {
    let delta = edges
        .iter()
        .map(|&e| residual[e])
        .fold(f64::INFINITY, f64::min);
    for &e in edges {
        residual[e] -= delta;
    }
    delta
}

/// Sums the decomposition back into an arc flow.
pub fn reconstruct(graph: &Graph, decomp: &PathDecomposition) -> FlowVector {
    let mut j = vec![0.0; graph.edge_count()];
    for (path, amount) in &decomp.paths {
        for &e in &path.edges {
            j[e] += amount;
        }
    }
    for (cycle, amount) in &decomp.cycles {
        for &e in &cycle.edges {
            j[e] += amount;
        }
    }
    FlowVector(j)
}

/// Outcome of the boundedness check: every path must carry at most its
/// source's supply, every edge at most the total supply.
#[derive(Debug, Clone)]
pub struct BoundsReport {
    pub ok: bool,
    /// `(path index, excess)` for each path exceeding its source supply.
    pub path_violations: Vec<(usize, f64)>,
    /// `(edge, excess)` for each edge exceeding the total supply.
    pub edge_violations: Vec<(usize, f64)>,
}

/// Verifies the boundedness inequalities on a cycle-free decomposition
/// within `1e-9` slack, pinpointing any offenders.
pub fn check_bounds(
    graph: &Graph,
    decomp: &PathDecomposition,
    mass: &MassVector,
) -> Result<BoundsReport, DecompError> {
    if !decomp.is_cycle_free() {
        return Err(DecompError::HasCycles { count: decomp.cycles.len() });
    }
    const SLACK: f64 = 1e-9;
    let f = mass.values();
    let total_supply: f64 = -f.iter().filter(|&&v| v < 0.0).sum::<f64>();

    let mut path_violations = Vec::new();
    for (i, (path, amount)) in decomp.paths.iter().enumerate() {
        let cap = -f[path.source()];
        if *amount > cap + SLACK {
            path_violations.push((i, amount - cap));
        }
    }
    let mut edge_violations = Vec::new();
    for (e, &j) in reconstruct(graph, decomp).values().iter().enumerate() {
        if j > total_supply + SLACK {
            edge_violations.push((e, j - total_supply));
        }
    }
    Ok(BoundsReport {
        ok: path_violations.is_empty() && edge_violations.is_empty(),
        path_violations,
        edge_violations,
    })
}

/// Transport objective evaluated in path space:
/// `Σ_r č(r)Ĵ(r) + (α/2) Σ_{r,r'} S(r,r')Ĵ(r)Ĵ(r')` with `č(r)` the path's
/// summed edge cost and `S(r,r')` the number of edges the two paths
/// share. Equals the arc-space objective of the reconstruction.
pub fn path_objective(
    graph: &Graph,
    decomp: &PathDecomposition,
    alpha: f64,
) -> Result<f64, DecompError> {
    if !decomp.is_cycle_free() {
        return Err(DecompError::HasCycles { count: decomp.cycles.len() });
    }
    let k = decomp.paths.len();
    let mut linear = 0.0;
    for (path, amount) in &decomp.paths {
        let path_cost: f64 = path.edges.iter().map(|&e| graph.cost(e)).sum();
        linear += path_cost * amount;
    }
    // Overlap counts, accumulated edge by edge.
    let mut users: Vec<Vec<usize>> = vec![Vec::new(); graph.edge_count()];
    for (i, (path, _)) in decomp.paths.iter().enumerate() {
        for &e in &path.edges {
            users[e].push(i);
        }
    }
    let mut overlap = vec![0.0f64; k * k];
    for list in &users {
        for &a in list {
            for &b in list {
                overlap[a * k + b] += 1.0;
            }
        }
    }
    let mut quadratic = 0.0;
    for a in 0..k {
        for b in 0..k {
            quadratic += overlap[a * k + b] * decomp.paths[a].1 * decomp.paths[b].1;
        }
    }
    Ok(linear + 0.5 * alpha * quadratic)
}

/// One exchange term of a divergence-free difference: mass `epsilon`
/// leaves each path in `plus_paths` (where the second flow has excess)
/// and enters each path in `minus_paths` (where it lacks mass). Indices
/// refer to the owning [`DivergenceFreeDiff`]'s universe.
#[derive(Debug, Clone, Serialize)]
pub struct DiffTerm {
    pub epsilon: f64,
    pub minus_paths: Vec<usize>,
    pub plus_paths: Vec<usize>,
}

/// Difference of two equal-divergence path flows as a sum of
/// divergence-free exchanges over their common path universe.
#[derive(Debug, Clone, Serialize)]
pub struct DivergenceFreeDiff {
    /// Distinct paths of either decomposition, sorted by node sequence.
    pub universe: Vec<DirectedPath>,
    /// First flow's amounts on the universe.
    pub amounts1: Vec<f64>,
    /// Second flow's amounts on the universe.
    pub amounts2: Vec<f64>,
    pub terms: Vec<DiffTerm>,
}

impl DivergenceFreeDiff {
    /// Arc flow of one exchange term: `+1` per `minus` path edge, `-1`
    /// per `plus` path edge, summed. Divergence-free by construction.
    pub fn term_arc_flow(&self, graph: &Graph, term: usize) -> Vec<f64> {
        let mut r = vec![0.0; graph.edge_count()];
        let t = &self.terms[term];
        for &p in &t.minus_paths {
            for &e in &self.universe[p].edges {
                r[e] += 1.0;
            }
        }
        for &p in &t.plus_paths {
            for &e in &self.universe[p].edges {
                r[e] -= 1.0;
            }
        }
        r
    }

    /// Largest residual of the identity `Ĵ₁ = Ĵ₂ + Σ ε_k R̂_k` over the
    /// universe; exactly zero when the inputs' amounts combine exactly.
    pub fn identity_residual(&self) -> f64 {
        let mut adjusted = self.amounts2.clone();
        for t in &self.terms {
            for &p in &t.minus_paths {
                adjusted[p] += t.epsilon;
            }
            for &p in &t.plus_paths {
                adjusted[p] -= t.epsilon;
            }
        }
        self.amounts1
            .iter()
            .zip(&adjusted)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Expresses `Ĵ₁ − Ĵ₂` as `Σ ε_k R̂_k` with every `R_k` divergence-free.
///
/// Both inputs must be cycle-free and induce the divergence `mass` (each
/// within the construction tolerance). Paths are aligned on the union of
/// the two path sets keyed by node sequence; absent paths carry zero.
/// Each round starts from the lowest differing path and alternately
/// extends through shared sources (seeking opposite discrepancy) and
/// shared targets (seeking matching discrepancy) until an endpoint
/// repeats, closing a balanced exchange; the exchanged mass is the
/// smallest discrepancy among the selected paths, which zeroes at least
/// one discrepancy per round.
pub fn divergence_free_diff(
    graph: &Graph,
    first: &PathDecomposition,
    second: &PathDecomposition,
    mass: &MassVector,
) -> Result<DivergenceFreeDiff, DecompError> {
    for d in [first, second] {
        if !d.is_cycle_free() {
            return Err(DecompError::HasCycles { count: d.cycles.len() });
        }
    }
    for d in [first, second] {
        let div = graph.divergence(reconstruct(graph, d).values());
        for (v, (&got, &want)) in div.iter().zip(mass.values()).enumerate() {
            if (got - want).abs() > DIVERGENCE_TOL {
                return Err(DecompError::DivergenceMismatch { node: v, got, want });
            }
        }
    }

    // Align both flows on the shared universe, merging duplicate node
    // sequences.
    let mut order: Vec<&DirectedPath> = Vec::new();
    let mut index: HashMap<&[usize], usize> = HashMap::new();
    for d in [first, second] {
        for (path, _) in &d.paths {
            index.entry(path.nodes.as_slice()).or_insert_with(|| {
                order.push(path);
                order.len() - 1
            });
        }
    }
    let mut permutation: Vec<usize> = (0..order.len()).collect();
    permutation.sort_by(|&a, &b| order[a].nodes.cmp(&order[b].nodes));
    let universe: Vec<DirectedPath> = permutation.iter().map(|&i| order[i].clone()).collect();
    let mut rank = vec![0usize; order.len()];
    for (new, &old) in permutation.iter().enumerate() {
        rank[old] = new;
    }
    let mut amounts1 = vec![0.0f64; universe.len()];
    let mut amounts2 = vec![0.0f64; universe.len()];
    for (d, amounts) in [(first, &mut amounts1), (second, &mut amounts2)] {
        for (path, amount) in &d.paths {
            amounts[rank[index[path.nodes.as_slice()]]] += amount;
        }
    }

    let scale = 1.0_f64.max(linf_norm(&amounts1)).max(linf_norm(&amounts2));
    let tol = DIFF_EPS_REL * scale;
    let by_source: Vec<Vec<usize>> = group_by(graph.node_count(), &universe, DirectedPath::source);
    let by_target: Vec<Vec<usize>> = group_by(graph.node_count(), &universe, DirectedPath::target);

    // diff[r] = Ĵ₁(r) − Ĵ₂′(r), updated as terms accumulate.
    let mut diff: Vec<f64> = amounts1.iter().zip(&amounts2).map(|(a, b)| a - b).collect();
    let mut terms: Vec<DiffTerm> = Vec::new();

    loop {
        let Some(r0) = diff.iter().position(|d| d.abs() > tol) else {
            break;
        };
        assert!(
            terms.len() < universe.len(),
            "exchange construction must zero a discrepancy per round"
        );
        // Sign of the discrepancy the chain starts from; even chain links
        // carry this sign, odd links the opposite.
        let sigma = diff[r0].signum();
        let mut chain = vec![r0];
        let mut source_intro: HashMap<usize, usize> = HashMap::new();
        let mut target_intro: HashMap<usize, usize> = HashMap::new();
        source_intro.insert(universe[r0].source(), 0);
        target_intro.insert(universe[r0].target(), 0);

        // Index range of the selected chain slice, set when an endpoint
        // repeats.
        let (slice_from, slice_to) = loop {
            let n = chain.len(); // index of the link being added
            let prev = *chain.last().expect("chain is nonempty");
            let want_sign = if n % 2 == 1 { -sigma } else { sigma };
            let candidates: &[usize] = if n % 2 == 1 {
                &by_source[universe[prev].source()]
            } else {
                &by_target[universe[prev].target()]
            };
            let found = candidates
                .iter()
                .copied()
                .find(|&r| diff[r] * want_sign > tol);
            let Some(r) = found else {
                // Mass is conserved at every shared endpoint, so a
                // compensating path always exists for consistent inputs.
                unreachable!(
                    "no compensating path at {} endpoint of path {prev}",
                    if n % 2 == 1 { "source" } else { "target" }
                );
            };
            chain.push(r);
            if n % 2 == 1 {
                // New target; a repeat of the chain's first target closes
                // the whole chain, any other repeat closes a tail slice.
                let t = universe[r].target();
                match target_intro.get(&t) {
                    Some(&0) => break (0, n),
                    Some(&l) => break (l + 1, n),
                    None => {
                        target_intro.insert(t, n);
                    }
                }
            } else {
                let s = universe[r].source();
                match source_intro.get(&s) {
                    Some(&l) => break (l + 1, n),
                    None => {
                        source_intro.insert(s, n);
                    }
                }
            }
            assert!(
                chain.len() <= 2 * graph.node_count() + 2,
                "chain outgrew the endpoint count without repeating"
            );
        };

        let selected = &chain[slice_from..=slice_to];
        let epsilon = selected
            .iter()
            .map(|&r| diff[r].abs())
            .fold(f64::INFINITY, f64::min);
        let mut minus_paths = Vec::new();
        let mut plus_paths = Vec::new();
        for &r in selected {
            if diff[r] > 0.0 {
                minus_paths.push(r);
                diff[r] -= epsilon;
            } else {
                plus_paths.push(r);
                diff[r] += epsilon;
            }
        }
        terms.push(DiffTerm { epsilon, minus_paths, plus_paths });
    }

    Ok(DivergenceFreeDiff { universe, amounts1, amounts2, terms })
}

fn group_by(
    node_count: usize,
    universe: &[DirectedPath],
    key: impl Fn(&DirectedPath) -> usize,
) -> Vec<Vec<usize>> {
    let mut groups = vec![Vec::new(); node_count];
    for (i, path) in universe.iter().enumerate() {
        groups[key(path)].push(i);
    }
    groups
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Graph;

    fn triangle() -> Graph {
        // 0 -> 1 direct (cost 2), 0 -> 2 -> 1 two-hop (cost 1 each).
        Graph::new(3, vec![(0, 1), (0, 2), (2, 1)], vec![2.0, 1.0, 1.0]).unwrap()
    }

    #[test]
    fn unit_path_decomposes_to_itself() {
        let g = Graph::new(3, vec![(0, 1), (1, 2)], vec![1.0, 1.0]).unwrap();
        let f = MassVector::new(vec![-1.0, 0.0, 1.0]).unwrap();
        let d = decompose(&g, &FlowVector(vec![1.0, 1.0]), &f).unwrap();
        assert_eq!(d.paths.len(), 1);
        assert!(d.cycles.is_empty());
        assert_eq!(d.paths[0].0.nodes, vec![0, 1, 2]);
        assert_eq!(d.paths[0].1, 1.0);
    }

    #[test]
    fn unit_three_cycle_decomposes_to_one_cycle() {
        let g = Graph::new(3, vec![(0, 1), (1, 2), (2, 0)], vec![1.0, 1.0, 1.0]).unwrap();
        let f = MassVector::new(vec![0.0, 0.0, 0.0]).unwrap();
        let d = decompose(&g, &FlowVector(vec![1.0, 1.0, 1.0]), &f).unwrap();
        assert!(d.paths.is_empty());
        assert_eq!(d.cycles.len(), 1);
        assert_eq!(d.cycles[0].0.edges.len(), 3);
        assert_eq!(d.cycles[0].1, 1.0);
    }

    #[test]
    fn triangle_split_decomposes_into_both_routes() {
        let g = triangle();
        let f = MassVector::new(vec![-1.0, 1.0, 0.0]).unwrap();
        let j = FlowVector(vec![2.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0]);
        let d = decompose(&g, &j, &f).unwrap();
        assert!(d.cycles.is_empty());
        assert_eq!(d.paths.len(), 2);
        // Larger residual first: the direct route.
        assert_eq!(d.paths[0].0.nodes, vec![0, 1]);
        assert!((d.paths[0].1 - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(d.paths[1].0.nodes, vec![0, 2, 1]);
        assert!((d.paths[1].1 - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_negative_flow_and_wrong_divergence() {
        let g = Graph::new(2, vec![(0, 1)], vec![1.0]).unwrap();
        let f = MassVector::new(vec![-1.0, 1.0]).unwrap();
        assert!(matches!(
            decompose(&g, &FlowVector(vec![-0.25]), &f),
            Err(DecompError::NegativeFlow { edge: 0, .. })
        ));
        assert!(matches!(
            decompose(&g, &FlowVector(vec![2.0]), &f),
            Err(DecompError::DivergenceMismatch { .. })
        ));
    }

    #[test]
    fn reconstruct_sums_paths_and_cycles() {
        let g = Graph::new(3, vec![(0, 1), (1, 2), (2, 0)], vec![1.0; 3]).unwrap();
        let empty = PathDecomposition::default();
        assert_eq!(reconstruct(&g, &empty).values(), &[0.0, 0.0, 0.0]);
        let d = PathDecomposition {
            paths: vec![(DirectedPath::from_nodes(&g, vec![0, 1, 2]), 2.0)],
            cycles: vec![],
        };
        assert_eq!(reconstruct(&g, &d).values(), &[2.0, 2.0, 0.0]);
    }

    #[test]
    fn round_trip_on_mixed_flow() {
        // Path 0→1→2 of 0.75 superposed with the 3-cycle of 0.5.
        let g = Graph::new(3, vec![(0, 1), (1, 2), (2, 0)], vec![1.0; 3]).unwrap();
        let j = FlowVector(vec![1.25, 1.25, 0.5]);
        let f = MassVector::new(g.divergence(j.values())).unwrap();
        let d = decompose(&g, &j, &f).unwrap();
        let back = reconstruct(&g, &d);
        for (a, b) in j.values().iter().zip(back.values()) {
            assert!((a - b).abs() <= 1e-12);
        }
        assert_eq!(d.paths.len(), 1);
        assert_eq!(d.cycles.len(), 1);
    }

    #[test]
    fn bounds_hold_on_triangle_and_flag_violations() {
        let g = triangle();
        let f = MassVector::new(vec![-1.0, 1.0, 0.0]).unwrap();
        let j = FlowVector(vec![2.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0]);
        let d = decompose(&g, &j, &f).unwrap();
        let report = check_bounds(&g, &d, &f).unwrap();
        assert!(report.ok, "optimal decomposition respects both bounds");

        // A hand-built decomposition pushing 2 units from a supply of 1.
        let bad = PathDecomposition {
            paths: vec![(DirectedPath::from_nodes(&g, vec![0, 1]), 2.0)],
            cycles: vec![],
        };
        let report = check_bounds(&g, &bad, &f).unwrap();
        assert!(!report.ok);
        assert_eq!(report.path_violations.len(), 1);
        assert_eq!(report.path_violations[0].0, 0);
        assert_eq!(report.edge_violations.len(), 1);
        assert_eq!(report.edge_violations[0].0, 0);
    }

    #[test]
    fn bounds_require_cycle_free_input() {
        let g = Graph::new(3, vec![(0, 1), (1, 2), (2, 0)], vec![1.0; 3]).unwrap();
        let f = MassVector::new(vec![0.0; 3]).unwrap();
        let d = decompose(&g, &FlowVector(vec![1.0; 3]), &f).unwrap();
        assert!(matches!(
            check_bounds(&g, &d, &f),
            Err(DecompError::HasCycles { count: 1 })
        ));
    }

    #[test]
    fn path_objective_single_path_closed_form() {
        let g = Graph::new(3, vec![(0, 1), (1, 2)], vec![1.5, 2.5]).unwrap();
        let m = 0.75;
        let d = PathDecomposition {
            paths: vec![(DirectedPath::from_nodes(&g, vec![0, 1, 2]), m)],
            cycles: vec![],
        };
        let alpha = 0.8;
        let expect = 4.0 * m + 0.5 * alpha * 2.0 * m * m;
        let got = path_objective(&g, &d, alpha).unwrap();
        assert!((got - expect).abs() < 1e-14);
    }

    #[test]
    fn path_objective_matches_arc_objective_with_shared_edges() {
        // Paths 0→1→2 and 0→1→3 share edge (0,1); overlap matters.
        let g = Graph::new(4, vec![(0, 1), (1, 2), (1, 3)], vec![1.0, 1.0, 1.0]).unwrap();
        let d = PathDecomposition {
            paths: vec![
                (DirectedPath::from_nodes(&g, vec![0, 1, 2]), 0.5),
                (DirectedPath::from_nodes(&g, vec![0, 1, 3]), 0.25),
            ],
            cycles: vec![],
        };
        let alpha = 1.3;
        let via_paths = path_objective(&g, &d, alpha).unwrap();
        let via_arcs =
            crate::solver::primal_objective(&g, &reconstruct(&g, &d), alpha);
        assert!((via_paths - via_arcs).abs() < 1e-10);
    }

    #[test]
    fn triangle_path_objective_matches_arc_objective() {
        let g = triangle();
        let f = MassVector::new(vec![-1.0, 1.0, 0.0]).unwrap();
        let j = FlowVector(vec![2.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0]);
        let d = decompose(&g, &j, &f).unwrap();
        let got = path_objective(&g, &d, 1.0).unwrap();
        assert!((got - 7.0 / 3.0).abs() < 1e-10);
        let arc = crate::solver::primal_objective(&g, &j, 1.0);
        assert!((got - arc).abs() < 1e-10);
    }

    #[test]
    fn identical_decompositions_need_no_exchange_terms() {
        let g = triangle();
        let f = MassVector::new(vec![-1.0, 1.0, 0.0]).unwrap();
        let j = FlowVector(vec![2.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0]);
        let d1 = decompose(&g, &j, &f).unwrap();
        let d2 = decompose(&g, &j, &f).unwrap();
        let diff = divergence_free_diff(&g, &d1, &d2, &f).unwrap();
        assert!(diff.terms.is_empty());
        assert_eq!(diff.identity_residual(), 0.0);
    }

    #[test]
    fn crossed_and_parallel_matchings_differ_by_one_exchange() {
        // Two sources (0, 1), two targets (2, 3), all four arcs present.
        // First flow crosses (0→3, 1→2), second runs parallel (0→2, 1→3).
        let g = Graph::new(
            4,
            vec![(0, 2), (0, 3), (1, 2), (1, 3)],
            vec![1.0; 4],
        )
        .unwrap();
        let f = MassVector::new(vec![-1.0, -1.0, 1.0, 1.0]).unwrap();
        let crossed = decompose(&g, &FlowVector(vec![0.0, 1.0, 1.0, 0.0]), &f).unwrap();
        let parallel = decompose(&g, &FlowVector(vec![1.0, 0.0, 0.0, 1.0]), &f).unwrap();
        let diff = divergence_free_diff(&g, &crossed, &parallel, &f).unwrap();
        assert_eq!(diff.terms.len(), 1);
        let term = &diff.terms[0];
        assert_eq!(term.epsilon, 1.0);
        assert_eq!(term.minus_paths.len(), 2);
        assert_eq!(term.plus_paths.len(), 2);
        // The exchange's arc flow is divergence-free and the identity exact.
        let r = diff.term_arc_flow(&g, 0);
        for d in g.divergence(&r) {
            assert_eq!(d, 0.0);
        }
        assert_eq!(diff.identity_residual(), 0.0);
    }

    #[test]
    fn triangle_routes_differ_by_one_exchange() {
        let g = triangle();
        let f = MassVector::new(vec![-1.0, 1.0, 0.0]).unwrap();
        // All mass on the two-hop route vs the regularized split.
        let lp = decompose(&g, &FlowVector(vec![0.0, 1.0, 1.0]), &f).unwrap();
        let qp = decompose(&g, &FlowVector(vec![0.75, 0.25, 0.25]), &f).unwrap();
        let diff = divergence_free_diff(&g, &lp, &qp, &f).unwrap();
        assert_eq!(diff.terms.len(), 1);
        let term = &diff.terms[0];
        assert!((term.epsilon - 0.75).abs() < 1e-15);
        // The first flow lacks mass on the direct route relative to it…
        assert_eq!(term.plus_paths.len(), 1);
        assert_eq!(diff.universe[term.plus_paths[0]].nodes, vec![0, 1]);
        // …and carries excess on the two-hop route.
        assert_eq!(term.minus_paths.len(), 1);
        assert_eq!(diff.universe[term.minus_paths[0]].nodes, vec![0, 2, 1]);
        assert!(diff.identity_residual() <= 1e-12);
        let r = diff.term_arc_flow(&g, 0);
        for d in g.divergence(&r) {
            assert!(d.abs() <= 1e-12);
        }
    }

    #[test]
    fn decomposition_serializes_node_sequences_and_amounts() {
        let g = triangle();
        let f = MassVector::new(vec![-1.0, 1.0, 0.0]).unwrap();
        let d = decompose(&g, &FlowVector(vec![1.0, 0.0, 0.0]), &f).unwrap();
        let doc: serde_json::Value = serde_json::from_str(&d.to_json()).unwrap();
        assert_eq!(doc["paths"][0][0]["nodes"], serde_json::json!([0, 1]));
        assert_eq!(doc["paths"][0][1], serde_json::json!(1.0));
    }
}
