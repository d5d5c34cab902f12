//! Deterministic instance generators.
//!
//! Random graphs follow a heavy-tailed degree law (exponent 2.5, degrees
//! clamped to `[1, 10]`, mean pushed into `5 ± 0.5` by rescaling), realized
//! as a simple undirected graph, randomized by degree-preserving edge
//! swaps, stitched into one component by cross-component swaps, and
//! finally emitted bidirectionally — each undirected adjacency becomes two
//! directed edges. Grid graphs are square lattices, also bidirectional.
//! Mass vectors make roughly a tenth of the nodes sources or sinks with
//! uniform strengths, the last one balancing the rest.
//!
//! Everything is a pure function of its arguments: the same seed yields a
//! bit-identical instance on every run and platform.

use crate::graph::{Graph, MassVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::HashSet;
use thiserror::Error;

/// Exponent of the heavy-tailed degree distribution.
const DEGREE_EXPONENT: f64 = 2.5;
/// Hard degree range before scaling (upper end also capped at `n - 1`).
const DEGREE_MAX: usize = 10;
/// Resampling attempts before giving up on a degree sequence.
const MAX_ATTEMPTS: usize = 64;

#[derive(Debug, Error)]
pub enum GenError {
    #[error("no realizable degree sequence with the target mean after {0} attempts")]
    DegreeSequence(usize),
}

/// Edge cost assignment for random graphs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CostModel {
    /// Every edge costs 1.
    Unit,
    /// Uniform `(0, 1]` per undirected adjacency, identical in both
    /// directions.
    Uniform,
}

/// Generates a connected bidirectional random graph with heavy-tailed
/// degrees. `n ≥ 2`; for very small `n` the mean-degree target shrinks to
/// what the node count permits.
pub fn gen_random_graph(n: usize, seed: u64, costs: CostModel) -> Result<Graph, GenError> {
    assert!(n >= 2, "a random graph needs at least two nodes");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cap = DEGREE_MAX.min(n - 1);
    let target = 5.0_f64.min(0.8 * (n - 1) as f64);

    for _ in 0..MAX_ATTEMPTS {
        let Some(degrees) = sample_degree_sequence(&mut rng, n, cap, target) else {
            continue;
        };
        let Some(mut edges) = havel_hakimi(&degrees) else {
            continue;
        };
        let mut membership: HashSet<(usize, usize)> = edges.iter().copied().collect();
        randomize_by_swaps(&mut rng, &mut edges, &mut membership);
        connect_components(n, &mut edges, &mut membership);

        edges.sort_unstable();
        let mut directed = Vec::with_capacity(2 * edges.len());
        let mut directed_costs = Vec::with_capacity(2 * edges.len());
        for &(u, v) in &edges {
            let c = match costs {
                CostModel::Unit => 1.0,
                CostModel::Uniform => 1.0 - rng.random::<f64>(),
            };
            directed.push((u, v));
            directed.push((v, u));
            directed_costs.push(c);
            directed_costs.push(c);
        }
        let graph = Graph::new(n, directed, directed_costs)
            .expect("generated graph is simple, connected, and positively priced");
        return Ok(graph);
    }
    Err(GenError::DegreeSequence(MAX_ATTEMPTS))
}

/// Draws heavy-tailed base degrees and rescales them so the clamped mean
/// lands within ±0.5 of `target`, then fixes the parity of the sum.
/// Returns `None` when this attempt's draw cannot be scaled into the
/// window.
fn sample_degree_sequence(
    rng: &mut ChaCha8Rng,
    n: usize,
    cap: usize,
    target: f64,
) -> Option<Vec<usize>> {
    // Inverse-CDF sampling of P(d) ∝ d^(-2.5) on 1..=DEGREE_MAX.
    let weights: Vec<f64> = (1..=DEGREE_MAX)
        .map(|d| (d as f64).powf(-DEGREE_EXPONENT))
        .collect();
    let total: f64 = weights.iter().sum();
    let mut base = Vec::with_capacity(n);
    for _ in 0..n {
        let mut u = rng.random::<f64>() * total;
        let mut d = DEGREE_MAX;
        for (i, w) in weights.iter().enumerate() {
            if u < *w {
                d = i + 1;
                break;
            }
            u -= w;
        }
        base.push(d);
    }

    let scaled_mean = |s: f64| {
        let sum: usize = base
            .iter()
            .map(|&d| (((s * d as f64).round() as usize).max(1)).min(cap))
            .sum();
        sum as f64 / n as f64
    };
    // The clamped mean is nondecreasing in s; bracket the target.
    let (mut lo, mut hi) = (0.05_f64, 40.0_f64);
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if scaled_mean(mid) >= target {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let s = if (scaled_mean(hi) - target).abs() <= 0.5 {
        hi
    } else if (scaled_mean(lo) - target).abs() <= 0.5 {
        lo
    } else {
        return None;
    };
    let mut degrees: Vec<usize> = base
        .iter()
        .map(|&d| (((s * d as f64).round() as usize).max(1)).min(cap))
        .collect();

    if degrees.iter().sum::<usize>() % 2 == 1 {
        if let Some(d) = degrees.iter_mut().find(|d| **d < cap) {
            *d += 1;
        } else if let Some(d) = degrees.iter_mut().find(|d| **d > 1) {
            *d -= 1;
        } else {
            return None;
        }
    }
    Some(degrees)
}

/// Realizes a degree sequence as a simple undirected graph: repeatedly
/// satisfy the largest remaining degree by connecting to the next-largest
/// ones. Edges come out as `(min, max)` pairs; `None` if the sequence is
/// not graphical.
fn havel_hakimi(degrees: &[usize]) -> Option<Vec<(usize, usize)>> {
    let mut rem: Vec<(usize, usize)> = degrees.iter().copied().zip(0..).collect();
    let mut edges = Vec::new();
    loop {
        rem.sort_unstable_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
        let (d, v) = rem[0];
        if d == 0 {
            return Some(edges);
        }
        if d >= rem.len() {
            return None;
        }
        rem[0].0 = 0;
        for t in 1..=d {
            if rem[t].0 == 0 {
                return None;
            }
            rem[t].0 -= 1;
            let w = rem[t].1;
            edges.push((v.min(w), v.max(w)));
        }
    }
}

/// Shuffles structure with degree-preserving double-edge swaps:
/// `(a,b),(c,d) → (a,c),(b,d)` or `(a,d),(b,c)` when the replacement
/// stays simple.
fn randomize_by_swaps(
    rng: &mut ChaCha8Rng,
    edges: &mut [(usize, usize)],
    membership: &mut HashSet<(usize, usize)>,
) {
    if edges.len() < 2 {
        return;
    }
    for _ in 0..2 * edges.len() {
        let i = rng.random_range(0..edges.len());
        let j = rng.random_range(0..edges.len());
        let cross = rng.random::<bool>();
        if i == j {
            continue;
        }
        let (a, b) = edges[i];
        let (c, d) = edges[j];
        let (p, q) = if cross { ((a, c), (b, d)) } else { ((a, d), (b, c)) };
        let p = (p.0.min(p.1), p.0.max(p.1));
        let q = (q.0.min(q.1), q.0.max(q.1));
        if p.0 == p.1 || q.0 == q.1 || p == q || membership.contains(&p) || membership.contains(&q)
        {
            continue;
        }
        membership.remove(&edges[i]);
        membership.remove(&edges[j]);
        membership.insert(p);
        membership.insert(q);
        edges[i] = p;
        edges[j] = q;
    }
}

/// Stitches the graph into one component with cross-component swaps,
/// which preserve all degrees and can never create duplicates.
fn connect_components(
    n: usize,
    edges: &mut Vec<(usize, usize)>,
    membership: &mut HashSet<(usize, usize)>,
) {
    loop {
        let label = component_labels(n, edges);
        let base = label[0];
        let Some(j) = edges.iter().position(|&(u, _)| label[u] != base) else {
            return;
        };
        let i = edges
            .iter()
            .position(|&(u, _)| label[u] == base)
            .expect("node 0's component has at least one edge");
        let (a, b) = edges[i];
        let (c, d) = edges[j];
        let p = (a.min(c), a.max(c));
        let q = (b.min(d), b.max(d));
        membership.remove(&edges[i]);
        membership.remove(&edges[j]);
        membership.insert(p);
        membership.insert(q);
        edges[i] = p;
        edges[j] = q;
    }
}

fn component_labels(n: usize, edges: &[(usize, usize)]) -> Vec<usize> {
    let mut adjacency = vec![Vec::new(); n];
    for &(u, v) in edges {
        adjacency[u].push(v);
        adjacency[v].push(u);
    }
    let mut label = vec![usize::MAX; n];
    let mut next = 0;
    for start in 0..n {
        if label[start] != usize::MAX {
            continue;
        }
        let mut stack = vec![start];
        label[start] = next;
        while let Some(v) = stack.pop() {
            for &w in &adjacency[v] {
                if label[w] == usize::MAX {
                    label[w] = next;
                    stack.push(w);
                }
            }
        }
        next += 1;
    }
    label
}

/// Square lattice with unit costs: `side × side` nodes, each undirected
/// lattice adjacency emitted as two directed edges.
pub fn gen_grid(side: usize) -> Graph {
    assert!(side >= 2, "a grid needs side length at least 2");
    let at = |r: usize, c: usize| r * side + c;
    let mut edges = Vec::new();
    for r in 0..side {
        for c in 0..side {
            if c + 1 < side {
                edges.push((at(r, c), at(r, c + 1)));
                edges.push((at(r, c + 1), at(r, c)));
            }
            if r + 1 < side {
                edges.push((at(r, c), at(r + 1, c)));
                edges.push((at(r + 1, c), at(r, c)));
            }
        }
    }
    let costs = vec![1.0; edges.len()];
    Graph::new(side * side, edges, costs).expect("lattice is simple and connected")
}

/// Marks a tenth of the nodes (at least two) as sources or sinks with
/// strengths uniform in `(-10, 10)`; the last selected node balances the
/// others so the vector sums to zero.
pub fn gen_mass(graph: &Graph, seed: u64) -> MassVector {
    let n = graph.node_count();
    let k = 2.max((n as f64 / 10.0).ceil() as usize).min(n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    // Partial Fisher–Yates: the first k pool entries become the selection.
    let mut pool: Vec<usize> = (0..n).collect();
    for i in 0..k {
        let j = rng.random_range(i..n);
        pool.swap(i, j);
    }
    let mut f = vec![0.0; n];
    let mut sum = 0.0;
    for &v in &pool[..k - 1] {
        let value = 20.0 * rng.random::<f64>() - 10.0;
        f[v] = value;
        sum += value;
    }
    f[pool[k - 1]] = -sum;
    MassVector::new(f).expect("balanced by construction")
}

/// Convenience: a random graph and a mass vector for it, derived from one
/// seed (the mass stream is decorrelated from the graph stream).
pub fn random_instance(
    n: usize,
    seed: u64,
    costs: CostModel,
) -> Result<(Graph, MassVector), GenError> {
    let graph = gen_random_graph(n, seed, costs)?;
    let mass = gen_mass(&graph, seed ^ 0x9E37_79B9_7F4A_7C15);
    Ok((graph, mass))
}
