//! Helpers shared by the integration suite.
#![allow(dead_code)] // not every test file uses every helper

use qrflow::{gen_grid, DirectedPath, Graph, MassVector, PathDecomposition, SolverConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn graph(nodes: usize, spec: &[(usize, usize, f64)]) -> Graph {
    let edges = spec.iter().map(|&(t, h, _)| (t, h)).collect();
    let costs = spec.iter().map(|&(_, _, c)| c).collect();
    Graph::new(nodes, edges, costs).expect("test graph is valid")
}

pub fn mass(values: &[f64]) -> MassVector {
    MassVector::new(values.to_vec()).expect("test mass balances")
}

/// Config aimed at certifiable optima.
pub fn tight(alpha: f64) -> SolverConfig {
    let mut config = SolverConfig::new(alpha);
    config.grad_tol = 1e-12;
    config.max_iter = 100_000;
    config
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn linf(a: &[f64]) -> f64 {
    a.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

/// One unit from node 0 to node 1 over a direct edge of cost 2 or a
/// two-hop route of the same total cost; the quadratic term uniquely
/// splits them 2/3 : 1/3 at every regularization strength.
pub fn equal_cost_triangle() -> (Graph, MassVector) {
    (
        graph(3, &[(0, 1, 2.0), (0, 2, 1.0), (2, 1, 1.0)]),
        mass(&[-1.0, 1.0, 0.0]),
    )
}

/// A square lattice plus every monotone (right/down) corner-to-corner
/// path, as node sequences. A 4-sided grid has 20 of them.
pub fn grid_with_monotone_paths(side: usize) -> (Graph, Vec<Vec<usize>>) {
    let graph = gen_grid(side);
    let mut paths = Vec::new();
    let mut current = vec![0usize];
    collect_monotone(side, 0, 0, &mut current, &mut paths);
    (graph, paths)
}

fn collect_monotone(
    side: usize,
    r: usize,
    c: usize,
    current: &mut Vec<usize>,
    paths: &mut Vec<Vec<usize>>,
) {
    if r == side - 1 && c == side - 1 {
        paths.push(current.clone());
        return;
    }
    if c + 1 < side {
        current.push(r * side + c + 1);
        collect_monotone(side, r, c + 1, current, paths);
        current.pop();
    }
    if r + 1 < side {
        current.push((r + 1) * side + c);
        collect_monotone(side, r + 1, c, current, paths);
        current.pop();
    }
}

/// Splits total mass 1 across `count` distinct paths with exact 64ths, so
/// every amount and every partial sum is a dyadic rational and all
/// arithmetic on them is exact.
pub fn dyadic_decomposition(
    graph: &Graph,
    paths: &[Vec<usize>],
    count: usize,
    rng: &mut ChaCha8Rng,
) -> PathDecomposition {
    assert!(count >= 1 && count <= paths.len() && count <= 64);
    // Distinct path choices via partial shuffle.
    let mut order: Vec<usize> = (0..paths.len()).collect();
    for i in 0..count {
        let j = rng.random_range(i..order.len());
        order.swap(i, j);
    }
    // Distinct cut points split 64 into `count` positive parts.
    let mut cuts = Vec::with_capacity(count + 1);
    cuts.push(0u32);
    while cuts.len() < count {
        let c = rng.random_range(1..64u32);
        if !cuts.contains(&c) {
            cuts.push(c);
        }
    }
    cuts.push(64);
    cuts.sort_unstable();

    let mut decomp = PathDecomposition::default();
    for (slot, window) in order[..count].iter().zip(cuts.windows(2)) {
        let amount = (window[1] - window[0]) as f64 / 64.0;
        let path = DirectedPath::from_nodes(graph, paths[*slot].clone());
        decomp.paths.push((path, amount));
    }
    decomp
}

/// Corner-to-corner unit mass on a `side`-sided grid.
pub fn corner_mass(side: usize) -> MassVector {
    let n = side * side;
    let mut f = vec![0.0; n];
    f[0] = -1.0;
    f[n - 1] = 1.0;
    MassVector::new(f).expect("corner mass balances")
}

/// Deterministic rng for a test.
pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
