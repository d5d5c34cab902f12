//! Directed graphs with edge costs, and the vector types the solver speaks:
//! mass (divergence) vectors, edge flows, node potentials, active-edge masks,
//! and connected-component labelings of the active subgraph.
//!
//! Conventions used throughout the crate:
//!
//! * The incidence operator `D` maps node values to edge values:
//!   `(D p)_e = p[head(e)] - p[tail(e)]`.
//! * Its adjoint maps edge values to node values:
//!   `(Dᵀ J)_v = Σ_{e into v} J_e - Σ_{e out of v} J_e`, i.e. the net inflow
//!   at `v`. A feasible flow satisfies `Dᵀ J = f` where `f` is the mass
//!   vector (negative at sources, positive at sinks).
//! * The *slack* of an edge at potential `p` is `(D p)_e - c_e`; an edge is
//!   *active* when its slack is strictly positive. Slack exactly zero counts
//!   as inactive.

use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use thiserror::Error;

/// Absolute tolerance on the sum of a mass vector's entries.
pub const MASS_BALANCE_TOL: f64 = 1e-9;

/// Errors from constructing or validating graph-domain data.
#[derive(Debug, Error)]
pub enum GraphError {
    #[error("graph must have at least one node")]
    EmptyGraph,
    #[error("edge {edge}: node {node} is out of range for {nodes} nodes")]
    NodeOutOfRange { edge: usize, node: usize, nodes: usize },
    #[error("edge {edge} is a self-loop at node {node}")]
    SelfLoop { edge: usize, node: usize },
    #[error("duplicate directed edge ({tail}, {head})")]
    DuplicateEdge { tail: usize, head: usize },
    #[error("edge {edge} has cost {cost}; costs must be finite and nonnegative")]
    InvalidCost { edge: usize, cost: f64 },
    #[error("expected {expected} edge costs, got {got}")]
    CostLengthMismatch { expected: usize, got: usize },
    #[error("graph is disconnected (node {node} is not reachable, ignoring edge directions)")]
    Disconnected { node: usize },
    #[error("mass entry for node {node} is not finite")]
    NonFiniteMass { node: usize },
    #[error("mass vector sums to {sum:e}, exceeding the balance tolerance {tol:e}")]
    UnbalancedMass { sum: f64, tol: f64 },
}

/// A directed graph with nonnegative edge costs.
///
/// Graphs are validated at construction: no self-loops, no duplicate
/// directed edges, finite nonnegative costs, and the underlying undirected
/// graph must be connected. Antiparallel edge pairs `(u, v)` and `(v, u)`
/// are allowed (and are how undirected instances are represented).
#[derive(Debug, Clone)]
pub struct Graph {
    node_count: usize,
    edges: Vec<(usize, usize)>,
    costs: Vec<f64>,
    /// Outgoing edge ids per node, in edge-index order.
    out_edges: Vec<Vec<usize>>,
    /// Incoming edge ids per node, in edge-index order.
    in_edges: Vec<Vec<usize>>,
    /// Undirected adjacency: per node, `(edge id, other endpoint)` for every
    /// incident edge regardless of direction.
    incident: Vec<Vec<(usize, usize)>>,
    /// Lookup from `(tail, head)` to edge id.
    edge_ids: HashMap<(usize, usize), usize>,
}

impl Graph {
    /// Builds and validates a graph from an edge list.
    pub fn new(
        node_count: usize,
        edges: Vec<(usize, usize)>,
        costs: Vec<f64>,
    ) -> Result<Self, GraphError> {
        if node_count == 0 {
            return Err(GraphError::EmptyGraph);
        }
        if costs.len() != edges.len() {
            return Err(GraphError::CostLengthMismatch {
                expected: edges.len(),
                got: costs.len(),
            });
        }
        let mut edge_ids = HashMap::with_capacity(edges.len());
        for (e, &(tail, head)) in edges.iter().enumerate() {
            for node in [tail, head] {
                if node >= node_count {
                    return Err(GraphError::NodeOutOfRange { edge: e, node, nodes: node_count });
                }
            }
            if tail == head {
                return Err(GraphError::SelfLoop { edge: e, node: tail });
            }
            if edge_ids.insert((tail, head), e).is_some() {
                return Err(GraphError::DuplicateEdge { tail, head });
            }
            let cost = costs[e];
            if !cost.is_finite() || cost < 0.0 {
                return Err(GraphError::InvalidCost { edge: e, cost });
            }
        }
        let mut out_edges = vec![Vec::new(); node_count];
        let mut in_edges = vec![Vec::new(); node_count];
        let mut incident = vec![Vec::new(); node_count];
        for (e, &(tail, head)) in edges.iter().enumerate() {
            out_edges[tail].push(e);
            in_edges[head].push(e);
            incident[tail].push((e, head));
            incident[head].push((e, tail));
        }
        let graph = Graph { node_count, edges, costs, out_edges, in_edges, incident, edge_ids };
        let labeling = graph.flood_components(|_| true);
        if labeling.component_count() > 1 {
            // Report the first node outside the component of node 0.
            let node = labeling
                .labels()
                .iter()
                .position(|&l| l != labeling.labels()[0])
                .unwrap_or(0);
            return Err(GraphError::Disconnected { node });
        }
        Ok(graph)
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn tail(&self, edge: usize) -> usize {
        self.edges[edge].0
    }

    pub fn head(&self, edge: usize) -> usize {
        self.edges[edge].1
    }

    pub fn cost(&self, edge: usize) -> f64 {
        self.costs[edge]
    }

    pub fn costs(&self) -> &[f64] {
        &self.costs
    }

    /// Edge id of the directed edge `(tail, head)`, if present.
    pub fn edge_between(&self, tail: usize, head: usize) -> Option<usize> {
        self.edge_ids.get(&(tail, head)).copied()
    }

    /// Outgoing edge ids of `node`.
    pub fn out_edges(&self, node: usize) -> &[usize] {
        &self.out_edges[node]
    }

    /// Incoming edge ids of `node`.
    pub fn in_edges(&self, node: usize) -> &[usize] {
        &self.in_edges[node]
    }

    /// Applies the incidence operator: `(D p)_e = p[head] - p[tail]`.
    pub fn incidence_apply(&self, potential: &[f64]) -> Vec<f64> {
        assert_eq!(potential.len(), self.node_count, "potential length mismatch");
        self.edges.iter().map(|&(t, h)| potential[h] - potential[t]).collect()
    }

    /// Net inflow per node: `(Dᵀ J)_v = Σ_in J_e - Σ_out J_e`.
    pub fn divergence(&self, flow: &[f64]) -> Vec<f64> {
        assert_eq!(flow.len(), self.edges.len(), "flow length mismatch");
        let mut div = vec![0.0; self.node_count];
        for (e, &(t, h)) in self.edges.iter().enumerate() {
            div[t] -= flow[e];
            div[h] += flow[e];
        }
        div
    }

    /// Edge slacks `(D p)_e - c_e` at the given potential.
    pub fn slack(&self, potential: &[f64]) -> Vec<f64> {
        assert_eq!(potential.len(), self.node_count, "potential length mismatch");
        self.edges
            .iter()
            .zip(&self.costs)
            .map(|(&(t, h), c)| potential[h] - potential[t] - c)
            .collect()
    }

    /// Mask of edges with strictly positive slack at `potential`.
    pub fn active_set(&self, potential: &[f64]) -> ActiveMask {
        ActiveMask::from_slack(&self.slack(potential))
    }

    /// Connected components of the subgraph of active edges (edge directions
    /// ignored). Inactive-edge endpoints that touch no active edge become
    /// singleton components. Components are numbered in order of their
    /// smallest member node, which makes the labeling canonical.
    pub fn components(&self, mask: &ActiveMask) -> ComponentLabeling {
        assert_eq!(mask.len(), self.edges.len(), "mask length mismatch");
        self.flood_components(|e| mask.is_active(e))
    }

    /// Applies the Laplacian of the active subgraph:
    /// `L x = Dᵀ M D x` where `M` masks inactive edges.
    pub fn active_laplacian_apply(&self, mask: &ActiveMask, x: &[f64]) -> Vec<f64> {
        assert_eq!(mask.len(), self.edges.len(), "mask length mismatch");
        assert_eq!(x.len(), self.node_count, "vector length mismatch");
        let mut out = vec![0.0; self.node_count];
        for (e, &(t, h)) in self.edges.iter().enumerate() {
            if mask.is_active(e) {
                let d = x[h] - x[t];
                out[t] -= d;
                out[h] += d;
            }
        }
        out
    }

    fn flood_components(&self, usable: impl Fn(usize) -> bool) -> ComponentLabeling {
        const UNSEEN: usize = usize::MAX;
        let mut labels = vec![UNSEEN; self.node_count];
        let mut sizes = Vec::new();
        let mut stack = Vec::new();
        for start in 0..self.node_count {
            if labels[start] != UNSEEN {
                continue;
            }
            let comp = sizes.len();
            sizes.push(0usize);
            labels[start] = comp;
            stack.push(start);
            while let Some(v) = stack.pop() {
                sizes[comp] += 1;
                for &(e, other) in &self.incident[v] {
                    if usable(e) && labels[other] == UNSEEN {
                        labels[other] = comp;
                        stack.push(other);
                    }
                }
            }
        }
        ComponentLabeling { labels, sizes }
    }
}

/// A balanced mass (divergence) vector: one entry per node, summing to zero
/// within [`MASS_BALANCE_TOL`]. Negative entries are sources, positive are
/// sinks.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct MassVector(Vec<f64>);

impl MassVector {
    pub fn new(values: Vec<f64>) -> Result<Self, GraphError> {
        if let Some(node) = values.iter().position(|v| !v.is_finite()) {
            return Err(GraphError::NonFiniteMass { node });
        }
        let sum: f64 = values.iter().sum();
        if sum.abs() > MASS_BALANCE_TOL {
            return Err(GraphError::UnbalancedMass { sum, tol: MASS_BALANCE_TOL });
        }
        Ok(MassVector(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl<'de> Deserialize<'de> for MassVector {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let values = Vec::<f64>::deserialize(deserializer)?;
        MassVector::new(values).map_err(serde::de::Error::custom)
    }
}

/// A per-edge flow vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FlowVector(pub Vec<f64>);

impl FlowVector {
    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// A per-node dual potential. Potentials are determined only up to a
/// constant shift; the solver reports them mean-centered.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DualPotential(pub Vec<f64>);

impl DualPotential {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Boolean mask of active edges (strictly positive slack).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActiveMask {
    active: Vec<bool>,
}

impl ActiveMask {
    /// Marks edges with slack strictly greater than zero; a slack of exactly
    /// zero counts as inactive.
    pub fn from_slack(slack: &[f64]) -> Self {
        ActiveMask { active: slack.iter().map(|&s| s > 0.0).collect() }
    }

    pub fn all_inactive(edge_count: usize) -> Self {
        ActiveMask { active: vec![false; edge_count] }
    }

    pub fn len(&self) -> usize {
        self.active.len()
    }

    pub fn is_empty(&self) -> bool {
        self.active.is_empty()
    }

    pub fn is_active(&self, edge: usize) -> bool {
        self.active[edge]
    }

    pub fn set_active(&mut self, edge: usize, active: bool) {
        self.active[edge] = active;
    }

    pub fn active_count(&self) -> usize {
        self.active.iter().filter(|&&a| a).count()
    }

    /// Edge ids that differ between `self` and `other`, split into
    /// (activated, deactivated) relative to `self`.
    pub fn diff(&self, other: &ActiveMask) -> (Vec<usize>, Vec<usize>) {
        assert_eq!(self.len(), other.len(), "mask length mismatch");
        let mut activated = Vec::new();
        let mut deactivated = Vec::new();
        for e in 0..self.active.len() {
            match (self.active[e], other.active[e]) {
                (false, true) => activated.push(e),
                (true, false) => deactivated.push(e),
                _ => {}
            }
        }
        (activated, deactivated)
    }
}

/// Connected-component labeling of the active subgraph, together with the
/// orthonormal null basis it induces: one column per component, with value
/// `1/sqrt(|component|)` on member nodes. These columns span the null space
/// of the active Laplacian.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ComponentLabeling {
    labels: Vec<usize>,
    sizes: Vec<usize>,
}

impl ComponentLabeling {
    pub fn component_count(&self) -> usize {
        self.sizes.len()
    }

    pub fn node_count(&self) -> usize {
        self.labels.len()
    }

    /// Component id per node.
    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    /// Member count per component.
    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn label(&self, node: usize) -> usize {
        self.labels[node]
    }

    /// Normalized indicator column for one component: `1/sqrt(size)` on
    /// members, zero elsewhere.
    pub fn null_basis_column(&self, component: usize) -> Vec<f64> {
        let scale = 1.0 / (self.sizes[component] as f64).sqrt();
        self.labels
            .iter()
            .map(|&l| if l == component { scale } else { 0.0 })
            .collect()
    }

    /// Projects `x` onto the orthogonal complement of the null basis by
    /// subtracting each component's mean from its members.
    pub fn project_out_null(&self, x: &mut [f64]) {
        assert_eq!(x.len(), self.labels.len(), "vector length mismatch");
        let mut sums = vec![0.0; self.sizes.len()];
        for (v, &l) in self.labels.iter().enumerate() {
            sums[l] += x[v];
        }
        for (c, sum) in sums.iter_mut().enumerate() {
            *sum /= self.sizes[c] as f64;
        }
        for (v, &l) in self.labels.iter().enumerate() {
            x[v] -= sums[l];
        }
    }

    /// Member nodes of one component, in index order.
    pub fn members(&self, component: usize) -> Vec<usize> {
        self.labels
            .iter()
            .enumerate()
            .filter_map(|(v, &l)| (l == component).then_some(v))
            .collect()
    }
}
