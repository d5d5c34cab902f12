//! Dual ascent solver for the quadratically regularized min-cost flow
//! problem.
//!
//! The primal problem is `min cᵀJ + (α/2)|J|²` over flows `J ≥ 0` with
//! `DᵀJ = f`. Its dual maximizes the concave, piecewise-quadratic
//!
//! ```text
//! g(p) = α fᵀp - (1/2) |max(Dp - c, 0)|²
//! ```
//!
//! over node potentials `p`; the optimal flow is recovered as
//! `J = max(Dp - c, 0) / α`. On the region where the active set (edges with
//! positive slack) is constant, `g` is an exact quadratic with gradient
//! `αf - DᵀM(Dp - c)` and Hessian `-L`, the negated Laplacian of the active
//! subgraph.
//!
//! The main solver alternates plain gradient steps with second-order steps
//! `L⁺∇g` computed through a maintained Cholesky factor of `L + NNᵀ`
//! (see [`crate::factor`]), takes exact line searches that stop at the
//! first active-set boundary, and updates the factor by rank-1
//! modifications as edges flip. Reported transport values divide the dual
//! objective by `α` so primal and dual are directly comparable.

use crate::factor::{apply_events, CholeskyFactor, FactorError, FactorEvent, FactorEventKind};
use crate::graph::{ActiveMask, ComponentLabeling, DualPotential, FlowVector, Graph, MassVector};
use crate::util::{axpy, dot, l2_norm, mean_center};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::time::Instant;
use thiserror::Error;

/// Edges whose slack sits within this relative band of zero while the
/// search direction pushes them across the boundary are treated as crossing
/// immediately: they join (or leave) the quadratic piece at step zero
/// instead of producing a degenerate hitting time at the limit of floating
/// point. The band is scaled by `1 + |slack|_∞`.
pub const BOUNDARY_SNAP_EPS: f64 = 1e-14;

/// When the line-search walk runs out of boundaries with no curvature
/// left, a slope at most this fraction of the initial one is rounding
/// dust (the exact slope there is nonpositive on any bounded dual) and
/// the step stops at the last kink; anything larger is reported as an
/// unbounded ray.
pub const TERMINAL_SLOPE_REL_TOL: f64 = 1e-9;

/// A committed ascent step may not lower the dual objective by more than
/// this fraction of `1 + |objective|`. The exact line search is
/// nondecreasing in exact arithmetic, so a real drop means the direction's
/// positive slope was rounding noise and the walk ran far past the true
/// maximizer; such steps are rejected instead of applied.
pub const OBJ_BACKSLIDE_REL_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum SolveError {
    #[error("alpha must be positive and finite, got {0}")]
    InvalidAlpha(f64),
    #[error("dual objective is unbounded along an ascent ray; the instance admits no feasible flow")]
    UnboundedRay,
    #[error("line search requires an ascent direction (grad·dir = {0:e})")]
    NotAscentDirection(f64),
    #[error(transparent)]
    Factor(#[from] FactorError),
}

/// Solver options. `new(alpha)` fills in the standard defaults.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Regularization strength; must be positive.
    pub alpha: f64,
    /// Absolute tolerance on the dual gradient norm.
    pub grad_tol: f64,
    /// Maximum number of ascent steps.
    pub max_iter: usize,
    /// Full refactorization is scheduled after this many rank-1 events.
    pub refactor_period: usize,
    /// Seed for the random starting potential.
    pub seed: u64,
    /// Hitting times within this relative tolerance of the minimum are
    /// reported as simultaneous boundary crossings.
    pub hit_tie_rel_tol: f64,
}

impl SolverConfig {
    pub fn new(alpha: f64) -> Self {
        SolverConfig {
            alpha,
            grad_tol: 1e-8,
            max_iter: 3000,
            refactor_period: 500,
            seed: 0,
            hit_tie_rel_tol: 1e-12,
        }
    }
}

/// Mutable state of the factored dual ascent: current potential, edge
/// slacks, active mask, component labeling of the active subgraph, and the
/// Cholesky factor of its shifted Laplacian.
#[derive(Debug, Clone)]
pub struct SolverState {
    potential: Vec<f64>,
    slack: Vec<f64>,
    mask: ActiveMask,
    labeling: ComponentLabeling,
    factor: CholeskyFactor,
    iteration: usize,
}

/// What an active-set transition did to the solver state.
#[derive(Debug, Clone)]
pub struct TransitionSummary {
    pub activated: Vec<usize>,
    pub deactivated: Vec<usize>,
    /// True when the factor was rebuilt from scratch, either because a
    /// downdate failed or because the refactorization period elapsed.
    pub refactorized: bool,
}

impl SolverState {
    /// Builds the state at a given potential, factorizing the active
    /// Laplacian from scratch.
    pub fn new(graph: &Graph, potential: Vec<f64>) -> Result<Self, FactorError> {
        assert_eq!(potential.len(), graph.node_count(), "potential length mismatch");
        let slack = graph.slack(&potential);
        let mask = ActiveMask::from_slack(&slack);
        let labeling = graph.components(&mask);
        let factor = CholeskyFactor::factorize(graph, &mask, &labeling)?;
        Ok(SolverState { potential, slack, mask, labeling, factor, iteration: 0 })
    }

    pub fn potential(&self) -> &[f64] {
        &self.potential
    }

    pub fn slack(&self) -> &[f64] {
        &self.slack
    }

    pub fn mask(&self) -> &ActiveMask {
        &self.mask
    }

    pub fn labeling(&self) -> &ComponentLabeling {
        &self.labeling
    }

    pub fn factor(&self) -> &CholeskyFactor {
        &self.factor
    }

    /// Completed ascent steps.
    pub fn iteration(&self) -> usize {
        self.iteration
    }

    /// Dual objective `g(p)` at the current potential.
    pub fn objective(&self, mass: &MassVector, alpha: f64) -> f64 {
        objective_from(&self.slack, self.potential.as_slice(), mass.values(), alpha)
    }

    /// Dual gradient at the current potential.
    pub fn gradient(&self, graph: &Graph, mass: &MassVector, alpha: f64) -> Vec<f64> {
        gradient_from(graph, mass.values(), alpha, &self.slack, &self.mask)
    }

    /// Primal flow recovered from the current slacks.
    pub fn recover_primal(&self, alpha: f64) -> FlowVector {
        recover_primal(&self.slack, alpha)
    }

    /// Moves the state to `new_potential`: recomputes slacks, advances the
    /// active mask by the line search's membership `flips` (resynchronizing
    /// any edge whose slack clearly contradicts its membership), diffs it
    /// against the previous mask, applies the implied rank-1 factor events
    /// (all updates before all downdates), and rebuilds the factor outright
    /// when a downdate fails or `refactor_period` rank-1 events have
    /// accumulated.
    pub fn apply_transition(
        &mut self,
        graph: &Graph,
        new_potential: &[f64],
        flips: &[EdgeFlip],
        refactor_period: usize,
    ) -> Result<TransitionSummary, FactorError> {
        assert_eq!(new_potential.len(), graph.node_count(), "potential length mismatch");
        self.potential.copy_from_slice(new_potential);
        self.slack = graph.slack(&self.potential);
        let new_mask = evolve_mask(&self.mask, &self.slack, flips);
        let (activated, deactivated) = self.mask.diff(&new_mask);
        let mut refactorized = false;
        if !activated.is_empty() || !deactivated.is_empty() {
            let (new_labeling, events) =
                transition_events(graph, &self.labeling, &activated, &deactivated, &new_mask);
            match apply_events(&mut self.factor, &events) {
                Ok(()) => {}
                Err(FactorError::DowndateFailed { .. }) => {
                    self.factor = CholeskyFactor::factorize(graph, &new_mask, &new_labeling)?;
                    refactorized = true;
                }
                Err(e) => return Err(e),
            }
            self.labeling = new_labeling;
            self.mask = new_mask;
        }
        if !refactorized && self.factor.update_count() >= refactor_period {
            self.factor = CholeskyFactor::factorize(graph, &self.mask, &self.labeling)?;
            refactorized = true;
        }
        self.iteration += 1;
        Ok(TransitionSummary { activated, deactivated, refactorized })
    }
}

/// Computes the new component labeling after an active-set change and the
/// rank-1 factor events that take `L + NNᵀ` from the old mask/labeling to
/// the new one: one edge event per flipped edge, plus add/remove events for
/// every component whose node set changed.
pub fn transition_events(
    graph: &Graph,
    old_labeling: &ComponentLabeling,
    activated: &[usize],
    deactivated: &[usize],
    new_mask: &ActiveMask,
) -> (ComponentLabeling, Vec<FactorEvent>) {
    let new_labeling = graph.components(new_mask);
    let mut events = Vec::new();
    for &e in activated {
        events.push(FactorEvent {
            kind: FactorEventKind::AddEdge,
            vector: FactorEvent::edge_vector(graph, e),
        });
    }
    for &e in deactivated {
        events.push(FactorEvent {
            kind: FactorEventKind::RemoveEdge,
            vector: FactorEvent::edge_vector(graph, e),
        });
    }

    // Match old components to new ones by node set; unmatched old components
    // are removed from the shift, unmatched new ones are added.
    let old_count = old_labeling.component_count();
    let new_count = new_labeling.component_count();
    let mut candidate = vec![usize::MAX; old_count];
    let mut intact = vec![true; old_count];
    for v in 0..graph.node_count() {
        let c = old_labeling.label(v);
        let l = new_labeling.label(v);
        if candidate[c] == usize::MAX {
            candidate[c] = l;
        } else if candidate[c] != l {
            intact[c] = false;
        }
    }
    let mut new_matched = vec![false; new_count];
    for c in 0..old_count {
        let matched = intact[c] && new_labeling.sizes()[candidate[c]] == old_labeling.sizes()[c];
        if matched {
            new_matched[candidate[c]] = true;
        } else {
            events.push(FactorEvent {
                kind: FactorEventKind::RemoveComponent,
                vector: old_labeling.null_basis_column(c),
            });
        }
    }
    for l in 0..new_count {
        if !new_matched[l] {
            events.push(FactorEvent {
                kind: FactorEventKind::AddComponent,
                vector: new_labeling.null_basis_column(l),
            });
        }
    }
    (new_labeling, events)
}

/// Active mask after a step: the line search's membership flips take
/// effect first, then every edge whose slack clears the snap band is
/// resynchronized to the side of the boundary it actually sits on. Edges
/// inside the band keep their event-assigned membership — deriving it from
/// the slack sign would undo the crossing the line search just committed
/// to whenever rounding lands the slack on the wrong side of zero.
pub fn evolve_mask(mask: &ActiveMask, slack: &[f64], flips: &[EdgeFlip]) -> ActiveMask {
    let mut next = mask.clone();
    for flip in flips {
        next.set_active(flip.edge, flip.activate);
    }
    let snap = BOUNDARY_SNAP_EPS * (1.0 + crate::util::linf_norm(slack));
    for (e, &s) in slack.iter().enumerate() {
        if s > snap {
            next.set_active(e, true);
        } else if s < -snap {
            next.set_active(e, false);
        }
    }
    next
}

/// The dual objective `g(p) = α fᵀp - (1/2)|max(Dp - c, 0)|²`.
///
/// This is the function the ascent maximizes; the transport value reported
/// by the solver is `g(p)/α`.
pub fn dual_objective(graph: &Graph, potential: &[f64], mass: &MassVector, alpha: f64) -> f64 {
    let slack = graph.slack(potential);
    objective_from(&slack, potential, mass.values(), alpha)
}

/// Gradient of [`dual_objective`]: `αf - DᵀM(Dp - c)`.
pub fn dual_gradient(graph: &Graph, potential: &[f64], mass: &MassVector, alpha: f64) -> Vec<f64> {
    let slack = graph.slack(potential);
    let mask = ActiveMask::from_slack(&slack);
    gradient_from(graph, mass.values(), alpha, &slack, &mask)
}

fn objective_from(slack: &[f64], potential: &[f64], f: &[f64], alpha: f64) -> f64 {
    let linear: f64 = alpha * dot(f, potential);
    let quadratic: f64 = slack.iter().filter(|&&s| s > 0.0).map(|&s| s * s).sum();
    linear - 0.5 * quadratic
}

fn gradient_from(graph: &Graph, f: &[f64], alpha: f64, slack: &[f64], mask: &ActiveMask) -> Vec<f64> {
    let mut grad: Vec<f64> = f.iter().map(|&fi| alpha * fi).collect();
    for (e, &(t, h)) in graph.edges().iter().enumerate() {
        if mask.is_active(e) {
            grad[t] += slack[e];
            grad[h] -= slack[e];
        }
    }
    grad
}

/// Ascent direction for iteration `k` (1-based): odd iterations take the
/// gradient, even iterations the second-order direction `L⁺∇g` through the
/// state's factor. Directions are shifted to zero mean. If the second-order
/// direction is degenerate (the gradient lies in the active null space, as
/// happens e.g. while no edge is active), the gradient is used instead.
pub fn search_direction(
    graph: &Graph,
    state: &SolverState,
    mass: &MassVector,
    alpha: f64,
    iteration: usize,
) -> Vec<f64> {
    let grad = state.gradient(graph, mass, alpha);
    direction_from(&grad, iteration, Some((&state.factor, &state.labeling))).0
}

/// Returns the direction and `grad·dir`. `second_order` supplies the
/// factor/labeling used on even iterations; `None` always takes the
/// gradient.
fn direction_from(
    grad: &[f64],
    iteration: usize,
    second_order: Option<(&CholeskyFactor, &ComponentLabeling)>,
) -> (Vec<f64>, f64) {
    if iteration % 2 == 0 {
        if let Some((factor, labeling)) = second_order {
            let mut dir = factor.pinv_apply(labeling, grad);
            mean_center(&mut dir);
            let gd = dot(grad, &dir);
            if gd > 0.0 {
                return (dir, gd);
            }
        }
    }
    let mut dir = grad.to_vec();
    mean_center(&mut dir);
    let gd = dot(grad, &dir);
    (dir, gd)
}

/// Which line-search rule produced the step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum StepRule {
    /// The step is a parabola vertex strictly inside a quadratic piece.
    Quadratic,
    /// The step lands on an active-set boundary (the slope reaches zero
    /// exactly where an edge's slack crosses zero).
    ActiveSet,
}

/// A membership change implied by a line-search step. The active set is
/// tracked as event-driven state: an edge whose boundary fired crosses into
/// the other piece even when the recomputed slack lands on the wrong side
/// of zero by rounding. Deriving membership from the slack sign instead
/// jams the ascent: the entering edge lands at `0⁻`, stays out of the mask,
/// and the next direction runs into the same boundary with a geometrically
/// shrinking step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EdgeFlip {
    pub edge: usize,
    pub activate: bool,
}

#[derive(Debug, Clone)]
pub struct LineSearchOutcome {
    pub step: f64,
    pub rule: StepRule,
    /// Edges whose boundary the step crossed or landed on, in crossing
    /// order; empty when the step stays inside the starting piece.
    pub hitting_edges: Vec<usize>,
    /// Membership changes the step commits to: edges already sitting on
    /// their boundary that the direction pushes across (flipped at step
    /// zero) plus every boundary the walk crossed or landed on. Feed
    /// these to [`SolverState::apply_transition`].
    pub flips: Vec<EdgeFlip>,
    /// Number of boundary-sitting edges flipped at step zero.
    pub boundary_crossings: usize,
}

/// How far a line search may advance along the ray.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SearchReach {
    /// Stop at the first active-set boundary ahead of the start (or at the
    /// parabola vertex when it comes first): the step is
    /// `min((∇g·s)/(sᵀLs), t_hit)`.
    FirstBoundary,
    /// Cross boundaries while the slope stays positive and stop at the
    /// first parabola vertex inside a piece: the exact maximizer of the
    /// restriction.
    Exact,
}

/// Maximizes `g` along `direction` up to the first active-set boundary.
/// The restriction of `g` to the ray is concave, continuously
/// differentiable, and piecewise quadratic: within a piece the slope
/// `∇g·s − t·(sᵀLs)` falls linearly at the piece's curvature, and the
/// piece ends at the next hitting time `-slack_e/(Ds)_e > 0` where an
/// edge's slack crosses zero and its `(Ds)²` term joins or leaves the
/// curvature. This search takes `min((∇g·s)/(sᵀLs), t_hit)`: the vertex of
/// the starting piece's parabola, capped by the first boundary ahead, whose
/// membership flip is committed in the outcome. Requires an ascent
/// direction; a ray with no curvature and no boundary ahead means the dual
/// is unbounded (the instance has no feasible flow).
pub fn line_search(
    graph: &Graph,
    state: &SolverState,
    mass: &MassVector,
    alpha: f64,
    direction: &[f64],
    hit_tie_rel_tol: f64,
) -> Result<LineSearchOutcome, SolveError> {
    let grad = state.gradient(graph, mass, alpha);
    let gd = dot(&grad, direction);
    if !(gd > 0.0) {
        return Err(SolveError::NotAscentDirection(gd));
    }
    line_search_core(
        graph,
        &state.slack,
        &state.mask,
        direction,
        gd,
        hit_tie_rel_tol,
        SearchReach::FirstBoundary,
        0.0,
    )
}

/// Exact maximization of `g` along `direction`: walks the pieces of the
/// concave piecewise-quadratic restriction in order, crossing each
/// boundary while the slope stays positive — each crossing commits that
/// edge's membership flip — and stops at the first parabola vertex that
/// lands inside its piece. When the vertex precedes the first boundary
/// this reduces to [`line_search`]'s single-piece rule; walking on across
/// later boundaries keeps an ascent from stalling when opposing directions
/// re-create the same boundary at a geometrically shrinking distance.
pub fn line_search_exact(
    graph: &Graph,
    state: &SolverState,
    mass: &MassVector,
    alpha: f64,
    direction: &[f64],
    hit_tie_rel_tol: f64,
) -> Result<LineSearchOutcome, SolveError> {
    let grad = state.gradient(graph, mass, alpha);
    let gd = dot(&grad, direction);
    if !(gd > 0.0) {
        return Err(SolveError::NotAscentDirection(gd));
    }
    line_search_core(
        graph,
        &state.slack,
        &state.mask,
        direction,
        gd,
        hit_tie_rel_tol,
        SearchReach::Exact,
        BOUNDARY_SNAP_EPS,
    )
}

fn line_search_core(
    graph: &Graph,
    slack: &[f64],
    mask: &ActiveMask,
    direction: &[f64],
    grad_dot_dir: f64,
    hit_tie_rel_tol: f64,
    reach: SearchReach,
    band: f64,
) -> Result<LineSearchOutcome, SolveError> {
    let edge_delta = graph.incidence_apply(direction);
    // `band = 0` narrows the sitter classification below to slacks at
    // exactly zero, the literal hitting-time rule.
    let snap = band * (1.0 + crate::util::linf_norm(slack));

    // Step-zero classification. An edge is interior to its piece when its
    // slack clears the snap band on the side its membership claims;
    // interior edges contribute a boundary crossing at `-slack_e/(Ds)_e`
    // when the direction drives their slack toward zero. Boundary-sitters
    // follow the direction instead: for any t > 0 their slack sign is the
    // sign of (Ds)_e, so membership flips at step zero whenever that sign
    // disagrees with the current mask.
    let mut flips = Vec::new();
    let mut boundary_crossings = 0usize;
    let mut curvature = 0.0;
    let mut crossings: Vec<(f64, usize)> = Vec::new();
    for (e, &d) in edge_delta.iter().enumerate() {
        let active = mask.is_active(e);
        let interior = if active { slack[e] > snap } else { slack[e] < -snap };
        let in_piece = if interior {
            if d != 0.0 {
                let h = -slack[e] / d;
                if h > 0.0 {
                    crossings.push((h, e));
                }
            }
            active
        } else {
            let ahead_active = if d == 0.0 { active } else { d > 0.0 };
            if ahead_active != active {
                flips.push(EdgeFlip { edge: e, activate: ahead_active });
                boundary_crossings += 1;
            }
            ahead_active
        };
        if in_piece {
            curvature += d * d;
        }
    }
    crossings.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));

    let mut slope = grad_dot_dir;
    let mut cur_t = 0.0_f64;
    let mut hitting_edges: Vec<usize> = Vec::new();
    let mut next = 0usize;
    let step = loop {
        let vertex =
            if curvature > 0.0 { cur_t + slope / curvature } else { f64::INFINITY };
        let boundary = crossings.get(next).map_or(f64::INFINITY, |c| c.0);
        if vertex <= boundary {
            if vertex.is_infinite() {
                // No curvature and no boundary left. On a bounded dual the
                // exact slope here is ≤ 0, so a small positive residual is
                // rounding dust from the walk and the maximizer is the last
                // kink; a slope on the order of the initial one is a
                // genuinely unbounded ray (no feasible flow).
                if slope <= grad_dot_dir * TERMINAL_SLOPE_REL_TOL {
                    break cur_t;
                }
                return Err(SolveError::UnboundedRay);
            }
            break vertex;
        }
        let (t, e) = crossings[next];
        next += 1;
        // The vertex check above guarantees a positive slope at the
        // boundary up to rounding; the clamp keeps dust from pushing the
        // next vertex behind a boundary already crossed.
        slope = (slope - (t - cur_t) * curvature).max(0.0);
        cur_t = t;
        let activate = !mask.is_active(e);
        hitting_edges.push(e);
        flips.push(EdgeFlip { edge: e, activate });
        if reach == SearchReach::FirstBoundary {
            break t;
        }
        let dd = edge_delta[e] * edge_delta[e];
        curvature = if activate { curvature + dd } else { (curvature - dd).max(0.0) };
    };
    // Commit boundaries the vertex lands on within the tie tolerance too,
    // so a stop a few ulps short of a crossing cannot leave that edge
    // behind to re-fire with a vanishing step next iteration.
    let mut landed = false;
    while let Some(&(t, e)) = crossings.get(next) {
        if t - step > step * hit_tie_rel_tol {
            break;
        }
        next += 1;
        landed = true;
        hitting_edges.push(e);
        flips.push(EdgeFlip { edge: e, activate: !mask.is_active(e) });
    }
    let stopped_on_kink = landed || (!hitting_edges.is_empty() && step == cur_t);
    let rule = if stopped_on_kink { StepRule::ActiveSet } else { StepRule::Quadratic };
    Ok(LineSearchOutcome { step, rule, hitting_edges, flips, boundary_crossings })
}

/// Primal flow recovered from edge slacks: `J_e = max(slack_e, 0)/α`,
/// exactly zero on inactive edges.
pub fn recover_primal(slack: &[f64], alpha: f64) -> FlowVector {
    FlowVector(slack.iter().map(|&s| if s > 0.0 { s / alpha } else { 0.0 }).collect())
}

/// Primal objective `cᵀJ + (α/2)|J|²`.
pub fn primal_objective(graph: &Graph, flow: &FlowVector, alpha: f64) -> f64 {
    let j = flow.values();
    assert_eq!(j.len(), graph.edge_count(), "flow length mismatch");
    let linear = dot(graph.costs(), j);
    let quadratic: f64 = dot(j, j);
    linear + 0.5 * alpha * quadratic
}

/// Result of one solver run. `dual_value` and `primal_value` are both on
/// the transport scale (the dual objective is divided by `α`), so their
/// difference is the duality gap.
#[derive(Debug, Clone, Serialize)]
pub struct SolveReport {
    pub alpha: f64,
    pub potential: DualPotential,
    pub flow: FlowVector,
    pub dual_value: f64,
    pub primal_value: f64,
    pub gradient_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    pub wall_time_s: f64,
    pub active_set_changes: usize,
    pub zero_hit_events: usize,
}

impl SolveReport {
    pub fn duality_gap(&self) -> f64 {
        self.primal_value - self.dual_value
    }

    /// Flat `key value` text, one scalar per line.
    pub fn to_kv_text(&self) -> String {
        let mut s = String::new();
        s.push_str(&format!("alpha {}\n", self.alpha));
        s.push_str(&format!("converged {}\n", self.converged));
        s.push_str(&format!("iterations {}\n", self.iterations));
        s.push_str(&format!("gradient_norm {:e}\n", self.gradient_norm));
        s.push_str(&format!("dual_value {}\n", self.dual_value));
        s.push_str(&format!("primal_value {}\n", self.primal_value));
        s.push_str(&format!("duality_gap {:e}\n", self.duality_gap()));
        s.push_str(&format!("active_set_changes {}\n", self.active_set_changes));
        s.push_str(&format!("zero_hit_events {}\n", self.zero_hit_events));
        s.push_str(&format!("wall_time_s {}\n", self.wall_time_s));
        s
    }

    /// Structured JSON document (includes the potential and flow vectors).
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

pub(crate) enum AscentMode {
    /// Alternating gradient / factored second-order steps with rank-1
    /// factor maintenance (the main solver).
    HessUpdate,
    /// Gradient steps only; no factorization at all.
    GradientOnly,
    /// Alternating gradient steps and steps preconditioned by one upfront
    /// factorization of the full-graph Laplacian, never updated.
    PrecondGrad,
}

/// Solves the regularized problem with the alternating factored ascent.
pub fn solve(
    graph: &Graph,
    mass: &MassVector,
    config: &SolverConfig,
) -> Result<SolveReport, SolveError> {
    run_ascent(graph, mass, config, AscentMode::HessUpdate)
}

pub(crate) fn run_ascent(
    graph: &Graph,
    mass: &MassVector,
    config: &SolverConfig,
    mode: AscentMode,
) -> Result<SolveReport, SolveError> {
    let n = graph.node_count();
    assert_eq!(mass.len(), n, "mass length mismatch");
    if !(config.alpha > 0.0 && config.alpha.is_finite()) {
        return Err(SolveError::InvalidAlpha(config.alpha));
    }
    let alpha = config.alpha;
    let f = mass.values();
    // The factored solver uses the exact maximizer along each ray; the
    // first-order baselines stop at the first boundary, which is what makes
    // them representative first-order references.
    // The factored modes use the exact maximizer along each ray and keep
    // membership by the committed boundary events, with a snap band that
    // absorbs edges parked on their boundary by rounding. The plain
    // gradient baseline is the classical method: single-piece steps and
    // membership recomputed from the slack signs, so a step that lands an
    // edge at 0⁻ leaves it outside the mask and the next ray meets the same
    // boundary again — the stalling behavior second-order steps avoid.
    let (reach, band) = match mode {
        AscentMode::HessUpdate | AscentMode::PrecondGrad => {
            (SearchReach::Exact, BOUNDARY_SNAP_EPS)
        }
        AscentMode::GradientOnly => (SearchReach::FirstBoundary, 0.0),
    };
    let start = Instant::now();

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut p: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
    mean_center(&mut p);

    // HessUpdate carries the full factored state; the other modes only the
    // potential/slack/mask triple (plus, for PrecondGrad, a static factor).
    let mut state: Option<SolverState> = None;
    let mut full_factor: Option<(CholeskyFactor, ComponentLabeling)> = None;
    let mut slack;
    let mut mask;
    match mode {
        AscentMode::HessUpdate => {
            let s = SolverState::new(graph, p.clone())?;
            slack = s.slack.clone();
            mask = s.mask.clone();
            state = Some(s);
        }
        AscentMode::GradientOnly => {
            slack = graph.slack(&p);
            mask = ActiveMask::from_slack(&slack);
        }
        AscentMode::PrecondGrad => {
            slack = graph.slack(&p);
            mask = ActiveMask::from_slack(&slack);
            let all_active = ActiveMask::from_slack(&vec![1.0; graph.edge_count()]);
            let labeling = graph.components(&all_active);
            let factor = CholeskyFactor::factorize(graph, &all_active, &labeling)?;
            full_factor = Some((factor, labeling));
        }
    }

    let mut active_set_changes = 0usize;
    let mut zero_hit_events = 0usize;
    let mut steps = 0usize;
    let mut grad = gradient_from(graph, f, alpha, &slack, &mask);
    let mut grad_norm = l2_norm(&grad);
    let mut obj = objective_from(&slack, &p, f, alpha);

    while grad_norm > config.grad_tol && steps < config.max_iter {
        let k = steps + 1;
        let second = match mode {
            AscentMode::HessUpdate => {
                state.as_ref().map(|s| (&s.factor, &s.labeling))
            }
            AscentMode::PrecondGrad => full_factor.as_ref().map(|(f, l)| (f, l)),
            AscentMode::GradientOnly => None,
        };
        let (dir, gd) = direction_from(&grad, k, second);
        if !(gd > 0.0) {
            // The centered gradient no longer yields a representable ascent
            // direction; nothing more can be gained in floating point.
            break;
        }
        let mut outcome =
            line_search_core(graph, &slack, &mask, &dir, gd, config.hit_tie_rel_tol, reach, band)?;
        let mut p_new = p.clone();
        axpy(&mut p_new, outcome.step, &dir);
        mean_center(&mut p_new);
        let mut obj_new = objective_from(&graph.slack(&p_new), &p_new, f, alpha);
        // Written so a NaN objective also counts as a backslide.
        let floor = obj - OBJ_BACKSLIDE_REL_TOL * (1.0 + obj.abs());
        if !(obj_new >= floor) {
            // The direction's positive slope was rounding noise and the walk
            // overshot the true maximizer. Retake the iteration along the
            // plain gradient, whose slope ‖∇g‖² is solidly representable; if
            // even that cannot hold the objective, floating point is
            // exhausted and the run stops where it stands.
            let mut gdir = grad.clone();
            mean_center(&mut gdir);
            let ggd = dot(&grad, &gdir);
            if !(ggd > 0.0) {
                break;
            }
            outcome = line_search_core(
                graph,
                &slack,
                &mask,
                &gdir,
                ggd,
                config.hit_tie_rel_tol,
                reach,
                band,
            )?;
            p_new.copy_from_slice(&p);
            axpy(&mut p_new, outcome.step, &gdir);
            mean_center(&mut p_new);
            obj_new = objective_from(&graph.slack(&p_new), &p_new, f, alpha);
            if !(obj_new >= floor) {
                break;
            }
        }
        zero_hit_events += outcome.boundary_crossings;
        p = p_new;
        obj = obj_new;

        match state.as_mut() {
            Some(s) => {
                let summary = s.apply_transition(graph, &p, &outcome.flips, config.refactor_period)?;
                active_set_changes += summary.activated.len() + summary.deactivated.len();
                slack.copy_from_slice(&s.slack);
                mask = s.mask.clone();
            }
            None => {
                slack = graph.slack(&p);
                let new_mask = match mode {
                    // Classical membership: the slack sign at the new point
                    // decides, boundary events notwithstanding.
                    AscentMode::GradientOnly => ActiveMask::from_slack(&slack),
                    _ => evolve_mask(&mask, &slack, &outcome.flips),
                };
                let (activated, deactivated) = mask.diff(&new_mask);
                active_set_changes += activated.len() + deactivated.len();
                mask = new_mask;
            }
        }
        steps = k;
        grad = gradient_from(graph, f, alpha, &slack, &mask);
        grad_norm = l2_norm(&grad);
    }

    let converged = grad_norm <= config.grad_tol;
    let flow = recover_primal(&slack, alpha);
    let primal_value = primal_objective(graph, &flow, alpha);
    let dual_value = objective_from(&slack, &p, f, alpha) / alpha;
    Ok(SolveReport {
        alpha,
        potential: DualPotential(p),
        flow,
        dual_value,
        primal_value,
        gradient_norm: grad_norm,
        iterations: steps,
        converged,
        wall_time_s: start.elapsed().as_secs_f64(),
        active_set_changes,
        zero_hit_events,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Graph;

    fn single_edge() -> (Graph, MassVector) {
        let g = Graph::new(2, vec![(0, 1)], vec![1.0]).unwrap();
        let f = MassVector::new(vec![-1.0, 1.0]).unwrap();
        (g, f)
    }

    #[test]
    fn solves_single_edge_in_closed_form() {
        // One unit of mass over a unit-cost edge at alpha = 1: J = 1,
        // value = c·m + (alpha/2) m² = 1.5, potential difference c + alpha·m = 2.
        let (g, f) = single_edge();
        let report = solve(&g, &f, &SolverConfig::new(1.0)).unwrap();
        assert!(report.converged, "single-edge instance must converge");
        assert!((report.flow.values()[0] - 1.0).abs() < 1e-10);
        assert!((report.primal_value - 1.5).abs() < 1e-10);
        assert!((report.dual_value - 1.5).abs() < 1e-10);
        let p = report.potential.as_slice();
        assert!((p[1] - p[0] - 2.0).abs() < 1e-10);
        // Mean-centered canonical potential.
        assert!((p[0] + p[1]).abs() < 1e-12);
    }

    #[test]
    fn unconverged_run_is_reported_not_an_error() {
        let (g, f) = single_edge();
        let mut config = SolverConfig::new(1.0);
        config.max_iter = 0;
        let report = solve(&g, &f, &config).unwrap();
        assert!(!report.converged);
        assert_eq!(report.iterations, 0);
    }

    #[test]
    fn rejects_nonpositive_alpha() {
        let (g, f) = single_edge();
        assert!(matches!(
            solve(&g, &f, &SolverConfig::new(0.0)),
            Err(SolveError::InvalidAlpha(_))
        ));
        assert!(matches!(
            solve(&g, &f, &SolverConfig::new(f64::NAN)),
            Err(SolveError::InvalidAlpha(_))
        ));
    }

    #[test]
    fn transition_activating_an_edge_matches_fresh_factorization() {
        let (g, _) = single_edge();
        // Start inactive (slack = -1), then move the potential so the edge
        // activates; the rank-1 event path must agree with refactorizing.
        let mut state = SolverState::new(&g, vec![0.0, 0.0]).unwrap();
        assert_eq!(state.mask().active_count(), 0);
        let summary = state.apply_transition(&g, &[-1.0, 1.0], &[], usize::MAX).unwrap();
        assert_eq!(summary.activated, vec![0]);
        assert!(summary.deactivated.is_empty());
        assert!(!summary.refactorized);
        assert_eq!(state.mask().active_count(), 1);
        assert_eq!(state.labeling().component_count(), 1);
        let fresh = CholeskyFactor::factorize(&g, state.mask(), state.labeling()).unwrap();
        let a = state.factor().reconstruct();
        let b = fresh.reconstruct();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn exact_search_crosses_a_boundary_while_the_ascent_continues() {
        // Inactive edge with slack -1 and direction doubling the potential
        // difference: the slack crosses zero at t = 0.5, the edge's
        // curvature joins there, and the walk continues to the vertex of
        // the new piece at t = 1 — which is the single-edge optimum.
        let (g, f) = single_edge();
        let state = SolverState::new(&g, vec![0.0, 0.0]).unwrap();
        let direction = [-1.0, 1.0]; // (Ds) = 2
        let outcome = line_search_exact(&g, &state, &f, 1.0, &direction, 1e-12).unwrap();
        assert_eq!(outcome.rule, StepRule::Quadratic);
        assert!((outcome.step - 1.0).abs() < 1e-15);
        assert_eq!(outcome.hitting_edges, vec![0]);
        assert_eq!(outcome.flips, vec![EdgeFlip { edge: 0, activate: true }]);
        assert_eq!(outcome.boundary_crossings, 0);
    }

    #[test]
    fn first_boundary_search_stops_at_the_crossing_the_walk_passes() {
        // Same ray as above: the single-piece rule caps the step at the
        // boundary t = 0.5 and commits the activation there.
        let (g, f) = single_edge();
        let state = SolverState::new(&g, vec![0.0, 0.0]).unwrap();
        let direction = [-1.0, 1.0];
        let outcome = line_search(&g, &state, &f, 1.0, &direction, 1e-12).unwrap();
        assert_eq!(outcome.rule, StepRule::ActiveSet);
        assert!((outcome.step - 0.5).abs() < 1e-15);
        assert_eq!(outcome.hitting_edges, vec![0]);
        assert_eq!(outcome.flips, vec![EdgeFlip { edge: 0, activate: true }]);
        assert_eq!(outcome.boundary_crossings, 0);
    }

    #[test]
    fn hitting_edge_enters_the_mask_even_when_its_slack_rounds_to_zero() {
        // A step that lands exactly on a boundary leaves the flipping
        // edge's slack at 0 (or a few ulps past); the membership flip from
        // the line search must still activate the edge, otherwise the next
        // search runs into the same boundary forever. Setup: path 0→1→2,
        // first edge active with slack 0.5, second inactive with slack -2;
        // along s = (0,1,3) the slope 1 - t reaches zero exactly at the
        // second edge's crossing t = 1.
        let g = Graph::new(3, vec![(0, 1), (1, 2)], vec![1.0, 1.0]).unwrap();
        let f = MassVector::new(vec![-0.5, 0.0, 0.5]).unwrap();
        let mut state = SolverState::new(&g, vec![0.0, 1.5, 0.5]).unwrap();
        assert_eq!(state.mask().active_count(), 1);
        let direction = [0.0, 1.0, 3.0];
        let outcome = line_search(&g, &state, &f, 1.0, &direction, 1e-12).unwrap();
        assert_eq!(outcome.rule, StepRule::ActiveSet);
        assert!((outcome.step - 1.0).abs() < 1e-15);
        assert_eq!(outcome.flips, vec![EdgeFlip { edge: 1, activate: true }]);
        let p: Vec<f64> = state
            .potential()
            .iter()
            .zip(&direction)
            .map(|(pi, di)| pi + outcome.step * di)
            .collect();
        state.apply_transition(&g, &p, &outcome.flips, 500).unwrap();
        assert_eq!(state.slack()[1], 0.0);
        assert_eq!(state.mask().active_count(), 2, "boundary edge must join the active set");
        // The factor now covers the activated edge: the next second-order
        // direction ascends inside the enlarged piece.
        let dir2 = search_direction(&g, &state, &f, 1.0, 2);
        let outcome2 = line_search(&g, &state, &f, 1.0, &dir2, 1e-12).unwrap();
        assert!(outcome2.step.is_finite());
    }

    #[test]
    fn edge_parked_on_its_boundary_joins_the_quadratic_piece() {
        // Slack exactly 0 with the direction pushing it active: no positive
        // hitting time exists, but the edge supplies curvature immediately,
        // so the vertex step is finite instead of an unbounded ray.
        let (g, f) = single_edge();
        let state = SolverState::new(&g, vec![-0.5, 0.5]).unwrap();
        assert_eq!(state.slack()[0], 0.0);
        assert_eq!(state.mask().active_count(), 0);
        let outcome = line_search(&g, &state, &f, 1.0, &[-1.0, 1.0], 1e-12).unwrap();
        assert_eq!(outcome.rule, StepRule::Quadratic);
        assert_eq!(outcome.boundary_crossings, 1);
        // grad·dir = 2, curvature (Ds)² = 4, vertex at 0.5.
        assert!((outcome.step - 0.5).abs() < 1e-15);
    }

    #[test]
    fn line_search_takes_quadratic_vertex_inside_a_piece() {
        // Active edge (slack 1) with f = (-2, 2): grad = (-1, 1),
        // direction = grad has (Ds) = 2, curvature 4, grad·dir = 2, so the
        // vertex lies at t = 0.5 before the deactivation boundary.
        let g = Graph::new(2, vec![(0, 1)], vec![1.0]).unwrap();
        let f = MassVector::new(vec![-2.0, 2.0]).unwrap();
        let state = SolverState::new(&g, vec![-1.0, 1.0]).unwrap();
        assert_eq!(state.mask().active_count(), 1);
        let grad = state.gradient(&g, &f, 1.0);
        assert_eq!(grad, vec![-1.0, 1.0]);
        let outcome = line_search(&g, &state, &f, 1.0, &grad, 1e-12).unwrap();
        assert_eq!(outcome.rule, StepRule::Quadratic);
        assert!((outcome.step - 0.5).abs() < 1e-15);
        assert!(outcome.hitting_edges.is_empty());
    }

    #[test]
    fn line_search_rejects_descent_directions() {
        let (g, f) = single_edge();
        let state = SolverState::new(&g, vec![0.0, 0.0]).unwrap();
        let err = line_search(&g, &state, &f, 1.0, &[1.0, -1.0], 1e-12).unwrap_err();
        assert!(matches!(err, SolveError::NotAscentDirection(_)));
    }

    #[test]
    fn search_direction_alternates_parity() {
        let g = Graph::new(3, vec![(0, 1), (1, 2)], vec![1.0, 1.0]).unwrap();
        let f = MassVector::new(vec![-1.0, 0.0, 1.0]).unwrap();
        // Potential activating both edges.
        let state = SolverState::new(&g, vec![-2.0, 0.0, 2.0]).unwrap();
        assert_eq!(state.mask().active_count(), 2);
        let grad = state.gradient(&g, &f, 1.0);
        let odd = search_direction(&g, &state, &f, 1.0, 1);
        let mut centered = grad.clone();
        crate::util::mean_center(&mut centered);
        for (a, b) in odd.iter().zip(&centered) {
            assert!((a - b).abs() < 1e-15, "odd iterations take the gradient");
        }
        let even = search_direction(&g, &state, &f, 1.0, 2);
        // The second-order direction solves L s = P grad on the active
        // component.
        let ls = g.active_laplacian_apply(state.mask(), &even);
        let mut projected = grad.clone();
        state.labeling().project_out_null(&mut projected);
        for (a, b) in ls.iter().zip(&projected) {
            assert!((a - b).abs() < 1e-10, "L·dir must reproduce the projected gradient");
        }
    }

    #[test]
    fn even_iteration_with_empty_active_set_falls_back_to_gradient() {
        let (g, f) = single_edge();
        let state = SolverState::new(&g, vec![0.0, 0.0]).unwrap();
        let dir = search_direction(&g, &state, &f, 1.0, 2);
        let grad = state.gradient(&g, &f, 1.0);
        let mut centered = grad;
        crate::util::mean_center(&mut centered);
        for (a, b) in dir.iter().zip(&centered) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn report_serializes_to_kv_and_json() {
        let (g, f) = single_edge();
        let report = solve(&g, &f, &SolverConfig::new(1.0)).unwrap();
        let kv = report.to_kv_text();
        assert!(kv.contains("converged true"));
        assert!(kv.contains("iterations "));
        assert!(kv.contains("dual_value "));
        let json: serde_json::Value = serde_json::from_str(&report.to_json()).unwrap();
        assert_eq!(json["converged"], serde_json::Value::Bool(true));
        assert!(json["flow"].as_array().is_some());
    }

    #[test]
    fn trivial_single_node_instance_converges_immediately() {
        let g = Graph::new(1, vec![], vec![]).unwrap();
        let f = MassVector::new(vec![0.0]).unwrap();
        let report = solve(&g, &f, &SolverConfig::new(1.0)).unwrap();
        assert!(report.converged);
        assert_eq!(report.iterations, 0);
        assert!(report.flow.is_empty());
    }
}
