//! Quadratically regularized minimum-cost flow on directed graphs.
//!
//! Solves `min cᵀJ + (α/2)|J|²` over nonnegative edge flows `J` with a
//! prescribed divergence, by maximizing the concave dual over node
//! potentials with an active-set ascent that alternates gradient steps and
//! factored second-order steps, maintaining a Cholesky factor of the active
//! Laplacian under rank-1 updates. Also included: first-order baseline
//! solvers, an exact oracle for the unregularized linear problem, path/cycle
//! flow decomposition tooling, instance generators, and a benchmarking
//! harness with parallel and sequential batch runners.

pub mod baseline;
pub mod bench;
pub mod decomp;
pub mod exp;
pub mod factor;
pub mod gen;
pub mod graph;
pub mod io;
pub mod par;
pub mod solver;
pub(crate) mod util;

pub use baseline::{
    certificate_violation, gradient_ascent, lp_oracle, precond_gradient, OracleError, OracleResult,
};
pub use bench::{
    aggregate, records_to_csv, run, run_sequential, summary_to_csv, BenchRecord, BenchSpec,
    CellSummary, SolverKind,
};
pub use decomp::{
    check_bounds, decompose, divergence_free_diff, path_objective, reconstruct, BoundsReport,
    DecompError, DiffTerm, DirectedCycle, DirectedPath, DivergenceFreeDiff, PathDecomposition,
};
pub use exp::{
    exp_monotonicity, exp_sparsity, sparsity_entry, LoopTerm, LoopTrack, MonotonicityError,
    MonotonicityReport, PairDiff, SparsityRow, SparsityTable,
};
pub use factor::{apply_events, CholeskyFactor, FactorError, FactorEvent, FactorEventKind};
pub use gen::{gen_grid, gen_mass, gen_random_graph, random_instance, CostModel, GenError};
pub use graph::{
    ActiveMask, ComponentLabeling, DualPotential, FlowVector, Graph, GraphError, MassVector,
};
pub use io::{
    format_flow, format_graph, format_mass, parse_flow, parse_graph, parse_mass, read_flow,
    read_graph, read_mass, write_flow, write_graph, write_mass, ParseError,
};
pub use par::{par_map, seq_map};
pub use solver::{
    dual_gradient, dual_objective, line_search, line_search_exact, primal_objective,
    recover_primal, solve, LineSearchOutcome, SearchReach, SolveError, SolveReport, SolverConfig,
    SolverState, StepRule,
};
