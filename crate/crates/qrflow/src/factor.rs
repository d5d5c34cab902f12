//! Dense Cholesky factorization of the shifted active-edge Laplacian
//! `L + N Nᵀ`, maintained under rank-1 modifications as edges enter and
//! leave the active set.
//!
//! `L` is the (unweighted) Laplacian of the active subgraph and `N` stacks
//! the normalized component indicator columns from a
//! [`ComponentLabeling`](crate::graph::ComponentLabeling). The shift fills
//! exactly the null space of `L`, so the sum is symmetric positive definite
//! and admits a factorization `Rᵀ R` with `R` upper triangular.
//!
//! Rank-1 updates `+ x xᵀ` sweep Givens plane rotations down the rows of
//! `R`; downdates `- x xᵀ` use the hyperbolic analogue and report failure
//! when a pivot would become nonpositive, at which point the caller should
//! refactorize from scratch.

use crate::graph::{ActiveMask, ComponentLabeling, Graph};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FactorError {
    #[error("matrix is not positive definite: pivot {pivot:e} at index {index}")]
    NotPositiveDefinite { index: usize, pivot: f64 },
    #[error("rank-1 downdate would make pivot {index} nonpositive; refactorization required")]
    DowndateFailed { index: usize },
}

/// Upper-triangular Cholesky factor `R` with `Rᵀ R = A`, plus a counter of
/// rank-1 modifications applied since the last full factorization.
#[derive(Debug, Clone)]
pub struct CholeskyFactor {
    n: usize,
    /// Row-major `n x n` storage; entries below the diagonal are zero.
    r: Vec<f64>,
    update_count: usize,
}

/// Kind of rank-1 modification produced by an active-set transition.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FactorEventKind {
    /// An edge entered the active set: add `d_e d_eᵀ`.
    AddEdge,
    /// An edge left the active set: subtract `d_e d_eᵀ`.
    RemoveEdge,
    /// A component appeared in the labeling: add `n_c n_cᵀ`.
    AddComponent,
    /// A component disappeared from the labeling: subtract `n_c n_cᵀ`.
    RemoveComponent,
}

impl FactorEventKind {
    /// Whether the event adds (`true`) or subtracts (`false`) `x xᵀ`.
    pub fn is_update(self) -> bool {
        matches!(self, FactorEventKind::AddEdge | FactorEventKind::AddComponent)
    }
}

/// A single rank-1 modification of the factored matrix.
#[derive(Debug, Clone)]
pub struct FactorEvent {
    pub kind: FactorEventKind,
    pub vector: Vec<f64>,
}

impl FactorEvent {
    /// Signed incidence vector of an edge: `-1` at the tail, `+1` at the head.
    pub fn edge_vector(graph: &Graph, edge: usize) -> Vec<f64> {
        let mut x = vec![0.0; graph.node_count()];
        x[graph.tail(edge)] = -1.0;
        x[graph.head(edge)] = 1.0;
        x
    }
}

impl CholeskyFactor {
    /// Factorizes the shifted active Laplacian `L + N Nᵀ` for the given mask
    /// and component labeling.
    pub fn factorize(
        graph: &Graph,
        mask: &ActiveMask,
        labeling: &ComponentLabeling,
    ) -> Result<Self, FactorError> {
        let a = assemble_shifted_laplacian(graph, mask, labeling);
        Self::from_dense(graph.node_count(), &a)
    }

    /// Factorizes an arbitrary symmetric positive definite matrix given in
    /// row-major order. Only the upper triangle is read.
    pub fn from_dense(n: usize, a: &[f64]) -> Result<Self, FactorError> {
        assert_eq!(a.len(), n * n, "matrix size mismatch");
        let mut r = a.to_vec();
        // Zero the strict lower triangle so `r` holds only the factor.
        for i in 1..n {
            for j in 0..i {
                r[i * n + j] = 0.0;
            }
        }
        for k in 0..n {
            let pivot = r[k * n + k];
            if !(pivot > 0.0) || !pivot.is_finite() {
                return Err(FactorError::NotPositiveDefinite { index: k, pivot });
            }
            let diag = pivot.sqrt();
            r[k * n + k] = diag;
            for j in k + 1..n {
                r[k * n + j] /= diag;
            }
            let (top, bottom) = r.split_at_mut((k + 1) * n);
            let row_k = &top[k * n..];
            for i in k + 1..n {
                let factor = row_k[i];
                if factor != 0.0 {
                    let row_i = &mut bottom[(i - k - 1) * n..(i - k) * n];
                    for j in i..n {
                        row_i[j] -= factor * row_k[j];
                    }
                }
            }
        }
        Ok(CholeskyFactor { n, r, update_count: 0 })
    }

    /// Matrix order.
    pub fn order(&self) -> usize {
        self.n
    }

    /// Number of rank-1 modifications since the last full factorization.
    pub fn update_count(&self) -> usize {
        self.update_count
    }

    /// Row-major upper-triangular factor.
    pub fn upper(&self) -> &[f64] {
        &self.r
    }

    /// Reconstructs `Rᵀ R` (row-major), mainly for integrity checks.
    pub fn reconstruct(&self) -> Vec<f64> {
        let n = self.n;
        let mut a = vec![0.0; n * n];
        for k in 0..n {
            let row = &self.r[k * n..(k + 1) * n];
            for i in k..n {
                for j in i..n {
                    a[i * n + j] += row[i] * row[j];
                }
            }
        }
        for i in 0..n {
            for j in 0..i {
                a[i * n + j] = a[j * n + i];
            }
        }
        a
    }

    /// Rank-1 update: the factored matrix becomes `Rᵀ R + x xᵀ`.
    ///
    /// Sweeps a Givens rotation through each row: at row `j` the pair
    /// `(R_jj, w_j)` is rotated to `(sqrt(R_jj² + w_j²), 0)` and the
    /// remainder of the row and of the workspace `w` are transformed
    /// accordingly. Always succeeds on a valid factor.
    pub fn rank1_update(&mut self, x: &[f64]) {
        self.rank1_modify(x, 1.0).expect("rank-1 update cannot fail on a positive definite factor");
        self.update_count += 1;
    }

    /// Rank-1 downdate: the factored matrix becomes `Rᵀ R - x xᵀ`.
    ///
    /// Uses hyperbolic rotations: at row `j` the new pivot is
    /// `sqrt(R_jj² - w_j²)`, which fails if the argument is not strictly
    /// positive — i.e. the downdated matrix would no longer be positive
    /// definite. On failure the factor is left unchanged.
    pub fn rank1_downdate(&mut self, x: &[f64]) -> Result<(), FactorError> {
        self.rank1_modify(x, -1.0)?;
        self.update_count += 1;
        Ok(())
    }

    fn rank1_modify(&mut self, x: &[f64], sign: f64) -> Result<(), FactorError> {
        assert_eq!(x.len(), self.n, "vector length mismatch");
        let n = self.n;
        let Some(first) = x.iter().position(|&v| v != 0.0) else {
            return Ok(());
        };
        let mut w = x.to_vec();
        // On failure the factor must stay intact, so trial-run the pivots
        // first for downdates before touching `r`.
        if sign < 0.0 {
            let mut probe = w.clone();
            for j in first..n {
                let rjj = self.r[j * n + j];
                let arg = rjj * rjj - probe[j] * probe[j];
                if !(arg > 0.0) || !arg.is_finite() {
                    return Err(FactorError::DowndateFailed { index: j });
                }
                let radius = arg.sqrt();
                let c = radius / rjj;
                let s = probe[j] / rjj;
                for i in j + 1..n {
                    let rji = (self.r[j * n + i] - s * probe[i]) / c;
                    probe[i] = c * probe[i] - s * rji;
                }
            }
        }
        for j in first..n {
            let rjj = self.r[j * n + j];
            let arg = rjj * rjj + sign * w[j] * w[j];
            debug_assert!(arg > 0.0, "pivot check must have run for downdates");
            let radius = arg.sqrt();
            let c = radius / rjj;
            let s = w[j] / rjj;
            self.r[j * n + j] = radius;
            for i in j + 1..n {
                let rji = (self.r[j * n + i] + sign * s * w[i]) / c;
                self.r[j * n + i] = rji;
                w[i] = c * w[i] - s * rji;
            }
        }
        Ok(())
    }

    /// Solves `(Rᵀ R) x = b` by forward then backward substitution.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        assert_eq!(b.len(), self.n, "vector length mismatch");
        let n = self.n;
        let mut y = b.to_vec();
        for i in 0..n {
            let mut sum = y[i];
            for j in 0..i {
                sum -= self.r[j * n + i] * y[j];
            }
            y[i] = sum / self.r[i * n + i];
        }
        for i in (0..n).rev() {
            let mut sum = y[i];
            for j in i + 1..n {
                sum -= self.r[i * n + j] * y[j];
            }
            y[i] = sum / self.r[i * n + i];
        }
        y
    }

    /// Applies the Moore–Penrose pseudoinverse of the active Laplacian:
    /// projects `b` onto the null-space complement, solves with the shifted
    /// factor, and projects the result again to scrub accumulated drift.
    pub fn pinv_apply(&self, labeling: &ComponentLabeling, b: &[f64]) -> Vec<f64> {
        assert_eq!(b.len(), self.n, "vector length mismatch");
        assert_eq!(labeling.node_count(), self.n, "labeling size mismatch");
        let mut rhs = b.to_vec();
        labeling.project_out_null(&mut rhs);
        let mut x = self.solve(&rhs);
        labeling.project_out_null(&mut x);
        x
    }
}

/// Applies a batch of rank-1 events, all updates before all downdates, so
/// the factored matrix stays positive definite at every intermediate step
/// whenever the net result is positive definite.
pub fn apply_events(factor: &mut CholeskyFactor, events: &[FactorEvent]) -> Result<(), FactorError> {
    for event in events.iter().filter(|e| e.kind.is_update()) {
        factor.rank1_update(&event.vector);
    }
    for event in events.iter().filter(|e| !e.kind.is_update()) {
        factor.rank1_downdate(&event.vector)?;
    }
    Ok(())
}

/// Assembles `L + N Nᵀ` densely (row-major) for the given mask/labeling.
pub fn assemble_shifted_laplacian(
    graph: &Graph,
    mask: &ActiveMask,
    labeling: &ComponentLabeling,
) -> Vec<f64> {
    let n = graph.node_count();
    assert_eq!(mask.len(), graph.edge_count(), "mask length mismatch");
    assert_eq!(labeling.node_count(), n, "labeling size mismatch");
    let mut a = vec![0.0; n * n];
    for (e, &(t, h)) in graph.edges().iter().enumerate() {
        if mask.is_active(e) {
            a[t * n + t] += 1.0;
            a[h * n + h] += 1.0;
            a[t * n + h] -= 1.0;
            a[h * n + t] -= 1.0;
        }
    }
    for c in 0..labeling.component_count() {
        let members = labeling.members(c);
        let w = 1.0 / members.len() as f64;
        for &u in &members {
            for &v in &members {
                a[u * n + v] += w;
            }
        }
    }
    a
}
