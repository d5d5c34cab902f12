//! Cross-checks the incrementally maintained Cholesky factorization and
//! its pseudo-inverse application against dense eigendecomposition.

mod common;

use common::linf;
use nalgebra::{DMatrix, DVector};
use qrflow::factor::assemble_shifted_laplacian;
use qrflow::solver::transition_events;
use qrflow::{apply_events, gen_random_graph, ActiveMask, CholeskyFactor, CostModel, Graph};
use rand::Rng;

fn random_graph(n: usize, seed: u64) -> Graph {
    gen_random_graph(n, seed, CostModel::Unit).unwrap()
}

fn random_mask(graph: &Graph, rng: &mut rand_chacha::ChaCha8Rng, density: f64) -> ActiveMask {
    let slack: Vec<f64> = (0..graph.edge_count())
        .map(|_| {
            if rng.random::<f64>() < density {
                rng.random::<f64>() + 0.01
            } else {
                -rng.random::<f64>() - 0.01
            }
        })
        .collect();
    ActiveMask::from_slack(&slack)
}

/// Plain active Laplacian (no null-space shift), dense.
fn dense_laplacian(graph: &Graph, mask: &ActiveMask) -> DMatrix<f64> {
    let n = graph.node_count();
    let mut a = DMatrix::zeros(n, n);
    for (e, &(t, h)) in graph.edges().iter().enumerate() {
        if mask.is_active(e) {
            a[(t, t)] += 1.0;
            a[(h, h)] += 1.0;
            a[(t, h)] -= 1.0;
            a[(h, t)] -= 1.0;
        }
    }
    a
}

/// Moore-Penrose pseudo-inverse via symmetric eigendecomposition.
fn eigen_pinv(a: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = a.clone().symmetric_eigen();
    let max = eig.eigenvalues.iter().fold(0.0_f64, |m, &v| m.max(v.abs()));
    let cutoff = 1e-9 * max.max(1.0);
    let mut inv = DMatrix::zeros(a.nrows(), a.ncols());
    for (i, &lambda) in eig.eigenvalues.iter().enumerate() {
        if lambda.abs() > cutoff {
            let v = eig.eigenvectors.column(i);
            inv += (&v * v.transpose()) / lambda;
        }
    }
    inv
}

fn frobenius_gap(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

#[test]
fn factorization_reconstructs_the_shifted_laplacian() {
    let mut rng = common::rng(0);
    for seed in 0..6 {
        let g = random_graph(8 + seed as usize, seed);
        let mask = random_mask(&g, &mut rng, 0.5);
        let labeling = g.components(&mask);
        let shifted = assemble_shifted_laplacian(&g, &mask, &labeling);
        let factor = CholeskyFactor::factorize(&g, &mask, &labeling).unwrap();
        assert!(frobenius_gap(&factor.reconstruct(), &shifted) <= 1e-10);
    }
}

#[test]
fn solve_inverts_the_shifted_laplacian() {
    let mut rng = common::rng(1);
    let g = random_graph(10, 3);
    let mask = random_mask(&g, &mut rng, 0.6);
    let labeling = g.components(&mask);
    let factor = CholeskyFactor::factorize(&g, &mask, &labeling).unwrap();
    let shifted = assemble_shifted_laplacian(&g, &mask, &labeling);
    let n = g.node_count();
    let b: Vec<f64> = (0..n).map(|_| rng.random::<f64>() - 0.5).collect();
    let x = factor.solve(&b);
    let mut residual = b.clone();
    for i in 0..n {
        for j in 0..n {
            residual[i] -= shifted[i * n + j] * x[j];
        }
    }
    assert!(linf(&residual) <= 1e-9);
}

#[test]
fn pinv_application_matches_dense_eigendecomposition() {
    let mut rng = common::rng(2);
    for trial in 0..20 {
        let n = 6 + (trial % 7);
        let g = random_graph(n, 100 + trial as u64);
        // Sparse masks exercise multi-component labelings.
        let mask = random_mask(&g, &mut rng, if trial % 2 == 0 { 0.25 } else { 0.7 });
        let labeling = g.components(&mask);
        let factor = CholeskyFactor::factorize(&g, &mask, &labeling).unwrap();
        let lap = dense_laplacian(&g, &mask);
        let pinv = eigen_pinv(&lap);
        let b: Vec<f64> = (0..n).map(|_| rng.random::<f64>() - 0.5).collect();
        let got = factor.pinv_apply(&labeling, &b);
        let want = &pinv * DVector::from_column_slice(&b);
        let gap: Vec<f64> = got.iter().zip(want.iter()).map(|(x, y)| x - y).collect();
        assert!(
            linf(&gap) <= 1e-9,
            "trial {trial}: pinv application off by {}",
            linf(&gap)
        );
    }
}

#[test]
fn pinv_satisfies_the_moore_penrose_identities() {
    let mut rng = common::rng(3);
    for trial in 0..8 {
        let n = 5 + trial;
        let g = random_graph(n, 200 + trial as u64);
        let mask = random_mask(&g, &mut rng, 0.4);
        let labeling = g.components(&mask);
        let factor = CholeskyFactor::factorize(&g, &mask, &labeling).unwrap();
        let lap = dense_laplacian(&g, &mask);

        // Assemble the pseudo-inverse column by column.
        let mut pinv = DMatrix::zeros(n, n);
        for j in 0..n {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            let column = factor.pinv_apply(&labeling, &e);
            for i in 0..n {
                pinv[(i, j)] = column[i];
            }
        }

        let lpl = &lap * &pinv * &lap;
        let plp = &pinv * &lap * &pinv;
        let lp = &lap * &pinv;
        let pl = &pinv * &lap;
        assert!((&lpl - &lap).norm() <= 1e-9 * lap.norm().max(1.0), "A P A = A");
        assert!((&plp - &pinv).norm() <= 1e-9 * pinv.norm().max(1.0), "P A P = P");
        assert!((&lp - lp.transpose()).norm() <= 1e-9, "A P symmetric");
        assert!((&pl - pl.transpose()).norm() <= 1e-9, "P A symmetric");
    }
}

#[test]
fn rank1_update_then_downdate_round_trips() {
    let mut rng = common::rng(4);
    let g = random_graph(9, 7);
    let mask = random_mask(&g, &mut rng, 0.8);
    let labeling = g.components(&mask);
    let mut factor = CholeskyFactor::factorize(&g, &mask, &labeling).unwrap();
    let before = factor.reconstruct();
    let x: Vec<f64> = (0..g.node_count()).map(|_| rng.random::<f64>() - 0.5).collect();
    factor.rank1_update(&x);
    factor.rank1_downdate(&x).unwrap();
    assert!(frobenius_gap(&factor.reconstruct(), &before) <= 1e-10);
}

#[test]
fn long_random_transition_sequences_track_fresh_factorizations() {
    let mut rng = common::rng(5);
    let g = random_graph(10, 11);
    let mut slack: Vec<f64> = (0..g.edge_count())
        .map(|_| rng.random::<f64>() - 0.5)
        .collect();
    let mut mask = ActiveMask::from_slack(&slack);
    let mut labeling = g.components(&mask);
    let mut factor = CholeskyFactor::factorize(&g, &mask, &labeling).unwrap();

    for step in 0..50 {
        // Flip a few random edges by negating their slack.
        let flips = 1 + rng.random_range(0..3);
        for _ in 0..flips {
            let e = rng.random_range(0..g.edge_count());
            slack[e] = -slack[e];
        }
        let new_mask = ActiveMask::from_slack(&slack);
        let (activated, deactivated) = mask.diff(&new_mask);
        let (new_labeling, events) =
            transition_events(&g, &labeling, &activated, &deactivated, &new_mask);
        if apply_events(&mut factor, &events).is_err() {
            factor = CholeskyFactor::factorize(&g, &new_mask, &new_labeling).unwrap();
        }
        mask = new_mask;
        labeling = new_labeling;

        let fresh = assemble_shifted_laplacian(&g, &mask, &labeling);
        let gap = frobenius_gap(&factor.reconstruct(), &fresh);
        assert!(gap <= 1e-8, "step {step}: drifted by {gap}");
    }
}
