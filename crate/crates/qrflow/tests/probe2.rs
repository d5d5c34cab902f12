//! Temporary probe: criterion-3 with the classical gradient baseline.
use qrflow::baseline::gradient_ascent;
use qrflow::gen::{random_instance, CostModel};
use qrflow::solver::{solve, SolverConfig};

#[test]
fn criterion3_matrix() {
    let t0 = std::time::Instant::now();
    let mut hess_fails = Vec::new();
    let mut grad_converged = Vec::new();
    let mut worst_hess = 0usize;
    for &n in &[50usize, 100] {
        for &alpha in &[1e-1, 1.0] {
            for seed in 0..10u64 {
                let (graph, mass) = random_instance(n, seed, CostModel::Unit).unwrap();
                let cfg = SolverConfig::new(alpha);
                let h = solve(&graph, &mass, &cfg).expect("hess solve");
                worst_hess = worst_hess.max(h.iterations);
                if !h.converged {
                    hess_fails.push((n, alpha, seed, h.gradient_norm));
                }
                let g = gradient_ascent(&graph, &mass, &cfg).expect("grad solve");
                if g.converged {
                    grad_converged.push((n, alpha, seed, g.iterations));
                }
            }
        }
    }
    println!(
        "criterion3: hess worst {worst_hess}, hess_fails {hess_fails:?}, grad_converged {grad_converged:?}, {:.1}s",
        t0.elapsed().as_secs_f64()
    );
}

#[test]
fn graddescent_reference_behavior() {
    // Paper-reported qualitative behavior: converges at alpha in {1e-3,1e-2}
    // on small graphs; at alpha=1e-5, n=100 hits the cap with large error.
    let mut rows = Vec::new();
    for &alpha in &[1e-3, 1e-2] {
        for seed in 0..3u64 {
            let (graph, mass) = random_instance(50, seed, CostModel::Unit).unwrap();
            let cfg = SolverConfig::new(alpha);
            let g = gradient_ascent(&graph, &mass, &cfg).expect("grad solve");
            rows.push((alpha, seed, g.converged, g.iterations));
        }
    }
    println!("low alpha n=50: {rows:?}");
    let (graph, mass) = random_instance(100, 0, CostModel::Unit).unwrap();
    let cfg = SolverConfig::new(1e-5);
    let g = gradient_ascent(&graph, &mass, &cfg).expect("grad solve");
    println!("alpha=1e-5 n=100 seed 0: conv {} iters {} |g| {:.3e}", g.converged, g.iterations, g.gradient_norm);
}
