//! End-to-end tests of the command-line interface: every subcommand is
//! driven through real files in a temporary directory.

use std::path::Path;
use std::process::{Command, Output};

fn qrflow(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qrflow"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(output: &Output) -> String {
    String::from_utf8_lossy(&output.stdout).into_owned()
}

fn stderr(output: &Output) -> String {
    String::from_utf8_lossy(&output.stderr).into_owned()
}

#[test]
fn generate_solve_decompose_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let dir = dir.path();

    let out = qrflow(dir, &["gen-graph", "--nodes", "30", "--seed", "4", "--out", "g.txt"]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(stdout(&out).contains("30 nodes"));

    let out = qrflow(dir, &["gen-mass", "g.txt", "--seed", "9", "--out", "f.txt"]);
    assert!(out.status.success(), "{}", stderr(&out));

    let out = qrflow(
        dir,
        &["solve", "g.txt", "f.txt", "--alpha", "0.5", "--flow-out", "j.txt"],
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("converged true"), "{text}");
    assert!(text.contains("dual_value"), "{text}");
    assert!(dir.join("j.txt").exists());

    let out = qrflow(dir, &["decompose", "g.txt", "--flow-in", "j.txt"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("paths "), "{text}");
    assert!(text.contains("amount"), "{text}");
}

#[test]
fn oracle_reports_an_exact_certificate() {
    let dir = tempfile::tempdir().unwrap();
    let dir = dir.path();
    qrflow(dir, &["gen-grid", "--side", "5", "--out", "g.txt"]);
    qrflow(dir, &["gen-mass", "g.txt", "--seed", "2", "--out", "f.txt"]);
    let out = qrflow(dir, &["oracle", "g.txt", "f.txt", "--flow-out", "lp.txt"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("objective"), "{text}");
    assert!(text.contains("augmentations"), "{text}");
    assert!(dir.join("lp.txt").exists());
}

#[test]
fn grid_generator_writes_the_expected_shape() {
    let dir = tempfile::tempdir().unwrap();
    let dir = dir.path();
    let out = qrflow(dir, &["gen-grid", "--side", "10", "--out", "g.txt"]);
    assert!(out.status.success());
    assert!(stdout(&out).contains("100 nodes and 360 directed edges"));
    let header = std::fs::read_to_string(dir.join("g.txt")).unwrap();
    assert!(header.starts_with("graph 100 360\n"));
}

#[test]
fn missing_and_malformed_files_exit_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let dir = dir.path();

    let out = qrflow(dir, &["solve", "nope.txt", "nope2.txt", "--alpha", "1"]);
    assert!(!out.status.success());
    assert!(stderr(&out).contains("error:"));

    std::fs::write(dir.join("bad.txt"), "graph 2 1\n0 1 not-a-number\n").unwrap();
    std::fs::write(dir.join("f.txt"), "0 -1\n1 1\n").unwrap();
    let out = qrflow(dir, &["solve", "bad.txt", "f.txt", "--alpha", "1"]);
    assert!(!out.status.success());
    assert!(stderr(&out).contains("error:"), "{}", stderr(&out));
}

#[test]
fn infeasible_oracle_exits_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let dir = dir.path();
    // One directed edge pointing the wrong way for the requested transport.
    std::fs::write(dir.join("g.txt"), "graph 2 1\n1 0 1\n").unwrap();
    std::fs::write(dir.join("f.txt"), "0 -1\n1 1\n").unwrap();
    let out = qrflow(dir, &["oracle", "g.txt", "f.txt"]);
    assert!(!out.status.success());
    assert!(stderr(&out).contains("error:"), "{}", stderr(&out));
}

#[test]
fn bench_writes_csv_and_prints_cell_summary() {
    let dir = tempfile::tempdir().unwrap();
    let dir = dir.path();
    std::fs::write(
        dir.join("spec.json"),
        r#"{"sizes": [12], "alphas": [0.5], "seeds_per_cell": 1, "max_iter": 2000}"#,
    )
    .unwrap();
    let out = qrflow(
        dir,
        &["bench", "--spec", "spec.json", "--out", "runs.csv", "--sequential"],
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("size,alpha,solver,runs"), "{text}");
    let csv = std::fs::read_to_string(dir.join("runs.csv")).unwrap();
    assert!(csv.starts_with("size,alpha,seed,solver,time_s,iters,converged,rel_err,l1_cost\n"));
    assert_eq!(csv.lines().count(), 1 + 4);
}

#[test]
fn sparsity_experiment_prints_a_table_and_writes_rows() {
    let dir = tempfile::tempdir().unwrap();
    let dir = dir.path();
    let out = qrflow(
        dir,
        &[
            "exp-sparsity",
            "--sizes",
            "12",
            "--alphas",
            "1e-3",
            "--seeds",
            "1",
            "--out",
            "rows.csv",
        ],
    );
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(stdout(&out).contains("relative linear-cost difference"));
    let csv = std::fs::read_to_string(dir.join("rows.csv")).unwrap();
    assert!(csv.starts_with("size,alpha,seed,lp_cost,"));
}

#[test]
fn monotonicity_experiment_reports_exchange_structure() {
    let dir = tempfile::tempdir().unwrap();
    let dir = dir.path();
    // Two routes from node 0 to node 1; the cheaper two-hop route yields
    // ground to the direct edge as regularization grows.
    std::fs::write(dir.join("g.txt"), "graph 3 3\n0 1 2\n0 2 1\n2 1 0.5\n").unwrap();
    std::fs::write(dir.join("f.txt"), "0 -1\n1 1\n2 0\n").unwrap();
    let out = qrflow(
        dir,
        &["exp-monotonicity", "g.txt", "f.txt", "--alphas", "0.5,1,4"],
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("exchange term"), "{text}");
    assert!(text.contains("coefficients monotone: yes"), "{text}");

    let out = qrflow(
        dir,
        &["exp-monotonicity", "g.txt", "f.txt", "--alphas", "4,1"],
    );
    assert!(!out.status.success());
    assert!(stderr(&out).contains("strictly increasing"));
}
