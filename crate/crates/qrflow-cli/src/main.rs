//! Command-line front end: solve instances, run the exact linear oracle,
//! decompose flows, generate graphs and mass vectors, and drive the
//! benchmark and experiment harness. All instance files use the
//! plain-text formats of the library's `io` module.

use clap::{Parser, Subcommand};
use qrflow::{
    aggregate, certificate_violation, decompose, exp_monotonicity, exp_sparsity, gen_grid,
    gen_mass, gen_random_graph, lp_oracle, read_flow, read_graph, read_mass, records_to_csv,
    run_sequential, solve, summary_to_csv, write_flow, write_graph, write_mass, BenchSpec,
    CostModel, MassVector, SolverConfig,
};
use std::error::Error;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "qrflow",
    version,
    about = "Quadratically regularized minimum-cost flow: solver, oracle, decomposition, and benchmarks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the regularized problem and print the solution report.
    Solve {
        /// Graph file.
        graph: PathBuf,
        /// Mass (divergence) file.
        mass: PathBuf,
        /// Regularization strength (must be positive).
        #[arg(long)]
        alpha: f64,
        /// Gradient-norm convergence tolerance.
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
        /// Iteration cap.
        #[arg(long, default_value_t = 3000)]
        max_iter: usize,
        /// Seed for the random starting potential.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Also write the primal flow to this file.
        #[arg(long)]
        flow_out: Option<PathBuf>,
    },
    /// Solve the unregularized linear problem exactly.
    Oracle {
        graph: PathBuf,
        mass: PathBuf,
        /// Also write the optimal flow to this file.
        #[arg(long)]
        flow_out: Option<PathBuf>,
    },
    /// Decompose a flow into source-to-sink paths and cycles.
    Decompose {
        graph: PathBuf,
        /// Flow file to decompose; its own divergence defines the mass.
        #[arg(long)]
        flow_in: PathBuf,
    },
    /// Generate a connected random graph with heavy-tailed degrees.
    GenGraph {
        #[arg(long)]
        nodes: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Draw costs uniformly from (0, 1] instead of all ones.
        #[arg(long)]
        random_costs: bool,
    },
    /// Generate a square lattice graph with unit costs.
    GenGrid {
        #[arg(long)]
        side: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate a balanced mass vector for a graph.
    GenMass {
        graph: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a benchmark sweep from a JSON spec and write per-run CSV.
    Bench {
        /// JSON benchmark spec (sizes, alphas, seeds_per_cell, solvers,
        /// max_iter, grad_tol; missing fields take defaults).
        #[arg(long)]
        spec: PathBuf,
        /// Per-run records CSV.
        #[arg(long)]
        out: PathBuf,
        /// Run work items sequentially instead of in parallel.
        #[arg(long)]
        sequential: bool,
    },
    /// Tabulate the linear-cost premium of regularized solutions.
    ExpSparsity {
        #[arg(long, value_delimiter = ',', default_value = "50,100")]
        sizes: Vec<usize>,
        #[arg(long, value_delimiter = ',', default_value = "1e-5,1e-4,1e-3,1e-2,1e-1,1,10")]
        alphas: Vec<f64>,
        #[arg(long, default_value_t = 10)]
        seeds: u64,
        /// Also write per-run rows as CSV.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Report the exchange-loop structure along a regularization grid.
    ExpMonotonicity {
        graph: PathBuf,
        mass: PathBuf,
        /// Strictly increasing regularization strengths.
        #[arg(long, value_delimiter = ',')]
        alphas: Vec<f64>,
    },
}

fn main() -> ExitCode {
    match run_command(Cli::parse().command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn run_command(command: Command) -> Result<(), Box<dyn Error>> {
    match command {
        Command::Solve {
            graph,
            mass,
            alpha,
            tol,
            max_iter,
            seed,
            flow_out,
        } => {
            let graph = read_graph(graph)?;
            let mass = read_mass(mass, graph.node_count())?;
            let mut config = SolverConfig::new(alpha);
            config.grad_tol = tol;
            config.max_iter = max_iter;
            config.seed = seed;
            let report = solve(&graph, &mass, &config)?;
            print!("{}", report.to_kv_text());
            if let Some(path) = flow_out {
                write_flow(path, &report.flow)?;
            }
        }
        Command::Oracle {
            graph,
            mass,
            flow_out,
        } => {
            let graph = read_graph(graph)?;
            let mass = read_mass(mass, graph.node_count())?;
            let result = lp_oracle(&graph, &mass)?;
            println!("objective {}", result.objective);
            println!("augmentations {}", result.augmentations);
            println!(
                "certificate_violation {:e}",
                certificate_violation(&graph, &mass, &result.flow, result.prices.as_slice())
            );
            if let Some(path) = flow_out {
                write_flow(path, &result.flow)?;
            }
        }
        Command::Decompose { graph, flow_in } => {
            let graph = read_graph(graph)?;
            let flow = read_flow(flow_in, graph.edge_count())?;
            let mass = MassVector::new(graph.divergence(flow.values()))?;
            let decomp = decompose(&graph, &flow, &mass)?;
            println!("paths {}", decomp.paths.len());
            for (path, amount) in &decomp.paths {
                println!(
                    "path {} amount {}",
                    path.nodes
                        .iter()
                        .map(|n| n.to_string())
                        .collect::<Vec<_>>()
                        .join("->"),
                    amount
                );
            }
            println!("cycles {}", decomp.cycles.len());
            for (cycle, amount) in &decomp.cycles {
                println!(
                    "cycle {} amount {}",
                    cycle
                        .nodes
                        .iter()
                        .map(|n| n.to_string())
                        .collect::<Vec<_>>()
                        .join("->"),
                    amount
                );
            }
        }
        Command::GenGraph {
            nodes,
            seed,
            out,
            random_costs,
        } => {
            let model = if random_costs {
                CostModel::Uniform
            } else {
                CostModel::Unit
            };
            let graph = gen_random_graph(nodes, seed, model)?;
            write_graph(&out, &graph)?;
            println!(
                "wrote graph with {} nodes and {} directed edges to {}",
                graph.node_count(),
                graph.edge_count(),
                out.display()
            );
        }
        Command::GenGrid { side, out } => {
            let graph = gen_grid(side);
            write_graph(&out, &graph)?;
            println!(
                "wrote {side}x{side} grid with {} nodes and {} directed edges to {}",
                graph.node_count(),
                graph.edge_count(),
                out.display()
            );
        }
        Command::GenMass { graph, seed, out } => {
            let graph = read_graph(graph)?;
            let mass = gen_mass(&graph, seed);
            write_mass(&out, &mass)?;
            let endpoints = mass.values().iter().filter(|&&v| v != 0.0).count();
            println!("wrote mass with {endpoints} endpoints to {}", out.display());
        }
        Command::Bench {
            spec,
            out,
            sequential,
        } => {
            let spec: BenchSpec = serde_json::from_str(&std::fs::read_to_string(spec)?)?;
            let records = if sequential {
                run_sequential(&spec)
            } else {
                qrflow::run(&spec)
            };
            std::fs::write(&out, records_to_csv(&records))?;
            print!("{}", summary_to_csv(&aggregate(&records)));
            println!("wrote {} records to {}", records.len(), out.display());
        }
        Command::ExpSparsity {
            sizes,
            alphas,
            seeds,
            out,
        } => {
            let table = exp_sparsity(&sizes, &alphas, seeds);
            print!("{}", table.to_text(&sizes, &alphas));
            if let Some(path) = out {
                std::fs::write(&path, table.to_csv())?;
                println!("wrote {} rows to {}", table.rows.len(), path.display());
            }
        }
        Command::ExpMonotonicity {
            graph,
            mass,
            alphas,
        } => {
            if alphas.len() < 2 {
                return Err("need at least two comma-separated --alphas".into());
            }
            if !alphas.windows(2).all(|w| w[0] < w[1]) {
                return Err("--alphas must be strictly increasing".into());
            }
            let graph = read_graph(graph)?;
            let mass = read_mass(mass, graph.node_count())?;
            let report = exp_monotonicity(&graph, &mass, &alphas)?;
            print!("{}", report.to_text());
        }
    }
    Ok(())
}
