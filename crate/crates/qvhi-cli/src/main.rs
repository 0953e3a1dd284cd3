//! `qvhi`: configuration-driven experiment runner for the QVHI solvers.
//!
//! Exit codes: 0 success, 1 data/config error, 2 honest non-convergence.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

const COLUMN_DOCS: &str = "\
Output files (written under --out; the first line of every CSV is a
non-deterministic `# timestamp_unix:` comment, everything below it is a pure
function of config and seed):

  solve:          solve_iterations.csv  attempt,iteration,outer_residual,v_norm,w_norm_x,k_feasibility
                  solve_summary.csv     converged,u_norm,w_norm_x,outer_residual,constraint_residual,truncation_active,r1,r2,r_bound,outer_iterations,attempts
  mosco:          mosco.csv             n,error,iterations,residual,g_gap_bound
  oracle-compare: oracle_compare.csv    side,index,x0,x1,margin,distance_to_other_side
  fem (solve):    fem_hypotheses.csv    clause,pass,witness
                  fem_summary.csv       (same columns as solve_summary.csv)
                  fem_solution.csv      x,y,value
                  mesh_nodes.txt / mesh_cells.txt   coordinate-format matrices
  fem (convergence): fem_convergence.csv  n_cells,h,h1_error,l2_error,h1_ratio,l2_ratio,embedding_norm
  fem (smallness-sweep): fem_smallness.csv  factor,c1_bar,beta,m_norm,critical_c1,pass,margin
  bounds:         bounds.csv            c1,c2,r1,r2,r_bound,converged,u_norm,mu_norm,w_norm,audit_pass
  sample:         sample.csv            start,converged,u_norm,outer_residual,attempts
                  sample_summary.csv    clusters,diameter,failures,r1_audit_ok

Logging: set QVHI_LOG to error | info | debug.";

#[derive(Parser)]
#[command(
    name = "qvhi",
    version,
    about = "Solvers and experiment harness for elliptic quasi-variational-hemivariational inequalities",
    after_help = COLUMN_DOCS
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// JSON experiment configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory for CSV artifacts.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,

    /// Master seed; overrides the seed in the config when given.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads for multistart and grid scans (defaults to all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one QVHI instance end to end and certify the result.
    Solve,
    /// Perturbed-data convergence study over a Mosco family.
    Mosco,
    /// Compare solver output against the dense-grid oracle (dim <= 2).
    OracleCompare,
    /// Build and run a finite-element semipermeability model.
    Fem,
    /// Print and audit the a-priori bound chain.
    Bounds,
    /// Multistart sampling of the solution set.
    Sample,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("QVHI_LOG", "error")).init();
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            log::warn!("thread pool already initialized: {e}");
        }
    }
    let Some(config) = cli.config.as_deref() else {
        eprintln!("error: --config <path> is required");
        return ExitCode::from(1);
    };
    let result = match cli.command {
        Command::Solve => commands::cmd_solve(config, &cli.out, cli.seed),
        Command::Mosco => commands::cmd_mosco(config, &cli.out, cli.seed),
        Command::OracleCompare => commands::cmd_oracle_compare(config, &cli.out, cli.seed),
        Command::Fem => commands::cmd_fem(config, &cli.out, cli.seed),
        Command::Bounds => commands::cmd_bounds(config, &cli.out, cli.seed),
        Command::Sample => commands::cmd_sample(config, &cli.out, cli.seed),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(message) => {
            eprintln!("error: {message}");
            ExitCode::from(1)
        }
    }
}
