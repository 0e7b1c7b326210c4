//! The `dispersal` command line: problem files in, tables and CSV out.

pub mod commands;
pub mod error;
pub mod output;
pub mod problem;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use error::CliError;
pub use problem::{load_problem, parse_problem, ProblemFile, SCHEMA_VERSION};

#[derive(Debug, Parser)]
#[command(name = "dispersal", version, about = "Spectral bounds and patch-model thresholds for dispersal networks")]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Global {
    /// Eigen and threshold tolerance (overrides `analysis.tol`).
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    /// Seed for randomized sweeps.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Enumeration size guard (overrides `analysis.guard_n`).
    #[arg(long = "guard-n", global = true)]
    pub guard_n: Option<usize>,
    /// Report errors on stderr as one line of JSON.
    #[arg(long, global = true)]
    pub json_errors: bool,
    /// Write output here instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Structural flags and strongly connected blocks of A.
    Classify { file: PathBuf },
    /// s(μA + Q) with eigenvectors and bounds at one μ.
    Bound {
        file: PathBuf,
        #[arg(long)]
        mu: Option<f64>,
    },
    /// CSV of mu,s,ds,d2s on an even grid.
    Curve {
        file: PathBuf,
        #[arg(long)]
        mu_min: Option<f64>,
        #[arg(long)]
        mu_max: Option<f64>,
        #[arg(long)]
        steps: Option<usize>,
    },
    /// Limits of s(μA + Q) as μ → 0 and μ → ∞.
    Limits { file: PathBuf },
    /// The μ* with s(μ*A + Q) = 0.
    Threshold { file: PathBuf },
    /// CSV of mu,r for r(((1−μ)I + μP)R).
    Karlin {
        file: PathBuf,
        #[arg(long, value_delimiter = ',')]
        mu_grid: Option<Vec<f64>>,
    },
    /// Matrix-Tree cofactors and the Tree-Cycle identity.
    TreeVerify { file: PathBuf },
    /// A k-vector for given u, μ, μ′.
    Kvector {
        file: Option<PathBuf>,
        #[arg(long, value_delimiter = ',')]
        u: Option<Vec<f64>>,
        #[arg(long)]
        mu: Option<f64>,
        #[arg(long)]
        mu_prime: Option<f64>,
    },
    /// CSV trajectory of the model.
    Simulate {
        file: PathBuf,
        #[arg(long)]
        t_end: Option<f64>,
        #[arg(long)]
        samples: Option<usize>,
    },
    /// Stability regime of the model's boundary equilibrium.
    Regime { file: PathBuf },
    /// CSV of mu_I,r0 for the SIS model.
    R0 {
        file: PathBuf,
        #[arg(long, value_delimiter = ',')]
        mu_grid: Option<Vec<f64>>,
    },
    /// Simulate two competitors and report who persists.
    Compete {
        file: PathBuf,
        #[arg(long)]
        t_end: Option<f64>,
    },
    /// Run every randomized property sweep.
    Selftest {
        /// Smaller sweeps.
        #[arg(long)]
        quick: bool,
    },
}

/// Library operation and the subcommand that exposes it.
pub const COVERAGE: &[(&str, &str)] = &[
    ("netmat::build_network", "classify"),
    ("netmat::classify_matrix", "classify"),
    ("netmat::strongly_connected", "classify"),
    ("netmat::scc_blocks", "classify"),
    ("spectral::principal_eigen", "bound"),
    ("spectral::spectral_bound", "bound"),
    ("spectral::collatz_wielandt", "bound"),
    ("spectral::row_sum_bracket", "bound"),
    ("spectral::bound_derivative", "curve"),
    ("spectral::bound_curve", "curve"),
    ("spectral::asymptotic_limits", "limits"),
    ("spectral::threshold_mu", "threshold"),
    ("spectral::karlin_map", "karlin"),
    ("treecycle::enumerate_in_trees", "tree-verify"),
    ("treecycle::principal_cofactors", "tree-verify"),
    ("treecycle::enumerate_unicyclic", "tree-verify"),
    ("treecycle::tree_cycle_residual", "tree-verify"),
    ("treecycle::construct_k_vector", "kvector"),
    ("treecycle::verify_k_vector", "kvector"),
    ("models::model_rhs", "simulate"),
    ("odeint::integrate", "simulate"),
    ("models::model_jacobian", "regime"),
    ("models::single_equilibrium", "regime"),
    ("odeint::integrate_to_equilibrium", "regime"),
    ("models::classify_regime", "regime"),
    ("models::predprey_threshold", "regime"),
    ("models::disease_free_equilibrium", "regime"),
    ("models::sis_r0", "r0"),
    ("models::r0_sweep", "r0"),
    ("models::competition_outcome", "compete"),
    ("sweeps", "selftest"),
];

/// Parse `args`, run, and write to the given streams. Returns the exit code.
pub fn run_with<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let json_errors = args.iter().any(|a| a == "--json-errors");
    let cli = match Cli::try_parse_from(&args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            if code == 0 {
                let _ = write!(stdout, "{}", e.render());
            } else if json_errors {
                let err = CliError::Usage(e.kind().to_string());
                let _ = writeln!(stderr, "{}", err.to_json());
                let _ = write!(stderr, "{}", e.render());
            } else {
                let _ = write!(stderr, "{}", e.render());
            }
            return code;
        }
    };
    let result = commands::dispatch(&cli).and_then(|out| match &cli.global.out {
        Some(path) => std::fs::write(path, out.text.as_bytes())
            .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
            .map(|_| out.code),
        None => stdout.write_all(out.text.as_bytes()).map_err(|e| CliError::Io(e.to_string())).map(|_| out.code),
    });
    match result {
        Ok(code) => code,
        Err(e) => {
            let line = if cli.global.json_errors { e.to_json() } else { format!("error: {e}") };
            let _ = writeln!(stderr, "{line}");
            e.exit_code()
        }
    }
}

/// [`run_with`] on the process streams.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    run_with(args, &mut std::io::stdout().lock(), &mut std::io::stderr().lock())
}
