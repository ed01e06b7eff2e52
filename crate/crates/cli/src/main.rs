mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgAction, Parser, Subcommand};

/// Radial solutions of the Neumann p-Laplacian problem -Δ_p u = f(u) on
/// balls and annuli, by shooting.
#[derive(Debug, Parser)]
#[command(name = "pneumann", version, about)]
pub struct Cli {
    /// Worker threads for scans and sweeps (default: all cores).
    #[arg(long, global = true, value_name = "N")]
    pub threads: Option<usize>,

    /// Override a configuration key; may be repeated. Wins over the file.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub set: Vec<String>,

    /// More log output on stderr (-v info, -vv debug).
    #[arg(short, long, global = true, action = ArgAction::Count)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generalized trigonometric functions cos_p, sin_p and the half-period π_p.
    Ptrig {
        #[arg(long)]
        p: f64,
        /// Evaluate at one angle and print a CSV row.
        #[arg(long, allow_hyphen_values = true)]
        theta: Option<f64>,
        /// Tabulate over one period with this many intervals.
        #[arg(long, value_name = "N", requires = "out")]
        table: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Integrate one shot u(R1) = 1 - d and write its profile.
    Shoot {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, required_unless_present = "u0", conflicts_with = "u0")]
        d: Option<f64>,
        /// Give the shot by its starting value u(R1) instead of d.
        #[arg(long)]
        u0: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Find non-constant solutions with up to `jmax` intersections with 1.
    Solve {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        jmax: u32,
        /// Number of scan points (overrides scan_points).
        #[arg(long)]
        scan: Option<usize>,
        /// Output directory (overrides output_dir).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Exit with status 4 when no solution is found.
        #[arg(long)]
        require_solution: bool,
    },
    /// Radial Neumann eigenvalues λ_k.
    Eigen {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        k: u32,
        /// Compute every index from k to kmax.
        #[arg(long)]
        kmax: Option<u32>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Continue solution branches along a parameter of the prototype family.
    Sweep {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = "q")]
        param: String,
        #[arg(long, allow_hyphen_values = true)]
        from: f64,
        #[arg(long, allow_hyphen_values = true)]
        to: f64,
        #[arg(long)]
        step: f64,
        #[arg(long)]
        jmax: u32,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write diagram.svg.
        #[arg(long)]
        svg: bool,
        #[arg(long)]
        require_solution: bool,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            log::warn!("could not configure {n} threads: {e}");
        }
    }
    match commands::run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config_error() { commands::EXIT_CONFIG } else { commands::EXIT_SOLVER })
        }
    }
}
