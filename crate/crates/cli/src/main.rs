//! `treeflag`: tree flag algebra from the command line.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(name = "treeflag", version, about = "Flag algebra of rooted leaf-labeled binary trees")]
pub struct Cli {
    /// Emit results as JSON (schemas in the `schemas/` directory).
    #[arg(long, global = true, env = "TREEFLAG_JSON")]
    pub json: bool,

    /// Worker threads for block and slice parallelism [default: logical cores].
    #[arg(long, global = true, env = "TREEFLAG_THREADS")]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// List all unlabeled trees with the given number of leaves.
    Enumerate {
        #[arg(long)]
        leaves: usize,
    },
    /// Gluing product of two flags of the same type.
    Product {
        #[arg(long)]
        f1: String,
        #[arg(long)]
        f2: String,
        /// Size of the resulting flags [default: smallest possible].
        #[arg(long)]
        level: Option<usize>,
        /// Apply the downward operator to the product.
        #[arg(long)]
        unlabel: bool,
    },
    /// Block structure of a hierarchy level.
    Blocks {
        #[arg(long)]
        level: usize,
        /// Write every moment block to this directory, one quantum flag per line.
        #[arg(long)]
        dump: Option<PathBuf>,
        /// Product strategy used for `--dump`.
        #[arg(long, env = "TREEFLAG_PRODUCTS", default_value = "gluing")]
        products: String,
    },
    /// Upper bound on the inducibility of a tree.
    Inducibility {
        #[command(flatten)]
        sdp: SdpArgs,
        #[command(flatten)]
        solve: SolveArgs,
        /// Round the solution to an exact rigorous bound.
        #[arg(long)]
        round: bool,
        /// Write the rounded certificate as JSON (implies `--round`).
        #[arg(long)]
        cert_out: Option<PathBuf>,
        /// Also write the instance in SDPA sparse format.
        #[arg(long)]
        export: Option<PathBuf>,
    },
    /// Check a rational certificate exactly.
    Verify {
        #[arg(long)]
        cert: PathBuf,
    },
    /// Outer approximation of the joint density profile of two trees.
    Profile {
        #[arg(long)]
        x: String,
        #[arg(long)]
        y: String,
        #[arg(long, env = "TREEFLAG_LEVEL")]
        level: usize,
        /// Number of equal slices of [0, min(1, I_L(x))].
        #[arg(long, default_value_t = 100)]
        slices: usize,
        /// Comma-separated x values; solve only two narrow slices around each.
        #[arg(long, value_delimiter = ',')]
        anchors: Vec<String>,
        /// Width of anchor slices.
        #[arg(long, default_value = "1/200")]
        anchor_width: String,
        /// CSV output file [default: standard output].
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        svg: Option<PathBuf>,
        /// Add the conjectured double caterpillar boundary as an extra column.
        #[arg(long)]
        conjecture: bool,
        #[command(flatten)]
        solve: SolveArgs,
    },
    /// Write the inducibility SDP in SDPA sparse format without solving.
    Export {
        #[command(flatten)]
        sdp: SdpArgs,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args, Debug)]
pub struct SdpArgs {
    #[arg(long)]
    pub tree: String,
    #[arg(long, env = "TREEFLAG_LEVEL")]
    pub level: usize,
    /// Product strategy for the moment blocks.
    #[arg(long, env = "TREEFLAG_PRODUCTS", default_value = "gluing")]
    pub products: String,
}

#[derive(Args, Debug)]
pub struct SolveArgs {
    /// Relative duality gap and feasibility tolerance.
    #[arg(long, env = "TREEFLAG_TOL", default_value_t = 1e-8)]
    pub tol: f64,
    #[arg(long, env = "TREEFLAG_MAX_ITER", default_value_t = 200)]
    pub max_iter: usize,
    #[arg(long, env = "TREEFLAG_SOLVER", default_value = "ipm")]
    pub solver: String,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("TREEFLAG_LOG", "info"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    match commands::run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_parse() { 2 } else { 1 })
        }
    }
}
