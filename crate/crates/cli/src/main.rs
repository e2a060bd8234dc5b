mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use multistitch::ErrorKind;

/// Tile stitching with multi-candidate registration and cycle-consistent selection.
#[derive(Debug, Parser)]
#[command(name = "multistitch", version)]
pub struct Cli {
    /// Log verbosity on stderr (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Register every overlapping tile pair and write the multigraph JSON.
    Register {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long, short)]
        out: PathBuf,
        #[command(flatten)]
        reg: RegistrationArgs,
        #[arg(long, default_value_t = 5.0)]
        tau: f64,
    },
    /// Solve offsets and weights of a multigraph.
    Solve {
        #[arg(long)]
        graph: PathBuf,
        /// Solved multigraph JSON.
        #[arg(long, short)]
        out: PathBuf,
        /// Solver report JSON; stdout when omitted.
        #[arg(long)]
        report: Option<PathBuf>,
        #[command(flatten)]
        solver: SolverArgs,
    },
    /// Prune a solved multigraph and run the global alignment.
    Align {
        #[arg(long)]
        graph: PathBuf,
        /// Alignment JSON; stdout when omitted.
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Render the composite image from a manifest and an alignment.
    Render {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        alignment: PathBuf,
        #[arg(long, short)]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = BlendArg::Feather)]
        blend: BlendArg,
        /// Feather ramp width in pixels.
        #[arg(long, default_value_t = 16.0)]
        margin: f64,
    },
    /// Export a multigraph (or its pruned graph) as Graphviz DOT.
    Graphviz {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        pruned: bool,
        /// DOT file; stdout when omitted.
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Synthetic comparison of ours against the top-1 baselines; CSV on stdout.
    Bench {
        /// tissue, grid, sparse or all.
        archetype: String,
        /// Tiles per grid side; archetype default when omitted.
        #[arg(long)]
        size: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Pair registration threads; 0 uses all cores.
        #[arg(long, default_value_t = 0)]
        threads: usize,
        #[arg(long)]
        tau: Option<f64>,
        /// Leave runtime_ms empty so repeated runs give identical CSV.
        #[arg(long)]
        no_timing: bool,
        /// Also write the report JSON here.
        #[arg(long)]
        json: Option<PathBuf>,
        /// Write the tiles, manifest and ground truth of each scene into this directory.
        #[arg(long)]
        export: Option<PathBuf>,
    },
    /// register, solve, align and render in one go.
    Pipeline {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        #[command(flatten)]
        reg: RegistrationArgs,
        #[command(flatten)]
        solver: SolverArgs,
        #[arg(long, value_enum, default_value_t = BlendArg::Feather)]
        blend: BlendArg,
        #[arg(long, default_value_t = 16.0)]
        margin: f64,
        /// Skip writing composite.png.
        #[arg(long)]
        no_render: bool,
    },
}

#[derive(Debug, Clone, Args)]
pub struct RegistrationArgs {
    /// Pair registration threads; 0 uses all cores.
    #[arg(long, default_value_t = 0)]
    pub threads: usize,
    /// Minimum overlap in pixels; defaults to the manifest value.
    #[arg(long)]
    pub min_overlap: Option<f64>,
    #[arg(long)]
    pub abs_threshold: Option<f64>,
    #[arg(long)]
    pub rel_threshold: Option<f64>,
    #[arg(long)]
    pub max_candidates: Option<usize>,
    #[arg(long)]
    pub search_radius: Option<usize>,
    #[arg(long)]
    pub window_radius: Option<usize>,
    #[arg(long)]
    pub include_diagonal: bool,
}

#[derive(Debug, Clone, Args)]
pub struct SolverArgs {
    /// Dummy cost threshold in pixels; defaults to the graph's value.
    #[arg(long)]
    pub tau: Option<f64>,
    #[arg(long, value_enum, default_value_t = ModeArg::Lm)]
    pub mode: ModeArg,
    #[arg(long)]
    pub max_iterations: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Lm,
    Gd,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BlendArg {
    Overwrite,
    Feather,
}

fn exit_code(kind: ErrorKind) -> u8 {
    match kind {
        ErrorKind::Io => 3,
        ErrorKind::Schema => 4,
        ErrorKind::Pipeline => 5,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .target(env_logger::Target::Stderr)
        .init();
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(e.kind()))
        }
    }
}
