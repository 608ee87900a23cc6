use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod batch;
mod cmd;
mod manifest;

#[derive(Parser)]
#[command(name = "braidkit", version, about = "Braid-based interaction labels and joint prediction metrics")]
struct Cli {
    /// Worker threads for scene-level parallelism; output order never depends on it
    #[arg(long, global = true, default_value_t = 1)]
    jobs: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Debug)]
pub struct GraphArgs {
    /// Edge distance threshold at t = 0, meters
    #[arg(long, default_value_t = braidkit::braid::DEFAULT_DELTA)]
    pub delta: f64,

    /// Maximum incoming edges per target agent
    #[arg(long, default_value_t = braidkit::braid::DEFAULT_MAX_NEIGHBORS)]
    pub max_neighbors: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Build an interaction graph with crossing labels for every scene
    Label {
        /// Scene JSON files or directories of them
        scenes: Vec<PathBuf>,
        #[command(flatten)]
        graph: GraphArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Extract the braid word of every scene
    BraidWord {
        scenes: Vec<PathBuf>,
        /// `scene` (identity) or `agent:<id>` (that agent's t = 0 frame)
        #[arg(long, default_value = "scene")]
        frame: String,
        /// Keep cancelling generator pairs
        #[arg(long)]
        raw: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score prediction files against ground-truth scenes
    Evaluate(cmd::evaluate::EvaluateArgs),
    /// Generate synthetic scenes with oracle sidecars
    Synth(cmd::synth::SynthArgs),
    /// Train the toy joint-prediction model
    TrainToy(cmd::train::TrainArgs),
    /// Collect run outputs into one plot-ready CSV
    Report {
        /// Run output directories (each with a manifest.json)
        runs: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("BRAIDKIT_LOG", "warn")).init();
    let cli = Cli::parse();
    let argv: Vec<String> = std::env::args().collect();
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(cli.jobs.max(1)).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let ctx = cmd::Context {
        argv,
        jobs: cli.jobs.max(1),
    };
    let result = pool.install(|| match cli.command {
        Command::Label { scenes, graph, out } => cmd::label::run(&ctx, &scenes, &graph, &out),
        Command::BraidWord { scenes, frame, raw, out } => cmd::braid_word::run(&ctx, &scenes, &frame, raw, &out),
        Command::Evaluate(args) => cmd::evaluate::run(&ctx, &args),
        Command::Synth(args) => cmd::synth::run(&ctx, &args),
        Command::TrainToy(args) => cmd::train::run(&ctx, &args),
        Command::Report { runs, out } => cmd::report::run(&ctx, &runs, &out),
    });
    match result {
        Ok(0) => ExitCode::SUCCESS,
        Ok(failures) => {
            eprintln!("{failures} item(s) failed; see manifest.json");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
