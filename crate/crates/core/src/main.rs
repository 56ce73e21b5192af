use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use regionkit::report::{run_cluster, score_label_files, write_synthetic, ClusterConfig};
use regionkit::synth::{generate, PlantedScenario};
use regionkit::Error;

#[derive(Parser)]
#[command(name = "regionkit", version, about = "Contiguous regionalization of per-region count data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Cluster regions into contiguous groups.
    Cluster(ClusterArgs),
    /// Generate a planted-partition grid dataset.
    Synth(SynthArgs),
    /// Adjusted Rand index between two label files.
    Score {
        truth: PathBuf,
        predicted: PathBuf,
    },
}

#[derive(Args)]
struct ClusterArgs {
    /// Load all settings from a config or a previous report's config_echo.
    #[arg(long, conflicts_with_all = ["counts", "games", "exclude", "geojson_in", "adjacency"])]
    config: Option<PathBuf>,
    #[arg(long, required_unless_present = "config")]
    counts: Option<PathBuf>,
    #[arg(long)]
    games: Option<PathBuf>,
    #[arg(long)]
    exclude: Option<PathBuf>,
    #[arg(long, conflicts_with = "adjacency")]
    geojson_in: Option<PathBuf>,
    #[arg(long)]
    adjacency: Option<PathBuf>,
    #[arg(long)]
    queen: bool,
    #[arg(long, conflicts_with_all = ["k_min", "k_max"])]
    k: Option<usize>,
    #[arg(long, default_value_t = 2)]
    k_min: usize,
    #[arg(long, default_value_t = 15)]
    k_max: usize,
    /// Raise every region's degree to N via nearest centroids (0 = off).
    #[arg(long, default_value_t = 0)]
    neighbors: usize,
    #[arg(long)]
    no_repair: bool,
    /// Report JSON path (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    geojson_out: Option<PathBuf>,
    #[arg(long)]
    assignments: Option<PathBuf>,
    #[arg(long)]
    plot: Option<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
    #[arg(long, default_value_t = 12)]
    width: usize,
    #[arg(long, default_value_t = 12)]
    height: usize,
    #[arg(long, default_value_t = 5)]
    k_true: usize,
    #[arg(long, default_value_t = 3)]
    signatures: usize,
    #[arg(long, default_value_t = 0)]
    background: usize,
    #[arg(long, default_value_t = 10_000.0)]
    base_total: f64,
    #[arg(long, default_value_t = 0.8)]
    concentration: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn cluster_config(args: ClusterArgs) -> Result<ClusterConfig, Error> {
    let mut config = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
                path: path.display().to_string(),
                source,
            })?;
            return ClusterConfig::from_json(&text);
        }
        None => ClusterConfig::new(args.counts.expect("required by clap")),
    };
    config.games = args.games;
    config.exclude = args.exclude;
    config.geojson_in = args.geojson_in;
    config.adjacency = args.adjacency;
    config.queen = args.queen;
    config.k = args.k;
    config.k_min = args.k_min;
    config.k_max = args.k_max;
    config.neighbors = args.neighbors;
    config.repair = !args.no_repair;
    config.out = args.out;
    config.geojson_out = args.geojson_out;
    config.assignments = args.assignments;
    config.plot = args.plot;
    Ok(config)
}

fn run(command: Command) -> Result<(), Error> {
    match command {
        Command::Cluster(args) => {
            let report = run_cluster(&cluster_config(args)?)?;
            let primary = report.primary();
            log::info!("k = {} ({:?}), {} regions", primary.k, primary.role, report.n_regions);
        }
        Command::Synth(a) => {
            let scenario = PlantedScenario {
                width: a.width,
                height: a.height,
                k_true: a.k_true,
                signature_games_per_group: a.signatures,
                background_games: a.background,
                base_total: a.base_total,
                concentration: a.concentration,
                seed: a.seed,
            };
            write_synthetic(&generate(&scenario)?, &a.out_dir)?;
        }
        Command::Score { truth, predicted } => {
            println!("{:.6}", score_label_files(truth, predicted)?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("REGIONKIT_LOG", "warn")).init();
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let line = serde_json::json!({
                "error": err.kind().as_str(),
                "exit_code": err.exit_code(),
                "message": err.to_string(),
            });
            eprintln!("{line}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
