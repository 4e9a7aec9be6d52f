use std::path::PathBuf;
use std::process::ExitCode;

use bhmc::{cmd_eval, cmd_export_dot, cmd_fit, cmd_generate, parse_mode, CliError, GenerateArgs, RunConfig};
use bhmc::commands::metrics_csv;
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "bhmc", version, about = "Hierarchical mixture clustering with a nested CRP tree")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit the model to a CSV dataset described by a JSON config.
    Fit {
        #[arg(long)]
        config: PathBuf,
    },
    /// Sample a synthetic dataset and its ground-truth tree.
    Generate {
        #[arg(long)]
        n: usize,
        /// `infinite` or `finite:K`.
        #[arg(long, default_value = "infinite")]
        mode: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Data dimension.
        #[arg(long, default_value_t = 2)]
        dim: usize,
        /// Tree depth; overrides the config.
        #[arg(long)]
        levels: Option<usize>,
        /// JSON file holding a `hyperparams` object (same keys as in a fit config).
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Compare a fitted tree with a ground-truth tree level by level.
    Eval {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        truth: PathBuf,
        #[arg(long)]
        levels: usize,
        /// Directory for metrics.json and metrics.csv (default: next to --pred).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print a Graphviz rendering of a tree export.
    ExportDot {
        #[arg(long)]
        tree: PathBuf,
    },
}

#[derive(serde::Deserialize)]
struct HyperparamsFile {
    #[serde(default)]
    hyperparams: bhmc::HyperparamsConfig,
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Fit { config } => {
            let cfg = RunConfig::load(&config)?;
            let outcome = cmd_fit(&cfg)?;
            println!(
                "chain {} best log likelihood {} with {} components, {} nodes; wrote {}",
                outcome.chain,
                outcome.log_likelihood,
                outcome.state.num_components(),
                outcome.state.tree.len(),
                cfg.output_dir.display()
            );
        }
        Command::Generate { n, mode, seed, out, dim, levels, config } => {
            let mut hyperparams = match config {
                Some(path) => {
                    let text = std::fs::read_to_string(&path).map_err(|source| CliError::Read { path: path.clone(), source })?;
                    serde_json::from_str::<HyperparamsFile>(&text)
                        .map_err(|source| CliError::Json { path, source })?
                        .hyperparams
                }
                None => bhmc::HyperparamsConfig::default(),
            };
            if let Some(l) = levels {
                hyperparams.levels = l;
            }
            let args = GenerateArgs { n, mode: parse_mode(&mode)?, seed, out, dim, hyperparams, top_components: 5 };
            cmd_generate(&args)?;
            println!("wrote {} and {}", args.out.join("data.csv").display(), args.out.join("truth.json").display());
        }
        Command::Eval { pred, truth, levels, out } => {
            let out = out.unwrap_or_else(|| pred.parent().map(PathBuf::from).unwrap_or_default());
            let report = cmd_eval(&pred, &truth, levels, &out)?;
            print!("{}", metrics_csv(&report));
        }
        Command::ExportDot { tree } => print!("{}", cmd_export_dot(&tree)?),
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
