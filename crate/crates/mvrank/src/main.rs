//! Command-line front end of the experiment pipeline.

use clap::{Args, Parser, Subcommand};
use mvrank::cli::{cmd_evaluate, cmd_generate, cmd_reproduce, cmd_train};
use mvrank::config::ExperimentConfig;
use mvrank::Result;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "mvrank", version, about = "Rank-statistic anomaly-scoring experiments")]
struct CliArgs {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// Experiment config file (JSON); defaults apply for absent fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory, created if absent.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Override the config's RNG seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (0 = one per core).
    #[arg(long, default_value_t = 0)]
    jobs: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Write one train/test dataset pair as CSV.
    Generate(CommonArgs),
    /// Fit the lambda grid on a labeled data file.
    Train {
        #[command(flatten)]
        common: CommonArgs,
        /// Labeled training data (CSV, as written by generate).
        #[arg(long)]
        data: PathBuf,
    },
    /// Rank a labeled test file with a saved model.
    Evaluate {
        #[command(flatten)]
        common: CommonArgs,
        /// Model file (JSON, as written by train).
        #[arg(long)]
        model: PathBuf,
        /// Labeled test data (CSV).
        #[arg(long)]
        test: PathBuf,
    },
    /// Run every repetition of the experiment and aggregate the artifacts.
    Reproduce(CommonArgs),
}

impl Command {
    fn common(&self) -> &CommonArgs {
        match self {
            Command::Generate(c) | Command::Reproduce(c) => c,
            Command::Train { common, .. } | Command::Evaluate { common, .. } => common,
        }
    }
}

fn load_config(common: &CommonArgs) -> Result<ExperimentConfig> {
    let mut cfg = match &common.config {
        Some(path) => mvrank::io::read_config(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn run(cli: CliArgs) -> Result<()> {
    let common = cli.command.common();
    let cfg = load_config(common)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(common.jobs)
        .build()
        .map_err(|e| mvrank::Error::Params(format!("cannot build a thread pool: {e}")))?;
    let out = common.out.clone();
    pool.install(|| match &cli.command {
        Command::Generate(_) => cmd_generate(&cfg, &out),
        Command::Train { data, .. } => cmd_train(&cfg, data, &out),
        Command::Evaluate { model, test, .. } => cmd_evaluate(model, test, &cfg, &out),
        Command::Reproduce(_) => cmd_reproduce(&cfg, &out),
    })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match CliArgs::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version requests are not errors.
            if e.use_stderr() {
                eprintln!("{e}");
                return ExitCode::from(1);
            }
            // The reader may close the pipe early (e.g. `mvrank --help | head`);
            // a broken pipe while printing help is not a failure.
            let _ = write!(std::io::stdout(), "{e}");
            return ExitCode::SUCCESS;
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
