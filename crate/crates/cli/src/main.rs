use std::path::PathBuf;
use std::process::ExitCode;

use chrono::NaiveDate;
use clap::{Parser, Subcommand};
use mjo_gp_cli::config::{Overrides, RunConfig};
use mjo_gp_cli::{commands, with_threads, CliError, EXIT_CODE_HELP, EXIT_CONFIG};

#[derive(Parser, Debug)]
#[command(
    name = "mjo-gp",
    version,
    about = "Empirical Gaussian-process forecasts of the MJO RMM index",
    after_help = EXIT_CODE_HELP
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Flat key = value configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Window length in days.
    #[arg(long, global = true)]
    lag: Option<usize>,
    /// Maximum forecast lead in days.
    #[arg(long, global = true)]
    tau: Option<usize>,
    /// Coverage of the confidence regions.
    #[arg(long, global = true)]
    confidence: Option<f64>,
    /// Days between evaluation start dates.
    #[arg(long, global = true)]
    stride: Option<usize>,
    /// Number of evaluation start dates.
    #[arg(long, global = true)]
    n_predictions: Option<usize>,
    /// Worker threads; 0 uses every core.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Use the exact bivariate normalizing constant in the log score.
    #[arg(long, global = true)]
    exact_nll: bool,
    /// Never touch the network; read the cache only.
    #[arg(long, global = true)]
    offline: bool,
    /// Feed URL.
    #[arg(long, global = true)]
    url: Option<String>,
    /// Cache file holding the feed text.
    #[arg(long, global = true)]
    cache: Option<PathBuf>,
    /// Model file.
    #[arg(long, global = true)]
    model: Option<PathBuf>,
    /// Directory for forecast and evaluation outputs.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Download the feed into the cache, falling back to the cached copy.
    Fetch,
    /// Estimate correlations on the training window and write the model file.
    Fit,
    /// Add lead-dependent covariances from validation rollouts to the model file.
    Calibrate,
    /// Forecast from one start date and write trajectory and ellipse files.
    Forecast {
        /// First forecast day, YYYY-MM-DD.
        #[arg(long)]
        start: NaiveDate,
    },
    /// Score forecasts over the test window and write skill and HSS files.
    Evaluate,
}

fn run(cli: Cli) -> Result<String, CliError> {
    let overrides = Overrides {
        data_url: cli.url,
        cache_path: cli.cache,
        offline: cli.offline,
        lag: cli.lag,
        tau: cli.tau,
        stride: cli.stride,
        n_predictions: cli.n_predictions,
        confidence: cli.confidence,
        threads: cli.threads,
        exact_nll: cli.exact_nll,
        model_path: cli.model,
        output_dir: cli.out_dir,
    };
    let cfg = RunConfig::load(cli.config.as_deref(), &overrides)?;
    with_threads(cfg.threads, || match cli.command {
        Command::Fetch => commands::fetch(&cfg).map(|r| r.summary()),
        Command::Fit => commands::fit(&cfg).map(|r| r.summary()),
        Command::Calibrate => commands::calibrate(&cfg).map(|r| r.summary()),
        Command::Forecast { start } => commands::forecast(&cfg, start).map(|r| r.summary()),
        Command::Evaluate => commands::evaluate(&cfg).map(|r| r.summary()),
    })?
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code)
        }
    }
}
