//! Command-line front end of the simulator.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use pfloc::runner::{is_refusal, run_experiment, write_outputs, ExperimentConfig, ExperimentKind};

const EXIT_FAILURE: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_REFUSED: u8 = 3;

#[derive(Parser, Debug)]
#[command(name = "pfloc", version, about = "Precoder-feedback localization experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Flat `key = value` configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed; overrides `seed` in the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory; overrides `out_dir` in the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads; all cores when absent.
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Feedback maps.
    Map,
    /// RMSE against the number of subbands.
    RmseVsK,
    /// RMSE against the cell radius.
    RmseVsR,
    /// Error CCDF.
    Ccdf,
    /// Analytical RMSE and the restricted simulator.
    Analysis,
    /// RMSE and rate under top-U mitigation.
    Mitigation,
    /// Feedback attack against CID, ToA and RFPM.
    Baselines,
    /// Every experiment.
    All,
}

impl Command {
    fn kind(self) -> ExperimentKind {
        match self {
            Command::Map => ExperimentKind::Map,
            Command::RmseVsK => ExperimentKind::RmseVsK,
            Command::RmseVsR => ExperimentKind::RmseVsR,
            Command::Ccdf => ExperimentKind::Ccdf,
            Command::Analysis => ExperimentKind::Analysis,
            Command::Mitigation => ExperimentKind::Mitigation,
            Command::Baselines => ExperimentKind::Baselines,
            Command::All => ExperimentKind::All,
        }
    }
}

fn load(cli: &Cli) -> Result<ExperimentConfig, String> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
            ExperimentConfig::parse_text(&text).map_err(|e| format!("{}: {e}", path.display()))?
        }
        None => ExperimentConfig::default(),
    };
    cfg.kind = cli.command.kind();
    if let Some(seed) = cli.seed {
        cfg.params.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.out_dir = out.clone();
    }
    if cli.threads == Some(0) {
        return Err("--threads must be positive".into());
    }
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cfg = match load(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("config error: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("thread pool: {e}");
            return ExitCode::from(EXIT_FAILURE);
        }
    }
    let files = match run_experiment(&cfg) {
        Ok(f) => f,
        Err(e) if is_refusal(&e) => {
            eprintln!("refused: {e}");
            return ExitCode::from(EXIT_REFUSED);
        }
        Err(e @ pfloc::Error::InvalidParam { .. }) => {
            eprintln!("config error: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_FAILURE);
        }
    };
    match write_outputs(&cfg.out_dir, &files) {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_FAILURE)
        }
    }
}
