use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use simovar::{analyze, optimize, run, ExperimentConfig, ExperimentError, Figure, Result};
use simovar_core::Execution;

#[derive(Debug, Parser)]
#[command(
    name = "simovar",
    version,
    about = "Asymptotic variance analysis for SIMO models with correlated noise"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Override the master seed of the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for Monte Carlo runs; 1 runs sequentially.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Override the number of Monte Carlo runs per sweep point.
    #[arg(long, global = true)]
    runs: Option<usize>,
    /// CSV destination; defaults to the config's `output`, else stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Closed-form covariance report.
    Analyze { config: PathBuf },
    /// Monte Carlo campaign compared with closed-form predictions.
    Run { config: PathBuf },
    /// Optimal noise correlation for orders n1 + 1 = n2 = ... = nm.
    Optimize { config: PathBuf },
    /// Regenerate the data behind a published figure.
    Reproduce {
        #[arg(value_parser = ["fig2", "fig5", "fig6", "fig7"])]
        figure: String,
    },
}

fn load(cli: &Cli, path: Option<&PathBuf>, figure: Option<Figure>) -> Result<ExperimentConfig> {
    let mut cfg = match (path, figure) {
        (Some(p), _) => ExperimentConfig::load(p)?,
        (None, Some(f)) => f.config()?,
        (None, None) => unreachable!("every command names a config or a figure"),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(runs) = cli.runs {
        if runs == 0 {
            return Err(ExperimentError::config("--runs", "must be at least 1"));
        }
        cfg.runs = runs;
    }
    Ok(cfg)
}

fn output(cli: &Cli, cfg: &ExperimentConfig) -> Result<Box<dyn Write>> {
    let path = cli.out.clone().or_else(|| cfg.output.as_ref().map(PathBuf::from));
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(io::stdout().lock()),
    })
}

fn execute(cli: &Cli) -> Result<()> {
    let exec = match cli.jobs {
        Some(1) => Execution::Sequential,
        _ => Execution::Parallel,
    };
    match &cli.command {
        Command::Analyze { config } => {
            let cfg = load(cli, Some(config), None)?;
            analyze(&cfg)?.write_csv(output(cli, &cfg)?)
        }
        Command::Run { config } => {
            let cfg = load(cli, Some(config), None)?;
            run(&cfg, exec)?.write_csv(output(cli, &cfg)?)
        }
        Command::Optimize { config } => {
            let cfg = load(cli, Some(config), None)?;
            optimize(&cfg)?.write_csv(output(cli, &cfg)?)
        }
        Command::Reproduce { figure } => {
            let fig: Figure = figure.parse()?;
            let cfg = load(cli, None, Some(fig))?;
            if fig.is_closed_form() {
                analyze(&cfg)?.write_csv(output(cli, &cfg)?)
            } else {
                run(&cfg, exec)?.write_csv(output(cli, &cfg)?)
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            eprintln!("simovar: --jobs must be at least 1");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global() {
            eprintln!("simovar: {e}");
            return ExitCode::from(1);
        }
    }
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("simovar: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
