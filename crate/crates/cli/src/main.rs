use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod commands;
mod config;

use commands::{Flags, EXIT_FAILED};
use config::Config;

const EXIT_USAGE: u8 = 1;

/// Certify and evaluate peak functions built from approximate barrier families.
#[derive(Debug, Parser)]
#[command(name = "peakcert", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Run configuration (TOML).
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Upper end of the per-m certificate sweeps.
    #[arg(long, global = true, value_name = "INT")]
    m_max: Option<u64>,

    /// Number of explicitly summed series terms N.
    #[arg(long, global = true, value_name = "INT")]
    terms: Option<u64>,

    /// Series file to evaluate instead of building one.
    #[arg(long, global = true, value_name = "PATH")]
    series: Option<PathBuf>,

    /// Evaluation grid of distances from the peak point.
    #[arg(long, global = true, value_name = "KIND:LO:HI:COUNT")]
    grid: Option<String>,

    /// Output file (stdout when omitted and the config names none).
    #[arg(long, global = true, value_name = "PATH")]
    out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Derive D, M, p, q, L, k and check the parameter inequalities.
    Params,
    /// Run every certificate and write the report.
    Certify,
    /// Build the series and write it to a file.
    Build,
    /// Evaluate the series on a grid and write a CSV table.
    Eval,
    /// Certify |F| < 1 on a grid and F(x) = 1.
    Verify,
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    let path = cli
        .config
        .ok_or_else(|| anyhow::anyhow!("--config PATH is required"))?;
    let cfg = Config::load(&path)?;
    anyhow::ensure!(cli.terms != Some(0), "--terms must be at least 1");
    anyhow::ensure!(
        cli.m_max.is_none_or(|m| m >= 3),
        "--m-max must be at least 3"
    );
    let flags = Flags {
        m_max: cli.m_max,
        terms: cli.terms,
        series: cli.series,
        grid: cli.grid,
        out: cli.out,
    };
    match cli.command {
        Command::Params => commands::params(&cfg, &flags),
        Command::Certify => commands::certify(&cfg, &flags),
        Command::Build => commands::build(&cfg, &flags),
        Command::Eval => commands::eval(&cfg, &flags),
        Command::Verify => commands::verify(&cfg, &flags),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            let failed = e
                .chain()
                .filter_map(|c| c.downcast_ref::<peakcert::Error>())
                .any(|c| c.is_certificate_failure());
            ExitCode::from(if failed { EXIT_FAILED } else { EXIT_USAGE })
        }
    }
}
