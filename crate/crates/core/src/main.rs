//! `govliq` command-line front end.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use govliq::sweep::{self, error_exit_code, CommandOutput, RunConfig, ValidateOptions};
use govliq::{Error, Result};

#[derive(Debug, Parser)]
#[command(name = "govliq", version, about = "Governance, noise trading and stock liquidity sweeps")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Configuration document.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Master seed, overriding run.seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output file, overriding output.path; standard output when neither is set.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Monte Carlo trials per grid point, overriding run.trials.
    #[arg(long, global = true)]
    trials: Option<u64>,

    /// Worker threads.
    #[arg(long, global = true, env = "GOVLIQ_WORKERS")]
    workers: Option<usize>,

    /// Flip the sign of the analytic dK/dL (validate harness self-test).
    #[arg(long, global = true, hide = true)]
    inject_fault: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Tabulate F and ILL over the grid.
    Analytic,
    /// Tabulate F and ILL with Monte Carlo estimates and agreement flags.
    Simulate,
    /// Report ILL differences, their orderings and derivative signs.
    Synergy,
    /// Run the invariant suite at the configured parameters.
    Validate,
}

fn load(cli: &Cli) -> Result<RunConfig> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| Error::Validation(vec![govliq::FieldError::new("--config", "a configuration file is required")]))?;
    let text = fs::read_to_string(path)?;
    let mut cfg = sweep::parse_config(&text)?;
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(t) = cli.trials {
        cfg.trials = t;
    }
    if let Some(o) = &cli.out {
        cfg.output_path = Some(o.clone());
    }
    cfg.validate()?;
    Ok(cfg)
}

fn execute(cli: &Cli) -> Result<CommandOutput> {
    let cfg = load(cli)?;
    let out = match cli.command {
        Command::Analytic => sweep::cmd_analytic(&cfg)?,
        Command::Simulate => sweep::cmd_simulate(&cfg)?,
        Command::Synergy => sweep::cmd_synergy(&cfg)?,
        Command::Validate => sweep::cmd_validate(
            &cfg,
            ValidateOptions {
                flip_dk_dl_sign: cli.inject_fault,
            },
        )?,
    };
    match &cfg.output_path {
        Some(p) => fs::write(p, &out.body)?,
        None => print!("{}", out.body),
    }
    Ok(out)
}

fn run(cli: &Cli) -> Result<CommandOutput> {
    match cli.workers {
        Some(0) => Err(Error::Validation(vec![govliq::FieldError::new("--workers", "must be at least 1")])),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Io(std::io::Error::other(e)))?
            .install(|| execute(cli)),
        None => execute(cli),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(out) => {
            eprintln!("{}", out.summary);
            ExitCode::from(out.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("govliq: {e}");
            ExitCode::from(error_exit_code(&e) as u8)
        }
    }
}
