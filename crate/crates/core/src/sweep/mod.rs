//! Parameter sweeps and the command implementations behind the CLI.

pub mod config;
pub mod report;
pub mod table;
pub mod validate;

use crate::error::{Error, Result};

pub use config::{parse_config, KindTemplate, QueryGrid, Rho0Rule, RunConfig};
pub use report::{synergy_report, SynergyReport};
pub use table::{analytic_rows, fmt_sig, render_analytic_csv, render_simulated_csv, simulated_rows, SweepRow, CSV_HEADER};
pub use validate::{run_validation, ValidateOptions, ValidationReport};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 1;
pub const EXIT_PROPERTY: i32 = 2;
pub const EXIT_IO: i32 = 3;

/// Output of one command: the document to write, a short summary for the
/// terminal, and whether every property the command checks held.
#[derive(Debug, Clone, PartialEq)]
pub struct CommandOutput {
    pub body: String,
    pub summary: String,
    pub ok: bool,
}

impl CommandOutput {
    pub fn exit_code(&self) -> i32 {
        if self.ok {
            EXIT_OK
        } else {
            EXIT_PROPERTY
        }
    }
}

/// Exit code for a failed command.
pub fn error_exit_code(err: &Error) -> i32 {
    match err {
        Error::Parse { .. } | Error::Validation(_) => EXIT_INPUT,
        Error::Io(_) => EXIT_IO,
        _ => EXIT_PROPERTY,
    }
}

pub fn cmd_analytic(cfg: &RunConfig) -> Result<CommandOutput> {
    let rows = analytic_rows(cfg)?;
    Ok(CommandOutput {
        summary: format!("rows={}", rows.len()),
        body: render_analytic_csv(&rows),
        ok: true,
    })
}

pub fn cmd_simulate(cfg: &RunConfig) -> Result<CommandOutput> {
    let rows = simulated_rows(cfg)?;
    let flagged = rows.iter().filter(|r| r.flagged).count();
    Ok(CommandOutput {
        summary: format!("rows={} flagged={} trials={} seed={}", rows.len(), flagged, cfg.trials, cfg.seed),
        body: render_simulated_csv(&rows),
        ok: flagged == 0,
    })
}

pub fn cmd_synergy(cfg: &RunConfig) -> Result<CommandOutput> {
    let rep = synergy_report(cfg)?;
    Ok(CommandOutput {
        summary: format!("violations={}", rep.violations),
        body: rep.text,
        ok: rep.violations == 0,
    })
}

pub fn cmd_validate(cfg: &RunConfig, opts: ValidateOptions) -> Result<CommandOutput> {
    let rep = run_validation(cfg, opts)?;
    let body = rep.render();
    Ok(CommandOutput {
        summary: body.lines().last().unwrap_or_default().to_string(),
        body,
        ok: rep.passed(),
    })
}
