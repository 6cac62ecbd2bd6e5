use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use twophase::experiment::{self, CommandOutcome, ExitStatus, ExperimentConfig};
use twophase::par::{set_exec, Exec};

#[derive(Parser)]
#[command(name = "twophase", version, about = "Two-phase drag-coupled Navier-Stokes simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `output.dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// `key=value` override of a configuration entry, e.g. `params.eps=0.05`.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Only print the final status line on failure.
    #[arg(long)]
    quiet: bool,
    /// Evaluate cell loops and sweep members on one thread.
    #[arg(long)]
    sequential: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate one configuration and check its invariants.
    Run(Common),
    /// Run one member per value of the configured sweep axis.
    Sweep(Common),
    /// Mollifier and regularized-initial-data checks only.
    CheckInit(Common),
    /// Render summary files as a markdown table.
    Report {
        summaries: Vec<PathBuf>,
        /// Also write the table to this file.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Do not print the table to stdout.
        #[arg(long)]
        quiet: bool,
    },
}

fn load(c: &Common) -> Result<(ExperimentConfig, PathBuf), CommandOutcome> {
    let cfg = experiment::load_config(&c.config, &c.overrides).map_err(|e| CommandOutcome {
        status: ExitStatus::ConfigError,
        message: e.to_string(),
    })?;
    let out = c.out.clone().unwrap_or_else(|| cfg.output.dir.clone());
    Ok((cfg, out))
}

fn finish(outcome: CommandOutcome, quiet: bool) -> ExitCode {
    if outcome.status != ExitStatus::Pass {
        eprintln!("error: {}", outcome.message);
    } else if !quiet {
        eprintln!("{}", outcome.message);
    }
    ExitCode::from(outcome.status.code() as u8)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (common, verb): (&Common, fn(&ExperimentConfig, &std::path::Path) -> CommandOutcome) =
        match &cli.command {
            Command::Report { summaries, out, quiet } => {
                let (text, status) = experiment::report(summaries);
                if !quiet {
                    print!("{text}");
                }
                if let Some(path) = out {
                    if let Err(e) = std::fs::write(path, &text) {
                        eprintln!("error: {}: {e}", path.display());
                        return ExitCode::from(ExitStatus::Failure.code() as u8);
                    }
                }
                return ExitCode::from(status.code() as u8);
            }
            Command::Run(c) => (c, experiment::run_single),
            Command::Sweep(c) => (c, experiment::run_sweep),
            Command::CheckInit(c) => (c, experiment::check_init),
        };
    if common.sequential {
        set_exec(Exec::Sequential);
    }
    let (cfg, out) = match load(common) {
        Ok(v) => v,
        Err(o) => return finish(o, common.quiet),
    };
    if !common.quiet {
        eprintln!("writing results to {}", out.display());
    }
    finish(verb(&cfg, &out), common.quiet)
}
