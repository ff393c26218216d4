use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use timing_games::cli_reporting::*;
use timing_games::Result;

#[derive(Parser)]
#[command(name = "timing-games", version, about = "Simulate and verify equilibria of stochastic timing games")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse a scenario and build its model.
    Validate(Opts),
    /// Run all checks of a scenario and write reports.
    Run(Opts),
    /// Run the equilibrium checks and print the verdicts.
    Verify(Opts),
    /// Compare the kernels against their oracles.
    Oracle(Opts),
}

#[derive(Args)]
struct Opts {
    /// Scenario file, or a preset name (gbm_entry, grab_dollar, jump).
    #[arg(long)]
    scenario: String,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    paths: Option<usize>,
    #[arg(long)]
    steps: Option<usize>,
}

impl Opts {
    fn config(&self) -> Result<ScenarioConfig> {
        let text = load_scenario_text(&self.scenario)?;
        let mut cfg = parse_config(&text)?;
        cfg.apply(Overrides { seed: self.seed, paths: self.paths, steps: self.steps });
        cfg.validate()?;
        Ok(cfg)
    }
}

fn exec(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Validate(o) => {
            let cfg = o.config()?;
            println!("{}: valid {} scenario, config {}", cfg.name, cfg.model.name(), cfg.content_hash());
            Ok(true)
        }
        Command::Run(o) => {
            let cfg = o.config()?;
            let report = run_scenario(&cfg)?;
            write_run(&report, &o.out.unwrap_or_else(|| PathBuf::from("out")))?;
            print!("{}", summary(&report));
            Ok(report.pass)
        }
        Command::Verify(o) => {
            let cfg = o.config()?;
            let report = run_scenario(&cfg)?;
            if let Some(dir) = &o.out {
                write_run(&report, dir)?;
            }
            print!("{}", summary(&report));
            Ok(report.pass)
        }
        Command::Oracle(o) => {
            let cfg = o.config()?;
            let report = oracle_suite(&cfg)?;
            if let Some(dir) = &o.out {
                write_oracle(&report, dir)?;
            }
            print!("{}", oracle_summary(&report));
            Ok(report.pass)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match exec(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
