mod commands;
mod config;
mod error;

use std::io::Write;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{AnalyzeArgs, LimitsArgs, Output, SimulateArgs, SweepArgs, TableArgs, TradeoffArgs};
use config::{Common, Format};
use error::CliError;

/// Risk of large fluctuations in noisy delayed consensus networks.
#[derive(Debug, Parser)]
#[command(name = "delayrisk", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Steady (and optional transient) risks per observable
    Analyze(AnalyzeArgs),
    /// Safe/marginal/unsafe counts along a delay grid
    Sweep(SweepArgs),
    /// Risk-resistance scatter over random graphs with the limit curves
    Tradeoff(TradeoffArgs),
    /// Closed-form per-node risks for a topology family
    Table(TableArgs),
    /// Euler-Maruyama ensemble against the analytic moments
    Simulate(SimulateArgs),
    /// Hard limits and tradeoff floors per observable
    Limits(LimitsArgs),
}

impl Command {
    fn common(&self) -> &Common {
        match self {
            Self::Analyze(a) => &a.common,
            Self::Sweep(a) => &a.common,
            Self::Tradeoff(a) => &a.common,
            Self::Table(a) => &a.common,
            Self::Simulate(a) => &a.common,
            Self::Limits(a) => &a.common,
        }
    }

    fn run(&self) -> Result<Output, CliError> {
        match self {
            Self::Analyze(a) => commands::analyze(a),
            Self::Sweep(a) => commands::sweep(a),
            Self::Tradeoff(a) => commands::tradeoff(a),
            Self::Table(a) => commands::table(a),
            Self::Simulate(a) => commands::simulate(a),
            Self::Limits(a) => commands::limits(a),
        }
    }
}

fn render(out: &Output, format: Format) -> Result<String, CliError> {
    Ok(match format {
        Format::Csv => {
            let mut s = String::with_capacity(out.rows.len() * 48);
            s.push_str(&out.header);
            s.push('\n');
            for r in &out.rows {
                s.push_str(r);
                s.push('\n');
            }
            s
        }
        Format::Json => serde_json::to_string_pretty(&out.json)? + "\n",
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let common = cli.command.common();
    let result = cli.command.run().and_then(|out| {
        let text = render(&out, common.format)?;
        match &common.out {
            Some(path) => std::fs::write(path, text)?,
            None => match std::io::stdout().lock().write_all(text.as_bytes()) {
                // a closed downstream pipe (`| head`) is not an error
                Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => {}
                r => r?,
            },
        }
        if let Some(note) = &out.note {
            eprintln!("{note}");
        }
        Ok(())
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
