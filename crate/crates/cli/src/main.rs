use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use hglk_core::app::{self, AppError, Command};

/// Numerical lab for the half Ginzburg-Landau-Kuramoto equation.
#[derive(Debug, Parser)]
#[command(name = "hglk", version)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,

    /// TOML run configuration; built-in defaults when omitted.
    #[arg(long, short, global = true)]
    config: Option<PathBuf>,

    /// Overrides `output.dir`.
    #[arg(long, short, global = true)]
    out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// Eigendecomposition and assumption reports.
    Spectrum,
    /// Spectral against resolvent-integral fractional powers.
    Fracpow,
    /// Dyadic norms, weight scan and second differences.
    Besov,
    /// Commutator estimate suites.
    Commutator,
    /// Evolve Gaussian data and record the trace.
    Simulate,
    /// Threshold sweep and rescaling scan.
    BlowupScan,
    /// Full property suite; exit 4 on any failure.
    Verify,
    /// Print the commented default config.
    DefaultConfig,
}

fn fail(err: &AppError) -> ExitCode {
    eprintln!("{}", err.to_json());
    ExitCode::from(err.exit_code() as u8)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if e.use_stderr() => {
            let msg = e.render().to_string();
            return fail(&AppError::Config(vec![msg.lines().next().unwrap_or("usage error").to_string()]));
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
    };
    let command = match cli.command {
        Cmd::Spectrum => Command::Spectrum,
        Cmd::Fracpow => Command::Fracpow,
        Cmd::Besov => Command::Besov,
        Cmd::Commutator => Command::Commutator,
        Cmd::Simulate => Command::Simulate,
        Cmd::BlowupScan => Command::BlowupScan,
        Cmd::Verify => Command::Verify,
        Cmd::DefaultConfig => {
            print!("{}", app::DEFAULT_CONFIG_TOML);
            return ExitCode::SUCCESS;
        }
    };
    match app::run_path(command, cli.config.as_deref(), cli.out.as_deref()) {
        Ok(outcome) => {
            let m = &outcome.manifest;
            println!("{} wrote {} files, config {}", m.command, m.files.len(), &m.config_sha256[..12]);
            if let Some(suites) = &m.suites {
                for s in suites {
                    println!(
                        "  {:<24} {:>4}/{:<4} {}",
                        s.name,
                        s.passed,
                        s.trials,
                        if s.pass { "pass" } else { "FAIL" }
                    );
                }
            }
            ExitCode::from(outcome.exit_code as u8)
        }
        Err(e) => fail(&e),
    }
}
