//! Command-line front end for scenario files.
//!
//! `hasse run FILE` executes every command in the scenario and prints a
//! report; `hasse check FILE` only parses and resolves it. Exit status:
//! 0 when every command passed, 1 when any command failed or errored,
//! 2 when the scenario itself is invalid (unreadable, unparseable, or
//! a declaration that does not build).

use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use hasse_core::runner::{check_scenario, run_scenario, RunFlags};
use hasse_core::scenario::parse_scenario;

#[derive(Parser)]
#[command(name = "hasse", version, about = "Run and check derivation scenario files")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(Subcommand)]
enum Cmd {
    /// Execute a scenario file and print a report.
    Run {
        /// Scenario file (.hsw).
        file: String,
        /// Report format.
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
        /// Base seed for randomized checks (overrides the scenario's
        /// own config block).
        #[arg(long)]
        seed: Option<u64>,
        /// Run commands on worker threads; the report is identical to
        /// a sequential run.
        #[arg(long)]
        parallel: bool,
        /// Stop at the first command that does not pass.
        #[arg(long)]
        fail_fast: bool,
        /// Record per-command wall-clock times in the report.
        #[arg(long)]
        timing: bool,
    },
    /// Parse a scenario file and resolve every reference without
    /// running anything.
    Check {
        /// Scenario file (.hsw).
        file: String,
        /// Print the canonical form of the scenario.
        #[arg(long)]
        print: bool,
    },
}

fn read_file(path: &str) -> Result<String, ExitCode> {
    std::fs::read_to_string(path).map_err(|e| {
        eprintln!("error: cannot read {path}: {e}");
        ExitCode::from(2)
    })
}

fn color_enabled() -> bool {
    std::env::var("HASSE_COLOR").is_ok_and(|v| v == "1")
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Cmd::Run {
            file,
            format,
            seed,
            parallel,
            fail_fast,
            timing,
        } => {
            let text = match read_file(&file) {
                Ok(t) => t,
                Err(code) => return code,
            };
            let scenario = match parse_scenario(&text) {
                Ok(s) => s,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(2);
                }
            };
            let flags = RunFlags {
                seed,
                parallel,
                fail_fast,
                timing,
            };
            let report = match run_scenario(&scenario, flags) {
                Ok(r) => r,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(2);
                }
            };
            match format {
                Format::Text => print!("{}", report.render_text(color_enabled())),
                Format::Json => print!("{}", report.to_json()),
            }
            if report.all_passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Cmd::Check { file, print } => {
            let text = match read_file(&file) {
                Ok(t) => t,
                Err(code) => return code,
            };
            let scenario = match parse_scenario(&text) {
                Ok(s) => s,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(2);
                }
            };
            match check_scenario(&scenario) {
                Ok((decls, commands)) => {
                    if print {
                        print!("{}", hasse_core::scenario::pretty(&scenario));
                    } else {
                        println!("ok: {decls} declarations, {commands} commands");
                    }
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(2)
                }
            }
        }
    }
}
