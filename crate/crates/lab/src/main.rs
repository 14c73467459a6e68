use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use bivariant_lab::bundled;
use bivariant_lab::compile::validate;
use bivariant_lab::demos;
use bivariant_lab::run::{run_text, EXIT_CONFIG};
use clap::{Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "bivariant-lab", version, about = "Check bivariant laws on finite sites")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Machine,
}

#[derive(Subcommand)]
enum Command {
    /// Run the checks of a scenario file, a bundled scenario name, or `all`.
    Check {
        scenario: String,
        /// Overrides the probe seed of the scenario.
        #[arg(long)]
        seed: Option<u64>,
        /// Also write the machine report to this file.
        #[arg(long)]
        report: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
    },
    /// Narrated walkthrough of one result.
    Demo {
        #[arg(value_parser = demos::names())]
        name: String,
    },
    /// Parse and resolve a scenario without running it.
    Validate { scenario: String },
}

/// File contents, or a bundled scenario of that name.
fn load(arg: &str) -> Result<(String, String), String> {
    let path = Path::new(arg);
    if path.exists() {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{arg}: {e}"))?;
        let name = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        return Ok((name, text));
    }
    match bundled::lookup(arg) {
        Some(text) => Ok((arg.trim_end_matches(".scn").to_string(), text.to_string())),
        None => Err(format!("{arg}: no such file or bundled scenario")),
    }
}

fn config_error(msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(EXIT_CONFIG as u8)
}

fn write_report(path: &Option<PathBuf>, json: &str) -> Result<(), String> {
    if let Some(p) = path {
        std::fs::write(p, json).map_err(|e| format!("{}: {e}", p.display()))?;
    }
    Ok(())
}

fn check(scenario: &str, seed: Option<u64>, report: &Option<PathBuf>, format: Format) -> ExitCode {
    let start = Instant::now();
    if scenario == "all" {
        let suite = bundled::run_suite(seed);
        let json = suite.to_json();
        if let Err(e) = write_report(report, &json) {
            return config_error(e);
        }
        match format {
            Format::Machine => print!("{json}"),
            Format::Text => {
                for r in &suite.scenarios {
                    println!("{}", r.to_text(None));
                }
                println!("suite time {:.3}s", start.elapsed().as_secs_f64());
            }
        }
        return ExitCode::from(suite.exit_code() as u8);
    }
    let (name, text) = match load(scenario) {
        Ok(x) => x,
        Err(e) => return config_error(e),
    };
    let r = match run_text(&name, &text, seed) {
        Ok(r) => r,
        Err(diags) => {
            for d in &diags.0 {
                eprintln!("{scenario}:{d}");
            }
            return ExitCode::from(EXIT_CONFIG as u8);
        }
    };
    let json = r.to_json();
    if let Err(e) = write_report(report, &json) {
        return config_error(e);
    }
    match format {
        Format::Machine => print!("{json}"),
        Format::Text => print!("{}", r.to_text(Some(start.elapsed()))),
    }
    ExitCode::from(r.exit_code() as u8)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_CONFIG as u8)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match cli.command {
        Command::Check {
            scenario,
            seed,
            report,
            format,
        } => check(&scenario, seed, &report, format),
        Command::Demo { name } => {
            let demo = demos::find(&name).expect("clap restricts demo names");
            println!("{}\n", demo.story);
            let start = Instant::now();
            match run_text(demo.scenario, demo.text(), None) {
                Ok(r) => {
                    print!("{}", r.to_text(Some(start.elapsed())));
                    ExitCode::from(r.exit_code() as u8)
                }
                Err(e) => config_error(e),
            }
        }
        Command::Validate { scenario } => {
            let (_, text) = match load(&scenario) {
                Ok(x) => x,
                Err(e) => return config_error(e),
            };
            match validate(&text) {
                Ok((_, w)) => {
                    println!("ok: {} checks", w.check_count());
                    ExitCode::SUCCESS
                }
                Err(diags) => {
                    for d in &diags.0 {
                        eprintln!("{scenario}:{d}");
                    }
                    ExitCode::from(EXIT_CONFIG as u8)
                }
            }
        }
    }
}
