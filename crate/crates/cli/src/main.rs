use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use hermweyl::runner::{self, parse_config, Group, RunConfig, Suite};
use hermweyl::step2::FIXTURES;

/// Verification suites for Weyl transforms on Heisenberg, motion and
/// step-two nilpotent groups.
#[derive(Parser)]
#[command(name = "hermweyl", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the suites selected by a configuration file and write a report.
    Run {
        /// Path to a `key = value` file, or `defaults` for the built-in configuration.
        #[arg(long)]
        config: String,
        /// Output directory; overrides `output_dir`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Random seed; overrides `seed`.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// List the suites and the groups each runs on.
    ListSuites,
    /// Print the shipped structure-constant files.
    Fixtures,
}

fn usage(msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("hermweyl: {msg}");
    ExitCode::from(2)
}

fn run(config: &str, out: Option<PathBuf>, seed: Option<u64>) -> ExitCode {
    let mut cfg = if config == "defaults" {
        RunConfig::default()
    } else {
        let text = match fs::read_to_string(config) {
            Ok(t) => t,
            Err(e) => return usage(format!("{config}: {e}")),
        };
        match parse_config(&text) {
            Ok(c) => c,
            Err(e) => return usage(format!("{config}: {e}")),
        }
    };
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let dir = out.unwrap_or_else(|| PathBuf::from(&cfg.output_dir));
    let output = match runner::run(&cfg) {
        Ok(o) => o,
        Err(e) => return usage(e),
    };
    if let Err(e) = runner::write_outputs(&output, &dir) {
        return usage(format!("{}: {e}", dir.display()));
    }
    for c in &output.report.checks {
        let residual = c.residual.map_or_else(|| "n/a".to_string(), |r| format!("{r:.3e}"));
        println!(
            "{} {:<14} {}  residual {residual} (tolerance {:.0e})",
            if c.pass { "PASS" } else { "FAIL" },
            c.suite,
            c.identity,
            c.tolerance
        );
        if !c.pass {
            if let Some(note) = &c.note {
                println!("     {note}");
            }
        }
    }
    println!("report written to {}", dir.join("report.json").display());
    if output.report.all_pass() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run { config, out, seed } => run(&config, out, seed),
        Command::ListSuites => {
            for s in Suite::CONCRETE {
                let groups: Vec<&str> = s.groups().iter().map(Group::name).collect();
                println!("{:<15} {}", s.name(), groups.join(", "));
            }
            println!("{:<15} every suite of the configured group", Suite::All.name());
            ExitCode::SUCCESS
        }
        Command::Fixtures => {
            for (name, text) in FIXTURES {
                println!("== {name}");
                print!("{text}");
            }
            ExitCode::SUCCESS
        }
    }
}
