use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use entropy_lab::experiments::{self, OutputFormat, RunOptions, RunOutput};
use entropy_lab::EntropyError;

#[derive(Parser, Debug)]
#[command(name = "entropy-lab", version, about = "Entropy estimation experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run a preset or a JSON config.
    Run {
        /// Preset name; omit when using --config.
        #[arg(required_unless_present = "config", conflicts_with = "config")]
        preset: Option<String>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, env = "ENTROPY_LAB_THREADS")]
        threads: Option<usize>,
        #[arg(long, value_enum, default_value_t = Format::Both)]
        format: Format,
    },
    /// List the presets.
    Presets,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum Format {
    Csv,
    Json,
    Both,
}

impl From<Format> for OutputFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Csv => OutputFormat::Csv,
            Format::Json => OutputFormat::Json,
            Format::Both => OutputFormat::Both,
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match cli.command {
        Command::Presets => {
            for p in experiments::PRESETS {
                println!("{p}");
            }
            ExitCode::SUCCESS
        }
        Command::Run { preset, config, out, seed, threads, format } => {
            if threads == Some(0) {
                eprintln!("error: --threads must be at least 1");
                return ExitCode::from(2);
            }
            let opts = RunOptions { seed, threads };
            let result = match (&preset, &config) {
                (Some(name), None) => experiments::run_preset(name, opts),
                (None, Some(path)) => experiments::run_config(path, opts),
                _ => unreachable!("clap enforces exactly one of preset and --config"),
            };
            match result.and_then(|o| o.write(&out, format.into()).map(|_| o)) {
                Ok(o) => report(&o),
                Err(e @ EntropyError::Config { .. }) => {
                    eprintln!("error: {e}");
                    ExitCode::from(2)
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(1)
                }
            }
        }
    }
}

fn report(o: &RunOutput) -> ExitCode {
    for r in &o.records {
        println!("{} {} value={:?} {}", if r.passed { "PASS" } else { "FAIL" }, r.record, r.value, r.diagnostics);
    }
    let failed: Vec<&str> = o.failures().map(|r| r.record.as_str()).collect();
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        eprintln!("assertion failed: {}", failed.join(", "));
        ExitCode::from(1)
    }
}
