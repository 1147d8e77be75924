use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use pegsim::scenario::{parse_config, run_scenario, JobKind};
use pegsim::Error;

/// Piezoelectric harvester simulator: Standard diode bridge versus SECE.
#[derive(Parser)]
#[command(version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Closed-form optimum loads and powers for harmonic excitation.
    Analytic(Common),
    /// Time-domain simulation of each configured interface.
    Run(Common),
    /// Load sweep of both interfaces with a gain report.
    Sweep(Common),
    /// Displacement spectrum of the excitation.
    Psd(Common),
}

#[derive(Args)]
struct Common {
    /// Scenario file.
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    /// Output directory, overriding `output.directory`.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Seed of the random excitation, overriding `job.seed`.
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
    /// Sweep worker threads (0 = one per core), overriding `job.threads`.
    #[arg(long, value_name = "N")]
    threads: Option<usize>,
    /// Print nothing on success.
    #[arg(long)]
    quiet: bool,
}

fn run(kind: JobKind, args: &Common) -> Result<Vec<String>, Error> {
    let text = std::fs::read_to_string(&args.config).map_err(|e| Error::Config {
        path: args.config.display().to_string(),
        message: format!("cannot read scenario file: {e}"),
    })?;
    let mut cfg = parse_config(&text)?;
    if let Some(seed) = args.seed {
        cfg.set_seed(seed)?;
    }
    if let Some(dir) = &args.out {
        cfg.output.directory = dir.to_string_lossy().into_owned();
    }
    if let Some(t) = args.threads {
        cfg.job.threads = t;
    }
    cfg.set_kind(kind)?;
    let report = run_scenario(&cfg)?;
    let mut lines = report.notes;
    lines.extend(report.files.iter().map(|f| format!("wrote {}", f.display())));
    Ok(lines)
}

fn main() -> ExitCode {
    // usage errors are configuration errors (1), not runtime failures (2)
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let (kind, args) = match &cli.command {
        Command::Analytic(a) => (JobKind::Analytic, a),
        Command::Run(a) => (JobKind::Run, a),
        Command::Sweep(a) => (JobKind::Sweep, a),
        Command::Psd(a) => (JobKind::Psd, a),
    };
    match run(kind, args) {
        Ok(lines) => {
            if !args.quiet {
                for l in lines {
                    println!("{l}");
                }
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
