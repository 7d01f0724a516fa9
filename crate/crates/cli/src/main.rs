use std::path::PathBuf;
use std::process::ExitCode;

use bergman_dpp_cli::{commands, load_config, out_dir, CliError, Outcome, ProbeKind};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "bergman-dpp", version, about = "Determinantal point processes of weighted Bergman kernels")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw configurations from the configured kernel.
    Sample(RunArgs),
    /// Run the configured probe and write report.json.
    Probe(RunArgs),
    /// Summarize every report.json below a directory.
    Report {
        dir: PathBuf,
        /// Where to write summary.md (defaults to DIR).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Overrides `seed` from the configuration.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (results do not depend on this).
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides `probe.kind`.
    #[arg(long)]
    probe: Option<String>,
}

fn run(cli: Cli) -> Result<Outcome, CliError> {
    match cli.command {
        Command::Report { dir, out } => {
            let out = out.unwrap_or_else(|| dir.clone());
            commands::report(&dir, &out)
        }
        Command::Sample(args) | Command::Probe(args) if args.threads == Some(0) => {
            Err(CliError::config(None, "--threads must be positive"))
        }
        Command::Sample(args) => {
            let (cfg, out) = prepare(&args)?;
            commands::sample(&cfg, &out)
        }
        Command::Probe(args) => {
            let (cfg, out) = prepare(&args)?;
            commands::probe(&cfg, &out)
        }
    }
}

fn prepare(args: &RunArgs) -> Result<(bergman_dpp_cli::ExperimentConfig, PathBuf), CliError> {
    let mut cfg = load_config(&args.config)?;
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(p) = &args.probe {
        cfg.probe.kind = Some(p.parse::<ProbeKind>().map_err(|m| CliError::config(None, m))?);
    }
    if let Some(n) = args.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::config(None, format!("thread pool: {e}")))?;
    }
    let out = out_dir(&cfg, args.out.clone());
    Ok((cfg, out))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(outcome) => {
            println!("{}", outcome.summary);
            ExitCode::from(outcome.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
