use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use fracsemi::experiment::{concentration_table, run_command, Command, RunRecords, RunRequest};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Cmd {
    /// Run the hypothesis validators only.
    Check,
    /// Limit-problem energies over the configured levels.
    Limit,
    /// One (ε, branch) solve.
    Solve,
    /// Full ε-sweep with branches and diagnostics.
    Sweep,
    /// Regenerate tables from a stored records.json.
    Report,
}

impl From<Cmd> for Command {
    fn from(c: Cmd) -> Self {
        match c {
            Cmd::Check => Command::Check,
            Cmd::Limit => Command::Limit,
            Cmd::Solve => Command::Solve,
            Cmd::Sweep => Command::Sweep,
            Cmd::Report => Command::Report,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "fracsemi", version, about = "Semiclassical fractional Schrödinger experiments")]
struct Args {
    command: Cmd,
    #[arg(long)]
    config: PathBuf,
    /// Output directory (defaults to output.dir from the config).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    workers: Option<usize>,
    /// Overrides rng_seed from the config.
    #[arg(long)]
    seed: Option<u64>,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let req = RunRequest {
        command: args.command.into(),
        config_path: args.config,
        out_dir: args.out,
        seed: args.seed,
        workers: args.workers,
    };
    let pool = match rayon::ThreadPoolBuilder::new()
        .num_threads(args.workers.unwrap_or(0))
        .build()
    {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: thread pool: {e}");
            return ExitCode::from(2);
        }
    };
    let status = pool.install(|| run_command(&req));
    match &status.error {
        None => {
            if matches!(req.command, Command::Sweep | Command::Report) {
                let path = status.out_dir.join("records.json");
                if let Some(s) = std::fs::read_to_string(path)
                    .ok()
                    .and_then(|t| RunRecords::parse(&t).ok())
                    .and_then(|r| r.sweep)
                {
                    print!("{}", concentration_table(&s.concentration));
                }
            }
            println!("{}: ok ({})", req.command.name(), status.out_dir.display());
        }
        Some(e) => eprintln!("{}: {e} (exit {})", req.command.name(), status.exit_code),
    }
    ExitCode::from(status.exit_code as u8)
}
