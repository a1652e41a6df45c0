use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use hg_cli::{run, CliError, Command, RunManifest};

/// `hg <command> <manifest>`; `run` dispatches on the manifest's own
/// `command`, any other name must match it.
#[derive(Parser)]
#[command(name = "hg", version, about = "Heat-equation solutions for rapidly growing measure data")]
struct Cli {
    verb: Verb,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum Verb {
    Run,
    Evaluate,
    Norms,
    BlowupMap,
    Oscillate,
    Trace,
    TraceSolve,
    Classify,
    Shadow,
    Rescale,
}

impl Verb {
    fn command(self) -> Option<Command> {
        Some(match self {
            Verb::Run => return None,
            Verb::Evaluate => Command::Evaluate,
            Verb::Norms => Command::Norms,
            Verb::BlowupMap => Command::BlowupMap,
            Verb::Oscillate => Command::Oscillate,
            Verb::Trace => Command::Trace,
            Verb::TraceSolve => Command::TraceSolve,
            Verb::Classify => Command::Classify,
            Verb::Shadow => Command::Shadow,
            Verb::Rescale => Command::Rescale,
        })
    }
}

#[derive(clap::Args)]
struct Overrides {
    manifest: PathBuf,
    /// Replaces the manifest's CSV destination.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Replaces the manifest's summary destination.
    #[arg(long)]
    summary: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
}

fn load(o: &Overrides, expect: Option<Command>) -> Result<RunManifest, CliError> {
    let mut m = RunManifest::read(&o.manifest)?;
    if let Some(c) = expect {
        if c != m.command {
            return Err(CliError::Validation(format!("manifest runs {}, not {c}", m.command)));
        }
    }
    if let Some(p) = &o.output {
        m.output = p.clone();
    }
    if let Some(p) = &o.summary {
        m.summary = Some(p.clone());
    }
    if let Some(s) = o.seed {
        m.seed = s;
    }
    Ok(m)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = load(&cli.overrides, cli.verb.command()).and_then(|m| run(&m));
    match result {
        Ok(_) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
