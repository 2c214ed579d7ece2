use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use gateforge::run::{parse_config, rerun, run, Mode, RunConfig, DEFAULTS};
use gateforge::Error;

#[derive(Parser)]
#[command(name = "forge", version, about = "Compile, compare and discover discrete quantum gate sets")]
#[command(after_long_help = DEFAULTS)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Decompose every dataset target over one gate set
    Compile(RunArgs),
    /// Evaluate two gate sets and score the second against the first
    Compare(RunArgs),
    /// Search an ansatz for a gate set that scores higher than gs1
    Discover(RunArgs),
    /// Validate a config and print it with defaults filled in
    Check {
        #[arg(long)]
        config: PathBuf,
    },
    /// Repeat a run from its manifest.json
    Rerun {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        threads: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the config schema and defaults
    Defaults,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (0 = all cores)
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

enum Failure {
    Config(Error),
    Runtime(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) | Error::Parse { .. } => Failure::Config(e),
            e => Failure::Runtime(e),
        }
    }
}

fn base_of(config: &Path) -> PathBuf {
    match config.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    }
}

fn load(args: &RunArgs, mode: Mode) -> Result<RunConfig, Failure> {
    let mut cfg = parse_config(&args.config).map_err(Failure::Config)?;
    if cfg.mode != mode {
        return Err(Failure::Config(Error::Config(format!(
            "mode: config says `{}` but the `{mode}` command was used",
            cfg.mode
        ))));
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(t) = args.threads {
        cfg.threads = t;
    }
    if let Some(o) = &args.out {
        cfg.output = std::path::absolute(o).map_err(|e| Failure::Runtime(Error::Io { path: o.clone(), source: e }))?;
    }
    Ok(cfg)
}

fn execute(cli: Cli) -> Result<(), Failure> {
    let (args, mode) = match cli.command {
        Command::Compile(a) => (a, Mode::Compile),
        Command::Compare(a) => (a, Mode::Compare),
        Command::Discover(a) => (a, Mode::Discover),
        Command::Check { config } => {
            let cfg = parse_config(&config).map_err(Failure::Config)?;
            print!("{}", cfg.to_toml());
            return Ok(());
        }
        Command::Rerun { manifest, threads, out } => {
            let o = rerun(&manifest, out.as_deref(), threads)?;
            println!("{}\nwrote {}", o.summary, o.output.display());
            return Ok(());
        }
        Command::Defaults => {
            print!("{DEFAULTS}");
            return Ok(());
        }
    };
    let cfg = load(&args, mode)?;
    let o = run(&cfg, &base_of(&args.config))?;
    println!("{}\nwrote {}", o.summary, o.output.display());
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(3)
        }
    }
}
