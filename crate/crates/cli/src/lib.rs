//! Batch front end: `cll <command> --config run.toml --out dir`.
//!
//! Exit codes: 0 success, 2 config or input error, 3 gate failure,
//! 4 numerical divergence.

pub mod commands;
pub mod config;
pub mod error;
pub mod expr;
pub mod report;

use std::path::PathBuf;

use clap::Parser;

pub use config::{ExperimentConfig, LoadedConfig};
pub use error::{CliError, EXIT_GATE, EXIT_INPUT, EXIT_NUMERICAL, EXIT_OK};
use report::{Bundle, RunManifest};

#[derive(Debug, Parser)]
#[command(name = "cll", version, about = "Conformal-limit laboratory pipelines")]
pub struct Args {
    /// Command to run; overrides the config's `command` key.
    pub command: Option<String>,
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory; overrides the config's `output` key.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Seed for randomized scan order; overrides the config's `seed` key.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, env = "CLL_THREADS")]
    pub threads: Option<usize>,
    #[arg(long)]
    pub verbose: bool,
}

/// Outcome of one run: the bundle directory and the exit code.
#[derive(Debug)]
pub struct RunOutcome {
    pub out: PathBuf,
    pub exit_code: i32,
    pub error: Option<CliError>,
}

/// Loads the config, runs the command and writes the report bundle (or a
/// diagnostic record on failure).
pub fn run(args: &Args) -> RunOutcome {
    if let Some(n) = args.threads {
        // the global pool can only be configured once per process
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let loaded = LoadedConfig::from_path(&args.config).and_then(|mut lc| {
        if let Some(cmd) = &args.command {
            if !config::COMMANDS.contains(&cmd.as_str()) {
                return Err(CliError::UnknownCommand(cmd.clone()));
            }
            lc.config.command = cmd.clone();
        }
        Ok(lc)
    });
    let lc = match loaded {
        Ok(lc) => lc,
        Err(e) => {
            let out = args.out.clone().unwrap_or_else(|| PathBuf::from("cll-out"));
            return fail(Bundle::new(&out), e, args.command.as_deref());
        }
    };
    let bundle = Bundle::new(commands::out_dir(args.out.as_deref(), &lc));
    let seed = args.seed.or(lc.config.seed).unwrap_or(0);
    let ctx = commands::Ctx {
        lc: &lc,
        bundle: bundle.clone(),
        seed,
        verbose: args.verbose,
    };
    let result = commands::dispatch(&ctx).and_then(|summary| {
        bundle.manifest(&RunManifest {
            tool: "cll",
            version: env!("CARGO_PKG_VERSION"),
            command: &lc.config.command,
            seed,
            status: "ok",
            config: &lc.text,
            summary,
        })
    });
    match result {
        Ok(()) => RunOutcome {
            out: bundle.dir().to_path_buf(),
            exit_code: EXIT_OK,
            error: None,
        },
        Err(e) => fail(bundle, e, Some(&lc.config.command)),
    }
}

fn fail(bundle: Bundle, e: CliError, command: Option<&str>) -> RunOutcome {
    let diag = e.diagnostic(command);
    eprintln!("error: {e}");
    if let Err(w) = bundle.diagnostic(&diag) {
        eprintln!("error: could not write diagnostic record: {w}");
    }
    RunOutcome {
        out: bundle.dir().to_path_buf(),
        exit_code: diag.exit_code,
        error: Some(e),
    }
}

/// Parses process arguments and runs; returns the exit code.
pub fn main_entry() -> i32 {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
        }
    };
    run(&args).exit_code
}
