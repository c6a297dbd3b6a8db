//! `lorentz-gauge`: runs scenario files and writes reproducible reports.
//!
//! Exit codes: 0 when every check passes, 1 when a check fails, 2 for usage,
//! schema and I/O errors.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod error;
mod experiments;
mod report;
mod scenario;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use error::CliError;
use experiments::Fixtures;
use report::RunReport;
use scenario::{Kind, Scenario};

const DEFAULT_SCENARIO: &str = include_str!("../scenarios/default.json");

#[derive(Parser)]
#[command(name = "lorentz-gauge", version, about = "Broken light-ray transforms and gauge reconstruction")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every experiment of a scenario.
    Run(Common),
    /// Run only the geodesic experiments.
    Geodesic(Common),
    /// Run only the transport experiments.
    Transport(Common),
    /// Run only the broken-ray experiments.
    Broken(Common),
    /// Run only the reconstruction experiments.
    Reconstruct(Common),
    /// Run only the interaction experiments.
    Interaction(Common),
    /// Run every experiment; without --config the built-in scenario is used.
    VerifyAll(Common),
}

#[derive(Args)]
struct Common {
    /// Scenario file (JSON).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Overrides the scenario seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; defaults to the number of cores.
    #[arg(long)]
    threads: Option<usize>,
    /// Treat unresolved reconstruction points as failures.
    #[arg(long)]
    strict: bool,
}

fn load(common: &Common, builtin: bool) -> Result<Scenario, CliError> {
    let text = match (&common.config, builtin) {
        (Some(path), _) => {
            std::fs::read_to_string(path).map_err(|e| CliError::io(format!("reading {}", path.display()), e))?
        }
        (None, true) => DEFAULT_SCENARIO.to_owned(),
        (None, false) => return Err(CliError::Usage("--config is required".into())),
    };
    let mut s = scenario::parse(&text)?;
    if let Some(seed) = common.seed {
        s.seed = Some(seed);
    }
    Ok(s)
}

fn execute(command: Command) -> Result<bool, CliError> {
    let (common, filter, builtin) = match command {
        Command::Run(c) => (c, None, false),
        Command::VerifyAll(c) => (c, None, true),
        Command::Geodesic(c) => (c, Some(Kind::Geodesic), false),
        Command::Transport(c) => (c, Some(Kind::Transport), false),
        Command::Broken(c) => (c, Some(Kind::Broken), false),
        Command::Reconstruct(c) => (c, Some(Kind::Reconstruct), false),
        Command::Interaction(c) => (c, Some(Kind::Interaction), false),
    };
    if let Some(n) = common.threads {
        if n == 0 {
            return Err(CliError::Usage("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(format!("thread pool: {e}")))?;
    }
    let mut scenario = load(&common, builtin)?;
    if let Some(kind) = filter {
        scenario.experiments.retain(|e| e.kind() == kind);
        if scenario.experiments.is_empty() {
            return Err(CliError::Usage(format!("scenario has no {} experiments", kind.name())));
        }
    }
    log::info!("scenario {} with {} experiments", scenario.name, scenario.experiments.len());
    let fx = Fixtures::build(&scenario, common.strict);
    let outcomes: Vec<_> = scenario.experiments.iter().enumerate().map(|(i, e)| experiments::run(&fx, i, e)).collect();
    let report = RunReport::new(scenario, outcomes);
    report.write(&common.out)?;
    for o in &report.experiments {
        for c in &o.checks {
            log::debug!("{} = {:e} ({})", c.name, c.value, if c.pass { "pass" } else { "fail" });
        }
    }
    if !report.pass {
        eprintln!("failed checks: {}", report.failed.join(", "));
    }
    println!("{}", report.content_hash);
    Ok(report.pass)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("LORENTZ_GAUGE_LOG", "warn")).init();
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
