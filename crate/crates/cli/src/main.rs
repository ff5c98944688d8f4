//! `cannings`: exact matrices, simulations and limit diagnostics for multi-type
//! Cannings models, driven by a TOML scenario file.
//!
//! Exit codes: 0 on success, 1 on an invalid scenario or usage, 2 when a state
//! space or simulated population exceeds its cap.

mod commands;
mod config;
mod output;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context as _;
use clap::{Args, Parser, Subcommand};

use commands::{Context, RunError, SimMode};
use output::{unix_now, write_manifest, Manifest};

#[derive(Parser)]
#[command(
    name = "cannings",
    version,
    about = "Exact and Monte Carlo computations for multi-type Cannings models"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Seed for all random streams (overrides run.seed).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output CSV; the manifest goes next to it as <out>.manifest.json.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Largest state space an exact computation may enumerate (overrides run.cap).
    #[arg(long, global = true)]
    cap: Option<usize>,
}

#[derive(Args)]
struct ConfigArg {
    /// Scenario file.
    #[arg(value_name = "CONFIG", required_unless_present = "config")]
    path: Option<PathBuf>,
    /// Scenario file, as an alternative to the positional argument.
    #[arg(long = "config", value_name = "CONFIG", conflicts_with = "path")]
    config: Option<PathBuf>,
}

impl ConfigArg {
    fn path(&self) -> &Path {
        self.path
            .as_deref()
            .or(self.config.as_deref())
            .expect("clap requires one of them")
    }
}

#[derive(Subcommand)]
enum Command {
    /// Forward transition matrix of the variable-subpopulation model.
    ExactForward(ConfigArg),
    /// One-generation matrix over typed partitions of the fixed-subpopulation model.
    ExactBackward(ConfigArg),
    /// Backward matrix of the variable-subpopulation model, with row sums.
    ExactBackwardVariable(ConfigArg),
    /// Monte Carlo paths.
    Simulate {
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long, value_enum)]
        mode: SimMode,
        /// Number of replicates (overrides run.reps).
        #[arg(long)]
        reps: Option<u64>,
        /// Generations per replicate (overrides run.horizon).
        #[arg(long)]
        horizon: Option<u64>,
    },
    /// Distance between the finite-N ancestral chain and the limiting coalescent.
    LimitCheck {
        #[command(flatten)]
        config: ConfigArg,
        /// Population sizes, comma separated (overrides run.n_grid).
        #[arg(long = "N", value_delimiter = ',')]
        n: Option<Vec<u64>>,
        /// Coalescent times, comma separated (overrides run.t_grid).
        #[arg(long = "t", value_delimiter = ',')]
        t: Option<Vec<f64>>,
    },
    /// One-step finite-N law against the Galton-Watson limit.
    GwLimit {
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long = "N", value_delimiter = ',')]
        n: Option<Vec<u64>>,
    },
    /// Merger rates of the limit measures.
    Rates(ConfigArg),
    /// Block-counting generator of the limit.
    BlockGen(ConfigArg),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::ExactForward(_) => "exact-forward",
            Command::ExactBackward(_) => "exact-backward",
            Command::ExactBackwardVariable(_) => "exact-backward-variable",
            Command::Simulate { .. } => "simulate",
            Command::LimitCheck { .. } => "limit-check",
            Command::GwLimit { .. } => "gw-limit",
            Command::Rates(_) => "rates",
            Command::BlockGen(_) => "block-gen",
        }
    }

    fn config(&self) -> &Path {
        match self {
            Command::ExactForward(c)
            | Command::ExactBackward(c)
            | Command::ExactBackwardVariable(c)
            | Command::Rates(c)
            | Command::BlockGen(c) => c.path(),
            Command::Simulate { config, .. } | Command::LimitCheck { config, .. } | Command::GwLimit { config, .. } => {
                config.path()
            }
        }
    }
}

fn run(cli: Cli) -> Result<(), RunError> {
    let started = unix_now();
    let config_path = cli.command.config().to_path_buf();
    let text = fs::read_to_string(&config_path).with_context(|| format!("cannot read {}", config_path.display()))?;
    let scenario = config::parse_config(&text)?;
    let ctx = Context::new(&scenario, cli.seed, cli.cap);
    let name = cli.command.name();
    let table = match cli.command {
        Command::ExactForward(_) => commands::exact_forward(&ctx)?,
        Command::ExactBackward(_) => commands::exact_backward(&ctx)?,
        Command::ExactBackwardVariable(_) => commands::exact_backward_variable(&ctx)?,
        Command::Simulate {
            mode, reps, horizon, ..
        } => commands::simulate(&ctx, mode, reps, horizon)?,
        Command::LimitCheck { n, t, .. } => commands::limit_check(&ctx, n, t)?,
        Command::GwLimit { n, .. } => commands::gw_limit(&ctx, n)?,
        Command::Rates(_) => commands::rates(&ctx)?,
        Command::BlockGen(_) => commands::block_gen(&ctx)?,
    };
    let out = cli.out.unwrap_or_else(|| PathBuf::from(format!("{name}.csv")));
    table.write(&out)?;
    let manifest = Manifest {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        subcommand: name.to_string(),
        config: config_path.display().to_string(),
        config_sha256: output::sha256_hex(text.as_bytes()),
        seed: ctx.seed,
        started_unix: started,
        finished_unix: unix_now(),
        outputs: vec![out.clone()],
    };
    write_manifest(&out, &manifest)?;
    eprintln!("wrote {} ({} rows)", out.display(), table.rows.len());
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(e.exit_code())
        }
    }
}
