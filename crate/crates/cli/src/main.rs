//! `atomsense`: simulator and analysis CLI for a dual cold-atom
//! accelerometer-gyroscope with magnetically launched atoms.

mod cmds;
mod config;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

/// Command error split by exit code: 2 for configuration problems,
/// 3 for runtime failures.
#[derive(Debug)]
pub enum AppError {
    Config(String),
    Runtime(String),
}

impl std::fmt::Display for AppError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            AppError::Config(m) => write!(f, "configuration error: {m}"),
            AppError::Runtime(m) => write!(f, "runtime error: {m}"),
        }
    }
}

impl From<std::io::Error> for AppError {
    fn from(e: std::io::Error) -> Self {
        AppError::Runtime(format!("i/o: {e}"))
    }
}

impl From<atomsense::CoreError> for AppError {
    fn from(e: atomsense::CoreError) -> Self {
        AppError::Runtime(e.to_string())
    }
}

/// Shared per-invocation context handed to every subcommand.
pub struct Ctx {
    pub out_dir: PathBuf,
    pub seed: u64,
    pub plot: bool,
    pub config_sha: String,
    pub verbose: bool,
}

impl Ctx {
    pub fn log(&self, msg: &str) {
        if self.verbose {
            eprintln!("[atomsense] {msg}");
        }
    }
}

#[derive(Parser)]
#[command(name = "atomsense", version, about = "Cold-atom accelerometer-gyroscope simulator")]
struct Cli {
    /// Path to a TOML configuration file (required by most subcommands)
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// RNG seed; overrides the seed in the configuration file
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Directory for output artifacts (created if missing; default "out")
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,

    /// Worker threads (results are identical for any value)
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Emit SVG plots (default)
    #[arg(long, global = true, overrides_with = "no_plot")]
    plot: bool,

    /// Skip SVG plots
    #[arg(long, global = true)]
    no_plot: bool,

    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a four-configuration static measurement campaign
    StaticRun {
        /// Override run.duration_s from the configuration file
        #[arg(long)]
        duration: Option<f64>,
    },
    /// Scan fringes under sinusoidal rotation drives and demodulate
    DynamicRun,
    /// Simulate Raman spectra and track launch velocity
    Velocimetry,
    /// Compute the Allan deviation of a column in an existing CSV
    Allan {
        /// Input CSV (first column must be time in seconds)
        #[arg(long)]
        input: PathBuf,
        /// Header name of the data column
        #[arg(long)]
        column: String,
        /// Output CSV path (default: <out-dir>/adev.csv)
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fuse a drifting classical sensor with periodic atomic updates
    Hybridize,
    /// Tabulate the closed-form systematic-error budget
    Budget,
}

fn run(cli: Cli) -> Result<(), AppError> {
    if let Some(t) = cli.threads {
        if t == 0 {
            return Err(AppError::Config("--threads must be at least 1".into()));
        }
    }
    let out_dir = cmds::prepare_out_dir(&cli.out_dir)?;
    let plot = !cli.no_plot;
    let verbose = std::env::var("ATOMSENSE_LOG")
        .map(|v| !v.is_empty() && v != "off")
        .unwrap_or(false);
    let mut ctx = Ctx {
        out_dir,
        seed: cli.seed.unwrap_or(0),
        plot,
        config_sha: String::new(),
        verbose,
    };

    match cli.cmd {
        Cmd::StaticRun { duration } => {
            let loaded = cmds::load_config::<config::StaticConfig>(&cli.config)?;
            ctx.config_sha = loaded.sha256;
            ctx.seed = cli.seed.unwrap_or(loaded.value.run.seed);
            cmds::static_run(&ctx, &loaded.value, duration)
        }
        Cmd::DynamicRun => {
            let loaded = cmds::load_config::<config::DynamicConfig>(&cli.config)?;
            ctx.config_sha = loaded.sha256;
            ctx.seed = cli.seed.unwrap_or(loaded.value.run.seed);
            cmds::dynamic_run(&ctx, &loaded.value)
        }
        Cmd::Velocimetry => {
            let loaded = cmds::load_config::<config::VelocimetryConfig>(&cli.config)?;
            ctx.config_sha = loaded.sha256;
            ctx.seed = cli.seed.unwrap_or(loaded.value.run.seed);
            cmds::velocimetry(&ctx, &loaded.value)
        }
        Cmd::Allan { input, column, out } => {
            let bytes = std::fs::read(&input)
                .map_err(|e| AppError::Config(format!("cannot read {}: {e}", input.display())))?;
            ctx.config_sha = config::sha256_hex(&bytes);
            let out = out.unwrap_or_else(|| ctx.out_dir.join("adev.csv"));
            cmds::allan_cmd(&ctx, &input, &column, &out)
        }
        Cmd::Hybridize => {
            let loaded = cmds::load_config::<config::HybridizeConfig>(&cli.config)?;
            ctx.config_sha = loaded.sha256;
            ctx.seed = cli.seed.unwrap_or(loaded.value.run.seed);
            cmds::hybridize(&ctx, &loaded.value)
        }
        Cmd::Budget => {
            let loaded = cmds::load_config::<config::BudgetConfig>(&cli.config)?;
            ctx.config_sha = loaded.sha256;
            cmds::budget(&ctx, &loaded.value)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e @ AppError::Config(_)) => {
            eprintln!("atomsense: {e}");
            ExitCode::from(2)
        }
        Err(e @ AppError::Runtime(_)) => {
            eprintln!("atomsense: {e}");
            ExitCode::from(3)
        }
    }
}
