//! Command-line front end: scene assembly and export, load optimization,
//! reradiation patterns, and algorithm comparisons, all driven by one TOML
//! configuration file.
//!
//! Exit codes: 0 success, 2 configuration error, 3 numerical error,
//! 4 guard refusal.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod commands;
mod config;
mod outputs;

use config::RunConfig;
use outputs::OutputContext;

#[derive(Parser)]
#[command(
    name = "ris",
    about = "Multiport network modeling and load optimization for RIS-aided channels"
)]
struct Cli {
    /// Path to the TOML run configuration.
    #[arg(long, global = true, default_value = "ris.toml", env = "RIS_CONFIG")]
    config: PathBuf,
    /// Output directory (overrides output.dir).
    #[arg(long, global = true, env = "RIS_OUT")]
    out: Option<PathBuf>,
    /// Seed override (overrides output.seed).
    #[arg(long, global = true, env = "RIS_SEED")]
    seed: Option<u64>,
    /// Normalize pattern dB columns to the sweep peak.
    #[arg(long, global = true)]
    normalize: bool,
    /// Worker threads for sweeps and matrix assembly (0 = all cores).
    #[arg(long, global = true, default_value_t = 0, env = "RIS_JOBS")]
    jobs: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Assemble the scene and export the Z and S matrices.
    Scene,
    /// Run the configured optimizer; write loads, trace, and summary.
    Optimize {
        /// Optimize an imported matrix file (either representation)
        /// instead of assembling the configured scene.
        #[arg(long)]
        from_matrix: Option<PathBuf>,
    },
    /// Sweep a probe receiver and write the reradiation pattern.
    Pattern {
        /// Loads CSV from `optimize`, or the literal `homogeneous` for
        /// reference-impedance loads.
        #[arg(long, default_value = "homogeneous")]
        loads: PathBuf,
    },
    /// Run the configured algorithm set on one scene and tabulate.
    Compare,
}

/// Maps error chains onto the documented exit codes.
fn exit_code_for(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<ris_core::optimizer::OptimizeError>() {
            return match e {
                ris_core::optimizer::OptimizeError::GuardRefusal(_) => 4,
                ris_core::optimizer::OptimizeError::InvalidParams(_) => 2,
                _ => 3,
            };
        }
        if cause
            .downcast_ref::<ris_core::network::NetworkError>()
            .is_some()
            || cause
                .downcast_ref::<ris_core::em_scene::GeometryError>()
                .is_some()
            || cause
                .downcast_ref::<ris_core::multipath::MultipathError>()
                .is_some()
            || cause
                .downcast_ref::<ris_core::pattern::PatternError>()
                .is_some()
            || cause
                .downcast_ref::<ris_core::io::MatrixFileError>()
                .is_some()
        {
            return 3;
        }
    }
    2
}

fn run(cli: &Cli) -> anyhow::Result<()> {
    if cli.jobs > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cli.jobs)
            .build_global()
            .ok();
    }
    let text = std::fs::read_to_string(&cli.config)
        .map_err(|e| anyhow::anyhow!("reading config {}: {e}", cli.config.display()))?;
    let mut cfg = RunConfig::from_toml(&text)?;
    if cli.normalize {
        cfg.output.normalize = true;
    }
    let seed = cli.seed.unwrap_or(cfg.output.seed);
    let dir = cli
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from(&cfg.output.dir));
    let ctx = OutputContext::new(&dir, &text, seed, cfg.output.timestamps);

    match &cli.command {
        Command::Scene => commands::cmd_scene(&cfg, &ctx),
        Command::Optimize { from_matrix } => match from_matrix {
            Some(path) => commands::cmd_optimize_from_matrix(&cfg, &ctx, path),
            None => commands::cmd_optimize(&cfg, &ctx),
        },
        Command::Pattern { loads } => commands::cmd_pattern(&cfg, &ctx, loads),
        Command::Compare => commands::cmd_compare(&cfg, &ctx),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code_for(&err))
        }
    }
}
