use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use hermflow_cli::commands::{cmd_energy, cmd_generate, cmd_integrate, cmd_verify};
use hermflow_cli::config::RunConfig;
use hermflow_cli::error::CliError;

#[derive(Parser)]
#[command(
    name = "hermflow",
    version,
    about = "Fiberwise geometry of compatible metric / 2-form pairs: \
             generation, geodesic integration, verification, energy reports"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// Run configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Override the configured seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the configured output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct FieldArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Field file; defaults to `<output_dir>/field.json`.
    #[arg(long)]
    field: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a seeded field of compatible pairs and write field.json.
    Generate(CommonArgs),
    /// Integrate the geodesic flow over a field; write trajectory.csv and
    /// observables.csv.
    Integrate(FieldArgs),
    /// Run the invariant suite; write verify.json.
    Verify(CommonArgs),
    /// Compute global/per-point energies and criticality probes from
    /// emitted trajectories; write energy.json.
    Energy(FieldArgs),
}

fn effective_config(args: &CommonArgs) -> Result<RunConfig, CliError> {
    let mut config = RunConfig::load(&args.config)?;
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(out) = &args.out {
        config.output_dir = out.clone();
    }
    Ok(config)
}

fn field_path(config: &RunConfig, args: &FieldArgs) -> PathBuf {
    args.field
        .clone()
        .unwrap_or_else(|| config.output_dir.join("field.json"))
}

fn run() -> Result<(), CliError> {
    let cli = Cli::parse();
    match &cli.command {
        Command::Generate(args) => cmd_generate(&effective_config(args)?),
        Command::Integrate(args) => {
            let config = effective_config(&args.common)?;
            let field = field_path(&config, args);
            cmd_integrate(&config, &field)
        }
        Command::Verify(args) => cmd_verify(&effective_config(args)?),
        Command::Energy(args) => {
            let config = effective_config(&args.common)?;
            let field = field_path(&config, args);
            cmd_energy(&config, &field)
        }
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
