use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use dicke::config::{ExperimentKind, ExperimentSpec, SCHEMA_VERSION};
use dicke::runner::{run_file, run_spec, RunOptions};

#[derive(Parser)]
#[command(name = "dicke", version, about = "Dipole-coupled two-level atoms near the Dicke limit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON experiment spec.
    #[arg(long)]
    spec: Option<PathBuf>,
    /// Output directory (overrides the experiment file).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Base seed (overrides the experiment file).
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Coupling coefficients over a separation range.
    Coupling(Common),
    /// Master-equation populations.
    Evolve(Common),
    /// Quantum-trajectory photon statistics.
    Trajectories(Common),
    /// Mixing versus emission timescales.
    Timescales(Common),
    /// Acceptance suite; the experiment file is optional.
    Validate {
        #[command(flatten)]
        common: Common,
        /// Only these criteria.
        #[arg(long, value_delimiter = ',')]
        criteria: Option<Vec<u32>>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (kind, common, criteria) = match cli.command {
        Command::Coupling(c) => (ExperimentKind::CouplingScan, c, None),
        Command::Evolve(c) => (ExperimentKind::Evolve, c, None),
        Command::Trajectories(c) => (ExperimentKind::Trajectories, c, None),
        Command::Timescales(c) => (ExperimentKind::Timescales, c, None),
        Command::Validate { common, criteria } => (ExperimentKind::Validate, common, criteria),
    };
    let opts = RunOptions {
        out: common.out,
        seed: common.seed,
        threads: common.threads,
    };
    let result = match (&common.spec, kind) {
        (None, ExperimentKind::Validate) => {
            let mut spec = ExperimentSpec {
                schema_version: SCHEMA_VERSION.into(),
                experiment: ExperimentKind::Validate,
                geometry: None,
                coupling: Default::default(),
                numerics: Default::default(),
                output: Default::default(),
            };
            spec.numerics.criteria = criteria;
            run_spec(spec, &opts)
        }
        (None, _) => {
            eprintln!("error: --spec is required for `{}`", kind.name());
            return ExitCode::from(1);
        }
        (Some(path), _) if criteria.is_some() => ExperimentSpec::load(path).and_then(|(mut spec, _)| {
            spec.numerics.criteria = criteria;
            run_spec(spec, &opts)
        }),
        (Some(path), _) => run_file(path, Some(kind), &opts),
    };
    match result {
        Ok(report) => {
            println!(
                "{}: {} files listed in manifest.json ({:.2} s)",
                report.manifest.experiment,
                report.manifest.files.len(),
                report.manifest.wall_time_s
            );
            ExitCode::from(report.status.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
