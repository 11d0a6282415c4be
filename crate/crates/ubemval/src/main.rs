use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ubemval::commands;
use ubemval::{CliError, RunConfig};
use ubemval_core::harness::Method;

/// Estimate building-energy model validation errors from incomplete
/// measured load data.
///
/// Settings come from built-in defaults, then the `--config` file, then
/// flags; later sources win. Exit codes: 0 success, 2 configuration error,
/// 3 data error, 4 internal or output error.
#[derive(Debug, Parser)]
#[command(name = "ubemval", version)]
struct Cli {
    /// TOML configuration, or a report.json of an earlier experiment.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Master seed; overrides every seed in the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; 0 uses one per core. Results do not depend on it.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Log more (-v info, -vv debug). RUST_LOG takes precedence.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Out {
    /// Output directory.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct DataOut {
    /// Dataset directory.
    #[arg(long, value_name = "DIR")]
    data: Option<PathBuf>,
    #[command(flatten)]
    out: Out,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic district dataset.
    Synth(Out),
    /// Flag outliers, quantised stretches and malfunctions in a dataset.
    Clean(DataOut),
    /// Rank daily features by mutual information with the daily GOF.
    Sensitivity(DataOut),
    /// Run the masking experiment and write summary, records and report.
    Experiment {
        #[command(flatten)]
        io: DataOut,
        /// Repetitions per substation and ratio.
        #[arg(long)]
        repetitions: Option<usize>,
        /// Comma-separated missing-data ratios.
        #[arg(long, value_delimiter = ',')]
        ratios: Option<Vec<f64>>,
        /// Comma-separated methods: unadjusted, imputation, cell, rake.
        #[arg(long, value_delimiter = ',')]
        methods: Option<Vec<String>>,
    },
    /// Recompute summary.csv and tolerable.csv from a run's records.csv.
    Report {
        /// Directory of a finished experiment.
        #[arg(long, value_name = "DIR")]
        run: PathBuf,
        /// Where to write; defaults to the run directory.
        #[arg(long, value_name = "DIR")]
        out: Option<PathBuf>,
    },
}

fn resolve(cli: &Cli) -> Result<RunConfig, CliError> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if cli.seed.is_some() {
        cfg.seed = cli.seed;
    }
    if let Some(jobs) = cli.jobs {
        cfg.jobs = jobs;
    }
    let mut set_io = |data: Option<&PathBuf>, out: Option<&PathBuf>| {
        if let Some(d) = data {
            cfg.data = Some(d.clone());
        }
        if let Some(o) = out {
            cfg.out = Some(o.clone());
        }
    };
    match &cli.command {
        Command::Synth(o) => set_io(None, o.out.as_ref()),
        Command::Clean(io) | Command::Sensitivity(io) => set_io(io.data.as_ref(), io.out.out.as_ref()),
        Command::Experiment { io, .. } => set_io(io.data.as_ref(), io.out.out.as_ref()),
        Command::Report { .. } => {}
    }
    if let Command::Experiment {
        repetitions,
        ratios,
        methods,
        ..
    } = &cli.command
    {
        if let Some(r) = repetitions {
            cfg.experiment.repetitions = *r;
        }
        if let Some(r) = ratios {
            cfg.experiment.ratios = r.clone();
        }
        if let Some(m) = methods {
            cfg.experiment.methods = m
                .iter()
                .map(|s| s.trim().parse::<Method>())
                .collect::<Result<_, _>>()
                .map_err(|e| CliError::Config(format!("--methods: {e}")))?;
        }
    }
    cfg.apply_seed();
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Command::Report { run, out } = &cli.command {
        return commands::report(run, out.as_deref());
    }
    let cfg = resolve(&cli)?;
    match cli.command {
        Command::Synth(_) => commands::synth(&cfg),
        Command::Clean(_) => commands::clean(&cfg),
        Command::Sensitivity(_) => commands::sensitivity_cmd(&cfg),
        Command::Experiment { .. } => commands::experiment(&cfg),
        Command::Report { .. } => unreachable!("handled above"),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("ubemval: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
