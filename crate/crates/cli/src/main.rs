//! `sensalloc` command-line front end.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use sensalloc::data::load_dataset;
use sensalloc::{
    generate_synthetic, run_experiment, run_sweep, Dataset, Error, ExperimentReport, Result, RunConfig, SweepConfig,
    SyntheticConfig,
};

#[derive(Parser)]
#[command(name = "sensalloc", version, about = "Quality/cost-aware task allocation simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one configuration and write report.csv, weights.csv and traces.json.
    Simulate(RunArgs),
    /// Run a grid of configurations and write the pivoted epsilon/phi tables as well.
    Sweep(RunArgs),
    /// Write a synthetic dataset (measurements.csv + stations.csv).
    Generate {
        /// Synthetic generator settings (JSON); defaults apply when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Check a run/sweep config and, optionally, a dataset against it.
    Validate {
        #[arg(long)]
        config: Option<PathBuf>,
        #[command(flatten)]
        data: DataArgs,
    },
}

#[derive(Args)]
struct DataArgs {
    /// Measurements CSV, or a directory holding measurements.csv and stations.csv.
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// Stations CSV (defaults to stations.csv next to the measurements).
    #[arg(long)]
    stations: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[command(flatten)]
    data: DataArgs,
    #[arg(long)]
    out: PathBuf,
    /// Overrides the seed in the config file.
    #[arg(long)]
    seed: Option<u64>,
    /// Repeats per configuration (simulate defaults to 1; sweep to the file's value).
    #[arg(long)]
    repeats: Option<usize>,
    /// Use the travel-only reward in value iteration.
    #[arg(long)]
    literal_bellman: bool,
}

impl DataArgs {
    fn paths(&self) -> Option<(PathBuf, PathBuf)> {
        let ds = self.dataset.as_ref()?;
        let (meas, dir) = if ds.is_dir() {
            (ds.join("measurements.csv"), ds.clone())
        } else {
            (ds.clone(), ds.parent().map(Path::to_path_buf).unwrap_or_default())
        };
        let stations = self.stations.clone().unwrap_or_else(|| dir.join("stations.csv"));
        Some((meas, stations))
    }

    fn load(&self) -> Result<Option<Dataset>> {
        let Some((meas, stations)) = self.paths() else {
            return Ok(None);
        };
        let (ds, report) = load_dataset(&meas, &stations)?;
        if report.duplicate_rows > 0 || report.filled_entries > 0 {
            log::warn!(
                "ingestion: {} duplicate rows (last kept), {} entries interpolated",
                report.duplicate_rows,
                report.filled_entries
            );
        }
        log::info!("loaded {} cells, {} attributes, {} cycles", ds.cells(), ds.attributes(), ds.cycles());
        Ok(Some(ds))
    }

    fn require(&self) -> Result<Dataset> {
        self.load()?.ok_or_else(|| Error::Config("--dataset is required".into()))
    }
}

fn print_summary(report: &ExperimentReport) {
    for r in report.rows() {
        println!(
            "{:<7} {:<4} P={:<3} A={} eps={:.6} (sd {:.6}) phi_km={:.3} (sd {:.3})",
            r.scheme, r.inference, r.participants, r.attributes, r.epsilon, r.epsilon_sd, r.phi_km, r.phi_sd
        );
    }
}

fn simulate(args: &RunArgs) -> Result<()> {
    let mut cfg = RunConfig::from_path(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    cfg.hyperparameters.literal_bellman |= args.literal_bellman;
    let dataset = args.data.require()?;
    let result = run_experiment(&cfg, &dataset, args.repeats.unwrap_or(1))?;
    let report = ExperimentReport { results: vec![result] };
    report.write_dir(&args.out, false)?;
    print_summary(&report);
    Ok(())
}

fn sweep(args: &RunArgs) -> Result<()> {
    let mut sweep = SweepConfig::from_path(&args.config)?;
    if let Some(seed) = args.seed {
        sweep.seed = seed;
    }
    if let Some(r) = args.repeats {
        sweep.repeats = r;
    }
    sweep.hyperparameters.literal_bellman |= args.literal_bellman;
    let dataset = args.data.require()?;
    let report = run_sweep(&sweep, &dataset)?;
    report.write_dir(&args.out, true)?;
    print_summary(&report);
    Ok(())
}

fn generate(config: Option<&Path>, out: &Path, seed: Option<u64>) -> Result<()> {
    let mut cfg = match config {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| Error::Config(format!("{}: {e}", p.display())))?;
            serde_json::from_str::<SyntheticConfig>(&text)?
        }
        None => SyntheticConfig::default(),
    };
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    let ds = generate_synthetic(&cfg)?;
    ds.write_csv(out)?;
    println!("wrote {} cells x {} attributes x {} cycles to {}", ds.cells(), ds.attributes(), ds.cycles(), out.display());
    Ok(())
}

fn validate(config: Option<&Path>, data: &DataArgs) -> Result<()> {
    let dataset = data.load()?;
    if let Some(ds) = &dataset {
        println!("dataset ok: {} cells, {} attributes, {} cycles", ds.cells(), ds.attributes(), ds.cycles());
    }
    let Some(path) = config else {
        if dataset.is_none() {
            return Err(Error::Config("nothing to validate: pass --config and/or --dataset".into()));
        }
        return Ok(());
    };
    let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    let value: serde_json::Value = serde_json::from_str(&text)?;
    let configs = if value.get("scheme").is_some() {
        vec![RunConfig::from_json_str(&text)?]
    } else {
        serde_json::from_value::<SweepConfig>(value)?.configs()
    };
    for cfg in &configs {
        cfg.hyperparameters.validate()?;
        if let Some(ds) = &dataset {
            cfg.validate(ds.cells(), ds.attributes(), ds.cycles())?;
        }
    }
    println!("config ok: {} run configuration(s)", configs.len());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Simulate(args) => simulate(args),
        Command::Sweep(args) => sweep(args),
        Command::Generate { config, out, seed } => generate(config.as_deref(), out, *seed),
        Command::Validate { config, data } => validate(config.as_deref(), data),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
