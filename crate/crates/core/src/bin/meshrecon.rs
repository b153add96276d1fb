use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use meshrecon::bench::run_campaign;
use meshrecon::config::{parse_config, ExperimentConfig, Preset};
use meshrecon::io::{model_from_json, model_to_json, read_text, records_from_json, records_to_json, write_text};
use meshrecon::model::random_model;
use meshrecon::random::substream;
use meshrecon::report::write_outputs;
use meshrecon::tomography::simulate_plan;
use meshrecon::{plan_measurements, reconstruct, Error, TomographyMode};

#[derive(Parser)]
#[command(name = "meshrecon", version, about = "Interferometer model reconstruction benchmarks")]
struct Cli {
    /// Worker threads (0 = one per core).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a benchmark campaign and write report.csv, report.json,
    /// timing.csv and plotdata/.
    Run {
        /// JSON experiment config.
        #[arg(long, conflicts_with = "preset")]
        config: Option<PathBuf>,
        #[arg(long)]
        preset: Option<Preset>,
        /// Overrides the config seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides the config output directory.
        #[arg(long)]
        output_dir: Option<PathBuf>,
    },
    /// Draw a device and simulate its tomography; writes model.json and
    /// records.json.
    Simulate {
        #[arg(long, default_value_t = 10)]
        modes: usize,
        #[arg(long, default_value_t = 10)]
        depth: usize,
        /// Block size M (defaults to the mode count).
        #[arg(long)]
        block_size: Option<usize>,
        #[arg(long, default_value = "intensity")]
        mode: TomographyMode,
        #[arg(long, default_value_t = 0.1)]
        gamma: f64,
        #[arg(long, default_value_t = 0.0)]
        epsilon: f64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value = ".")]
        output_dir: PathBuf,
    },
    /// Reconstruct a model from a record batch.
    Reconstruct {
        #[arg(long)]
        records: PathBuf,
        /// Where to write the estimated model.
        #[arg(long)]
        output: PathBuf,
        /// Optional true model; prints the transmission error against it.
        #[arg(long)]
        truth: Option<PathBuf>,
    },
}

enum Failure {
    Validation(String),
    ExcessiveFailures,
    Unexpected(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Validation { .. } => Failure::Validation(e.to_string()),
            other => Failure::Unexpected(other.to_string()),
        }
    }
}

fn load_config(config: Option<&Path>, preset: Option<Preset>) -> Result<ExperimentConfig, Failure> {
    match (config, preset) {
        (Some(path), _) => {
            let text = read_text(path).map_err(|e| Failure::Validation(e.to_string()))?;
            Ok(parse_config(&text)?)
        }
        (None, Some(preset)) => Ok(preset.config()),
        (None, None) => Ok(ExperimentConfig::default()),
    }
}

fn run(
    config: Option<&Path>,
    preset: Option<Preset>,
    seed: Option<u64>,
    output_dir: Option<PathBuf>,
) -> Result<(), Failure> {
    let mut config = load_config(config, preset)?;
    if let Some(seed) = seed {
        config.seed = seed;
    }
    if let Some(dir) = output_dir {
        config.output_dir = dir;
    }
    config.validate()?;
    let spec = config.campaign();
    eprintln!(
        "running {} grid points x {} trials ({} fidelity samples, seed {})",
        spec.points.len(),
        spec.trials,
        spec.fidelity_samples,
        spec.seed
    );
    let report = run_campaign(&spec)?;
    write_outputs(&config, &report, &config.output_dir)?;
    for p in report.points.iter().filter(|p| p.failures > 0) {
        eprintln!(
            "N={} K={} M={} epsilon={:e} {}: {}/{} trials failed",
            p.point.modes, p.point.depth, p.point.block_size, p.point.epsilon, p.point.mode, p.failures, p.trials
        );
    }
    eprintln!("wrote {}", config.output_dir.display());
    if report.any_point_failed() {
        return Err(Failure::ExcessiveFailures);
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn simulate(
    modes: usize,
    depth: usize,
    block_size: Option<usize>,
    mode: TomographyMode,
    gamma: f64,
    epsilon: f64,
    seed: u64,
    output_dir: &Path,
) -> Result<(), Failure> {
    let plan = plan_measurements(modes, depth, block_size.unwrap_or(modes), mode)?;
    let model = random_model(modes, depth, gamma, &mut substream(seed, 0))?;
    let noise_seed = seed.wrapping_add(1);
    let records = simulate_plan(&model, &plan, epsilon, noise_seed)?;
    std::fs::create_dir_all(output_dir).map_err(|e| Failure::Unexpected(e.to_string()))?;
    write_text(&output_dir.join("model.json"), &model_to_json(&model))?;
    write_text(&output_dir.join("records.json"), &records_to_json(&records, depth, noise_seed))?;
    eprintln!("wrote {} records to {}", records.len(), output_dir.display());
    Ok(())
}

fn reconstruct_file(records: &Path, output: &Path, truth: Option<&Path>) -> Result<(), Failure> {
    let (records, depth) = records_from_json(&read_text(records)?)?;
    let first = records.first().ok_or_else(|| Failure::Validation("record batch is empty".into()))?;
    let modes = first.measured.nrows();
    let block_size = records.iter().map(|r| r.configuration.active_modes.len()).max().unwrap_or(0);
    let plan = plan_measurements(modes, depth, block_size.max(1).min(modes), first.mode)?;
    let result = reconstruct(&records, &plan)?;
    write_text(output, &model_to_json(&result.model_estimate))?;
    if let Some(truth) = truth {
        let truth = model_from_json(&read_text(truth)?)?;
        let dt = meshrecon::bench::delta_t_max(&truth, &result.model_estimate)?;
        println!("delta_t_max {dt:e}");
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build() {
        Ok(pool) => pool,
        Err(e) => {
            eprintln!("error: cannot start worker pool: {e}");
            return ExitCode::from(1);
        }
    };
    let outcome = pool.install(|| match cli.command {
        Command::Run { config, preset, seed, output_dir } => run(config.as_deref(), preset, seed, output_dir),
        Command::Simulate { modes, depth, block_size, mode, gamma, epsilon, seed, output_dir } => {
            simulate(modes, depth, block_size, mode, gamma, epsilon, seed, &output_dir)
        }
        Command::Reconstruct { records, output, truth } => reconstruct_file(&records, &output, truth.as_deref()),
    });
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Validation(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::ExcessiveFailures) => {
            eprintln!("error: more than half of the trials failed at some grid point");
            ExitCode::from(3)
        }
        Err(Failure::Unexpected(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
