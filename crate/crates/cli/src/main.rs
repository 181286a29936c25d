use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use envyfree_core::harness::{run_and_emit, Experiment, ExperimentConfig, MixtureMode};
use envyfree_core::lowerbound::StrategyKind;
use envyfree_core::Error;

/// Envy-free classification experiments.
#[derive(Debug, Parser)]
#[command(name = "envyfree", version)]
struct Args {
    /// erm, lowerbound, mixture-gen, natarajan, example1 or extension-check.
    experiment: String,
    /// JSON config; flags below override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory for results.csv, manifest.json and charts.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Grid dimension for lowerbound.
    #[arg(long)]
    q: Option<usize>,
    /// Lipschitz constant for lowerbound.
    #[arg(long = "L")]
    lipschitz: Option<f64>,
    /// Number of consecutive seeds for lowerbound.
    #[arg(long)]
    seeds: Option<u64>,
    /// Extension strategy for lowerbound: nn or constant.
    #[arg(long)]
    strategy: Option<String>,
    /// mixture-gen mode: sweep or finite-class.
    #[arg(long)]
    mode: Option<String>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    /// Skip SVG charts.
    #[arg(long)]
    no_plots: bool,
}

fn build_config(args: &Args) -> Result<ExperimentConfig, Error> {
    let experiment: Experiment = args.experiment.parse()?;
    let mut config = match &args.config {
        Some(path) => ExperimentConfig::read(path)?,
        None => ExperimentConfig::default(),
    };
    config.experiment = experiment;
    if let Some(v) = args.seed {
        config.seed = v;
    }
    if let Some(v) = &args.out {
        config.out_dir = v.clone();
    }
    if let Some(v) = args.q {
        config.q = v;
    }
    if let Some(v) = args.lipschitz {
        config.lipschitz = v;
    }
    if let Some(v) = args.seeds {
        config.seeds = v;
    }
    if let Some(v) = &args.strategy {
        config.strategy = v.parse::<StrategyKind>()?;
    }
    if let Some(v) = &args.mode {
        config.mode = match v.as_str() {
            "sweep" => MixtureMode::Sweep,
            "finite-class" => MixtureMode::FiniteClass,
            other => {
                return Err(Error::Config(format!(
                    "unknown mode `{other}` (expected sweep or finite-class)"
                )))
            }
        };
    }
    if let Some(v) = args.gamma {
        config.gamma = v;
    }
    if let Some(v) = args.delta {
        config.delta = v;
    }
    if let Some(v) = args.beta {
        config.beta = v;
    }
    if args.no_plots {
        config.plots = false;
    }
    Ok(config)
}

fn main() -> ExitCode {
    let args = Args::parse();
    let result = build_config(&args).and_then(|config| run_and_emit(&config));
    match result {
        Ok((manifest, files)) => {
            for (key, value) in &manifest.summary {
                println!("{key}: {value}");
            }
            for f in files {
                println!("wrote {}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("envyfree: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
