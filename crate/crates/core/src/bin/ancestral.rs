use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use ancestral_attention::pipeline::{
    run_folklore, run_index, run_model_solve, run_model_sweep, run_regress, run_reproduce,
    run_simulate, PipelineConfig, PipelineError, RunOutcome, EXIT_INPUT,
};

#[derive(Parser)]
#[command(name = "ancestral", version, about = "Ancestral climate variability and attention pipeline")]
struct Cli {
    /// TOML pipeline configuration (schema_version = 1).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,
    /// Worker threads for parallel stages.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Variability index from an anomaly file.
    Index {
        #[arg(long)]
        anomalies: Option<PathBuf>,
        #[arg(long)]
        links: Option<PathBuf>,
    },
    /// Attention model: point solutions or a theta sweep.
    #[command(subcommand)]
    Model(ModelCommand),
    /// Synthetic respondents and folklore counts.
    Simulate {
        #[arg(long)]
        groups: Option<PathBuf>,
    },
    /// Quadratic fit, margins and U-shape verdict.
    Regress {
        #[arg(long)]
        data: Option<PathBuf>,
        /// TOML file with the regression spec.
        #[arg(long)]
        spec: Option<PathBuf>,
    },
    /// Folklore motif scoring.
    #[command(subcommand)]
    Folklore(FolkloreCommand),
    /// Simulate, fit and test in one run.
    Reproduce {
        #[arg(long)]
        groups: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum ModelCommand {
    Solve {
        /// Repeatable; replaces the configured thetas.
        #[arg(long)]
        theta: Vec<f64>,
    },
    Sweep(SweepArgs),
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    theta_min: Option<f64>,
    #[arg(long)]
    theta_max: Option<f64>,
    #[arg(long)]
    points: Option<usize>,
}

#[derive(Subcommand)]
enum FolkloreCommand {
    Score {
        #[arg(long)]
        catalog: Option<PathBuf>,
        #[arg(long)]
        dictionary: Option<PathBuf>,
    },
}

fn set(slot: &mut Option<PathBuf>, flag: Option<PathBuf>) {
    if flag.is_some() {
        *slot = flag;
    }
}

fn dispatch(cli: Cli) -> Result<RunOutcome, PipelineError> {
    let mut cfg = match &cli.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| PipelineError::Input(format!("--threads: {e}")))?;
    }
    let out = cli.out_dir.as_path();
    match cli.command {
        Command::Index { anomalies, links } => {
            set(&mut cfg.inputs.anomalies, anomalies);
            set(&mut cfg.inputs.links, links);
            run_index(&cfg, out)
        }
        Command::Model(ModelCommand::Solve { theta }) => {
            if !theta.is_empty() {
                cfg.solve_thetas = theta;
            }
            run_model_solve(&cfg, out)
        }
        Command::Model(ModelCommand::Sweep(a)) => {
            cfg.sweep.theta_min = a.theta_min.unwrap_or(cfg.sweep.theta_min);
            cfg.sweep.theta_max = a.theta_max.unwrap_or(cfg.sweep.theta_max);
            cfg.sweep.points = a.points.unwrap_or(cfg.sweep.points);
            run_model_sweep(&cfg, out)
        }
        Command::Simulate { groups } => {
            set(&mut cfg.inputs.groups, groups);
            run_simulate(&cfg, out)
        }
        Command::Regress { data, spec } => {
            set(&mut cfg.inputs.data, data);
            if let Some(p) = spec {
                let text = std::fs::read_to_string(&p).map_err(|e| PipelineError::Io { path: p.clone(), source: e })?;
                cfg.regression = toml::from_str(&text)
                    .map_err(|e| PipelineError::Input(format!("{}: {e}", p.display())))?;
            }
            run_regress(&cfg, out)
        }
        Command::Folklore(FolkloreCommand::Score { catalog, dictionary }) => {
            set(&mut cfg.inputs.catalog, catalog);
            set(&mut cfg.inputs.dictionary, dictionary);
            run_folklore(&cfg, out)
        }
        Command::Reproduce { groups } => {
            set(&mut cfg.inputs.groups, groups);
            run_reproduce(&cfg, out)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_INPUT as u8 } else { 0 });
        }
    };
    match dispatch(cli) {
        Ok(outcome) => {
            println!("{}", outcome.summary);
            ExitCode::from(outcome.exit_code as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
