use std::path::PathBuf;
use std::process::ExitCode;

use advcert_cli::commands::{self, HullParams, Outcome, Run};
use advcert_cli::config::{DataSource, RunConfig, Task};
use advcert_cli::error::{usage, CliError, CliResult};
use advcert_cli::output::csv_path;
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "advcert", version, about = "Adversarial risk certificates for band predictors")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Run configuration (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Dataset CSV overriding the configured data source.
    #[arg(long, global = true)]
    data: Option<PathBuf>,
    /// Output JSON path; CSV tables go next to it. Defaults to stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed overriding the configured one.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, short, global = true)]
    verbose: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Train a band predictor.
    Train,
    /// Train, compute the adversarial complexity and certify the risk.
    Certify,
    /// Certificates for the trained predictor as the regions are scaled.
    SweepLambda,
    /// Out-of-distribution bound over a grid of radii.
    Ood,
    /// Convex-hull demo on the unit disk with two mass-shift constructions.
    HullDemo(HullArgs),
    /// Certify, then estimate the risk on fresh data.
    Validate,
}

#[derive(Args)]
struct HullArgs {
    #[arg(long, default_value_t = 500)]
    n: usize,
    #[arg(long, default_value_t = 1e-3)]
    mu: f64,
    /// Number of radii.
    #[arg(long, default_value_t = 30)]
    h: usize,
    /// Radius spacing (default 2 mu).
    #[arg(long)]
    step: Option<f64>,
    /// Total confidence budget over the grid.
    #[arg(long, default_value_t = 1e-3)]
    delta: f64,
    #[arg(long, default_value_t = 100_000)]
    mc_samples: usize,
}

fn load_config(cli: &Cli, task: Task) -> CliResult<RunConfig> {
    let Some(path) = &cli.config else {
        return usage(format!("{} needs --config", task.name()));
    };
    let mut cfg = RunConfig::load(path)?;
    if let Some(t) = cfg.task {
        if t != task {
            return usage(format!("config is for task {}, not {}", t.name(), task.name()));
        }
    }
    if let Some(d) = &cli.data {
        cfg.data = DataSource::Csv { path: d.clone() };
    }
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn emit(out: Option<PathBuf>, o: Outcome) -> CliResult<()> {
    match out {
        Some(path) => {
            std::fs::write(&path, &o.json).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
            if let Some((header, rows)) = &o.csv {
                advcert_cli::output::write_csv(&csv_path(&path), header, rows)?;
            }
            println!("{}", o.summary);
        }
        None => {
            print!("{}", o.json);
            eprintln!("{}", o.summary);
        }
    }
    Ok(())
}

fn run(cli: Cli) -> CliResult<()> {
    let task = match &cli.command {
        Command::HullDemo(a) => {
            let params = HullParams {
                n: a.n,
                mu: a.mu,
                h: a.h,
                step: a.step.unwrap_or(2.0 * a.mu),
                delta: a.delta,
                mc_samples: a.mc_samples,
                seed: cli.seed.unwrap_or(0),
            };
            let o = commands::run_hull(&params)?;
            return emit(cli.out.clone(), o);
        }
        Command::Train => Task::Train,
        Command::Certify => Task::Certify,
        Command::SweepLambda => Task::SweepLambda,
        Command::Ood => Task::Ood,
        Command::Validate => Task::Validate,
    };
    let cfg = load_config(&cli, task)?;
    let out = commands::resolve_out(cli.out.clone(), Some(&cfg));
    let run = Run::new(cfg)?;
    if cli.verbose {
        eprintln!("N={} config_hash={}", run.data.len(), run.hash);
    }
    let o = match task {
        Task::Train => commands::run_train(&run)?,
        Task::Certify => commands::run_certify(&run)?,
        Task::SweepLambda => commands::run_sweep(&run)?,
        Task::Ood => commands::run_ood(&run)?,
        Task::Validate => commands::run_validate(&run)?,
    };
    emit(out, o)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("advcert: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
