use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use eflab_cli::config::{parse_override, KEYS};
use eflab_cli::run::{resolve_out_root, run, OUT_DIR_ENV};
use eflab_cli::{CliError, Experiment, RunConfig};

#[derive(Parser)]
#[command(name = "eflab", version, about = "Decay and energy-method experiments for the linearized and full compressible flow system")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Dyadic partition: partition of unity, telescoping, disjointness
    LpInspect(Common),
    /// Random-field checks of the Besov inequalities
    Validate(Common),
    /// Whole-space linear decay rates by semigroup quadrature
    LinearDecay(Common),
    /// Box simulation of the nonlinear system, with checkpoint
    Simulate(Common),
    /// Box decay rates and time-weighted functionals
    DecayFit(Common),
    /// Shell energy functionals: coercivity and residuals
    Lyapunov(Common),
    /// Velocity enhancement and the Duhamel reconstruction
    DampedMode(Common),
    /// Matrix of linear decay runs
    Sweep(Common),
    /// List configuration keys and their defaults
    Keys,
}

#[derive(Args)]
struct Common {
    /// `key = value` configuration file
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed (overrides the file)
    #[arg(long)]
    seed: Option<u64>,
    /// Output root (default: $EFLAB_OUT_DIR, then ./eflab-runs)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for independent sub-experiments
    #[arg(long)]
    jobs: Option<usize>,
    /// Treat warnings as failures
    #[arg(long)]
    strict: bool,
    /// Override one key, e.g. `--set dt=0.1` (repeatable)
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Print the resolved configuration and its hash without running
    #[arg(long)]
    dry_run: bool,
}

fn launch(experiment: Experiment, args: Common) -> Result<ExitCode, CliError> {
    let mut overrides = args.set.iter().map(|s| parse_override(s)).collect::<Result<Vec<_>, _>>()?;
    if let Some(seed) = args.seed {
        overrides.push(("seed".into(), seed.to_string()));
    }
    let config = RunConfig::build(experiment, args.config.as_deref(), &overrides)?;
    if args.dry_run {
        print!("{}", config.canonical());
        println!("hash={}", config.hash());
        return Ok(ExitCode::SUCCESS);
    }
    let root = resolve_out_root(args.out);
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = args.jobs {
        pool = pool.num_threads(n.max(1));
    }
    let pool = pool
        .build()
        .map_err(|e| CliError::Config(format!("cannot start {} workers: {e}", args.jobs.unwrap_or(0))))?;
    let record = pool.install(|| run(&config, &root))?;
    let summary = std::fs::read_to_string(record.directory.join(eflab_cli::run::SUMMARY_FILE))?;
    print!("{summary}");
    println!("run directory: {}", record.directory.display());
    Ok(if record.passed(args.strict) {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (experiment, args) = match cli.command {
        Command::LpInspect(a) => (Experiment::LpInspect, a),
        Command::Validate(a) => (Experiment::Validate, a),
        Command::LinearDecay(a) => (Experiment::LinearDecay, a),
        Command::Simulate(a) => (Experiment::Simulate, a),
        Command::DecayFit(a) => (Experiment::DecayFit, a),
        Command::Lyapunov(a) => (Experiment::Lyapunov, a),
        Command::DampedMode(a) => (Experiment::DampedMode, a),
        Command::Sweep(a) => (Experiment::Sweep, a),
        Command::Keys => {
            for (k, v, doc) in KEYS {
                println!("{k:<18} {:<18} {doc}", if v.is_empty() { "(empty)" } else { v });
            }
            println!("output root override: {OUT_DIR_ENV}");
            return ExitCode::SUCCESS;
        }
    };
    match launch(experiment, args) {
        Ok(code) => code,
        Err(e) => {
            let record = serde_json::json!({"error": e.kind(), "message": e.to_string()});
            eprintln!("{record}");
            ExitCode::from(2)
        }
    }
}
