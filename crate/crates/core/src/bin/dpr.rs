use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use dpr_core::harness::{exit_code, run, ExperimentConfig, Kind, Overrides};

#[derive(Parser)]
#[command(name = "dpr", version = dpr_core::harness::VERSION, about = "Phase retrieval under generative priors")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Restarted subgradient descent on one sampled instance.
    Solve(Common),
    /// Success rate versus number of measurements.
    Sweep(Common),
    /// Loss surfaces on a grid (k = 2) and critical points of F.
    Landscape(Common),
    /// Weight distribution condition deviations per layer.
    VerifyWdc(Common),
    /// Range-restricted concentration, angle distortion and v-versus-h deviations.
    VerifyRrcp(Common),
    /// Sign-pattern counts of random hyperplane arrangements.
    Tessellate(Common),
    /// Generative prior versus sparse baseline.
    Compare(Common),
}

#[derive(Args)]
struct Common {
    /// JSON experiment configuration.
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (default: out).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    workers: Option<usize>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (kind, args) = match cli.command {
        Command::Solve(a) => (Kind::Solve, a),
        Command::Sweep(a) => (Kind::Sweep, a),
        Command::Landscape(a) => (Kind::Landscape, a),
        Command::VerifyWdc(a) => (Kind::VerifyWdc, a),
        Command::VerifyRrcp(a) => (Kind::VerifyRrcp, a),
        Command::Tessellate(a) => (Kind::Tessellate, a),
        Command::Compare(a) => (Kind::Compare, a),
    };
    let overrides = Overrides {
        kind: Some(kind),
        seed: args.seed,
        output: args.out,
    };
    let result = ExperimentConfig::load(&args.config).and_then(|c| {
        let config = c.apply(&overrides);
        let mut pool = rayon::ThreadPoolBuilder::new();
        if let Some(w) = args.workers {
            if w == 0 {
                return Err(dpr_core::Error::InvalidConfig("workers must be >= 1".into()));
            }
            pool = pool.num_threads(w);
        }
        let pool = pool
            .build()
            .map_err(|e| dpr_core::Error::InvalidConfig(e.to_string()))?;
        pool.install(|| run(&config))
    });
    match result {
        Ok(summary) => {
            println!("{}", summary.line);
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
