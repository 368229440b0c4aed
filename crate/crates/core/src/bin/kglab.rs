use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use kglab::config::Config;
use kglab::pipeline::{Pipeline, Stage};
use kglab::{KgError, Result};

#[derive(Parser)]
#[command(name = "kglab", version, about = "Stable-manifold toolkit for the Klein-Gordon soliton")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML config, or a manifest.json from an earlier run.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Exit with status 5 if any acceptance gate fails.
    #[arg(long, global = true)]
    check: bool,
    /// Worker threads.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Output directory; falls back to $KGLAB_OUTPUT, then the config, then ./kglab_out.
    #[arg(long, global = true)]
    output: Option<PathBuf>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Discrete spectrum of the linearized operator.
    Spectrum,
    /// Transmission/reflection coefficients and the genericity verdict.
    Scattering,
    /// Isometry and projection checks of the distorted Fourier transform.
    DftCheck,
    /// Decay of the free linear flow.
    LinearDecay,
    /// Bisection for data on the stable manifold.
    Shoot,
    /// Long run from the shot data.
    Evolve,
    /// Decay exponents, integrated functionals and the bootstrap norm.
    DecayReport,
    /// All stages in order.
    Pipeline,
}

impl Command {
    fn stages(self) -> Vec<Stage> {
        match self {
            Command::Spectrum => vec![Stage::Spectrum],
            Command::Scattering => vec![Stage::Scattering],
            Command::DftCheck => vec![Stage::DftCheck],
            Command::LinearDecay => vec![Stage::LinearDecay],
            Command::Shoot => vec![Stage::Shoot],
            Command::Evolve => vec![Stage::Evolve],
            Command::DecayReport => vec![Stage::DecayReport],
            Command::Pipeline => Stage::ALL.to_vec(),
        }
    }
}

fn report(p: &Pipeline) {
    for g in p.gates() {
        let tag = if g.pass { "PASS" } else { "FAIL" };
        println!("{tag} {}.{} = {:.6e} ({})", g.stage, g.name, g.value, g.bound);
    }
}

fn run(cli: &Cli) -> Result<()> {
    if let Some(n) = cli.jobs {
        if n == 0 {
            return Err(KgError::Config("--jobs must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| KgError::Config(e.to_string()))?;
    }
    let cfg = match &cli.config {
        Some(path) => Config::load(path)?,
        None => Config::default(),
    };
    let out = cli
        .output
        .clone()
        .or_else(|| std::env::var_os("KGLAB_OUTPUT").map(PathBuf::from))
        .or_else(|| cfg.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("kglab_out"));
    let stages = cli.command.stages();
    let mut p = Pipeline::new(cfg, &out)?;
    let mut outcome = Ok(());
    for s in stages {
        if let Err(e) = p.run(s) {
            outcome = Err(e);
            break;
        }
    }
    report(&p);
    outcome?;
    if cli.check && !p.failed_gates().is_empty() {
        let failed: Vec<String> = p.failed_gates().iter().map(|g| format!("{}.{}", g.stage, g.name)).collect();
        return Err(KgError::Threshold(failed.join(", ")));
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
