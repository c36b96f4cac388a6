use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use dampwave::io::{run, Experiment, ProfileConfig, RunConfig};
use dampwave::solver::SolverConfig;
use dampwave::spectral::BasisDescriptor;

/// Environment variable holding the worker thread count.
const THREADS_ENV: &str = "DAMPWAVE_THREADS";

#[derive(Parser)]
#[command(name = "dampwave", version, about = "Spectral-Galerkin lab for damped semilinear waves")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate the initial data and write the energy ledger.
    Simulate(Common),
    /// Energy balance, optionally with a step-size order study.
    EnergyAudit(Common),
    /// Finite-difference limits of the energy identity.
    Steklov(Common),
    /// Continuous dependence on initial data.
    Lipschitz(Common),
    /// Absorbing-ball entry and radius check over an ensemble.
    Absorb(Common),
    /// Quasi-stability envelope fit over trajectory pairs.
    Quasistab(Common),
    /// Stationary solutions and their bounds.
    Stationary(Common),
    /// Long-time sampling and distance to the stationary set.
    Attractor(Common),
    /// Correlation-dimension estimate of a sampled cloud.
    Dimension(Common),
    /// Time-Hölder exponent in weak norms, plus higher-norm tracking.
    Holder(Common),
    /// Quick built-in checks; needs no config.
    Selftest(Common),
}

#[derive(Args)]
struct Common {
    /// TOML run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the seed from the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the output directory from the config.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Suppress the summary on stdout.
    #[arg(long)]
    quiet: bool,
}

impl Command {
    fn split(self) -> (&'static str, Common) {
        match self {
            Command::Simulate(c) => ("simulate", c),
            Command::EnergyAudit(c) => ("energy-audit", c),
            Command::Steklov(c) => ("steklov", c),
            Command::Lipschitz(c) => ("lipschitz", c),
            Command::Absorb(c) => ("absorb", c),
            Command::Quasistab(c) => ("quasistab", c),
            Command::Stationary(c) => ("stationary", c),
            Command::Attractor(c) => ("attractor", c),
            Command::Dimension(c) => ("dimension", c),
            Command::Holder(c) => ("holder", c),
            Command::Selftest(c) => ("selftest", c),
        }
    }
}

fn selftest_config() -> RunConfig {
    RunConfig {
        version: dampwave::io::config::CONFIG_VERSION,
        seed: 0,
        output_dir: PathBuf::from("dampwave-out"),
        basis: BasisDescriptor {
            dim: 1,
            modes_per_axis: 8,
            quad_oversample: 3,
        },
        profile: ProfileConfig {
            damping_linear: 0.0,
            damping_quintic: 1.0,
            source: vec![(1.0, 5.0)],
            audit_range: dampwave::model::DEFAULT_AUDIT_RANGE,
            audit_samples: dampwave::model::DEFAULT_AUDIT_SAMPLES,
        },
        forcing: Default::default(),
        solver: SolverConfig::new(0.01, 1.0),
        initial: Default::default(),
        experiment: None,
    }
}

fn load(name: &str, common: &Common) -> anyhow::Result<RunConfig> {
    let mut cfg = match &common.config {
        Some(path) => RunConfig::load(path).with_context(|| format!("loading {}", path.display()))?,
        None if name == "selftest" => selftest_config(),
        None => bail!("`{name}` needs --config PATH"),
    };
    match &cfg.experiment {
        Some(e) if e.name() != name => {
            bail!("config selects experiment `{}` but the subcommand is `{name}`", e.name())
        }
        Some(_) => {}
        None => cfg.experiment = Some(Experiment::from_name(name)?),
    }
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &common.output {
        cfg.output_dir = out.clone();
    }
    Ok(cfg)
}

fn init_threads() -> anyhow::Result<()> {
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v
            .trim()
            .parse()
            .with_context(|| format!("{THREADS_ENV} must be a positive integer, got `{v}`"))?;
        if n == 0 {
            bail!("{THREADS_ENV} must be positive");
        }
        dampwave::par::init_threads(n);
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (name, common) = cli.command.split();
    let quiet = common.quiet;
    let result = init_threads().and_then(|_| load(name, &common)).and_then(|cfg| Ok(run(&cfg)?));
    match result {
        Ok(outcome) => {
            let r = &outcome.report;
            if !quiet {
                println!("{}: {}", r.experiment, if r.passed { "PASS" } else { "FAIL" });
                for b in &r.bounds {
                    println!(
                        "  [{}] {}: observed {:.6e}, bound {:.6e} ({})",
                        if b.pass { "ok" } else { "FAIL" },
                        b.name,
                        b.observed,
                        b.bound,
                        b.formula
                    );
                }
                for n in &r.notes {
                    println!("  note: {n}");
                }
                println!("  artifacts in {}", outcome.output_dir.display());
            }
            if r.passed {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            let kind = e
                .downcast_ref::<dampwave::Error>()
                .map_or("cli", |d| d.kind());
            let record = serde_json::json!({
                "experiment": name,
                "error": kind,
                "message": format!("{e:#}"),
            });
            eprintln!("{record}");
            ExitCode::from(2)
        }
    }
}
