use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use qham_core::pipeline::Engine;

mod commands;
mod config;
mod output;

use config::{ConfigError, ConfigFile, Experiment, HMode, HSweep, ProblemSpec};

#[derive(Parser)]
#[command(name = "qham", version, about = "Homotopy-analysis linearization and emulation runs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Dump the variable registry, block couplings and sparsity report.
    Linearize(Common),
    /// Run one h value and write per-level CSVs.
    Run {
        #[command(flatten)]
        common: Common,
        /// Also write A(0) in Matrix Market format with B and Y_in as CSV.
        #[arg(long)]
        dump_matrix: bool,
    },
    /// Sweep h and write the error curve.
    Hcurve(Common),
    /// Evaluate qubit, query and gate estimates.
    Estimate(Common),
    /// Check the materialized system against the chained solve.
    Verify {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
    },
}

#[derive(Args, Clone)]
struct Common {
    /// TOML experiment file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Preset name (burgers, kdv).
    #[arg(long)]
    problem: Option<String>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    h: Option<f64>,
    /// `lo:step:hi` or a comma-separated list.
    #[arg(long = "h-sweep", allow_hyphen_values = true)]
    h_sweep: Option<String>,
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long = "T")]
    t_end: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    cap: Option<usize>,
    /// Sweep workers; 0 uses every core.
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long, value_parser = parse_engine)]
    engine: Option<Engine>,
    /// Target accuracy for resource estimates.
    #[arg(long)]
    eps: Option<f64>,
}

fn parse_engine(s: &str) -> Result<Engine, String> {
    match s {
        "compositional" => Ok(Engine::Compositional),
        "materialized" => Ok(Engine::Materialized),
        _ => Err(format!("unknown engine {s:?} (compositional, materialized)")),
    }
}

impl Common {
    fn resolve(&self, mode: HMode) -> Result<Experiment, ConfigError> {
        let file = match &self.config {
            Some(p) => ConfigFile::load(p)?,
            None => ConfigFile::default(),
        };
        let flags = ConfigFile {
            problem: self.problem.clone().map(ProblemSpec::Preset),
            n: self.n,
            m: self.m,
            h: self.h,
            h_sweep: self.h_sweep.as_deref().map(HSweep::parse).transpose()?,
            dt: self.dt,
            t_end: self.t_end,
            iterations: self.iterations,
            out: self.out.clone(),
            cap: self.cap,
            workers: self.workers,
            engine: self.engine,
            epsilon: self.eps,
            ..Default::default()
        };
        let mut merged = file.overlay(flags);
        // A flag for one of h / h_sweep replaces the other from the file.
        if self.h.is_some() {
            merged.h_sweep = None;
        } else if self.h_sweep.is_some() {
            merged.h = None;
        }
        Experiment::resolve(merged, mode)
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<commands::VerificationFailed>().is_some() {
        return 4;
    }
    if err.downcast_ref::<ConfigError>().is_some() {
        return 2;
    }
    match err.downcast_ref::<qham_core::Error>() {
        Some(qham_core::Error::Divergence { .. }) => 3,
        Some(
            qham_core::Error::CapExceeded { .. }
            | qham_core::Error::Unstable { .. }
            | qham_core::Error::InvalidProblem(_)
            | qham_core::Error::GridTooSmall(_)
            | qham_core::Error::Domain(_),
        ) => 2,
        _ => 1,
    }
}

fn dispatch(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Linearize(c) => commands::linearize(&c.resolve(HMode::Single)?),
        Command::Run { common, dump_matrix } => commands::run(&common.resolve(HMode::Single)?, dump_matrix),
        Command::Hcurve(c) => commands::hcurve(&c.resolve(HMode::Sweep)?),
        Command::Estimate(c) => commands::estimate(&c.resolve(HMode::Single)?),
        Command::Verify { common, tol } => commands::verify(&common.resolve(HMode::Single)?, tol),
    }
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
