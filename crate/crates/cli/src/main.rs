//! `diffusim`: reproducible experiments on the innovation diffusion process.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{
    BassSection, BlocksSection, CoupleSection, CriticalSection, FileConfig, LatticeSection, ModelSection,
    OracleSection, RunSection, SimulateSection, SweepSection,
};
use diffusim_core::dynamics::InitialCondition;

#[derive(Debug, Parser)]
#[command(name = "diffusim", version, about = "Innovation diffusion on lattices: simulation, couplings and estimates")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Global {
    /// TOML file with model, lattice, run and per-command tables.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed; required here or in the config file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory, created if missing.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    /// Worker threads for replicates; results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(flatten)]
    model: ModelSection,
    #[command(flatten)]
    lattice: LatticeSection,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// One trajectory with its space-time raster.
    Simulate {
        #[command(flatten)]
        run: RunSection,
        #[command(flatten)]
        simulate: SimulateSection,
    },
    /// Survival estimates over a (lambda, alpha, gamma) grid.
    Sweep {
        #[command(flatten)]
        run: RunSection,
        #[command(flatten)]
        sweep: SweepSection,
    },
    /// Bisection for a critical rate of the finite-size survival proxy.
    Critical {
        #[command(flatten)]
        run: RunSection,
        #[command(flatten)]
        critical: CriticalSection,
    },
    /// Checks the pathwise coupling invariants over many seeds.
    Couple {
        #[arg(long)]
        initial: Option<InitialCondition>,
        #[arg(long)]
        horizon: Option<f64>,
        #[command(flatten)]
        couple: CoupleSection,
    },
    /// Block-field sampling and oriented reachability.
    Blocks {
        #[arg(long)]
        replicates: Option<u64>,
        #[command(flatten)]
        blocks: BlocksSection,
    },
    /// Exact transient distribution on a tiny lattice.
    Oracle {
        #[arg(long)]
        initial: Option<InitialCondition>,
        #[command(flatten)]
        oracle: OracleSection,
    },
    /// Bass ODE table.
    Bass {
        #[command(flatten)]
        bass: BassSection,
    },
}

/// Failure classes with their exit codes.
#[derive(Debug)]
pub enum Failure {
    Config(String),
    Runtime(String),
    Check(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Config(_) => 2,
            Failure::Runtime(_) => 3,
            Failure::Check(_) => 4,
        }
    }

    fn report(&self) {
        let (kind, message) = match self {
            Failure::Config(m) => ("config", m),
            Failure::Runtime(m) => ("runtime", m),
            Failure::Check(m) => ("check", m),
        };
        let err = serde_json::json!({ "error": { "kind": kind, "message": message } });
        eprintln!("{err}");
    }
}

fn merge(global: &Global, command: &Command) -> Result<FileConfig, Failure> {
    let mut cfg = match &global.config {
        Some(p) => config::load(p).map_err(Failure::Config)?,
        None => FileConfig::default(),
    };
    if global.seed.is_some() {
        cfg.seed = global.seed;
    }
    cfg.model.overlay(&global.model);
    cfg.lattice.overlay(&global.lattice);
    match command {
        Command::Simulate { run, simulate } => {
            cfg.run.overlay(run);
            cfg.simulate.overlay(simulate);
        }
        Command::Sweep { run, sweep } => {
            cfg.run.overlay(run);
            cfg.sweep.overlay(sweep);
        }
        Command::Critical { run, critical } => {
            cfg.run.overlay(run);
            cfg.critical.overlay(critical);
        }
        Command::Couple { initial, horizon, couple } => {
            cfg.run.overlay(&RunSection {
                initial: initial.clone(),
                horizon: *horizon,
                ..RunSection::default()
            });
            cfg.couple.overlay(couple);
        }
        Command::Blocks { replicates, blocks } => {
            cfg.run.overlay(&RunSection {
                replicates: *replicates,
                ..RunSection::default()
            });
            cfg.blocks.overlay(blocks);
        }
        Command::Oracle { initial, oracle } => {
            cfg.run.overlay(&RunSection {
                initial: initial.clone(),
                ..RunSection::default()
            });
            cfg.oracle.overlay(oracle);
        }
        Command::Bass { bass } => cfg.bass.overlay(bass),
    }
    Ok(cfg)
}

fn execute(cli: Cli) -> Result<(), Failure> {
    let cfg = merge(&cli.global, &cli.command)?;
    let out = output::Output::new(cli.global.out.clone());
    let run = || match &cli.command {
        Command::Simulate { .. } => commands::simulate(&cfg, &out),
        Command::Sweep { .. } => commands::sweep(&cfg, &out),
        Command::Critical { .. } => commands::critical(&cfg, &out),
        Command::Couple { .. } => commands::couple(&cfg, &out),
        Command::Blocks { .. } => commands::blocks(&cfg, &out),
        Command::Oracle { .. } => commands::oracle(&cfg, &out),
        Command::Bass { .. } => commands::bass(&cfg, &out),
    };
    match cli.global.threads {
        Some(0) => Err(Failure::Config("--threads must be >= 1".into())),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Failure::Runtime(e.to_string()))?
            .install(run),
        None => run(),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // help and version requests
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            Failure::Config(e.to_string().trim_end().to_owned()).report();
            return ExitCode::from(2);
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            f.report();
            ExitCode::from(f.code())
        }
    }
}
