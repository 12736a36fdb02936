use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use vpbench::sim::{run, Experiment, ExperimentConfig};
use vpbench::Result;

#[derive(Parser)]
#[command(name = "vpbench", version, about = "Vector-perturbation precoding experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a key = value config file.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Per-user mutual information against the rate weight.
    Fig1(Common),
    /// Exact sum rate and bounds against SNR.
    Sweep(Common),
    /// Scheduler sum-rate loss against exhaustive search.
    Sched(Common),
    /// Rate allocation against user selection.
    Ra(Common),
    /// Selected-user and effort tables for GRM and SUS.
    Tables(Common),
}

#[derive(Args, Clone)]
struct Common {
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<usize>,
    /// Output CSV (a directory for `tables`).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    ese_samples: Option<usize>,
}

impl Common {
    fn apply(&self, cfg: &mut ExperimentConfig) {
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(t) = self.trials {
            cfg.trials = t;
        }
        if let Some(n) = self.ese_samples {
            cfg.ese_samples = n;
        }
    }
}

fn default_out(dir: &Path, e: Experiment) -> PathBuf {
    dir.join(format!("{e}.csv"))
}

fn execute(mut cfg: ExperimentConfig) -> Result<()> {
    if cfg.out_path.is_none() {
        cfg.out_path = Some(default_out(Path::new("results"), cfg.experiment));
    }
    let table = run(&cfg)?;
    let out = cfg.out_path.as_ref().expect("set above");
    println!("{}: {} rows -> {}", cfg.experiment, table.rows.len(), out.display());
    Ok(())
}

fn shortcut(e: Experiment, common: &Common) -> Result<()> {
    let mut cfg = ExperimentConfig::preset(e);
    common.apply(&mut cfg);
    cfg.out_path = common.out.clone();
    execute(cfg)
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run { config, common } => {
            let mut cfg = ExperimentConfig::from_file(&config)?;
            common.apply(&mut cfg);
            if common.out.is_some() {
                cfg.out_path = common.out;
            }
            execute(cfg)
        }
        Command::Fig1(c) => shortcut(Experiment::Fig1, &c),
        Command::Sweep(c) => shortcut(Experiment::SumrateSweep, &c),
        Command::Sched(c) => shortcut(Experiment::SchedLoss, &c),
        Command::Ra(c) => shortcut(Experiment::RaCompare, &c),
        Command::Tables(c) => {
            let dir = c.out.clone().unwrap_or_else(|| PathBuf::from("results"));
            for e in [Experiment::TableUsers, Experiment::TableMults] {
                let mut cfg = ExperimentConfig::preset(e);
                c.apply(&mut cfg);
                cfg.out_path = Some(default_out(&dir, e));
                execute(cfg)?;
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("vpbench: {e}");
            ExitCode::from(2)
        }
    }
}
