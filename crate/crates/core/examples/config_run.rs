//! Build an experiment from config text, run it and print the CSV.

use vpbench::sim::{run, ExperimentConfig};

const CONFIG: &str = "\
experiment = sched_loss
n_t = 4
users = 4
snr_db = 0, 10, 20
trials = 20
ese_samples = 300
alpha_points = 5
seed = 42
";

fn main() -> vpbench::Result<()> {
    let cfg = ExperimentConfig::parse(CONFIG)?;
    let table = run(&cfg)?;
    print!("{}", table.to_csv(None));
    Ok(())
}
