//! Exact sum rate of one channel against its lower and upper bounds.

use vpbench::precoder::{estimate_ese, PrecoderConfig};
use vpbench::rates::{sum_rate_exact, sum_rate_lower, sum_rate_upper};
use vpbench::seeding::stream;
use vpbench::sim::{db_to_linear, gen_channel};

fn main() -> vpbench::Result<()> {
    let h = gen_channel(4, 4, &mut stream(11, &[]));
    let ese = estimate_ese(&PrecoderConfig::channel_inverse(h.clone(), 1.0), 4000, 3)?.mean;
    println!("E_se = {ese:.4}");
    println!("{:>6} {:>9} {:>9} {:>9}", "dB", "lower", "exact", "upper");
    for db in (-10..=30).step_by(5) {
        let p = db_to_linear(db as f64);
        println!(
            "{db:>6} {:>9.3} {:>9.3} {:>9.3}",
            sum_rate_lower(ese, p, 4)?,
            sum_rate_exact(ese, p, 4)?,
            sum_rate_upper(&h, p)?
        );
    }
    Ok(())
}
