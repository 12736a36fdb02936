//! Monte-Carlo E_se against its closed-form lower bound for growing user counts.

use vpbench::linalg::pseudoinverse;
use vpbench::precoder::{estimate_ese, ese_lower_bound, PrecoderConfig};
use vpbench::seeding::stream;
use vpbench::sim::gen_channel;

fn main() -> vpbench::Result<()> {
    println!("{:>2} {:>10} {:>10} {:>10}", "K", "E_se", "std err", "bound");
    for k in 1..=6 {
        let h = gen_channel(k, k, &mut stream(7, &[k as u64]));
        let est = estimate_ese(&PrecoderConfig::channel_inverse(h.clone(), 1.0), 4000, 1)?;
        let bound = ese_lower_bound(&pseudoinverse(&h)?)?;
        println!("{k:>2} {:>10.4} {:>10.4} {:>10.4}", est.mean, est.std_error, bound);
    }
    Ok(())
}
