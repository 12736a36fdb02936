//! Iterative waterfilling of the rate weights on one channel.

use vpbench::alloc::{allocate, AllocOptions};
use vpbench::rates::{sum_rate_exact, sum_rate_ra};
use vpbench::precoder::{estimate_ese, PrecoderConfig};
use vpbench::seeding::stream;
use vpbench::sim::{db_to_linear, gen_channel};

fn main() -> vpbench::Result<()> {
    let h = gen_channel(6, 6, &mut stream(3, &[]));
    let plain_ese = estimate_ese(&PrecoderConfig::channel_inverse(h.clone(), 1.0), 2000, 1)?.mean;
    for db in [0.0, 10.0, 20.0] {
        let p = db_to_linear(db);
        let res = allocate(&h, p, &AllocOptions::default())?;
        let (lambda, d) = res.active_pairs();
        let ra = sum_rate_ra(res.ese_final.mean, p, &lambda, &d)?;
        let plain = sum_rate_exact(plain_ese, p, 6)?;
        println!(
            "{db:>4} dB  active {:?}  {} iterations  plain {plain:.3}  allocated {ra:.3}",
            res.active_users(),
            res.iterations
        );
        println!("         lambda {:.3?}", res.lambda);
    }
    Ok(())
}
