//! GRM, SUS and greedy zero-forcing on one 8-user channel, scored by the
//! exact sum rate, with exhaustive search on a 4-user channel for reference.

use vpbench::scheduler::{exhaustive_select, greedy_zf_select, grm_select, sus_select, ChannelSet, SubsetRates};
use vpbench::seeding::stream;
use vpbench::sim::{db_to_linear, gen_channel};

fn main() -> vpbench::Result<()> {
    let ch = ChannelSet::new(gen_channel(8, 8, &mut stream(5, &[])))?;
    let mut rates = SubsetRates::new(&ch, 1000, 1)?;
    for db in [0.0, 10.0, 20.0] {
        let p = db_to_linear(db);
        let grm = grm_select(&ch, p)?;
        let sus = sus_select(&ch, p, 0.5)?;
        let zf = greedy_zf_select(&ch, p);
        println!("{db} dB");
        for (name, t) in [("GRM", &grm), ("SUS a=0.5", &sus), ("greedy ZF", &zf)] {
            let rate = rates.sum_rate(&t.selected, p)?;
            println!("  {name:<10} users {:?} rate {rate:.3} mults {}", t.selected, t.vec_mults);
        }
    }

    let small = ChannelSet::new(gen_channel(4, 4, &mut stream(6, &[])))?;
    let mut rates = SubsetRates::new(&small, 1000, 2)?;
    let best = exhaustive_select(&mut rates, db_to_linear(5.0))?;
    println!("exhaustive at 5 dB: {:?} rate {:.3} over {} subsets", best.selected, best.sum_rate, best.subsets_evaluated);
    Ok(())
}
