//! Encode 16-QAM data for three users, pass it through a noisy channel and
//! count symbol errors after modulo demodulation.

use rand::Rng;
use vpbench::lattice::CubePoint;
use vpbench::linalg::C64;
use vpbench::precoder::{channel_output, demodulate_vector, Precoder, PrecoderConfig};
use vpbench::seeding::stream;
use vpbench::sim::{db_to_linear, gen_channel};

fn nearest(v: f64, levels: &[f64]) -> f64 {
    *levels.iter().min_by(|a, b| (*a - v).abs().total_cmp(&(*b - v).abs())).unwrap()
}

fn main() -> vpbench::Result<()> {
    let levels = [-0.375, -0.125, 0.125, 0.375];
    let mut rng = stream(17, &[]);
    let h = gen_channel(3, 3, &mut rng);
    for db in [10.0, 20.0, 30.0] {
        let pre = Precoder::new(&PrecoderConfig::channel_inverse(h.clone(), db_to_linear(db)))?;
        let ese = pre.estimate_ese(2000, 1)?.mean;
        let (mut errors, mut power, n) = (0, 0.0, 2000);
        for _ in 0..n {
            let a: Vec<C64> =
                (0..3).map(|_| C64::new(levels[rng.random_range(0..4)], levels[rng.random_range(0..4)])).collect();
            let tx = pre.encode(&CubePoint::new(a.clone())?, ese)?;
            power += tx.x.iter().map(|x| x.norm_sqr()).sum::<f64>();
            let y = channel_output(&h, &tx.x, Some(&mut rng));
            let est = demodulate_vector(&pre, &y, ese);
            for (s, e) in a.iter().zip(est.as_slice()) {
                if nearest(e.re, &levels) != s.re || nearest(e.im, &levels) != s.im {
                    errors += 1;
                }
            }
        }
        println!(
            "{db} dB: mean power / P = {:.3}, symbol error rate {:.4}",
            power / n as f64 / db_to_linear(db),
            errors as f64 / (3 * n) as f64
        );
    }
    Ok(())
}
