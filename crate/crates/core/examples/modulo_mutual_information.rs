//! Per-user mutual information of a rate-weighted stream, with the piecewise
//! and AWGN approximations and the modulo loss Ω.

use vpbench::rates::{mi_awgn, mi_exact, mi_piecewise, omega};

fn main() -> vpbench::Result<()> {
    let (ese, d, snr) = (0.1, 1.0, 1.0);
    println!("{:>6} {:>9} {:>9} {:>9}", "lambda", "exact", "piecew.", "awgn");
    for i in 1..=12 {
        let lambda = 0.25 * i as f64;
        println!(
            "{lambda:>6.2} {:>9.4} {:>9.4} {:>9.4}",
            mi_exact(lambda, d, ese, snr)?,
            mi_piecewise(lambda, d, ese, snr)?,
            mi_awgn(lambda, d, ese, snr)?
        );
    }
    for gamma in [0.01, 0.1, 1.0, 10.0] {
        println!("omega({gamma}) = {:.6} bits", omega(gamma)?);
    }
    Ok(())
}
