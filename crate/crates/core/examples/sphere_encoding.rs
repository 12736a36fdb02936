//! Find the best perturbation for one data vector and compare it with the
//! unperturbed and Babai-style alternatives.

use vpbench::lattice::{closest_point, lattice_cost, CubePoint, GaussInt};
use vpbench::linalg::pseudoinverse;
use vpbench::seeding::stream;
use vpbench::sim::gen_channel;

fn main() -> vpbench::Result<()> {
    let mut rng = stream(2024, &[]);
    let h = gen_channel(4, 4, &mut rng);
    let f = pseudoinverse(&h)?;
    let a = CubePoint::uniform(4, &mut rng);

    let best = closest_point(&f, &a)?;
    let plain = lattice_cost(&f, a.as_slice(), &[GaussInt::new(0, 0); 4]);
    println!("data      {:?}", a.as_slice());
    println!("perturb   {:?}", best.p);
    println!("power without perturbation {plain:.4}");
    println!("power with perturbation    {:.4}  ({} nodes visited)", best.cost, best.nodes_visited);
    Ok(())
}
