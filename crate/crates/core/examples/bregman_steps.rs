//! Mirror steps under the two supported geometries.

use online_gne::bregman::{bregman, check_triangle, mirror_step, FeasibleSet, MirrorKind, MirrorMap, SetKind};

fn main() -> online_gne::error::Result<()> {
    let interval = FeasibleSet::interval(0.0, 30.0)?;
    let euclid = MirrorMap::for_set(MirrorKind::SquaredNorm, &interval)?;
    let x = mirror_step(&euclid, &interval, &[10.0], &[4.0], 1.0)?;
    println!("squared norm on [0, 30]: 10 with g = 4, alpha = 1 -> {}", x[0]);
    println!("  K = {} (twice the diameter)", euclid.lipschitz_k());

    let simplex = FeasibleSet::new(SetKind::Simplex { radius: 1.0, dim: 2 })?;
    let entropy = MirrorMap::for_set(MirrorKind::NegativeEntropy, &simplex)?;
    let y = mirror_step(&entropy, &simplex, &[0.5, 0.5], &[2f64.ln(), 0.0], 1.0)?;
    println!("entropy on the simplex: (1/2, 1/2) -> ({:.6}, {:.6})", y[0], y[1]);

    let kl = bregman(&entropy, &[0.5, 0.5], &[0.25, 0.75])?;
    println!("KL((1/2, 1/2) || (1/4, 3/4)) = {kl:.5}");
    let r = check_triangle(&entropy, &[0.2, 0.8], &[0.6, 0.4], &[0.3, 0.7])?;
    println!("three-point identity residual: {r:.2e}");
    Ok(())
}
