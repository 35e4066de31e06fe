//! The Nash-Cournot market: closed-form equilibrium versus an independent
//! variational-inequality solve, and the gaps to the limit game.

use online_gne::game::{
    limit_gne_bruteforce, stabilization_gaps, vi_residual, CournotVariant, LimitGame, NashCournot,
    DEFAULT_GAP_SAMPLES,
};

fn main() -> online_gne::error::Result<()> {
    let game = NashCournot::new(CournotVariant::Converging, 20)?;
    let limit = game.limit();
    let closed = limit.gne().expect("closed form");
    let solved = limit_gne_bruteforce(&limit, 1e-10)?;
    let worst = closed
        .iter()
        .zip(&solved.point)
        .map(|(a, b)| (a[0] - b[0]).abs())
        .fold(0.0, f64::max);
    println!("x* (closed form) = {:?}", closed.iter().map(|v| v[0]).collect::<Vec<_>>());
    println!("max |closed - solved| = {worst:.2e} after {} iterations", solved.iterations);
    println!("multiplier = {:?}, VI residual = {:.2e}", solved.multipliers, vi_residual(&limit, &closed, &solved.multipliers));

    for t in [10, 100, 1_000, 10_000] {
        let (h, k) = stabilization_gaps(&game, &limit, t, DEFAULT_GAP_SAMPLES);
        println!("t = {t:>6}: H = {h:.5}, K = {k:.5}");
    }
    Ok(())
}
