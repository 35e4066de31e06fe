//! Build communication graphs, inspect their contraction factor and mix
//! a set of multipliers.

use online_gne::graph::CommGraph;

fn main() -> online_gne::error::Result<()> {
    for (name, g) in [
        ("complete(5)", CommGraph::complete(5)?),
        ("ring(5)", CommGraph::ring(5)?),
        ("star(5)", CommGraph::star(5)?),
        ("ring(20)", CommGraph::ring(20)?),
    ] {
        println!("{name:<12} sigma = {:.6}", g.sigma());
    }

    // half self-weight on a 4-cycle
    let ring4 = CommGraph::from_rows(&[
        vec![0.5, 0.25, 0.0, 0.25],
        vec![0.25, 0.5, 0.25, 0.0],
        vec![0.0, 0.25, 0.5, 0.25],
        vec![0.25, 0.0, 0.25, 0.5],
    ])?;
    let mut duals = vec![vec![1.0], vec![0.0], vec![0.0], vec![0.0]];
    for round in 1..=5 {
        duals = ring4.mix(&duals)?;
        let spread: Vec<String> = duals.iter().map(|d| format!("{:.4}", d[0])).collect();
        println!("round {round}: [{}]", spread.join(", "));
    }

    match CommGraph::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]) {
        Err(e) => println!("identity rejected: {e}"),
        Ok(_) => unreachable!(),
    }
    Ok(())
}
