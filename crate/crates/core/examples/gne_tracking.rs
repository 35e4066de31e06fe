//! The converging market: last and averaged iterates against the limit
//! equilibrium.

use online_gne::bregman::MirrorKind;
use online_gne::game::{CournotVariant, LimitGame, NashCournot};
use online_gne::graph::CommGraph;
use online_gne::learner::{FullInfoLearner, InitMode, LearnerOptions};
use online_gne::metrics::tracking_error;
use online_gne::schedule::StepSchedule;

fn main() -> online_gne::error::Result<()> {
    let horizon = 5000;
    let game = NashCournot::new(CournotVariant::Converging, 20)?;
    let limit = game.limit();
    println!("x*_1..3 = {:?}", &limit.gne().unwrap()[..3]);
    for (label, schedule) in [
        ("last iterate, b = (1, 0.25)", StepSchedule::tracking(1.0, 0.25, 1.0, 1.0)?),
        ("averaged,     b = (0.6, 0.2)", StepSchedule::averaged(0.6, 0.2, 1.0, 1.0)?),
    ] {
        let learner = FullInfoLearner::uniform(&game, CommGraph::ring(20)?, schedule, MirrorKind::SquaredNorm, LearnerOptions::default())?;
        let log = learner.run(&game, horizon, 3, InitMode::RandomFeasible)?;
        let last = tracking_error(&log, &limit, false)?;
        let avg = tracking_error(&log, &limit, true)?;
        println!("{label}");
        for t in [10, 100, 1000, 5000] {
            println!("  t = {t:>5}: |x_t - x*| = {:.4}, |xbar_t - x*|^2 = {:.5}", last[t - 1], avg[t - 1]);
        }
    }
    Ok(())
}
