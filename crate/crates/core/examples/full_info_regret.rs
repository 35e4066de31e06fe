//! Gradient-feedback learning on the oscillating market: regret and
//! constraint violation at a few horizons.

use online_gne::bregman::MirrorKind;
use online_gne::game::{CournotVariant, NashCournot};
use online_gne::graph::CommGraph;
use online_gne::learner::{FullInfoLearner, InitMode, LearnerOptions};
use online_gne::metrics::{max_regret, regret_all, violation};
use online_gne::schedule::StepSchedule;

fn main() -> online_gne::error::Result<()> {
    let horizon = 2000;
    let game = NashCournot::new(CournotVariant::Oscillating, 20)?;
    let schedule = StepSchedule::regret(0.8, 0.3)?.with_horizon(horizon)?;
    let learner = FullInfoLearner::uniform(
        &game,
        CommGraph::ring(20)?,
        schedule,
        MirrorKind::SquaredNorm,
        LearnerOptions::default(),
    )?;
    let log = learner.run(&game, horizon, 1, InitMode::RandomFeasible)?;

    let horizons = [100, 250, 500, 1000, 2000];
    let reports = regret_all(&log, &game, &horizons)?;
    let reg = max_regret(&reports);
    let vio = violation(&log, &horizons)?;
    println!("{:>6} {:>14} {:>12} {:>10}", "T", "max Reg_i(T)", "per round", "R_g(T)");
    for (k, t) in horizons.iter().enumerate() {
        println!("{t:>6} {:>14.3} {:>12.4} {:>10.4}", reg[k], reg[k] / *t as f64, vio.values[k]);
    }
    let fallbacks = reports.iter().filter(|r| r.any_fallback()).count();
    println!("players whose hindsight set was empty at some horizon: {fallbacks}");
    Ok(())
}
