//! A two-player quadratic game declared coefficient by coefficient, with
//! a shared budget that binds at equilibrium.

use online_gne::bregman::{FeasibleSet, MirrorKind};
use online_gne::game::{limit_gne_bruteforce, QuadraticGame, QuadraticPlayer, TimeProfile};
use online_gne::graph::CommGraph;
use online_gne::learner::{FullInfoLearner, InitMode, LearnerOptions};
use online_gne::metrics::tracking_error_to;
use online_gne::schedule::StepSchedule;

fn player(target: f64) -> online_gne::error::Result<QuadraticPlayer> {
    // J_i = (x_i − target)² + 0.2 x_i x_j, budget x_1 + x_2 ≤ 2
    Ok(QuadraticPlayer {
        set: FeasibleSet::interval(-5.0, 5.0)?,
        quad: vec![vec![1.0]],
        linear: vec![-2.0 * target],
        linear_amp: vec![0.5],
        coupling: vec![vec![0.2]],
        constraint_matrix: vec![vec![1.0]],
        constraint_offset: vec![1.0],
        constraint_amp: vec![0.0],
    })
}

fn main() -> online_gne::error::Result<()> {
    let game = QuadraticGame::new(vec![player(2.0)?, player(3.0)?], TimeProfile::Converging { scale: 4.0 }, 1.0)?;
    let eq = limit_gne_bruteforce(&game, 1e-10)?;
    println!("limit equilibrium {:?}, multiplier {:?}", eq.point, eq.multipliers);

    let learner = FullInfoLearner::uniform(
        &game,
        CommGraph::complete(2)?,
        StepSchedule::tracking(1.0, 0.25, 1.0, 1.0)?,
        MirrorKind::SquaredNorm,
        LearnerOptions::default(),
    )?;
    let log = learner.run(&game, 4000, 0, InitMode::Zero)?;
    let err = tracking_error_to(&log, &eq.point, false);
    for t in [1, 10, 100, 1000, 4000] {
        println!("t = {t:>4}: x = {:?}, |x - x*| = {:.4}", log.rounds[t - 1].actions, err[t - 1]);
    }
    Ok(())
}
