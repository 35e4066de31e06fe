//! Payoff-only learning: the same market, but players observe only cost
//! and constraint values at a perturbed query point.

use online_gne::bandit::{BanditConfig, BanditLearner, CountingOracle};
use online_gne::bregman::MirrorKind;
use online_gne::game::{CournotVariant, NashCournot};
use online_gne::graph::CommGraph;
use online_gne::learner::{FullInfoLearner, InitMode, LearnerOptions};
use online_gne::metrics::{max_regret, regret_all, violation};
use online_gne::schedule::StepSchedule;

fn main() -> online_gne::error::Result<()> {
    let horizon = 2000;
    let horizons = [200, 500, 1000, 2000];
    let game = NashCournot::new(CournotVariant::Oscillating, 20)?.with_interior(3.0, 1.5)?;
    let schedule = StepSchedule::bandit(0.75, 0.25, 0.5)?.with_horizon(horizon)?;
    let base = FullInfoLearner::uniform(&game, CommGraph::ring(20)?, schedule, MirrorKind::SquaredNorm, LearnerOptions::default())?;

    let seeds = 1..=5u64;
    let mut mean = vec![0.0; horizons.len()];
    let mut mean_vio = vec![0.0; horizons.len()];
    for seed in seeds.clone() {
        let learner = BanditLearner::new(base.clone(), BanditConfig::new(&game, 0.5, seed)?)?;
        let counting = CountingOracle::new(&game);
        let log = learner.run_bandit(&counting, horizon, InitMode::RandomFeasible)?;
        assert_eq!(counting.grad_calls() + counting.jacobian_calls(), 0);
        let reg = max_regret(&regret_all(&log, &game, &horizons)?);
        let vio = violation(&log, &horizons)?.values;
        for k in 0..horizons.len() {
            mean[k] += reg[k] / seeds.clone().count() as f64;
            mean_vio[k] += vio[k] / seeds.clone().count() as f64;
        }
    }
    for (k, t) in horizons.iter().enumerate() {
        println!("T = {t:>5}: mean max Reg_i(T)/T = {:.4}, mean R_g(T)/T = {:.2e}", mean[k] / *t as f64, mean_vio[k] / *t as f64);
    }
    println!("gradient oracle calls: 0");
    Ok(())
}
