//! TOML experiment description and its translation into library objects.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::bandit::{BanditConfig, BanditLearner};
use crate::bregman::{FeasibleSet, MirrorKind, SetKind};
use crate::error::{Error, Result};
use crate::game::{
    CournotVariant, GameOracle, LimitGame, NashCournot, QuadraticGame, QuadraticPlayer, TimeProfile,
};
use crate::graph::CommGraph;
use crate::learner::{FullInfoLearner, InitMode, LearnerOptions};
use crate::schedule::StepSchedule;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub horizon: u64,
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub init: InitMode,
    #[serde(default = "default_true")]
    pub check_invariants: bool,
    #[serde(default)]
    pub parallel: bool,
    #[serde(default)]
    pub out: Option<PathBuf>,
    pub game: GameSpec,
    pub graph: GraphSpec,
    pub learner: LearnerSpec,
    #[serde(default)]
    pub metrics: MetricsSpec,
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum GameSpec {
    NashCournot {
        variant: CournotVariant,
        players: usize,
        #[serde(default)]
        interior: Option<InteriorSpec>,
        #[serde(default)]
        lambda: Option<f64>,
    },
    Quadratic {
        time: TimeProfile,
        players: Vec<QuadraticPlayerSpec>,
        #[serde(default)]
        lambda: Option<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InteriorSpec {
    pub point: f64,
    pub radius: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadraticPlayerSpec {
    pub set: SetKind,
    #[serde(default)]
    pub interior_point: Option<Vec<f64>>,
    #[serde(default)]
    pub interior_radius: Option<f64>,
    pub quad: Vec<Vec<f64>>,
    pub linear: Vec<f64>,
    #[serde(default)]
    pub linear_amp: Option<Vec<f64>>,
    #[serde(default)]
    pub coupling: Vec<Vec<f64>>,
    #[serde(default)]
    pub constraint_matrix: Vec<Vec<f64>>,
    #[serde(default)]
    pub constraint_offset: Vec<f64>,
    #[serde(default)]
    pub constraint_amp: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum GraphSpec {
    Complete,
    /// Cycle with Metropolis-Hastings weights.
    Ring,
    StarMetropolis,
    Metropolis { edges: Vec<(usize, usize)> },
    Explicit { weights: Vec<Vec<f64>> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LearnerKind {
    Full,
    Bandit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LearnerSpec {
    pub kind: LearnerKind,
    #[serde(default = "default_mirror")]
    pub mirror: MirrorKind,
    pub schedule: ScheduleSpec,
    /// `c` in `δ_t = min(0.99 r, c t^{-d3})`; defaults to `0.99 r`.
    #[serde(default)]
    pub radius_constant: Option<f64>,
}

fn default_mirror() -> MirrorKind {
    MirrorKind::SquaredNorm
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ScheduleSpec {
    Regret { a1: f64, a2: f64 },
    Tracking { b1: f64, b2: f64, p: f64, q: f64 },
    Averaged { b1: f64, b2: f64, p: f64, q: f64 },
    Bandit { d1: f64, d2: f64, d3: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricsSpec {
    /// Metrics are reported at multiples of this step.
    #[serde(default = "default_step")]
    pub horizon_step: usize,
    /// Lower end of the horizon window used for growth-exponent fits;
    /// the last half of the grid when absent.
    #[serde(default)]
    pub fit_from: Option<usize>,
}

fn default_step() -> usize {
    100
}

impl Default for MetricsSpec {
    fn default() -> Self {
        Self {
            horizon_step: default_step(),
            fit_from: None,
        }
    }
}

/// Library objects described by a config.
/// A game oracle with its limit game, when one is known.
pub type BuiltGame = (Box<dyn GameOracle>, Option<Box<dyn LimitGame>>);

pub struct Built {
    pub game: Box<dyn GameOracle>,
    pub limit: Option<Box<dyn LimitGame>>,
    pub graph: CommGraph,
    pub schedule: StepSchedule,
}

impl Built {
    pub fn full_info(&self, config: &ExperimentConfig) -> Result<FullInfoLearner> {
        FullInfoLearner::uniform(
            self.game.as_ref(),
            self.graph.clone(),
            self.schedule,
            config.learner.mirror,
            LearnerOptions {
                check_invariants: config.check_invariants,
                parallel: config.parallel,
            },
        )
    }

    pub fn bandit(&self, config: &ExperimentConfig, seed: u64) -> Result<BanditLearner> {
        let d3 = self
            .schedule
            .radius_exponent()
            .ok_or_else(|| Error::Config("a bandit learner needs a bandit schedule".into()))?;
        let mut cfg = BanditConfig::new(self.game.as_ref(), d3, seed)?;
        if let Some(c) = config.learner.radius_constant {
            cfg = cfg.with_scales(vec![c; self.game.n_players()])?;
        }
        BanditLearner::new(self.full_info(config)?, cfg)
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.check_shape()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    fn check_shape(&self) -> Result<()> {
        if self.horizon == 0 {
            return Err(Error::Config("horizon must be at least 1".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("at least one seed is required".into()));
        }
        if self.metrics.horizon_step == 0 {
            return Err(Error::Config("metrics.horizon_step must be positive".into()));
        }
        let bandit_schedule = matches!(self.learner.schedule, ScheduleSpec::Bandit { .. });
        match (self.learner.kind, bandit_schedule) {
            (LearnerKind::Bandit, false) => Err(Error::Config(
                "bandit learner needs schedule mode \"bandit\" (d1, d2, d3)".into(),
            )),
            (LearnerKind::Full, true) => Err(Error::Config(
                "schedule mode \"bandit\" needs learner kind \"bandit\"".into(),
            )),
            _ => Ok(()),
        }
    }

    pub fn schedule(&self) -> Result<StepSchedule> {
        let s = match self.learner.schedule {
            ScheduleSpec::Regret { a1, a2 } => StepSchedule::regret(a1, a2),
            ScheduleSpec::Tracking { b1, b2, p, q } => StepSchedule::tracking(b1, b2, p, q),
            ScheduleSpec::Averaged { b1, b2, p, q } => StepSchedule::averaged(b1, b2, p, q),
            ScheduleSpec::Bandit { d1, d2, d3 } => StepSchedule::bandit(d1, d2, d3),
        }?;
        s.with_horizon(self.horizon)
    }

    pub fn n_players(&self) -> usize {
        match &self.game {
            GameSpec::NashCournot { players, .. } => *players,
            GameSpec::Quadratic { players, .. } => players.len(),
        }
    }

    pub fn graph(&self) -> Result<CommGraph> {
        let n = self.n_players();
        let g = match &self.graph {
            GraphSpec::Complete => CommGraph::complete(n),
            GraphSpec::Ring => CommGraph::ring(n),
            GraphSpec::StarMetropolis => CommGraph::star(n),
            GraphSpec::Metropolis { edges } => CommGraph::metropolis(n, edges),
            GraphSpec::Explicit { weights } => CommGraph::from_rows(weights),
        }?;
        if g.n_players() != n {
            return Err(Error::DimensionMismatch {
                context: "graph size vs number of players",
                expected: n,
                got: g.n_players(),
            });
        }
        Ok(g)
    }

    pub fn game(&self) -> Result<BuiltGame> {
        match &self.game {
            GameSpec::NashCournot {
                variant,
                players,
                interior,
                lambda,
            } => {
                let mut g = NashCournot::with_lambda(*variant, *players, lambda.unwrap_or(1.0))?;
                if let Some(b) = interior {
                    g = g.with_interior(b.point, b.radius)?;
                }
                let limit: Option<Box<dyn LimitGame>> = match variant {
                    CournotVariant::Converging => Some(Box::new(g.limit())),
                    CournotVariant::Oscillating => None,
                };
                Ok((Box::new(g), limit))
            }
            GameSpec::Quadratic { time, players, lambda } => {
                let players = players.iter().map(QuadraticPlayerSpec::build).collect::<Result<_>>()?;
                let g = QuadraticGame::new(players, *time, lambda.unwrap_or(1.0))?;
                let limit: Option<Box<dyn LimitGame>> = match time {
                    TimeProfile::Oscillating { .. } => None,
                    _ => Some(Box::new(g.clone())),
                };
                Ok((Box::new(g), limit))
            }
        }
    }

    pub fn build(&self) -> Result<Built> {
        let (game, limit) = self.game()?;
        Ok(Built {
            game,
            limit,
            graph: self.graph()?,
            schedule: self.schedule()?,
        })
    }

    /// Command-line overrides; a seed replaces the seed list.
    pub fn apply_overrides(&mut self, seed: Option<u64>, horizon: Option<u64>, no_checks: bool, out: Option<PathBuf>) {
        if let Some(s) = seed {
            self.seeds = vec![s];
        }
        if let Some(h) = horizon {
            self.horizon = h;
        }
        if no_checks {
            self.check_invariants = false;
        }
        if out.is_some() {
            self.out = out;
        }
    }

    pub fn horizons(&self) -> Vec<usize> {
        let max = self.horizon as usize;
        let mut grid = crate::metrics::horizon_grid(self.metrics.horizon_step, max);
        if grid.last() != Some(&max) {
            grid.push(max);
        }
        grid
    }
}

impl QuadraticPlayerSpec {
    fn build(&self) -> Result<QuadraticPlayer> {
        let mut set = FeasibleSet::new(self.set.clone())?;
        match (&self.interior_point, self.interior_radius) {
            (Some(p), Some(r)) => set = set.with_interior(p.clone(), r)?,
            (None, None) => {}
            _ => {
                return Err(Error::Config(
                    "interior_point and interior_radius must be given together".into(),
                ))
            }
        }
        let n = set.dim();
        let m = self.constraint_offset.len();
        Ok(QuadraticPlayer {
            set,
            quad: self.quad.clone(),
            linear: self.linear.clone(),
            linear_amp: self.linear_amp.clone().unwrap_or_else(|| vec![0.0; n]),
            coupling: self.coupling.clone(),
            constraint_matrix: self.constraint_matrix.clone(),
            constraint_offset: self.constraint_offset.clone(),
            constraint_amp: self.constraint_amp.clone().unwrap_or_else(|| vec![0.0; m]),
        })
    }
}

/// The presets shipped with the crate, by name.
pub const PRESETS: [(&str, &str); 4] = [
    ("cournot-regret", include_str!("../presets/cournot-regret.toml")),
    ("cournot-bandit", include_str!("../presets/cournot-bandit.toml")),
    ("cournot-tracking", include_str!("../presets/cournot-tracking.toml")),
    ("cournot-averaged", include_str!("../presets/cournot-averaged.toml")),
];

pub fn preset(name: &str) -> Result<ExperimentConfig> {
    let text = PRESETS
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, t)| *t)
        .ok_or_else(|| Error::Config(format!("unknown preset {name:?}")))?;
    ExperimentConfig::from_toml(text)
}
