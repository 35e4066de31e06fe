//! Power-law step sizes `α_t = t^{-a1}`, `β_t = t^{-a2}`, `γ_t = t^{-(1-a2)}`
//! with `α_0 = β_0 = γ_0 = 1`.
//!
//! The exponent conditions depend on what the run is meant to demonstrate,
//! so the schedule carries a [`ScheduleMode`] and validates against it.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum ScheduleMode {
    /// Sublinear regret and violation: `0 < 2a2 < a1 < 1`.
    Regret,
    /// Last-iterate tracking of the limit GNE when the gaps decay like
    /// `H = O(t^{-p})`, `K = O(t^{-q})`.
    Tracking { p: f64, q: f64 },
    /// Averaged-iterate convergence: `0 < 2a2 < a1 < 1`, `a2 < q`.
    Averaged { p: f64, q: f64 },
    /// Payoff-based learning with query radius `δ_t = O(t^{-d3})`.
    Bandit { d3: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepSchedule {
    a1: f64,
    a2: f64,
    mode: ScheduleMode,
    horizon: Option<u64>,
}

fn open_unit(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 && v < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidSchedule(format!("{name} = {v} must lie in (0, 1)")))
    }
}

fn require(cond: bool, what: &str, a1: f64, a2: f64) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::InvalidSchedule(format!("{what} fails for exponents ({a1}, {a2})")))
    }
}

impl StepSchedule {
    pub fn regret(a1: f64, a2: f64) -> Result<Self> {
        Self::new(a1, a2, ScheduleMode::Regret)
    }

    pub fn tracking(b1: f64, b2: f64, p: f64, q: f64) -> Result<Self> {
        Self::new(b1, b2, ScheduleMode::Tracking { p, q })
    }

    pub fn averaged(b1: f64, b2: f64, p: f64, q: f64) -> Result<Self> {
        Self::new(b1, b2, ScheduleMode::Averaged { p, q })
    }

    pub fn bandit(d1: f64, d2: f64, d3: f64) -> Result<Self> {
        Self::new(d1, d2, ScheduleMode::Bandit { d3 })
    }

    pub fn new(a1: f64, a2: f64, mode: ScheduleMode) -> Result<Self> {
        if !a1.is_finite() || !a2.is_finite() {
            return Err(Error::InvalidSchedule("exponents must be finite".into()));
        }
        match mode {
            ScheduleMode::Regret => {
                open_unit("a1", a1)?;
                require(0.0 < 2.0 * a2 && 2.0 * a2 < a1, "0 < 2·a2 < a1", a1, a2)?;
            }
            ScheduleMode::Tracking { p, q } => {
                require(0.0 < a2 && a2 < 0.5, "0 < b2 < 0.5", a1, a2)?;
                require(0.5 + a2 < a1 && a1 <= 1.0, "0.5 + b2 < b1 <= 1", a1, a2)?;
                require(a1 + a2 > 1.0, "b1 + b2 > 1", a1, a2)?;
                require(p > 0.0 && q > 0.0, "positive gap rates p, q", a1, a2)?;
                require(a1 + p > 1.0, "b1 + p > 1", a1, a2)?;
                require(a1 - a2 + q > 1.0, "b1 - b2 + q > 1", a1, a2)?;
            }
            ScheduleMode::Averaged { p, q } => {
                open_unit("b1", a1)?;
                require(0.0 < 2.0 * a2 && 2.0 * a2 < a1, "0 < 2·b2 < b1", a1, a2)?;
                require(p > 0.0 && a2 < q, "p > 0 and b2 < q", a1, a2)?;
            }
            ScheduleMode::Bandit { d3 } => {
                open_unit("d1", a1)?;
                require(0.0 < 2.0 * a2 && 2.0 * a2 < a1, "0 < 2·d2 < d1", a1, a2)?;
                if !(a2 < d3 && d3 < a1) {
                    return Err(Error::InvalidSchedule(format!(
                        "d2 < d3 < d1 fails for (d1, d2, d3) = ({a1}, {a2}, {d3})"
                    )));
                }
            }
        }
        Ok(Self {
            a1,
            a2,
            mode,
            horizon: None,
        })
    }

    /// Declares the run length; `1/γ_t − 1/γ_{t−1} − β_t ≤ 0` is checked
    /// for every `t ≤ horizon`.
    pub fn with_horizon(mut self, horizon: u64) -> Result<Self> {
        if horizon == 0 {
            return Err(Error::InvalidSchedule("horizon must be at least 1".into()));
        }
        if let Some(t) = self.first_chain_failure(horizon) {
            return Err(Error::InvalidSchedule(format!(
                "1/γ_t − 1/γ_(t−1) − β_t > 0 at t = {t}"
            )));
        }
        self.horizon = Some(horizon);
        Ok(self)
    }

    fn first_chain_failure(&self, horizon: u64) -> Option<u64> {
        (1..=horizon).find(|&t| 1.0 / self.gamma(t) - 1.0 / self.gamma(t - 1) - self.beta(t) > 1e-12)
    }

    pub fn exponents(&self) -> (f64, f64) {
        (self.a1, self.a2)
    }

    pub fn mode(&self) -> ScheduleMode {
        self.mode
    }

    pub fn horizon(&self) -> Option<u64> {
        self.horizon
    }

    /// Decay exponent of the bandit query radius.
    pub fn radius_exponent(&self) -> Option<f64> {
        match self.mode {
            ScheduleMode::Bandit { d3 } => Some(d3),
            _ => None,
        }
    }

    fn power(t: u64, e: f64) -> f64 {
        if t == 0 {
            1.0
        } else {
            (t as f64).powf(-e)
        }
    }

    pub fn alpha(&self, t: u64) -> f64 {
        Self::power(t, self.a1)
    }

    pub fn beta(&self, t: u64) -> f64 {
        Self::power(t, self.a2)
    }

    pub fn gamma(&self, t: u64) -> f64 {
        Self::power(t, 1.0 - self.a2)
    }

    pub(crate) fn check_round(&self, t: u64) -> Result<()> {
        match self.horizon {
            Some(h) if t > h => Err(Error::ScheduleExhausted { t, horizon: h }),
            _ => Ok(()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn benchmark_exponents_are_accepted() {
        let s = StepSchedule::regret(0.8, 0.3).unwrap().with_horizon(5000).unwrap();
        assert_eq!(s.alpha(0), 1.0);
        assert_eq!(s.gamma(0), 1.0);
        assert_relative_eq!(s.alpha(32), 32f64.powf(-0.8));
        assert_relative_eq!(s.gamma(10), 0.1f64.powf(0.7));
        StepSchedule::tracking(1.0, 0.25, 1.0, 1.0).unwrap().with_horizon(20_000).unwrap();
        StepSchedule::averaged(0.6, 0.2, 1.0, 1.0).unwrap();
        StepSchedule::bandit(0.75, 0.25, 0.5).unwrap();
    }

    #[test]
    fn exponent_regions_are_enforced() {
        assert!(StepSchedule::regret(0.5, 0.3).is_err());
        assert!(StepSchedule::regret(1.0, 0.3).is_err());
        assert!(StepSchedule::regret(0.8, 0.0).is_err());
        assert!(StepSchedule::bandit(0.75, 0.25, 0.25).is_err());
        assert!(StepSchedule::bandit(0.75, 0.25, 0.75).is_err());
        assert!(StepSchedule::tracking(0.7, 0.25, 1.0, 1.0).is_err());
        assert!(StepSchedule::tracking(1.0, 0.25, 0.0, 1.0).is_err());
        assert!(StepSchedule::tracking(0.9, 0.2, 1.0, 0.2).is_err());
        assert!(StepSchedule::averaged(0.6, 0.2, 1.0, 0.1).is_err());
        assert!(StepSchedule::regret(0.8, 0.3).unwrap().with_horizon(0).is_err());
    }

    #[test]
    fn exhaustion_is_reported() {
        let s = StepSchedule::regret(0.8, 0.3).unwrap().with_horizon(10).unwrap();
        assert!(s.check_round(10).is_ok());
        assert!(matches!(s.check_round(11), Err(Error::ScheduleExhausted { t: 11, horizon: 10 })));
    }

    proptest! {
        // concavity of t ↦ t^{1-a2} makes the chain hold for any valid a2
        #[test]
        fn chain_holds_for_valid_exponents(a2 in 0.01f64..0.49, slack in 0.01f64..0.5) {
            let a1 = (2.0 * a2 + slack * (1.0 - 2.0 * a2)).min(0.999);
            prop_assume!(a1 > 2.0 * a2);
            let s = StepSchedule::regret(a1, a2).unwrap();
            prop_assert!(s.first_chain_failure(2000).is_none());
        }
    }
}
