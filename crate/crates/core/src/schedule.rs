//! Search-then-convergence decay for the exploration rate and the number of
//! planning steps.
//!
//! `value(t) = max(initial / (1 + t²/(smoothing + t)), floor)`, where `t`
//! counts environment steps across all episodes of a run.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StcSchedule {
    pub initial: f64,
    pub floor: f64,
    pub smoothing: f64,
}

impl StcSchedule {
    pub fn new(initial: f64, floor: f64, smoothing: f64) -> Result<Self> {
        let s = Self {
            initial,
            floor,
            smoothing,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        let Self {
            initial,
            floor,
            smoothing,
        } = *self;
        if !(initial > 0.0 && initial.is_finite()) {
            return Err(Error::Config(format!(
                "STC initial value must be > 0, got {initial}"
            )));
        }
        if !(floor >= 0.0 && floor <= initial) {
            return Err(Error::Config(format!(
                "STC floor must lie in [0, initial], got {floor} with initial {initial}"
            )));
        }
        if !(smoothing > 0.0 && smoothing.is_finite()) {
            return Err(Error::Config(format!(
                "STC smoothing must be > 0, got {smoothing}"
            )));
        }
        Ok(())
    }

    pub fn value(&self, t: u64) -> f64 {
        let t = t as f64;
        let y = t * t / (self.smoothing + t);
        (self.initial / (1.0 + y)).max(self.floor)
    }

    /// Integer planning depth: the decayed value rounded half-to-even.
    pub fn steps(&self, t: u64) -> usize {
        let floor = self.floor.round_ties_even();
        self.value(t).round_ties_even().max(floor) as usize
    }
}

/// Exploration rate or planning depth as a function of the global step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum Schedule {
    Constant { value: f64 },
    Stc(StcSchedule),
}

impl Schedule {
    pub const ZERO: Schedule = Schedule::Constant { value: 0.0 };

    pub fn constant(value: f64) -> Self {
        Schedule::Constant { value }
    }

    pub fn stc(initial: f64, floor: f64, smoothing: f64) -> Result<Self> {
        StcSchedule::new(initial, floor, smoothing).map(Schedule::Stc)
    }

    pub fn value(&self, t: u64) -> f64 {
        match self {
            Schedule::Constant { value } => *value,
            Schedule::Stc(s) => s.value(t),
        }
    }

    pub fn steps(&self, t: u64) -> usize {
        match self {
            Schedule::Constant { value } => value.round_ties_even().max(0.0) as usize,
            Schedule::Stc(s) => s.steps(t),
        }
    }

    pub fn is_stc(&self) -> bool {
        matches!(self, Schedule::Stc(_))
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Schedule::Constant { value } if *value == 0.0)
    }

    /// Sum of `steps(t)` over `t` in `0..horizon`.
    pub fn total_steps(&self, horizon: u64) -> u64 {
        (0..horizon).map(|t| self.steps(t) as u64).sum()
    }
}
