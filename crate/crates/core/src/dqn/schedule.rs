use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Linear ε annealing, constant at `end` after `anneal_transitions`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpsilonSchedule {
    pub start: f64,
    pub end: f64,
    pub anneal_transitions: usize,
}

impl Default for EpsilonSchedule {
    fn default() -> Self {
        Self {
            start: 1.0,
            end: 0.02,
            anneal_transitions: 10_000,
        }
    }
}

impl EpsilonSchedule {
    pub fn at(&self, transitions: usize) -> f64 {
        if self.anneal_transitions == 0 || transitions >= self.anneal_transitions {
            return self.end;
        }
        let frac = transitions as f64 / self.anneal_transitions as f64;
        self.start + (self.end - self.start) * frac
    }

    pub fn validate(&self) -> Result<()> {
        for v in [self.start, self.end] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Config(format!("epsilon {v} outside [0, 1]")));
            }
        }
        Ok(())
    }
}

/// Piecewise-constant learning rate keyed by epoch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LearningRateSchedule(Vec<(usize, f64)>);

impl Default for LearningRateSchedule {
    fn default() -> Self {
        Self(vec![(0, 0.05), (20, 0.01), (30, 0.005), (50, 0.001)])
    }
}

impl LearningRateSchedule {
    pub fn new(breakpoints: Vec<(usize, f64)>) -> Result<Self> {
        let s = Self(breakpoints);
        s.validate()?;
        Ok(s)
    }

    pub fn breakpoints(&self) -> &[(usize, f64)] {
        &self.0
    }

    pub fn validate(&self) -> Result<()> {
        let Some(&(first, _)) = self.0.first() else {
            return Err(Error::Config("learning rate schedule is empty".into()));
        };
        if first != 0 {
            return Err(Error::Config(
                "learning rate schedule must start at epoch 0".into(),
            ));
        }
        if self.0.windows(2).any(|w| w[0].0 >= w[1].0) {
            return Err(Error::Config(
                "learning rate breakpoints must be strictly increasing".into(),
            ));
        }
        if self.0.iter().any(|&(_, r)| !(r.is_finite() && r >= 0.0)) {
            return Err(Error::Config(
                "learning rates must be finite and >= 0".into(),
            ));
        }
        Ok(())
    }

    pub fn at(&self, epoch: usize) -> f64 {
        self.0
            .iter()
            .take_while(|&&(start, _)| start <= epoch)
            .last()
            .map_or(self.0[0].1, |&(_, r)| r)
    }
}
