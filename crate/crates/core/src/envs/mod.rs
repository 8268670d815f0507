//! Sparse-reward environments behind a common interface.

mod grid;
mod pointmass;

use std::fmt;
use std::str::FromStr;

pub use grid::{grid_step, GridMap, GridState, GridWorld, Move, KDT_MAP, KDT_SMALL_MAP, TREASURE_REWARD};
pub use pointmass::{pointmass_reward, PointMass, PointMassConfig, PointMassState};

use crate::error::{Error, Result};
use crate::trajectory::{ActionValue, Observation};

#[derive(Debug, Clone, PartialEq)]
pub enum ActionSpace {
    Discrete(usize),
    Continuous { dim: usize, low: f64, high: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvSpec {
    pub observation_dim: usize,
    pub action_space: ActionSpace,
    pub max_steps: usize,
    pub reward_range: (f64, f64),
    /// Typical magnitude of each observation entry; networks divide inputs by it.
    pub observation_scale: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub observation: Observation,
    pub reward: f64,
    pub done: bool,
    /// Task-level success so far in this episode.
    pub success: bool,
}

pub trait Environment: Send {
    fn spec(&self) -> &EnvSpec;

    fn reset(&mut self, seed: u64) -> Observation;

    fn step(&mut self, action: &ActionValue) -> Result<StepOutcome>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EnvName {
    Kdt,
    KdtSmall,
    PointMass,
    PointMassFar,
}

impl EnvName {
    pub const ALL: [EnvName; 4] = [EnvName::Kdt, EnvName::KdtSmall, EnvName::PointMass, EnvName::PointMassFar];

    pub fn as_str(self) -> &'static str {
        match self {
            EnvName::Kdt => "kdt",
            EnvName::KdtSmall => "kdt-small",
            EnvName::PointMass => "pointmass",
            EnvName::PointMassFar => "pointmass-far",
        }
    }

    pub fn is_grid(self) -> bool {
        matches!(self, EnvName::Kdt | EnvName::KdtSmall)
    }

    pub fn grid_map(self) -> Option<Result<GridMap>> {
        match self {
            EnvName::Kdt => Some(KDT_MAP.parse()),
            EnvName::KdtSmall => Some(KDT_SMALL_MAP.parse()),
            _ => None,
        }
    }

    pub fn pointmass_config(self) -> Option<PointMassConfig> {
        match self {
            EnvName::PointMass => Some(PointMassConfig::default()),
            EnvName::PointMassFar => Some(PointMassConfig {
                threshold: 10.0,
                ..PointMassConfig::default()
            }),
            _ => None,
        }
    }

    /// Builds an environment, overriding the episode cap when `max_steps` is given.
    pub fn make(self, max_steps: Option<usize>) -> Result<Box<dyn Environment>> {
        if let Some(map) = self.grid_map() {
            let map = map?;
            let steps = max_steps.unwrap_or(grid::DEFAULT_MAX_STEPS);
            return Ok(Box::new(GridWorld::new(map, steps)?));
        }
        let mut cfg = self.pointmass_config().expect("non-grid envs are point-mass");
        if let Some(steps) = max_steps {
            cfg.max_steps = steps;
        }
        Ok(Box::new(PointMass::new(cfg)?))
    }
}

impl fmt::Display for EnvName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EnvName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        EnvName::ALL
            .into_iter()
            .find(|e| e.as_str() == s)
            .ok_or_else(|| {
                Error::Config(format!(
                    "unknown environment {s:?} (expected one of kdt, kdt-small, pointmass, pointmass-far)"
                ))
            })
    }
}
