//! Sparse point-mass locomotion: a damped double integrator in the plane that
//! earns forward velocity only once it has travelled past a threshold along x,
//! and pays a small quadratic energy cost for every action.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{ActionSpace, EnvSpec, Environment, StepOutcome};
use crate::error::{Error, Result};
use crate::trajectory::{ActionValue, Observation};

/// Largest terminal speed under full thrust: `step_size / (1 - damping)`.
const MAX_SPEED: f64 = 5.0;

#[derive(Debug, Clone, PartialEq)]
pub struct PointMassConfig {
    pub threshold: f64,
    pub max_steps: usize,
    pub step_size: f64,
    pub damping: f64,
    pub energy_cost: f64,
    /// Positions are clipped to `[-arena, arena]` per axis.
    pub arena: f64,
    pub reset_noise: f64,
}

impl Default for PointMassConfig {
    fn default() -> Self {
        PointMassConfig {
            threshold: 1.0,
            max_steps: 200,
            step_size: 0.05,
            damping: 0.99,
            energy_cost: 0.001,
            arena: 50.0,
            reset_noise: 0.01,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointMassState {
    pub position: [f64; 2],
    pub velocity: [f64; 2],
}

impl PointMassState {
    pub fn observation(&self) -> Observation {
        Observation(vec![self.position[0], self.position[1], self.velocity[0], self.velocity[1]])
    }
}

/// Reward evaluated on the post-step state.
pub fn pointmass_reward(cfg: &PointMassConfig, state: &PointMassState, action: [f64; 2]) -> f64 {
    let gate = if state.position[0] >= cfg.threshold {
        state.velocity[0]
    } else {
        0.0
    };
    gate - cfg.energy_cost * (action[0] * action[0] + action[1] * action[1])
}

#[derive(Debug, Clone)]
pub struct PointMass {
    cfg: PointMassConfig,
    state: PointMassState,
    steps: usize,
    crossed: bool,
    spec: EnvSpec,
}

impl PointMass {
    pub fn new(cfg: PointMassConfig) -> Result<Self> {
        if cfg.max_steps == 0 {
            return Err(Error::Config("max_steps must be at least 1".into()));
        }
        if !(cfg.threshold.is_finite() && cfg.step_size > 0.0 && cfg.arena > 0.0) {
            return Err(Error::Config("invalid point-mass configuration".into()));
        }
        let pos_scale = cfg.threshold.abs().max(1.0) * 2.0;
        let spec = EnvSpec {
            observation_dim: 4,
            action_space: ActionSpace::Continuous {
                dim: 2,
                low: -1.0,
                high: 1.0,
            },
            max_steps: cfg.max_steps,
            reward_range: (-MAX_SPEED - 2.0 * cfg.energy_cost, MAX_SPEED),
            observation_scale: vec![pos_scale, pos_scale, MAX_SPEED / 2.0, MAX_SPEED / 2.0],
        };
        Ok(PointMass {
            cfg,
            state: PointMassState {
                position: [0.0; 2],
                velocity: [0.0; 2],
            },
            steps: 0,
            crossed: false,
            spec,
        })
    }

    pub fn config(&self) -> &PointMassConfig {
        &self.cfg
    }

    pub fn state(&self) -> &PointMassState {
        &self.state
    }

    pub fn set_state(&mut self, state: PointMassState) {
        self.state = state;
    }

    fn advance(&mut self, action: [f64; 2]) -> f64 {
        let c = &self.cfg;
        for i in 0..2 {
            self.state.velocity[i] = c.damping * self.state.velocity[i] + c.step_size * action[i];
            self.state.position[i] += c.step_size * self.state.velocity[i];
            if self.state.position[i].abs() > c.arena {
                self.state.position[i] = self.state.position[i].clamp(-c.arena, c.arena);
                self.state.velocity[i] = 0.0;
            }
        }
        pointmass_reward(c, &self.state, action)
    }
}

impl Environment for PointMass {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn reset(&mut self, seed: u64) -> Observation {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        // per-axis bound keeps the Euclidean offset within reset_noise
        let r = self.cfg.reset_noise / std::f64::consts::SQRT_2;
        let position = [rng.random_range(-r..=r), rng.random_range(-r..=r)];
        self.state = PointMassState {
            position,
            velocity: [0.0; 2],
        };
        self.steps = 0;
        self.crossed = false;
        self.state.observation()
    }

    fn step(&mut self, action: &ActionValue) -> Result<StepOutcome> {
        let ActionValue::Continuous(raw) = action else {
            return Err(Error::Usage(format!("point-mass action must be continuous, got {action:?}")));
        };
        if raw.len() != 2 {
            return Err(Error::Usage(format!("point-mass action must have 2 entries, got {}", raw.len())));
        }
        let clip = |v: f64| if v.is_nan() { 0.0 } else { v.clamp(-1.0, 1.0) };
        let reward = self.advance([clip(raw[0]), clip(raw[1])]);
        self.steps += 1;
        self.crossed |= self.state.position[0] >= self.cfg.threshold;
        Ok(StepOutcome {
            observation: self.state.observation(),
            reward,
            done: self.steps >= self.cfg.max_steps,
            success: self.crossed,
        })
    }
}
