//! The demonstration buffer: offline trajectories the agent is steered towards,
//! with return-ordered replacement and scripted experts to produce them.

use std::fs;
use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::envs::{EnvName, Environment, GridState, GridWorld, Move, PointMass};
use crate::error::{Error, Result};
use crate::trajectory::{ActionValue, Trajectory, Transition};

pub const DEFAULT_DEMO_COUNT: usize = 5;

#[derive(Debug, Clone, PartialEq)]
pub struct DemoBuffer {
    demos: Vec<Trajectory>,
    capacity: usize,
    replacement_enabled: bool,
}

impl DemoBuffer {
    pub fn from_trajectories(demos: Vec<Trajectory>, capacity: usize, replacement_enabled: bool) -> Result<Self> {
        if demos.is_empty() {
            return Err(Error::Config("demonstration buffer must hold at least one trajectory".into()));
        }
        if demos.len() > capacity {
            return Err(Error::Config(format!(
                "{} demonstrations exceed buffer capacity {capacity}",
                demos.len()
            )));
        }
        for (i, d) in demos.iter().enumerate() {
            if d.is_empty() {
                return Err(Error::Config(format!("demonstration {} is empty", d.id())));
            }
            if demos[..i].iter().any(|o| o.id() == d.id()) {
                return Err(Error::Config(format!("duplicate demonstration id {}", d.id())));
            }
        }
        Ok(DemoBuffer {
            demos,
            capacity,
            replacement_enabled,
        })
    }

    pub fn len(&self) -> usize {
        self.demos.len()
    }

    pub fn is_empty(&self) -> bool {
        self.demos.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn replacement_enabled(&self) -> bool {
        self.replacement_enabled
    }

    pub fn set_replacement(&mut self, enabled: bool) {
        self.replacement_enabled = enabled;
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Trajectory> {
        self.demos.iter()
    }

    pub fn demos(&self) -> &[Trajectory] {
        &self.demos
    }

    pub fn max_id(&self) -> u64 {
        self.demos.iter().map(Trajectory::id).max().unwrap_or(0)
    }

    pub fn min_return(&self) -> f64 {
        self.demos
            .iter()
            .map(Trajectory::episode_return)
            .fold(f64::INFINITY, f64::min)
    }

    /// Swaps the lowest-return demonstration for `candidate` when the candidate's
    /// return is strictly higher. Equal returns never replace.
    pub fn maybe_replace(&mut self, candidate: &Trajectory) -> bool {
        if !self.replacement_enabled || candidate.is_empty() {
            return false;
        }
        if self.demos.iter().any(|d| d.id() == candidate.id()) {
            return false;
        }
        let Some((worst, _)) = self
            .demos
            .iter()
            .enumerate()
            .min_by(|(_, a), (_, b)| a.episode_return().total_cmp(&b.episode_return()))
        else {
            return false;
        };
        if candidate.episode_return() > self.demos[worst].episode_return() {
            self.demos[worst] = candidate.clone();
            true
        } else {
            false
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut text = String::new();
        for d in &self.demos {
            text.push_str(&d.to_line());
            text.push('\n');
        }
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}

/// Reads one trajectory per non-blank line. Capacity equals the record count.
pub fn load_demos(path: impl AsRef<Path>) -> Result<DemoBuffer> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut demos = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let traj = Trajectory::from_line(line).map_err(|message| Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            message,
        })?;
        demos.push(traj);
    }
    if demos.is_empty() {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: 0,
            message: "no demonstrations in file".into(),
        });
    }
    let capacity = demos.len();
    DemoBuffer::from_trajectories(demos, capacity, true)
}

/// Follows a breadth-first shortest plan start -> key -> door -> treasure.
/// With `noise > 0`, each step is replaced by a uniformly random move with that
/// probability and the plan is recomputed from wherever the agent ends up.
pub fn scripted_expert_gridworld(world: &mut GridWorld, id: u64, noise: f64, rng: &mut impl Rng) -> Result<Trajectory> {
    let mut obs = world.reset(0);
    let mut plan = world.shortest_plan(world.state())?;
    plan.reverse();
    let mut traj = Trajectory::new(id);
    loop {
        let mv = if noise > 0.0 && rng.random::<f64>() < noise {
            plan.clear();
            Move::ALL[rng.random_range(0..4)]
        } else {
            if plan.is_empty() {
                plan = world.shortest_plan(&GridState { steps: 0, ..*world.state() })?;
                plan.reverse();
            }
            plan.pop().expect("plan to the treasure is non-empty")
        };
        let action = ActionValue::Discrete(mv as usize);
        let out = world.step(&action)?;
        traj.push(Transition {
            state: obs,
            action,
            extrinsic_reward: out.reward,
            next_state: out.observation.clone(),
            done: out.done,
            log_prob: 0.0,
        })?;
        obs = out.observation;
        if out.done {
            if !out.success {
                return Err(Error::Generation(format!(
                    "expert did not reach the treasure within {} steps",
                    world.spec().max_steps
                )));
            }
            return Ok(traj);
        }
    }
}

const PD_GAIN: f64 = 1.0;
const PD_DAMPING: f64 = 1.8;
const PD_MARGIN: f64 = 2.0;

/// Proportional-derivative controller that drives the mass to a point
/// `PD_MARGIN` beyond the threshold on the x axis while holding y at zero.
pub fn scripted_expert_pointmass(
    env: &mut PointMass,
    id: u64,
    reset_seed: u64,
    noise: f64,
    rng: &mut impl Rng,
) -> Result<Trajectory> {
    let target = env.config().threshold + PD_MARGIN;
    let mut obs = env.reset(reset_seed);
    let mut traj = Trajectory::new(id);
    loop {
        let s = *env.state();
        let action = if noise > 0.0 && rng.random::<f64>() < noise {
            vec![rng.random_range(-1.0..=1.0), rng.random_range(-1.0..=1.0)]
        } else {
            vec![
                (PD_GAIN * (target - s.position[0]) - PD_DAMPING * s.velocity[0]).clamp(-1.0, 1.0),
                (-PD_GAIN * s.position[1] - PD_DAMPING * s.velocity[1]).clamp(-1.0, 1.0),
            ]
        };
        let action = ActionValue::Continuous(action);
        let out = env.step(&action)?;
        traj.push(Transition {
            state: obs,
            action,
            extrinsic_reward: out.reward,
            next_state: out.observation.clone(),
            done: out.done,
            log_prob: 0.0,
        })?;
        obs = out.observation;
        if out.done {
            if !out.success {
                return Err(Error::Generation(format!(
                    "controller did not cross x = {} within {} steps",
                    env.config().threshold,
                    env.config().max_steps
                )));
            }
            return Ok(traj);
        }
    }
}

/// `count` scripted demonstrations with ids `0..count`.
pub fn generate_demos(env: EnvName, count: usize, noise: f64, seed: u64, max_steps: Option<usize>) -> Result<DemoBuffer> {
    if count == 0 {
        return Err(Error::Config("demo count must be positive".into()));
    }
    if !(0.0..=1.0).contains(&noise) {
        return Err(Error::Config(format!("demo noise must lie in [0, 1], got {noise}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut demos = Vec::with_capacity(count);
    if let Some(map) = env.grid_map() {
        let mut world = GridWorld::new(map?, max_steps.unwrap_or(400))?;
        for id in 0..count as u64 {
            demos.push(scripted_expert_gridworld(&mut world, id, noise, &mut rng)?);
        }
    } else {
        let mut cfg = env.pointmass_config().expect("non-grid envs are point-mass");
        if let Some(steps) = max_steps {
            cfg.max_steps = steps;
        }
        let mut pm = PointMass::new(cfg)?;
        for id in 0..count as u64 {
            demos.push(scripted_expert_pointmass(&mut pm, id, seed.wrapping_add(id), noise, &mut rng)?);
        }
    }
    DemoBuffer::from_trajectories(demos, count, true)
}
