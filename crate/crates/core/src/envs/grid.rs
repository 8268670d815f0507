//! Key-Door-Treasure gridworld.
//!
//! Map files use one character per cell, one row per line, top row first:
//! `#` wall, `.` floor, `S` start, `K` key, `D` door, `T` treasure.
//! Coordinates are `(x, y)` with `x` the column and `y` counted upward from
//! the bottom row, so the start room sits at small `x` and `y`.

use std::collections::VecDeque;
use std::str::FromStr;

use super::{ActionSpace, EnvSpec, Environment, StepOutcome};
use crate::error::{Error, Result};
use crate::trajectory::{ActionValue, Observation};

pub const KDT_MAP: &str = include_str!("../../maps/kdt.map");
pub const KDT_SMALL_MAP: &str = include_str!("../../maps/kdt-small.map");

pub const TREASURE_REWARD: f64 = 200.0;
pub(super) const DEFAULT_MAX_STEPS: usize = 400;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Move {
    South = 0,
    North = 1,
    East = 2,
    West = 3,
}

impl Move {
    pub const ALL: [Move; 4] = [Move::South, Move::North, Move::East, Move::West];

    pub fn from_index(i: usize) -> Option<Move> {
        Move::ALL.get(i).copied()
    }

    fn delta(self) -> (i64, i64) {
        match self {
            Move::South => (0, -1),
            Move::North => (0, 1),
            Move::East => (1, 0),
            Move::West => (-1, 0),
        }
    }
}

pub type Cell = (usize, usize);

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GridMap {
    width: usize,
    height: usize,
    walls: Vec<bool>,
    pub start: Cell,
    pub key: Cell,
    pub door: Cell,
    pub treasure: Cell,
}

impl FromStr for GridMap {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let rows: Vec<&str> = text.lines().map(str::trim_end).filter(|l| !l.is_empty()).collect();
        let height = rows.len();
        if height == 0 {
            return Err(Error::Map("map is empty".into()));
        }
        let width = rows[0].chars().count();
        let mut walls = vec![false; width * height];
        let (mut start, mut key, mut door, mut treasure) = (None, None, None, None);
        for (r, row) in rows.iter().enumerate() {
            if row.chars().count() != width {
                return Err(Error::Map(format!(
                    "row {} has {} columns, expected {width}",
                    r + 1,
                    row.chars().count()
                )));
            }
            let y = height - 1 - r;
            for (x, c) in row.chars().enumerate() {
                let slot = match c {
                    '#' => {
                        walls[y * width + x] = true;
                        continue;
                    }
                    '.' => continue,
                    'S' => &mut start,
                    'K' => &mut key,
                    'D' => &mut door,
                    'T' => &mut treasure,
                    other => {
                        return Err(Error::Map(format!("unknown map character {other:?} at row {}", r + 1)));
                    }
                };
                if slot.replace((x, y)).is_some() {
                    return Err(Error::Map(format!("map has more than one {c:?}")));
                }
            }
        }
        let need = |cell: Option<Cell>, name: &str| cell.ok_or_else(|| Error::Map(format!("map has no {name}")));
        let map = GridMap {
            width,
            height,
            walls,
            start: need(start, "start 'S'")?,
            key: need(key, "key 'K'")?,
            door: need(door, "door 'D'")?,
            treasure: need(treasure, "treasure 'T'")?,
        };
        map.validate()?;
        Ok(map)
    }
}

impl GridMap {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn is_wall(&self, (x, y): Cell) -> bool {
        self.walls[y * self.width + x]
    }

    fn neighbour(&self, (x, y): Cell, mv: Move) -> Option<Cell> {
        let (dx, dy) = mv.delta();
        let nx = x as i64 + dx;
        let ny = y as i64 + dy;
        if nx < 0 || ny < 0 || nx >= self.width as i64 || ny >= self.height as i64 {
            return None;
        }
        let cell = (nx as usize, ny as usize);
        (!self.is_wall(cell)).then_some(cell)
    }

    /// Floor cells reachable from `from` when the door is treated as a wall (`door_open == false`).
    fn reachable(&self, from: Cell, door_open: bool) -> Vec<bool> {
        let mut seen = vec![false; self.width * self.height];
        let mut queue = VecDeque::from([from]);
        seen[from.1 * self.width + from.0] = true;
        while let Some(cell) = queue.pop_front() {
            for mv in Move::ALL {
                if let Some(next) = self.neighbour(cell, mv) {
                    if next == self.door && !door_open {
                        continue;
                    }
                    let idx = next.1 * self.width + next.0;
                    if !seen[idx] {
                        seen[idx] = true;
                        queue.push_back(next);
                    }
                }
            }
        }
        seen
    }

    /// Key reachable without the door; treasure reachable only through it.
    pub fn validate(&self) -> Result<()> {
        let idx = |(x, y): Cell| y * self.width + x;
        let closed = self.reachable(self.start, false);
        if !closed[idx(self.key)] {
            return Err(Error::Map("key is not reachable from the start without the door".into()));
        }
        if closed[idx(self.treasure)] {
            return Err(Error::Map("treasure is reachable without passing the door".into()));
        }
        let open = self.reachable(self.start, true);
        if !open[idx(self.treasure)] {
            return Err(Error::Map("treasure is unreachable from the start".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct GridState {
    pub position: Cell,
    pub has_key: bool,
    pub door_open: bool,
    pub steps: usize,
}

impl GridState {
    pub fn initial(map: &GridMap) -> Self {
        GridState {
            position: map.start,
            has_key: false,
            door_open: false,
            steps: 0,
        }
    }

    pub fn observation(&self) -> Observation {
        Observation(vec![
            self.position.0 as f64,
            self.position.1 as f64,
            f64::from(u8::from(self.has_key)),
            f64::from(u8::from(self.door_open)),
        ])
    }
}

/// One deterministic transition. Returns `(next, reward, reached_treasure)`;
/// the episode cap is the caller's concern.
pub fn grid_step(map: &GridMap, state: &GridState, mv: Move) -> (GridState, f64, bool) {
    let mut next = *state;
    next.steps += 1;
    let Some(target) = map.neighbour(state.position, mv) else {
        return (next, 0.0, false);
    };
    if target == map.door && !state.door_open {
        if !state.has_key {
            return (next, 0.0, false);
        }
        next.door_open = true;
    }
    next.position = target;
    if target == map.key {
        next.has_key = true;
    }
    if target == map.treasure {
        return (next, TREASURE_REWARD, true);
    }
    (next, 0.0, false)
}

#[derive(Debug, Clone)]
pub struct GridWorld {
    map: GridMap,
    state: GridState,
    spec: EnvSpec,
}

impl GridWorld {
    pub fn new(map: GridMap, max_steps: usize) -> Result<Self> {
        if max_steps == 0 {
            return Err(Error::Config("max_steps must be at least 1".into()));
        }
        let spec = EnvSpec {
            observation_dim: 4,
            action_space: ActionSpace::Discrete(4),
            max_steps,
            reward_range: (0.0, TREASURE_REWARD),
            observation_scale: vec![(map.width - 1) as f64, (map.height - 1) as f64, 1.0, 1.0],
        };
        Ok(GridWorld {
            state: GridState::initial(&map),
            map,
            spec,
        })
    }

    pub fn map(&self) -> &GridMap {
        &self.map
    }

    pub fn state(&self) -> &GridState {
        &self.state
    }

    /// Shortest action sequence from `from` to the treasure, expanding moves in
    /// `Move::ALL` order so the result is deterministic.
    pub fn shortest_plan(&self, from: &GridState) -> Result<Vec<Move>> {
        type Key = (Cell, bool, bool);
        let key_of = |s: &GridState| (s.position, s.has_key, s.door_open);
        let mut parent: std::collections::HashMap<Key, (Key, Move)> = std::collections::HashMap::new();
        let start = key_of(from);
        let mut queue = VecDeque::from([*from]);
        let mut visited = std::collections::HashSet::from([start]);
        while let Some(state) = queue.pop_front() {
            for mv in Move::ALL {
                let (next, _, reached) = grid_step(&self.map, &state, mv);
                let k = key_of(&next);
                if !visited.insert(k) {
                    continue;
                }
                parent.insert(k, (key_of(&state), mv));
                if reached {
                    let mut plan = vec![mv];
                    let mut cur = key_of(&state);
                    while cur != start {
                        let (prev, m) = parent[&cur];
                        plan.push(m);
                        cur = prev;
                    }
                    plan.reverse();
                    return Ok(plan);
                }
                queue.push_back(next);
            }
        }
        Err(Error::Map("treasure is unreachable from this state".into()))
    }
}

impl Environment for GridWorld {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn reset(&mut self, _seed: u64) -> Observation {
        self.state = GridState::initial(&self.map);
        self.state.observation()
    }

    fn step(&mut self, action: &ActionValue) -> Result<StepOutcome> {
        let mv = action
            .as_discrete()
            .and_then(Move::from_index)
            .ok_or_else(|| Error::Usage(format!("gridworld action must be 0..=3, got {action:?}")))?;
        let (next, reward, reached) = grid_step(&self.map, &self.state, mv);
        self.state = next;
        Ok(StepOutcome {
            observation: next.observation(),
            reward,
            done: reached || next.steps >= self.spec.max_steps,
            success: reached,
        })
    }
}
