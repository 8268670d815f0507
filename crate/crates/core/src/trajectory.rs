//! Transition and trajectory data model, the on-policy rollout buffer, and
//! the one-line-per-trajectory text format shared with demonstration files.
//!
//! A serialized trajectory is a single line of whitespace-separated tokens:
//!
//! ```text
//! id=<u64> return=<f64> <step> <step> ...
//! ```
//!
//! where each `<step>` is `state;action;reward;done;next_state;log_prob`.
//! States are bracketed comma lists (`[3,7,0,0]`), a discrete action is a bare
//! index (`2`) and a continuous action is a bracketed list (`[0.5,-1]`), and
//! `done` is `0` or `1`. Reals use the shortest representation that parses
//! back to the same `f64`, so a save/load cycle is exact.

use std::fmt::{self, Write as _};
use std::ops::Deref;

use crate::error::{Error, Result};

/// Tolerance on `episode_return == sum(rewards)`.
pub const RETURN_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct Observation(pub Vec<f64>);

impl Observation {
    pub fn new(values: Vec<f64>) -> Self {
        Observation(values)
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }
}

impl Deref for Observation {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl From<Vec<f64>> for Observation {
    fn from(values: Vec<f64>) -> Self {
        Observation(values)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ActionValue {
    Discrete(usize),
    Continuous(Vec<f64>),
}

impl ActionValue {
    /// Real-valued encoding used for kernel features: the index itself for
    /// discrete actions, the vector for continuous ones.
    pub fn encode_into(&self, out: &mut Vec<f64>) {
        match self {
            ActionValue::Discrete(i) => out.push(*i as f64),
            ActionValue::Continuous(v) => out.extend_from_slice(v),
        }
    }

    pub fn as_discrete(&self) -> Option<usize> {
        match self {
            ActionValue::Discrete(i) => Some(*i),
            ActionValue::Continuous(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub state: Observation,
    pub action: ActionValue,
    pub extrinsic_reward: f64,
    pub next_state: Observation,
    pub done: bool,
    /// Log-density of `action` under the behaviour policy when it was collected.
    pub log_prob: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    id: u64,
    transitions: Vec<Transition>,
    episode_return: f64,
}

impl Trajectory {
    pub fn new(id: u64) -> Self {
        Trajectory {
            id,
            transitions: Vec::new(),
            episode_return: 0.0,
        }
    }

    pub fn id(&self) -> u64 {
        self.id
    }

    pub fn set_id(&mut self, id: u64) {
        self.id = id;
    }

    pub fn transitions(&self) -> &[Transition] {
        &self.transitions
    }

    /// Undiscounted sum of extrinsic rewards.
    pub fn episode_return(&self) -> f64 {
        self.episode_return
    }

    pub fn len(&self) -> usize {
        self.transitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transitions.is_empty()
    }

    /// True once a transition marked `done` has been appended.
    pub fn is_done(&self) -> bool {
        self.transitions.last().is_some_and(|t| t.done)
    }

    pub fn push(&mut self, transition: Transition) -> Result<()> {
        if self.is_done() {
            return Err(Error::Usage(format!(
                "trajectory {} already ended with a done transition",
                self.id
            )));
        }
        self.episode_return += transition.extrinsic_reward;
        self.transitions.push(transition);
        Ok(())
    }

    /// State-action pairs in transition order.
    pub fn flatten_pairs(&self) -> Vec<(&Observation, &ActionValue)> {
        self.transitions
            .iter()
            .map(|t| (&t.state, &t.action))
            .collect()
    }

    pub fn rewards(&self) -> impl Iterator<Item = f64> + '_ {
        self.transitions.iter().map(|t| t.extrinsic_reward)
    }

    pub fn to_line(&self) -> String {
        let mut line = format!("id={} return={}", self.id, self.episode_return);
        for t in &self.transitions {
            line.push(' ');
            write_array(&mut line, &t.state);
            line.push(';');
            match &t.action {
                ActionValue::Discrete(i) => {
                    let _ = write!(line, "{i}");
                }
                ActionValue::Continuous(v) => write_array(&mut line, v),
            }
            let _ = write!(line, ";{};{};", t.extrinsic_reward, u8::from(t.done));
            write_array(&mut line, &t.next_state);
            let _ = write!(line, ";{}", t.log_prob);
        }
        line
    }

    pub fn from_line(line: &str) -> std::result::Result<Trajectory, String> {
        let mut tokens = line.split_whitespace();
        let id = header_field(tokens.next(), "id")?
            .parse::<u64>()
            .map_err(|e| format!("bad id: {e}"))?;
        let declared_return = parse_real(header_field(tokens.next(), "return")?)?;

        let mut traj = Trajectory::new(id);
        for (step, token) in tokens.enumerate() {
            let fields: Vec<&str> = token.split(';').collect();
            if fields.len() != 6 {
                return Err(format!(
                    "step {step}: expected 6 ';'-separated fields, found {}",
                    fields.len()
                ));
            }
            let state = Observation(parse_array(fields[0]).map_err(|e| format!("step {step}: {e}"))?);
            let action = if fields[1].starts_with('[') {
                ActionValue::Continuous(parse_array(fields[1]).map_err(|e| format!("step {step}: {e}"))?)
            } else {
                ActionValue::Discrete(
                    fields[1]
                        .parse::<usize>()
                        .map_err(|e| format!("step {step}: bad action: {e}"))?,
                )
            };
            let reward = parse_real(fields[2]).map_err(|e| format!("step {step}: {e}"))?;
            let done = match fields[3] {
                "0" => false,
                "1" => true,
                other => return Err(format!("step {step}: done must be 0 or 1, got {other:?}")),
            };
            let next_state = Observation(parse_array(fields[4]).map_err(|e| format!("step {step}: {e}"))?);
            let log_prob = parse_real(fields[5]).map_err(|e| format!("step {step}: {e}"))?;
            traj.push(Transition {
                state,
                action,
                extrinsic_reward: reward,
                next_state,
                done,
                log_prob,
            })
            .map_err(|_| format!("step {step}: transition after a done step"))?;
        }
        if traj.is_empty() {
            return Err("trajectory has no transitions".into());
        }
        if (traj.episode_return - declared_return).abs() > RETURN_TOLERANCE {
            return Err(format!(
                "declared return {declared_return} does not match reward sum {}",
                traj.episode_return
            ));
        }
        traj.episode_return = declared_return;
        Ok(traj)
    }
}

impl fmt::Display for Trajectory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_line())
    }
}

fn header_field<'a>(token: Option<&'a str>, key: &str) -> std::result::Result<&'a str, String> {
    let token = token.ok_or_else(|| format!("missing `{key}=` field"))?;
    token
        .strip_prefix(key)
        .and_then(|rest| rest.strip_prefix('='))
        .ok_or_else(|| format!("expected `{key}=`, found {token:?}"))
}

fn write_array(out: &mut String, values: &[f64]) {
    out.push('[');
    for (i, v) in values.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        let _ = write!(out, "{v}");
    }
    out.push(']');
}

fn parse_real(s: &str) -> std::result::Result<f64, String> {
    let v = s.parse::<f64>().map_err(|e| format!("bad number {s:?}: {e}"))?;
    if !v.is_finite() {
        return Err(format!("non-finite number {s:?}"));
    }
    Ok(v)
}

fn parse_array(s: &str) -> std::result::Result<Vec<f64>, String> {
    let inner = s
        .strip_prefix('[')
        .and_then(|r| r.strip_suffix(']'))
        .ok_or_else(|| format!("expected bracketed array, found {s:?}"))?;
    if inner.is_empty() {
        return Ok(Vec::new());
    }
    inner.split(',').map(parse_real).collect()
}

/// On-policy batch of complete trajectories gathered between two updates.
#[derive(Debug, Clone)]
pub struct RolloutBuffer {
    trajectories: Vec<Trajectory>,
    capacity: usize,
}

impl RolloutBuffer {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::Config("rollout buffer capacity must be positive".into()));
        }
        Ok(RolloutBuffer {
            trajectories: Vec::with_capacity(capacity),
            capacity,
        })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.trajectories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trajectories.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.trajectories.len() >= self.capacity
    }

    pub fn insert(&mut self, traj: Trajectory) -> Result<()> {
        if self.is_full() {
            return Err(Error::Usage(format!(
                "rollout buffer is at capacity ({}); run an update and clear it first",
                self.capacity
            )));
        }
        if self.trajectories.iter().any(|t| t.id() == traj.id()) {
            return Err(Error::Usage(format!(
                "trajectory id {} is already in the rollout buffer",
                traj.id()
            )));
        }
        self.trajectories.push(traj);
        Ok(())
    }

    pub fn trajectories(&self) -> &[Trajectory] {
        &self.trajectories
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Trajectory> {
        self.trajectories.iter()
    }

    pub fn total_transitions(&self) -> usize {
        self.trajectories.iter().map(Trajectory::len).sum()
    }

    pub fn clear(&mut self) {
        self.trajectories.clear();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn step(x: f64, action: usize, reward: f64, done: bool) -> Transition {
        Transition {
            state: Observation(vec![x, 0.0]),
            action: ActionValue::Discrete(action),
            extrinsic_reward: reward,
            next_state: Observation(vec![x + 1.0, 0.0]),
            done,
            log_prob: -1.386,
        }
    }

    #[test]
    fn append_accumulates_return() {
        let mut t = Trajectory::new(0);
        t.push(step(0.0, 0, 200.0, true)).unwrap();
        assert_eq!(t.episode_return(), 200.0);

        let mut t = Trajectory::new(1);
        t.push(step(0.0, 0, 0.0, false)).unwrap();
        assert_eq!(t.episode_return(), 0.0);

        let mut t = Trajectory::new(2);
        t.push(step(0.0, 0, 5.0, false)).unwrap();
        t.push(step(1.0, 1, -1.5, false)).unwrap();
        assert_eq!(t.episode_return(), 3.5);
    }

    #[test]
    fn append_after_done_is_rejected() {
        let mut t = Trajectory::new(0);
        t.push(step(0.0, 0, 0.0, true)).unwrap();
        assert!(matches!(t.push(step(1.0, 0, 0.0, false)), Err(Error::Usage(_))));
        assert_eq!(t.len(), 1);
    }

    #[test]
    fn buffer_respects_capacity_and_order() {
        let mut buf = RolloutBuffer::new(2).unwrap();
        let mk = |id| {
            let mut t = Trajectory::new(id);
            t.push(step(id as f64, 0, 0.0, true)).unwrap();
            t
        };
        buf.insert(mk(1)).unwrap();
        assert_eq!(buf.trajectories().iter().map(|t| t.id()).collect::<Vec<_>>(), [1]);
        buf.insert(mk(2)).unwrap();
        assert_eq!(buf.iter().map(|t| t.id()).collect::<Vec<_>>(), [1, 2]);
        let err = buf.insert(mk(3)).unwrap_err();
        assert!(err.to_string().contains("run an update"));
    }

    #[test]
    fn buffer_rejects_duplicate_ids() {
        let mut buf = RolloutBuffer::new(3).unwrap();
        let mut t = Trajectory::new(4);
        t.push(step(0.0, 0, 0.0, true)).unwrap();
        buf.insert(t.clone()).unwrap();
        assert!(buf.insert(t).is_err());
    }

    #[test]
    fn flatten_pairs_keeps_transition_order() {
        let mut t = Trajectory::new(0);
        let actions = [3, 1, 0, 2, 2];
        for (i, a) in actions.iter().enumerate() {
            t.push(step(i as f64, *a, 0.0, i == 4)).unwrap();
        }
        let pairs = t.flatten_pairs();
        assert_eq!(pairs.len(), 5);
        for (i, (s, a)) in pairs.iter().enumerate() {
            assert_eq!(s[0], i as f64);
            assert_eq!(a.as_discrete(), Some(actions[i]));
        }

        let mut single = Trajectory::new(1);
        single.push(step(0.0, 0, 0.0, false)).unwrap();
        assert_eq!(single.flatten_pairs().len(), 1);
    }

    #[test]
    fn line_format_shape() {
        let mut t = Trajectory::new(7);
        t.push(Transition {
            state: Observation(vec![3.0, 7.0, 0.0, 0.0]),
            action: ActionValue::Discrete(2),
            extrinsic_reward: 0.0,
            next_state: Observation(vec![4.0, 7.0, 0.0, 0.0]),
            done: false,
            log_prob: 0.0,
        })
        .unwrap();
        t.push(Transition {
            state: Observation(vec![4.0, 7.0, 0.0, 0.0]),
            action: ActionValue::Continuous(vec![0.5, -1.0]),
            extrinsic_reward: 200.0,
            next_state: Observation(vec![5.0, 7.0, 0.0, 0.0]),
            done: true,
            log_prob: -0.25,
        })
        .unwrap();
        assert_eq!(
            t.to_line(),
            "id=7 return=200 [3,7,0,0];2;0;0;[4,7,0,0];0 [4,7,0,0];[0.5,-1];200;1;[5,7,0,0];-0.25"
        );
    }

    #[test]
    fn from_line_reports_bad_input() {
        assert!(Trajectory::from_line("").is_err());
        assert!(Trajectory::from_line("id=1 return=0").is_err());
        assert!(Trajectory::from_line("id=1 return=5 [0];0;0;1;[1];0").is_err());
        assert!(Trajectory::from_line("id=1 return=0 [0];0;0;1;[1];0 [1];0;0;0;[2];0").is_err());
        assert!(Trajectory::from_line("id=1 return=0 [0];0;0;2;[1];0").is_err());
        assert!(Trajectory::from_line("id=1 return=0 [0];0;NaN;0;[1];0").is_err());
    }

    fn arb_trajectory() -> impl Strategy<Value = Trajectory> {
        (
            any::<u64>(),
            prop::collection::vec(
                (
                    prop::collection::vec(-1e6f64..1e6, 3),
                    prop_oneof![
                        (0usize..4).prop_map(ActionValue::Discrete),
                        prop::collection::vec(-1.0f64..1.0, 2).prop_map(ActionValue::Continuous),
                    ],
                    -300.0f64..300.0,
                    -20.0f64..0.0,
                ),
                1..40,
            ),
            any::<bool>(),
        )
            .prop_map(|(id, steps, terminal)| {
                let mut t = Trajectory::new(id);
                let n = steps.len();
                for (i, (s, a, r, lp)) in steps.into_iter().enumerate() {
                    let next = s.iter().map(|v| v + 1.0).collect();
                    t.push(Transition {
                        state: Observation(s),
                        action: a,
                        extrinsic_reward: r,
                        next_state: Observation(next),
                        done: terminal && i + 1 == n,
                        log_prob: lp,
                    })
                    .unwrap();
                }
                t
            })
    }

    proptest! {
        #[test]
        fn return_matches_reward_sum(t in arb_trajectory()) {
            let sum: f64 = t.rewards().sum();
            prop_assert!((t.episode_return() - sum).abs() <= RETURN_TOLERANCE);
        }

        #[test]
        fn flatten_pairs_length_matches(t in arb_trajectory()) {
            prop_assert_eq!(t.flatten_pairs().len(), t.len());
        }

        #[test]
        fn line_round_trip_is_exact(t in arb_trajectory()) {
            let back = Trajectory::from_line(&t.to_line()).unwrap();
            prop_assert_eq!(back, t);
        }
    }
}
