//! Generalised advantage estimation for the extrinsic and intrinsic reward channels.

use super::params::{PolicyParams, Workspace};
use crate::error::{Error, Result};
use crate::trajectory::{ActionValue, Observation, RolloutBuffer};

/// GAE over one episode that ends at the last entry (no bootstrap past it).
pub fn gae(rewards: &[f64], values: &[f64], gamma: f64, lambda: f64) -> Vec<f64> {
    debug_assert_eq!(rewards.len(), values.len());
    let mut adv = vec![0.0; rewards.len()];
    let mut running = 0.0;
    for t in (0..rewards.len()).rev() {
        let next_value = values.get(t + 1).copied().unwrap_or(0.0);
        let td = rewards[t] + gamma * next_value - values[t];
        running = td + gamma * lambda * running;
        adv[t] = running;
    }
    adv
}

/// Shifts to zero mean and scales to unit (population) variance.
/// A constant input maps to all zeros.
pub fn normalize(values: &mut [f64]) {
    if values.is_empty() {
        return;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let std = var.sqrt();
    for v in values.iter_mut() {
        *v = if std > 0.0 { (*v - mean) / (std + 1e-8) } else { 0.0 };
    }
}

/// Flattened per-step training data for one update cycle.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AdvantageBatch {
    pub observations: Vec<Observation>,
    pub actions: Vec<ActionValue>,
    pub old_log_probs: Vec<f64>,
    /// Normalised per cycle.
    pub ext_advantages: Vec<f64>,
    /// Raw scale; the multiplier gives it meaning.
    pub int_advantages: Vec<f64>,
    pub ext_returns: Vec<f64>,
    pub int_returns: Vec<f64>,
    /// Mean demonstration distance over the cycle's trajectories, for diagnostics.
    pub mean_distance: f64,
    pub bandwidth: f64,
}

impl AdvantageBatch {
    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdvantageConfig {
    pub gamma: f64,
    pub gae_lambda: f64,
    /// Multiplies extrinsic rewards before they reach the critic.
    pub reward_scale: f64,
}

/// Evaluates both critics on every state in `buf` and runs one GAE stream per
/// reward channel. `intrinsic[i]` holds the per-step intrinsic rewards of the
/// i-th trajectory.
pub fn compute_advantages(
    buf: &RolloutBuffer,
    params: &PolicyParams,
    cfg: &AdvantageConfig,
    intrinsic: &[Vec<f64>],
) -> Result<AdvantageBatch> {
    if intrinsic.len() != buf.len() {
        return Err(Error::Usage(format!(
            "{} intrinsic reward streams for {} trajectories",
            intrinsic.len(),
            buf.len()
        )));
    }
    let n = buf.total_transitions();
    let mut batch = AdvantageBatch {
        observations: Vec::with_capacity(n),
        actions: Vec::with_capacity(n),
        old_log_probs: Vec::with_capacity(n),
        ext_advantages: Vec::with_capacity(n),
        int_advantages: Vec::with_capacity(n),
        ext_returns: Vec::with_capacity(n),
        int_returns: Vec::with_capacity(n),
        mean_distance: 0.0,
        bandwidth: 0.0,
    };
    let mut ws = Workspace::default();
    for (traj, r_int) in buf.iter().zip(intrinsic) {
        if r_int.len() != traj.len() {
            return Err(Error::Usage(format!(
                "trajectory {} has {} steps but {} intrinsic rewards",
                traj.id(),
                traj.len(),
                r_int.len()
            )));
        }
        let mut v_ext = Vec::with_capacity(traj.len());
        let mut v_int = Vec::with_capacity(traj.len());
        for t in traj.transitions() {
            let (ve, vi) = params.values(&t.state, &mut ws)?;
            v_ext.push(ve);
            v_int.push(vi);
        }
        let r_ext: Vec<f64> = traj.rewards().map(|r| r * cfg.reward_scale).collect();
        let a_ext = gae(&r_ext, &v_ext, cfg.gamma, cfg.gae_lambda);
        let a_int = gae(r_int, &v_int, cfg.gamma, cfg.gae_lambda);
        for (i, t) in traj.transitions().iter().enumerate() {
            batch.observations.push(t.state.clone());
            batch.actions.push(t.action.clone());
            batch.old_log_probs.push(t.log_prob);
            batch.ext_returns.push(a_ext[i] + v_ext[i]);
            batch.int_returns.push(a_int[i] + v_int[i]);
        }
        batch.ext_advantages.extend(a_ext);
        batch.int_advantages.extend(a_int);
    }
    normalize(&mut batch.ext_advantages);
    Ok(batch)
}
