//! The clipped-surrogate update with the distance penalty folded into the advantage.
//!
//! The penalty term's policy gradient is an ordinary score-function gradient
//! whose critic is the intrinsic Q-function, so subtracting `sigma * A_int`
//! from the extrinsic advantage before the surrogate gives the penalised
//! gradient while keeping PPO's ratio clipping.

use rand::seq::SliceRandom;
use rand::Rng;

use super::advantage::AdvantageBatch;
use super::config::{TopoConfig, UpdateRule};
use super::params::{PolicyParams, Workspace};
use crate::error::{Error, Result};

/// Loss components averaged over a minibatch. `total` is what the step minimises.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LossParts {
    pub policy: f64,
    pub value_ext: f64,
    pub value_int: f64,
    pub entropy: f64,
    pub total: f64,
}

pub fn combined_advantage(ext: f64, int: f64, sigma: f64, rule: UpdateRule) -> f64 {
    match rule {
        UpdateRule::Topo => ext - sigma * int,
        UpdateRule::PpoOnly => ext,
    }
}

/// Loss and its gradient over the samples `indices` of `batch`.
pub fn loss_and_grad(
    params: &PolicyParams,
    batch: &AdvantageBatch,
    indices: &[usize],
    cfg: &TopoConfig,
    rule: UpdateRule,
    ws: &mut Workspace,
) -> Result<(LossParts, Vec<f64>)> {
    let mut grad = vec![0.0; params.theta.len()];
    let parts = accumulate(params, batch, indices, cfg, rule, ws, Some(&mut grad))?;
    Ok((parts, grad))
}

/// Loss only, for finite-difference checks.
pub fn loss(
    params: &PolicyParams,
    batch: &AdvantageBatch,
    indices: &[usize],
    cfg: &TopoConfig,
    rule: UpdateRule,
) -> Result<LossParts> {
    accumulate(params, batch, indices, cfg, rule, &mut Workspace::default(), None)
}

fn accumulate(
    params: &PolicyParams,
    batch: &AdvantageBatch,
    indices: &[usize],
    cfg: &TopoConfig,
    rule: UpdateRule,
    ws: &mut Workspace,
    mut grad: Option<&mut Vec<f64>>,
) -> Result<LossParts> {
    let n = indices.len() as f64;
    let train_int = rule == UpdateRule::Topo;
    let mut parts = LossParts::default();
    for &i in indices {
        let adv = combined_advantage(batch.ext_advantages[i], batch.int_advantages[i], cfg.sigma, rule);
        let dist = params.forward_policy(&batch.observations[i], ws)?;
        let action = &batch.actions[i];
        let lp = dist.log_prob(action);
        let ratio = (lp - batch.old_log_probs[i]).exp();
        let unclipped = ratio * adv;
        let clipped = ratio.clamp(1.0 - cfg.clip_eps, 1.0 + cfg.clip_eps) * adv;
        let (surrogate, d_surrogate) = if unclipped <= clipped {
            (unclipped, unclipped)
        } else {
            (clipped, 0.0)
        };
        let entropy = dist.entropy();
        parts.policy -= surrogate / n;
        parts.entropy += entropy / n;

        let (ve, vi) = params.values(&batch.observations[i], ws)?;
        let e_ext = ve - batch.ext_returns[i];
        parts.value_ext += 0.5 * e_ext * e_ext / n;
        let e_int = if train_int { vi - batch.int_returns[i] } else { 0.0 };
        parts.value_int += 0.5 * e_int * e_int / n;

        if let Some(g) = grad.as_deref_mut() {
            // d(-surrogate/n)/d(log_prob) and d(-ent_coef * entropy / n)/d(entropy)
            let (_, _, dist_grad) = dist.log_prob_entropy_grad(action, -d_surrogate / n, -cfg.ent_coef / n);
            params.backward_policy(ws, &dist_grad, g);
            params.backward_values(ws, cfg.vf_coef * e_ext / n, cfg.vf_coef * e_int / n, g);
        }
    }
    parts.total = parts.policy + cfg.vf_coef * (parts.value_ext + parts.value_int) - cfg.ent_coef * parts.entropy;
    Ok(parts)
}

/// Heavy-ball gradient ascent state.
#[derive(Debug, Clone, PartialEq)]
pub struct Momentum {
    velocity: Vec<f64>,
}

impl Momentum {
    pub fn new(len: usize) -> Self {
        Momentum {
            velocity: vec![0.0; len],
        }
    }

    /// Ascends along `-grad`, clipping each block's gradient norm independently.
    pub fn step(&mut self, params: &mut PolicyParams, grad: &[f64], cfg: &TopoConfig) {
        let blocks = params.layout().blocks();
        for block in blocks {
            let g = &grad[block.clone()];
            let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
            let scale = if norm > cfg.max_grad_norm { cfg.max_grad_norm / norm } else { 1.0 };
            for ((theta, v), g) in params.theta[block.clone()]
                .iter_mut()
                .zip(&mut self.velocity[block.clone()])
                .zip(g)
            {
                *v = cfg.momentum * *v - scale * g;
                *theta += cfg.learning_rate * *v;
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct UpdateStats {
    /// Mean minibatch loss per epoch.
    pub epoch_loss: Vec<LossParts>,
}

/// Runs `cfg.epochs` passes of shuffled minibatch ascent over a frozen batch.
pub fn topo_update(
    params: &mut PolicyParams,
    opt: &mut Momentum,
    batch: &AdvantageBatch,
    cfg: &TopoConfig,
    rule: UpdateRule,
    rng: &mut impl Rng,
) -> Result<UpdateStats> {
    let mut stats = UpdateStats::default();
    if batch.is_empty() {
        return Ok(stats);
    }
    let mut ws = Workspace::default();
    let mut order: Vec<usize> = (0..batch.len()).collect();
    for _ in 0..cfg.epochs {
        order.shuffle(rng);
        let mut epoch = LossParts::default();
        let mut chunks = 0.0;
        for chunk in order.chunks(cfg.minibatch) {
            let (parts, grad) = loss_and_grad(params, batch, chunk, cfg, rule, &mut ws)?;
            if !parts.total.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(Error::NonFinite {
                    sigma: cfg.sigma,
                    mean_distance: batch.mean_distance,
                    bandwidth: batch.bandwidth,
                });
            }
            opt.step(params, &grad, cfg);
            epoch.policy += parts.policy;
            epoch.value_ext += parts.value_ext;
            epoch.value_int += parts.value_int;
            epoch.entropy += parts.entropy;
            epoch.total += parts.total;
            chunks += 1.0;
        }
        epoch.policy /= chunks;
        epoch.value_ext /= chunks;
        epoch.value_int /= chunks;
        epoch.entropy /= chunks;
        epoch.total /= chunks;
        stats.epoch_loss.push(epoch);
    }
    Ok(stats)
}
