use crate::error::{Error, Result};
use crate::mmd::KernelConfig;

/// Which objective the update optimises.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UpdateRule {
    /// Clipped surrogate on `A_ext - sigma * A_int`, both critics trained.
    Topo,
    /// Clipped surrogate on `A_ext` alone; the intrinsic critic is never touched.
    PpoOnly,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TopoConfig {
    /// Distance boundary below which no intrinsic penalty applies.
    pub delta: f64,
    /// Lagrange multiplier on the distance penalty.
    pub sigma: f64,
    /// Episodes collected per update.
    pub update_every: usize,
    pub gamma: f64,
    pub gae_lambda: f64,
    pub clip_eps: f64,
    pub learning_rate: f64,
    pub momentum: f64,
    pub epochs: usize,
    pub minibatch: usize,
    pub vf_coef: f64,
    pub ent_coef: f64,
    pub max_grad_norm: f64,
    pub hidden: Vec<usize>,
    pub reward_scale: f64,
    pub kernel: KernelConfig,
    /// Divide kernel features by the per-dimension std of demonstration points.
    pub normalize_features: bool,
    pub replace_demos: bool,
    pub max_steps: Option<usize>,
}

impl Default for TopoConfig {
    fn default() -> Self {
        TopoConfig {
            delta: 0.1,
            sigma: 0.1,
            update_every: 8,
            gamma: 0.99,
            gae_lambda: 0.95,
            clip_eps: 0.2,
            learning_rate: 0.01,
            momentum: 0.9,
            epochs: 4,
            minibatch: 256,
            vf_coef: 0.5,
            ent_coef: 0.01,
            max_grad_norm: 0.5,
            hidden: vec![64, 64],
            reward_scale: 1.0,
            kernel: KernelConfig::default(),
            normalize_features: false,
            replace_demos: true,
            max_steps: None,
        }
    }
}

impl TopoConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if !(self.delta >= 0.0 && self.delta.is_finite()) {
            return fail(format!("delta must be a non-negative number, got {}", self.delta));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return fail(format!("sigma must be a non-negative number, got {}", self.sigma));
        }
        if self.update_every == 0 {
            return fail("update_every must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return fail(format!("gamma must lie in [0, 1], got {}", self.gamma));
        }
        if !(0.0..=1.0).contains(&self.gae_lambda) {
            return fail(format!("gae_lambda must lie in [0, 1], got {}", self.gae_lambda));
        }
        if !(self.clip_eps > 0.0) {
            return fail(format!("clip_eps must be positive, got {}", self.clip_eps));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return fail(format!("learning rate must be positive, got {}", self.learning_rate));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return fail(format!("momentum must lie in [0, 1), got {}", self.momentum));
        }
        if self.epochs == 0 || self.minibatch == 0 {
            return fail("epochs and minibatch must be positive".into());
        }
        if !(self.max_grad_norm > 0.0) {
            return fail("max_grad_norm must be positive".into());
        }
        if self.hidden.contains(&0) {
            return fail("hidden layer sizes must be positive".into());
        }
        if !(self.reward_scale > 0.0 && self.reward_scale.is_finite()) {
            return fail("reward_scale must be positive".into());
        }
        if self.max_steps == Some(0) {
            return fail("max_steps must be positive".into());
        }
        Ok(())
    }
}
