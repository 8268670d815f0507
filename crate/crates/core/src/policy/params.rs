use std::ops::Range;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::distribution::{DistGrad, DistParams, LOG_STD_MAX, LOG_STD_MIN};
use super::mlp::{Mlp, MlpCache};
use crate::envs::{ActionSpace, EnvSpec};
use crate::error::{Error, Result};
use crate::trajectory::Observation;

const HIDDEN_GAIN: f64 = std::f64::consts::SQRT_2;
const POLICY_OUTPUT_GAIN: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum PolicyHead {
    Categorical { actions: usize },
    /// Mean from the network plus a free log-std vector.
    Gaussian { dim: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Architecture {
    pub obs_dim: usize,
    pub hidden: Vec<usize>,
    pub head: PolicyHead,
    /// Inputs are divided by this before the first layer.
    pub input_scale: Vec<f64>,
}

impl Architecture {
    pub fn for_env(spec: &EnvSpec, hidden: &[usize]) -> Self {
        let head = match spec.action_space {
            ActionSpace::Discrete(n) => PolicyHead::Categorical { actions: n },
            ActionSpace::Continuous { dim, .. } => PolicyHead::Gaussian { dim },
        };
        Architecture {
            obs_dim: spec.observation_dim,
            hidden: hidden.to_vec(),
            head,
            input_scale: spec.observation_scale.clone(),
        }
    }

    fn policy_out(&self) -> usize {
        match self.head {
            PolicyHead::Categorical { actions } => actions,
            PolicyHead::Gaussian { dim } => dim,
        }
    }

    fn log_std_len(&self) -> usize {
        match self.head {
            PolicyHead::Categorical { .. } => 0,
            PolicyHead::Gaussian { dim } => dim,
        }
    }

    pub fn layout(&self) -> Layout {
        let policy = Mlp::new(self.obs_dim, &self.hidden, self.policy_out()).param_count();
        let value = Mlp::new(self.obs_dim, &self.hidden, 1).param_count();
        let p_end = policy;
        let ls_end = p_end + self.log_std_len();
        let ve_end = ls_end + value;
        Layout {
            policy: 0..p_end,
            log_std: p_end..ls_end,
            value_ext: ls_end..ve_end,
            value_int: ve_end..ve_end + value,
        }
    }

    pub fn param_count(&self) -> usize {
        self.layout().value_int.end
    }
}

/// Ranges of the flat parameter vector owned by each block.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layout {
    pub policy: Range<usize>,
    pub log_std: Range<usize>,
    pub value_ext: Range<usize>,
    pub value_int: Range<usize>,
}

impl Layout {
    /// Blocks that are clipped and stepped independently: actor, extrinsic critic, intrinsic critic.
    pub fn blocks(&self) -> [Range<usize>; 3] {
        [
            self.policy.start..self.log_std.end,
            self.value_ext.clone(),
            self.value_int.clone(),
        ]
    }
}

/// Per-thread scratch buffers for forward and backward passes.
#[derive(Debug, Clone, Default)]
pub struct Workspace {
    input: Vec<f64>,
    policy: MlpCache,
    value_ext: MlpCache,
    value_int: MlpCache,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyParams {
    pub theta: Vec<f64>,
    arch: Architecture,
    layout: Layout,
    policy_net: Mlp,
    value_net: Mlp,
}

impl PolicyParams {
    pub fn from_theta(arch: Architecture, theta: Vec<f64>) -> Result<Self> {
        if arch.input_scale.len() != arch.obs_dim || arch.input_scale.iter().any(|s| !(*s > 0.0)) {
            return Err(Error::Config("input scale must have one positive entry per observation".into()));
        }
        let layout = arch.layout();
        if theta.len() != layout.value_int.end {
            return Err(Error::Config(format!(
                "parameter vector has {} entries, architecture needs {}",
                theta.len(),
                layout.value_int.end
            )));
        }
        Ok(PolicyParams {
            policy_net: Mlp::new(arch.obs_dim, &arch.hidden, arch.policy_out()),
            value_net: Mlp::new(arch.obs_dim, &arch.hidden, 1),
            theta,
            arch,
            layout,
        })
    }

    /// Orthogonal hidden layers, a near-zero policy output layer and all-zero
    /// value outputs. A zero critic stays exactly zero until its channel sees
    /// a nonzero reward, so reward-free cycles produce zero advantages.
    pub fn init(arch: Architecture, rng: &mut impl Rng) -> Result<Self> {
        let n = arch.param_count();
        let mut p = PolicyParams::from_theta(arch, vec![0.0; n])?;
        let l = p.layout.clone();
        p.policy_net
            .init(&mut p.theta[l.policy.clone()], HIDDEN_GAIN, POLICY_OUTPUT_GAIN, rng);
        p.theta[l.log_std.clone()].fill(0.0);
        p.value_net.init(&mut p.theta[l.value_ext.clone()], HIDDEN_GAIN, 0.0, rng);
        p.value_net.init(&mut p.theta[l.value_int.clone()], HIDDEN_GAIN, 0.0, rng);
        Ok(p)
    }

    pub fn architecture(&self) -> &Architecture {
        &self.arch
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    fn load_input(&self, obs: &[f64], ws: &mut Workspace) -> Result<()> {
        if obs.len() != self.arch.obs_dim {
            return Err(Error::Usage(format!(
                "observation has {} entries, policy expects {}",
                obs.len(),
                self.arch.obs_dim
            )));
        }
        ws.input.clear();
        ws.input
            .extend(obs.iter().zip(&self.arch.input_scale).map(|(o, s)| o / s));
        Ok(())
    }

    fn log_std(&self) -> Vec<f64> {
        self.theta[self.layout.log_std.clone()]
            .iter()
            .map(|v| v.clamp(LOG_STD_MIN, LOG_STD_MAX))
            .collect()
    }

    pub fn forward_policy(&self, obs: &Observation, ws: &mut Workspace) -> Result<DistParams> {
        self.load_input(obs, ws)?;
        let out = self
            .policy_net
            .forward(&self.theta[self.layout.policy.clone()], &ws.input, &mut ws.policy);
        Ok(match self.arch.head {
            PolicyHead::Categorical { .. } => DistParams::Categorical { logits: out.to_vec() },
            PolicyHead::Gaussian { .. } => DistParams::Gaussian {
                mean: out.to_vec(),
                log_std: self.log_std(),
            },
        })
    }

    /// `(extrinsic value, intrinsic value)`.
    pub fn values(&self, obs: &Observation, ws: &mut Workspace) -> Result<(f64, f64)> {
        self.load_input(obs, ws)?;
        let ve = self
            .value_net
            .forward(&self.theta[self.layout.value_ext.clone()], &ws.input, &mut ws.value_ext)[0];
        let vi = self
            .value_net
            .forward(&self.theta[self.layout.value_int.clone()], &ws.input, &mut ws.value_int)[0];
        Ok((ve, vi))
    }

    /// Backpropagates a distribution-parameter gradient from the last `forward_policy` call.
    pub(crate) fn backward_policy(&self, ws: &mut Workspace, grad: &DistGrad, out: &mut [f64]) {
        let l = &self.layout;
        let g_out = match grad {
            DistGrad::Categorical { logits } => logits,
            DistGrad::Gaussian { mean, log_std } => {
                let raw = &self.theta[l.log_std.clone()];
                for ((o, g), r) in out[l.log_std.clone()].iter_mut().zip(log_std).zip(raw) {
                    if (LOG_STD_MIN..=LOG_STD_MAX).contains(r) {
                        *o += g;
                    }
                }
                mean
            }
        };
        self.policy_net.backward(
            &self.theta[l.policy.clone()],
            &mut ws.policy,
            g_out,
            &mut out[l.policy.clone()],
        );
    }

    /// Backpropagates value-output gradients from the last `values` call.
    pub(crate) fn backward_values(&self, ws: &mut Workspace, g_ext: f64, g_int: f64, out: &mut [f64]) {
        let l = &self.layout;
        if g_ext != 0.0 {
            self.value_net.backward(
                &self.theta[l.value_ext.clone()],
                &mut ws.value_ext,
                &[g_ext],
                &mut out[l.value_ext.clone()],
            );
        }
        if g_int != 0.0 {
            self.value_net.backward(
                &self.theta[l.value_int.clone()],
                &mut ws.value_int,
                &[g_int],
                &mut out[l.value_int.clone()],
            );
        }
    }

    pub fn is_finite(&self) -> bool {
        self.theta.iter().all(|v| v.is_finite())
    }
}
