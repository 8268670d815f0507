//! The on-policy training loop: collect `update_every` episodes, score each one
//! against the demonstration buffer, update, repeat.

use std::fmt::Write as _;

use log::{debug, warn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::advantage::{compute_advantages, AdvantageConfig};
use super::config::{TopoConfig, UpdateRule};
use super::params::{Architecture, PolicyParams, Workspace};
use super::update::{topo_update, Momentum};
use crate::demo_store::DemoBuffer;
use crate::envs::Environment;
use crate::error::{Error, Result};
use crate::mmd::{median_heuristic, project, BandwidthMode, DemoFeatures, DistanceReport, FeatureSet, KernelConfig};
use crate::trajectory::{RolloutBuffer, Trajectory, Transition};

pub const LOG_HEADER: &str = "episode,return,success,mean_mmd,intrinsic_sum,sigma,bandwidth";
pub const DEMO_LOG_HEADER: &str = "episode,demo_min_return,replaced";

/// `max(D - delta, 0)` per step. At `D == delta` the result and its subgradient are zero.
pub fn intrinsic_rewards(report: &DistanceReport, delta: f64) -> Vec<f64> {
    report
        .per_pair_distance
        .iter()
        .map(|d| if *d > delta { d - delta } else { 0.0 })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeRecord {
    pub episode: usize,
    pub episode_return: f64,
    pub success: bool,
    pub mean_mmd: f64,
    pub intrinsic_sum: f64,
    pub sigma: f64,
    pub bandwidth: f64,
    pub demo_min_return: f64,
    pub demo_replaced: bool,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainingLog {
    pub records: Vec<EpisodeRecord>,
    pub updates: usize,
}

impl TrainingLog {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(LOG_HEADER);
        out.push('\n');
        for r in &self.records {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                r.episode,
                r.episode_return,
                u8::from(r.success),
                r.mean_mmd,
                r.intrinsic_sum,
                r.sigma,
                r.bandwidth
            );
        }
        out
    }

    pub fn demo_csv(&self) -> String {
        let mut out = String::from(DEMO_LOG_HEADER);
        out.push('\n');
        for r in &self.records {
            let _ = writeln!(out, "{},{},{}", r.episode, r.demo_min_return, u8::from(r.demo_replaced));
        }
        out
    }

    pub fn success_rate(&self, last: usize) -> f64 {
        let tail = &self.records[self.records.len().saturating_sub(last)..];
        if tail.is_empty() {
            return 0.0;
        }
        tail.iter().filter(|r| r.success).count() as f64 / tail.len() as f64
    }
}

#[derive(Debug)]
pub struct TrainOutcome {
    pub log: TrainingLog,
    pub params: PolicyParams,
    pub demos: DemoBuffer,
    /// Set when training stopped early; `log` holds everything up to that point.
    pub error: Option<Error>,
}

/// Rolls out one episode with actions sampled from the current policy.
pub fn run_episode(
    env: &mut dyn Environment,
    params: &PolicyParams,
    id: u64,
    rng: &mut impl Rng,
    ws: &mut Workspace,
) -> Result<(Trajectory, bool)> {
    let mut obs = env.reset(rng.random());
    let mut traj = Trajectory::new(id);
    loop {
        let dist = params.forward_policy(&obs, ws)?;
        let (action, log_prob) = dist.sample(rng);
        let out = env.step(&action)?;
        traj.push(Transition {
            state: obs,
            action,
            extrinsic_reward: out.reward,
            next_state: out.observation.clone(),
            done: out.done,
            log_prob,
        })?;
        obs = out.observation;
        if out.done {
            return Ok((traj, out.success));
        }
    }
}

/// Per-dimension standard deviation of the projected demonstration points,
/// with zero spreads replaced by one.
fn demo_feature_scale(demos: &DemoBuffer, kernel: &KernelConfig) -> Result<Vec<f64>> {
    let raw = KernelConfig {
        feature_scale: None,
        ..kernel.clone()
    };
    let points = demos
        .iter()
        .flat_map(|d| d.transitions())
        .map(|t| project(&t.state, &t.action, &raw))
        .collect::<Result<Vec<_>>>()?;
    let n = points.len() as f64;
    let dim = points.first().map_or(0, Vec::len);
    Ok((0..dim)
        .map(|j| {
            let mean = points.iter().map(|p| p[j]).sum::<f64>() / n;
            let var = points.iter().map(|p| (p[j] - mean) * (p[j] - mean)).sum::<f64>() / n;
            if var > 0.0 {
                var.sqrt()
            } else {
                1.0
            }
        })
        .collect())
}

struct Trainer<'a> {
    env: &'a mut dyn Environment,
    cfg: &'a TopoConfig,
    rule: UpdateRule,
    kernel: KernelConfig,
    params: PolicyParams,
    opt: Momentum,
    demos: DemoBuffer,
    rng: ChaCha8Rng,
    ws: Workspace,
    log: TrainingLog,
}

impl Trainer<'_> {
    /// Freezes the bandwidth and demonstration snapshot for the coming cycle.
    fn begin_cycle(&self, previous: &[FeatureSet]) -> Result<DemoFeatures> {
        let kernel = match self.kernel.bandwidth_mode {
            BandwidthMode::Fixed => self.kernel.clone(),
            BandwidthMode::MedianHeuristic => {
                let mut sets = self
                    .demos
                    .iter()
                    .map(|d| FeatureSet::from_trajectory(d, &self.kernel))
                    .collect::<Result<Vec<_>>>()?;
                sets.extend_from_slice(previous);
                self.kernel.with_bandwidth(median_heuristic(&sets)?)
            }
        };
        DemoFeatures::new(&self.demos, &kernel)
    }

    fn run(&mut self, episodes: usize) -> Result<()> {
        let sigma = match self.rule {
            UpdateRule::Topo => self.cfg.sigma,
            UpdateRule::PpoOnly => 0.0,
        };
        let adv_cfg = AdvantageConfig {
            gamma: self.cfg.gamma,
            gae_lambda: self.cfg.gae_lambda,
            reward_scale: self.cfg.reward_scale,
        };
        let first_id = self.demos.max_id() + 1;
        let mut buffer = RolloutBuffer::new(self.cfg.update_every)?;
        let mut intrinsic: Vec<Vec<f64>> = Vec::with_capacity(self.cfg.update_every);
        let mut cycle_distances: Vec<f64> = Vec::with_capacity(self.cfg.update_every);
        let mut previous_sets: Vec<FeatureSet> = Vec::new();
        let mut snapshot: Option<DemoFeatures> = None;

        for episode in 0..episodes {
            if snapshot.is_none() {
                snapshot = Some(self.begin_cycle(&previous_sets)?);
            }
            let features = snapshot.as_ref().expect("snapshot set at cycle start");
            let (traj, success) = run_episode(
                &mut *self.env,
                &self.params,
                first_id + episode as u64,
                &mut self.rng,
                &mut self.ws,
            )?;
            let report = features.per_pair_distance(&traj)?;
            let r_int = intrinsic_rewards(&report, self.cfg.delta);
            let replaced = self.cfg.replace_demos && self.demos.maybe_replace(&traj);
            self.log.records.push(EpisodeRecord {
                episode,
                episode_return: traj.episode_return(),
                success,
                mean_mmd: report.distance(),
                intrinsic_sum: r_int.iter().sum(),
                sigma,
                bandwidth: features.config().bandwidth,
                demo_min_return: self.demos.min_return(),
                demo_replaced: replaced,
            });
            cycle_distances.push(report.distance());
            intrinsic.push(r_int);
            buffer.insert(traj)?;

            if buffer.is_full() {
                let mut batch = compute_advantages(&buffer, &self.params, &adv_cfg, &intrinsic)?;
                batch.mean_distance = cycle_distances.iter().sum::<f64>() / cycle_distances.len() as f64;
                batch.bandwidth = features.config().bandwidth;
                let stats = topo_update(&mut self.params, &mut self.opt, &batch, self.cfg, self.rule, &mut self.rng)?;
                self.log.updates += 1;
                if let Some(last) = stats.epoch_loss.last() {
                    debug!(
                        "update {}: policy {:.4} value {:.4}/{:.4} entropy {:.3}",
                        self.log.updates, last.policy, last.value_ext, last.value_int, last.entropy
                    );
                }
                if self.kernel.bandwidth_mode == BandwidthMode::MedianHeuristic {
                    previous_sets = buffer
                        .iter()
                        .map(|t| FeatureSet::from_trajectory(t, &self.kernel))
                        .collect::<Result<Vec<_>>>()?;
                }
                buffer.clear();
                intrinsic.clear();
                cycle_distances.clear();
                snapshot = None;
            }
        }
        Ok(())
    }
}

/// Trains a fresh policy for `episodes` episodes. Configuration problems are
/// returned as `Err`; failures mid-run come back in `TrainOutcome::error`
/// alongside the partial log.
pub fn train(
    env: &mut dyn Environment,
    demos: DemoBuffer,
    cfg: &TopoConfig,
    episodes: usize,
    seed: u64,
    rule: UpdateRule,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    let spec = env.spec().clone();
    let mut kernel = cfg.kernel.clone();
    if cfg.normalize_features {
        kernel.feature_scale = Some(demo_feature_scale(&demos, &kernel)?);
    }
    kernel.validate(spec.observation_dim)?;
    if demos.is_empty() {
        return Err(Error::Config("demonstration buffer is empty".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let params = PolicyParams::init(Architecture::for_env(&spec, &cfg.hidden), &mut rng)?;
    let mut demos = demos;
    demos.set_replacement(cfg.replace_demos);
    let mut trainer = Trainer {
        env,
        cfg,
        rule,
        kernel,
        opt: Momentum::new(params.theta.len()),
        params,
        demos,
        rng,
        ws: Workspace::default(),
        log: TrainingLog::default(),
    };
    let error = trainer.run(episodes).err();
    if let Some(e) = &error {
        warn!("training aborted after {} episodes: {e}", trainer.log.records.len());
    }
    Ok(TrainOutcome {
        log: trainer.log,
        params: trainer.params,
        demos: trainer.demos,
        error,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hinge_arithmetic() {
        let report = |d: f64| DistanceReport {
            per_pair_distance: vec![d; 3],
            min_demo_id: 0,
        };
        let r = intrinsic_rewards(&report(0.5), 0.2);
        assert!(r.iter().all(|v| (v - 0.3).abs() < 1e-15));
        assert_eq!(intrinsic_rewards(&report(0.1), 0.2), vec![0.0; 3]);
        assert_eq!(intrinsic_rewards(&report(0.2), 0.2), vec![0.0; 3]);
    }
}
