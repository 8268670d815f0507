//! Plain-text `key = value` experiment configuration.
//!
//! Blank lines and lines starting with `#` are ignored. Later assignments win,
//! so command-line overrides are applied by feeding them through the same
//! [`ExperimentConfig::set`] after the file.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::envs::EnvName;
use crate::error::{Error, Result};
use crate::mmd::{BandwidthMode, FeatureMap, KernelKind};
use crate::policy::TopoConfig;

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub env: EnvName,
    pub topo: TopoConfig,
    pub episodes: usize,
    pub seeds: Vec<u64>,
    /// Demonstration file; when absent, scripted demonstrations are generated.
    pub demo_path: Option<PathBuf>,
    pub demo_count: usize,
    pub demo_noise: f64,
    pub demo_seed: u64,
    pub output_dir: PathBuf,
    /// Run the PPO-only update (no distance penalty).
    pub baseline: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            env: EnvName::KdtSmall,
            topo: TopoConfig::default(),
            episodes: 500,
            seeds: vec![0],
            demo_path: None,
            demo_count: crate::demo_store::DEFAULT_DEMO_COUNT,
            demo_noise: 0.0,
            demo_seed: 0,
            output_dir: PathBuf::from("runs"),
            baseline: false,
        }
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value
        .parse::<T>()
        .map_err(|e| Error::Config(format!("{key}: cannot parse {value:?}: {e}")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        _ => Err(Error::Config(format!("{key}: expected a boolean, got {value:?}"))),
    }
}

fn parse_list<T: std::str::FromStr>(key: &str, value: &str) -> Result<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse_num(key, s))
        .collect()
}

fn join<T: std::fmt::Display>(items: &[T]) -> String {
    items.iter().map(ToString::to_string).collect::<Vec<_>>().join(",")
}

impl ExperimentConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let t = &mut self.topo;
        match key {
            "env" => self.env = value.parse()?,
            "episodes" => self.episodes = parse_num(key, value)?,
            "seeds" => self.seeds = parse_list(key, value)?,
            "demos" => self.demo_path = (!value.is_empty()).then(|| PathBuf::from(value)),
            "demo_count" => self.demo_count = parse_num(key, value)?,
            "demo_noise" => self.demo_noise = parse_num(key, value)?,
            "demo_seed" => self.demo_seed = parse_num(key, value)?,
            "out" => self.output_dir = PathBuf::from(value),
            "baseline" => self.baseline = parse_bool(key, value)?,
            "sigma" => t.sigma = parse_num(key, value)?,
            "delta" => t.delta = parse_num(key, value)?,
            "update_every" => t.update_every = parse_num(key, value)?,
            "gamma" => t.gamma = parse_num(key, value)?,
            "gae_lambda" => t.gae_lambda = parse_num(key, value)?,
            "clip_eps" => t.clip_eps = parse_num(key, value)?,
            "learning_rate" => t.learning_rate = parse_num(key, value)?,
            "momentum" => t.momentum = parse_num(key, value)?,
            "epochs" => t.epochs = parse_num(key, value)?,
            "minibatch" => t.minibatch = parse_num(key, value)?,
            "vf_coef" => t.vf_coef = parse_num(key, value)?,
            "ent_coef" => t.ent_coef = parse_num(key, value)?,
            "max_grad_norm" => t.max_grad_norm = parse_num(key, value)?,
            "hidden" => t.hidden = parse_list(key, value)?,
            "reward_scale" => t.reward_scale = parse_num(key, value)?,
            "normalize_features" => t.normalize_features = parse_bool(key, value)?,
            "replace_demos" => t.replace_demos = parse_bool(key, value)?,
            "max_steps" => {
                t.max_steps = match value {
                    "" | "default" => None,
                    v => Some(parse_num(key, v)?),
                }
            }
            "kernel" => {
                t.kernel.kernel = match value {
                    "gaussian" => KernelKind::Gaussian,
                    "laplace" => KernelKind::Laplace,
                    _ => return Err(Error::Config(format!("kernel: expected gaussian or laplace, got {value:?}"))),
                }
            }
            "bandwidth" => {
                if value == "median" {
                    t.kernel.bandwidth_mode = BandwidthMode::MedianHeuristic;
                } else {
                    t.kernel.bandwidth_mode = BandwidthMode::Fixed;
                    t.kernel.bandwidth = parse_num(key, value)?;
                }
            }
            "feature_map" => {
                t.kernel.feature_map = match value {
                    "state_action" => FeatureMap::StateAction,
                    "state_only" => FeatureMap::StateOnly,
                    v => match v.strip_prefix("coords:") {
                        Some(list) => FeatureMap::Coordinates(parse_list(key, list)?),
                        None => {
                            return Err(Error::Config(format!(
                                "feature_map: expected state_action, state_only or coords:<i,j,..>, got {value:?}"
                            )))
                        }
                    },
                }
            }
            _ => return Err(Error::Config(format!("unknown configuration key {key:?}"))),
        }
        Ok(())
    }

    /// Applies `key = value` lines from `text` on top of `self`.
    pub fn apply_text(&mut self, text: &str, origin: &Path) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
                path: origin.to_path_buf(),
                line: i + 1,
                message: format!("expected `key = value`, got {line:?}"),
            })?;
            self.set(key.trim(), value.trim()).map_err(|e| Error::Parse {
                path: origin.to_path_buf(),
                line: i + 1,
                message: e.to_string(),
            })?;
        }
        Ok(())
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = ExperimentConfig::default();
        cfg.apply_text(&text, path)?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.topo.validate()?;
        if self.seeds.is_empty() {
            return Err(Error::Config("at least one seed is required".into()));
        }
        if self.episodes == 0 {
            return Err(Error::Config("episodes must be positive".into()));
        }
        if self.demo_path.is_none() && self.demo_count == 0 {
            return Err(Error::Config("demo_count must be positive".into()));
        }
        Ok(())
    }

    /// Canonical rendering of every training-relevant setting; output
    /// location and seeds are excluded so runs of one setup share a hash.
    pub fn canonical_text(&self) -> String {
        let t = &self.topo;
        let k = &t.kernel;
        let mut s = String::new();
        let bandwidth = match k.bandwidth_mode {
            BandwidthMode::Fixed => k.bandwidth.to_string(),
            BandwidthMode::MedianHeuristic => "median".into(),
        };
        let feature_map = match &k.feature_map {
            FeatureMap::StateAction => "state_action".to_string(),
            FeatureMap::StateOnly => "state_only".to_string(),
            FeatureMap::Coordinates(c) => format!("coords:{}", join(c)),
        };
        let kernel = match k.kernel {
            KernelKind::Gaussian => "gaussian",
            KernelKind::Laplace => "laplace",
        };
        let demos = self
            .demo_path
            .as_ref()
            .map_or_else(String::new, |p| p.display().to_string());
        let max_steps = t.max_steps.map_or_else(|| "default".to_string(), |m| m.to_string());
        let pairs: [(&str, String); 28] = [
            ("bandwidth", bandwidth),
            ("baseline", self.baseline.to_string()),
            ("clip_eps", t.clip_eps.to_string()),
            ("delta", t.delta.to_string()),
            ("demo_count", self.demo_count.to_string()),
            ("demo_noise", self.demo_noise.to_string()),
            ("demo_seed", self.demo_seed.to_string()),
            ("demos", demos),
            ("ent_coef", t.ent_coef.to_string()),
            ("env", self.env.to_string()),
            ("episodes", self.episodes.to_string()),
            ("epochs", t.epochs.to_string()),
            ("feature_map", feature_map),
            ("gae_lambda", t.gae_lambda.to_string()),
            ("gamma", t.gamma.to_string()),
            ("hidden", join(&t.hidden)),
            ("kernel", kernel.to_string()),
            ("learning_rate", t.learning_rate.to_string()),
            ("max_grad_norm", t.max_grad_norm.to_string()),
            ("max_steps", max_steps),
            ("minibatch", t.minibatch.to_string()),
            ("momentum", t.momentum.to_string()),
            ("normalize_features", t.normalize_features.to_string()),
            ("replace_demos", t.replace_demos.to_string()),
            ("reward_scale", t.reward_scale.to_string()),
            ("sigma", t.sigma.to_string()),
            ("update_every", t.update_every.to_string()),
            ("vf_coef", t.vf_coef.to_string()),
        ];
        for (key, value) in pairs {
            let _ = writeln!(s, "{key} = {value}");
        }
        s
    }

    pub fn config_hash(&self) -> String {
        let digest = Sha256::digest(self.canonical_text().as_bytes());
        digest.iter().fold(String::with_capacity(64), |mut acc, b| {
            let _ = write!(acc, "{b:02x}");
            acc
        })
    }
}
