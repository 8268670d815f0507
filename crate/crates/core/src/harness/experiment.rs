//! Multi-seed training runs and their on-disk layout.
//!
//! An output directory holds, per seed `s`:
//! `seed_<s>.csv` (episode log), `seed_<s>_demos.csv` (demonstration buffer
//! floor) and `seed_<s>.ckpt.json` (final policy); plus `aggregate.csv`
//! across seeds and `config.txt` with the canonical settings and their hash.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use log::{info, warn};

use super::config::ExperimentConfig;
use crate::demo_store::{generate_demos, load_demos, DemoBuffer};
use crate::error::{Error, Result};
use crate::policy::{train, Checkpoint, TrainingLog, UpdateRule};

pub const AGGREGATE_HEADER: &str = "episode,mean_return,std_return,mean_success,mean_mmd";

/// Episodes at the end of a run used for the headline success rate.
pub const FINAL_WINDOW: usize = 50;

#[derive(Debug, Clone, PartialEq)]
pub struct SeedSummary {
    pub seed: u64,
    pub episodes: usize,
    pub final_success_rate: f64,
    /// Why the seed stopped early, if it did.
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub config_hash: String,
    pub output_dir: PathBuf,
    pub seeds: Vec<SeedSummary>,
}

impl RunSummary {
    pub fn is_partial(&self) -> bool {
        self.seeds.iter().any(|s| s.error.is_some())
    }

    pub fn mean_final_success(&self) -> f64 {
        self.seeds.iter().map(|s| s.final_success_rate).sum::<f64>() / self.seeds.len() as f64
    }
}

pub fn seed_log_path(dir: &Path, seed: u64) -> PathBuf {
    dir.join(format!("seed_{seed}.csv"))
}

pub fn seed_demo_log_path(dir: &Path, seed: u64) -> PathBuf {
    dir.join(format!("seed_{seed}_demos.csv"))
}

pub fn seed_checkpoint_path(dir: &Path, seed: u64) -> PathBuf {
    dir.join(format!("seed_{seed}.ckpt.json"))
}

/// The demonstrations every seed starts from.
pub fn initial_demos(cfg: &ExperimentConfig) -> Result<DemoBuffer> {
    match &cfg.demo_path {
        Some(path) => load_demos(path),
        None => generate_demos(cfg.env, cfg.demo_count, cfg.demo_noise, cfg.demo_seed, cfg.topo.max_steps),
    }
}

/// Per-episode mean and population std across seeds, truncated to the
/// shortest log.
pub fn aggregate_csv(logs: &[&TrainingLog]) -> String {
    let mut out = String::from(AGGREGATE_HEADER);
    out.push('\n');
    let len = logs.iter().map(|l| l.records.len()).min().unwrap_or(0);
    let n = logs.len() as f64;
    for e in 0..len {
        let returns: Vec<f64> = logs.iter().map(|l| l.records[e].episode_return).collect();
        let mean = returns.iter().sum::<f64>() / n;
        let std = (returns.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / n).sqrt();
        let success = logs.iter().filter(|l| l.records[e].success).count() as f64 / n;
        let mmd = logs.iter().map(|l| l.records[e].mean_mmd).sum::<f64>() / n;
        let _ = writeln!(out, "{e},{mean},{std},{success},{mmd}");
    }
    out
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Trains every configured seed in order and writes the run directory.
///
/// Configuration and setup problems are returned as `Err`. A seed that fails
/// mid-run keeps its partial log and is reported in the summary; the
/// remaining seeds still run.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunSummary> {
    cfg.validate()?;
    let demos = initial_demos(cfg)?;
    let mut env = cfg.env.make(cfg.topo.max_steps)?;
    let rule = if cfg.baseline { UpdateRule::PpoOnly } else { UpdateRule::Topo };
    let dir = &cfg.output_dir;
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let hash = cfg.config_hash();
    write(&dir.join("config.txt"), &format!("# hash {hash}\n{}", cfg.canonical_text()))?;

    let mut logs = Vec::with_capacity(cfg.seeds.len());
    let mut seeds = Vec::with_capacity(cfg.seeds.len());
    for &seed in &cfg.seeds {
        info!("{} seed {seed}: training for {} episodes", cfg.env, cfg.episodes);
        let outcome = train(env.as_mut(), demos.clone(), &cfg.topo, cfg.episodes, seed, rule)?;
        write(&seed_log_path(dir, seed), &outcome.log.to_csv())?;
        write(&seed_demo_log_path(dir, seed), &outcome.log.demo_csv())?;
        Checkpoint::new(cfg.env.as_str(), &hash, &outcome.params).save(seed_checkpoint_path(dir, seed))?;
        let summary = SeedSummary {
            seed,
            episodes: outcome.log.records.len(),
            final_success_rate: outcome.log.success_rate(FINAL_WINDOW),
            error: outcome.error.map(|e| e.to_string()),
        };
        match &summary.error {
            Some(e) => warn!("seed {seed} stopped after {} episodes: {e}", summary.episodes),
            None => info!("seed {seed}: final success {:.2}", summary.final_success_rate),
        }
        seeds.push(summary);
        logs.push(outcome.log);
    }
    let refs: Vec<&TrainingLog> = logs.iter().collect();
    write(&dir.join("aggregate.csv"), &aggregate_csv(&refs))?;
    Ok(RunSummary {
        config_hash: hash,
        output_dir: dir.clone(),
        seeds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::EpisodeRecord;

    fn record(episode: usize, ret: f64, success: bool, mmd: f64) -> EpisodeRecord {
        EpisodeRecord {
            episode,
            episode_return: ret,
            success,
            mean_mmd: mmd,
            intrinsic_sum: 0.0,
            sigma: 0.0,
            bandwidth: 1.0,
            demo_min_return: 0.0,
            demo_replaced: false,
        }
    }

    #[test]
    fn aggregate_uses_population_std_and_shortest_log() {
        let a = TrainingLog {
            records: vec![record(0, 1.0, true, 0.5), record(1, 2.0, false, 0.0)],
            updates: 0,
        };
        let b = TrainingLog {
            records: vec![record(0, 3.0, false, 1.5)],
            updates: 0,
        };
        let csv = aggregate_csv(&[&a, &b]);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines, vec![AGGREGATE_HEADER, "0,2,1,0.5,1"]);
    }
}
