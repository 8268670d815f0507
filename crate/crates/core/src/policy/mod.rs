//! Function approximators, advantage estimation, and the penalised PPO update.

pub mod advantage;
pub mod checkpoint;
pub mod config;
pub mod distribution;
pub mod mlp;
pub mod params;
pub mod train;
pub mod update;

pub use advantage::{compute_advantages, gae, AdvantageBatch, AdvantageConfig};
pub use checkpoint::Checkpoint;
pub use config::{TopoConfig, UpdateRule};
pub use distribution::DistParams;
pub use params::{Architecture, PolicyHead, PolicyParams, Workspace};
pub use train::{intrinsic_rewards, run_episode, train, EpisodeRecord, TrainOutcome, TrainingLog};
pub use update::{loss, loss_and_grad, topo_update, LossParts, Momentum, UpdateStats};
