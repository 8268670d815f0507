use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::envs::Environment;
use crate::error::Result;
use crate::policy::{run_episode, PolicyParams, Workspace};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalSummary {
    pub episodes: usize,
    pub mean_return: f64,
    pub success_rate: f64,
}

/// Runs `episodes` episodes with fresh seeds drawn from `seed`. With `greedy`
/// the policy's most likely action is taken instead of a sample.
pub fn evaluate(
    env: &mut dyn Environment,
    params: &PolicyParams,
    episodes: usize,
    seed: u64,
    greedy: bool,
) -> Result<EvalSummary> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ws = Workspace::default();
    let mut total = 0.0;
    let mut successes = 0usize;
    for i in 0..episodes {
        let (ret, success) = if greedy {
            greedy_episode(env, params, &mut rng, &mut ws)?
        } else {
            let (traj, success) = run_episode(env, params, i as u64, &mut rng, &mut ws)?;
            (traj.episode_return(), success)
        };
        total += ret;
        successes += usize::from(success);
    }
    let n = episodes.max(1) as f64;
    Ok(EvalSummary {
        episodes,
        mean_return: total / n,
        success_rate: successes as f64 / n,
    })
}

fn greedy_episode(
    env: &mut dyn Environment,
    params: &PolicyParams,
    rng: &mut ChaCha8Rng,
    ws: &mut Workspace,
) -> Result<(f64, bool)> {
    let mut obs = env.reset(rng.random());
    let mut ret = 0.0;
    loop {
        let action = params.forward_policy(&obs, ws)?.mode();
        let out = env.step(&action)?;
        ret += out.reward;
        obs = out.observation;
        if out.done {
            return Ok((ret, out.success));
        }
    }
}
