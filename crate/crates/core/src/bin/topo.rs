use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use topo::demo_store::generate_demos;
use topo::envs::EnvName;
use topo::harness::{compare_runs, evaluate, run_experiment, ExperimentConfig};
use topo::policy::Checkpoint;

/// Exit code for bad configuration, arguments or input files.
const EXIT_CONFIG: u8 = 1;
/// Exit code for failures after training or evaluation has started.
const EXIT_RUNTIME: u8 = 2;

#[derive(Parser)]
#[command(name = "topo", version, about = "Demonstration-guided policy optimisation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one or more seeds from a configuration file.
    Train {
        #[arg(long)]
        config: PathBuf,
        /// Train only this seed instead of the configured list.
        #[arg(long)]
        seed: Option<u64>,
        /// Use the PPO-only update (no demonstration distance).
        #[arg(long)]
        baseline: bool,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override a configuration key, e.g. `--set sigma=0.5`. Repeatable.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Write scripted expert demonstrations.
    GenDemos {
        #[arg(long)]
        env: EnvName,
        #[arg(long)]
        count: usize,
        #[arg(long)]
        out: PathBuf,
        /// Probability of a random action (grid) or action noise scale (point mass).
        #[arg(long, default_value_t = 0.0)]
        demo_noise: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Compare two run directories with matching seeds and episode counts.
    Compare {
        #[arg(long)]
        topo: PathBuf,
        #[arg(long)]
        baseline: PathBuf,
    },
    /// Roll out a saved policy.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        episodes: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Take the most likely action instead of sampling.
        #[arg(long)]
        greedy: bool,
    },
}

fn fail(code: u8, err: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {err}");
    ExitCode::from(code)
}

fn train(
    config: PathBuf,
    seed: Option<u64>,
    baseline: bool,
    out: Option<PathBuf>,
    overrides: Vec<String>,
) -> ExitCode {
    let mut cfg = match ExperimentConfig::from_file(&config) {
        Ok(c) => c,
        Err(e) => return fail(EXIT_CONFIG, e),
    };
    for o in &overrides {
        let Some((k, v)) = o.split_once('=') else {
            return fail(EXIT_CONFIG, format!("--set expects KEY=VALUE, got {o:?}"));
        };
        if let Err(e) = cfg.set(k.trim(), v.trim()) {
            return fail(EXIT_CONFIG, e);
        }
    }
    if let Some(s) = seed {
        cfg.seeds = vec![s];
    }
    if baseline {
        cfg.baseline = true;
    }
    if let Some(dir) = out {
        cfg.output_dir = dir;
    }
    if let Err(e) = cfg.validate() {
        return fail(EXIT_CONFIG, e);
    }
    let summary = match run_experiment(&cfg) {
        Ok(s) => s,
        Err(e @ (topo::Error::Config(_) | topo::Error::Parse { .. } | topo::Error::Map(_))) => {
            return fail(EXIT_CONFIG, e)
        }
        Err(e) => return fail(EXIT_RUNTIME, e),
    };
    for s in &summary.seeds {
        match &s.error {
            None => println!("seed {}: {} episodes, final success {:.3}", s.seed, s.episodes, s.final_success_rate),
            Some(e) => println!("seed {}: stopped after {} episodes: {e}", s.seed, s.episodes),
        }
    }
    println!(
        "mean final success {:.3}; logs in {} (config {})",
        summary.mean_final_success(),
        summary.output_dir.display(),
        &summary.config_hash[..12]
    );
    if summary.is_partial() {
        return fail(EXIT_RUNTIME, "one or more seeds stopped early; results are partial");
    }
    ExitCode::SUCCESS
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match cli.command {
        Command::Train {
            config,
            seed,
            baseline,
            out,
            overrides,
        } => train(config, seed, baseline, out, overrides),
        Command::GenDemos {
            env,
            count,
            out,
            demo_noise,
            seed,
        } => {
            let demos = match generate_demos(env, count, demo_noise, seed, None) {
                Ok(d) => d,
                Err(e @ topo::Error::Generation(_)) => return fail(EXIT_RUNTIME, e),
                Err(e) => return fail(EXIT_CONFIG, e),
            };
            if let Err(e) = demos.save(&out) {
                return fail(EXIT_RUNTIME, e);
            }
            println!(
                "wrote {} demonstrations to {} (min return {})",
                demos.len(),
                out.display(),
                demos.min_return()
            );
            ExitCode::SUCCESS
        }
        Command::Compare { topo, baseline } => match compare_runs(&topo, &baseline) {
            Ok(c) => {
                println!("{c}");
                ExitCode::SUCCESS
            }
            Err(e) => fail(EXIT_CONFIG, e),
        },
        Command::Eval {
            checkpoint,
            episodes,
            seed,
            greedy,
        } => {
            let loaded = Checkpoint::load(&checkpoint).and_then(|ck| {
                let env: EnvName = ck.env.parse()?;
                Ok((env.make(None)?, ck.params()?))
            });
            let (mut env, params) = match loaded {
                Ok(x) => x,
                Err(e) => return fail(EXIT_CONFIG, e),
            };
            match evaluate(env.as_mut(), &params, episodes, seed, greedy) {
                Ok(s) => {
                    println!(
                        "{} episodes: mean return {:.4}, success rate {:.3}",
                        s.episodes, s.mean_return, s.success_rate
                    );
                    ExitCode::SUCCESS
                }
                Err(e) => fail(EXIT_RUNTIME, e),
            }
        }
    }
}
