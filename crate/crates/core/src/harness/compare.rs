//! Side-by-side comparison of two run directories.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use super::experiment::FINAL_WINDOW;
use crate::error::{Error, Result};
use crate::policy::train::LOG_HEADER;

/// One row of a per-seed episode log.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogRow {
    pub episode: usize,
    pub episode_return: f64,
    pub success: bool,
    pub mean_mmd: f64,
    pub intrinsic_sum: f64,
    pub sigma: f64,
    pub bandwidth: f64,
}

pub fn parse_log(text: &str, path: &Path) -> Result<Vec<LogRow>> {
    let mut lines = text.lines();
    let header = lines.next().unwrap_or_default();
    let bad = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    if header != LOG_HEADER {
        return Err(bad(1, format!("unexpected header {header:?}")));
    }
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let lineno = i + 2;
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 7 {
            return Err(bad(lineno, format!("expected 7 fields, got {}", f.len())));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|e| bad(lineno, format!("{s:?}: {e}")));
        rows.push(LogRow {
            episode: f[0].parse().map_err(|e| bad(lineno, format!("{:?}: {e}", f[0])))?,
            episode_return: num(f[1])?,
            success: match f[2] {
                "1" => true,
                "0" => false,
                s => return Err(bad(lineno, format!("success must be 0 or 1, got {s:?}"))),
            },
            mean_mmd: num(f[3])?,
            intrinsic_sum: num(f[4])?,
            sigma: num(f[5])?,
            bandwidth: num(f[6])?,
        });
    }
    Ok(rows)
}

/// Reads every `seed_<s>.csv` in `dir`, sorted by seed.
pub fn read_run(dir: &Path) -> Result<Vec<(u64, Vec<LogRow>)>> {
    let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut runs = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        let Some(name) = path.file_name().and_then(|n| n.to_str()) else {
            continue;
        };
        let Some(seed) = name
            .strip_prefix("seed_")
            .and_then(|s| s.strip_suffix(".csv"))
            .and_then(|s| s.parse::<u64>().ok())
        else {
            continue;
        };
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        runs.push((seed, parse_log(&text, &path)?));
    }
    if runs.is_empty() {
        return Err(Error::Config(format!("no seed logs found in {}", dir.display())));
    }
    runs.sort_by_key(|(s, _)| *s);
    Ok(runs)
}

/// Mean over the last tenth of `values` minus the mean over the first tenth
/// (at least one entry each). Negative means the quantity went down.
pub fn tail_minus_head(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let k = (values.len() / 10).max(1);
    let mean = |s: &[f64]| s.iter().sum::<f64>() / s.len() as f64;
    mean(&values[values.len() - k..]) - mean(&values[..k])
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArmSummary {
    pub dir: PathBuf,
    pub seeds: Vec<u64>,
    pub episodes: usize,
    /// Success rate over the last [`FINAL_WINDOW`] episodes, averaged over seeds.
    pub final_success: f64,
    /// Median over seeds of the 1-based episode of first success; a seed that
    /// never succeeds counts as `episodes + 1`.
    pub median_first_success: f64,
    /// Tail-minus-head change of `mean_mmd`, averaged over seeds.
    pub mmd_trend: f64,
}

fn summarize(dir: &Path, runs: &[(u64, Vec<LogRow>)]) -> ArmSummary {
    let episodes = runs[0].1.len();
    let n = runs.len() as f64;
    let final_success = runs
        .iter()
        .map(|(_, rows)| {
            let tail = &rows[rows.len().saturating_sub(FINAL_WINDOW)..];
            tail.iter().filter(|r| r.success).count() as f64 / tail.len().max(1) as f64
        })
        .sum::<f64>()
        / n;
    let firsts = runs
        .iter()
        .map(|(_, rows)| rows.iter().position(|r| r.success).map_or(episodes + 1, |p| p + 1) as f64)
        .collect();
    let mmd_trend = runs
        .iter()
        .map(|(_, rows)| tail_minus_head(&rows.iter().map(|r| r.mean_mmd).collect::<Vec<_>>()))
        .sum::<f64>()
        / n;
    ArmSummary {
        dir: dir.to_path_buf(),
        seeds: runs.iter().map(|(s, _)| *s).collect(),
        episodes,
        final_success,
        median_first_success: median(firsts),
        mmd_trend,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub topo: ArmSummary,
    pub baseline: ArmSummary,
}

impl Comparison {
    pub fn success_delta(&self) -> f64 {
        self.topo.final_success - self.baseline.final_success
    }

    pub fn first_success_delta(&self) -> f64 {
        self.topo.median_first_success - self.baseline.median_first_success
    }
}

impl fmt::Display for Comparison {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:<28}{:>12}{:>12}{:>12}", "metric", "topo", "baseline", "delta")?;
        let row = |f: &mut fmt::Formatter<'_>, name: &str, a: f64, b: f64| {
            writeln!(f, "{name:<28}{a:>12.4}{b:>12.4}{:>12.4}", a - b)
        };
        row(f, "final success", self.topo.final_success, self.baseline.final_success)?;
        row(
            f,
            "median first success",
            self.topo.median_first_success,
            self.baseline.median_first_success,
        )?;
        row(f, "mmd trend (tail - head)", self.topo.mmd_trend, self.baseline.mmd_trend)?;
        write!(
            f,
            "seeds {:?}, {} episodes per seed",
            self.topo.seeds, self.topo.episodes
        )
    }
}

/// Compares two run directories produced with the same seeds and episode count.
pub fn compare_runs(topo_dir: &Path, baseline_dir: &Path) -> Result<Comparison> {
    let topo = read_run(topo_dir)?;
    let baseline = read_run(baseline_dir)?;
    let grid = |runs: &[(u64, Vec<LogRow>)]| -> Result<(Vec<u64>, usize)> {
        let len = runs[0].1.len();
        if runs.iter().any(|(_, r)| r.len() != len) {
            return Err(Error::Config("seed logs within one run have different lengths".into()));
        }
        Ok((runs.iter().map(|(s, _)| *s).collect(), len))
    };
    let (ts, tn) = grid(&topo)?;
    let (bs, bn) = grid(&baseline)?;
    if ts != bs || tn != bn {
        return Err(Error::Config(format!(
            "runs are not comparable: seeds {ts:?} x {tn} episodes vs {bs:?} x {bn} episodes"
        )));
    }
    Ok(Comparison {
        topo: summarize(topo_dir, &topo),
        baseline: summarize(baseline_dir, &baseline),
    })
}
