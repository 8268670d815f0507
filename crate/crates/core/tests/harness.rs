use std::fs;
use std::path::Path;

use topo::harness::compare::{parse_log, read_run};
use topo::harness::experiment::{seed_log_path, AGGREGATE_HEADER};
use topo::harness::{compare_runs, run_experiment, ExperimentConfig};

fn quick(dir: &Path, seeds: &[u64], episodes: usize) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::default();
    let text = "env = kdt-small\nmax_steps = 40\nhidden = 8, 8\nupdate_every = 2\ndemo_count = 2\n\
                feature_map = state_only\nnormalize_features = true\nbandwidth = 1.5\nsigma = 2\n";
    cfg.apply_text(text, Path::new("quick.cfg")).unwrap();
    cfg.episodes = episodes;
    cfg.seeds = seeds.to_vec();
    cfg.output_dir = dir.to_path_buf();
    cfg
}

fn aggregate_rows(dir: &Path) -> Vec<Vec<f64>> {
    let text = fs::read_to_string(dir.join("aggregate.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some(AGGREGATE_HEADER));
    lines.map(|l| l.split(',').map(|f| f.parse().unwrap()).collect()).collect()
}

#[test]
fn single_seed_aggregate_is_that_seed() {
    let tmp = tempfile::tempdir().unwrap();
    run_experiment(&quick(tmp.path(), &[4], 12)).unwrap();
    let path = seed_log_path(tmp.path(), 4);
    let rows = parse_log(&fs::read_to_string(&path).unwrap(), &path).unwrap();
    let agg = aggregate_rows(tmp.path());
    assert_eq!(agg.len(), rows.len());
    for (a, r) in agg.iter().zip(&rows) {
        assert_eq!(a[0], r.episode as f64);
        assert_eq!(a[1], r.episode_return);
        assert_eq!(a[2], 0.0);
        assert_eq!(a[3], f64::from(u8::from(r.success)));
        assert_eq!(a[4], r.mean_mmd);
    }
}

#[test]
fn repeated_seed_has_zero_spread() {
    let tmp = tempfile::tempdir().unwrap();
    let summary = run_experiment(&quick(tmp.path(), &[7, 7, 7], 10)).unwrap();
    assert_eq!(summary.seeds.len(), 3);
    assert!(aggregate_rows(tmp.path()).iter().all(|row| row[2] == 0.0));
}

#[test]
fn aggregate_matches_per_seed_files() {
    let tmp = tempfile::tempdir().unwrap();
    let n = 14;
    run_experiment(&quick(tmp.path(), &[1, 2, 3], n)).unwrap();
    let runs = read_run(tmp.path()).unwrap();
    assert_eq!(runs.iter().map(|(s, _)| *s).collect::<Vec<_>>(), vec![1, 2, 3]);
    let agg = aggregate_rows(tmp.path());
    assert_eq!(agg.len(), n);
    for (e, row) in agg.iter().enumerate() {
        let returns: Vec<f64> = runs.iter().map(|(_, r)| r[e].episode_return).collect();
        let mean = returns.iter().sum::<f64>() / 3.0;
        let std = (returns.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / 3.0).sqrt();
        let success = runs.iter().filter(|(_, r)| r[e].success).count() as f64 / 3.0;
        let mmd = runs.iter().map(|(_, r)| r[e].mean_mmd).sum::<f64>() / 3.0;
        assert!((row[1] - mean).abs() < 1e-12);
        assert!((row[2] - std).abs() < 1e-12);
        assert!((row[3] - success).abs() < 1e-12);
        assert!((row[4] - mmd).abs() < 1e-12);
    }
}

#[test]
fn run_directory_compared_with_itself() {
    let tmp = tempfile::tempdir().unwrap();
    run_experiment(&quick(tmp.path(), &[0, 1], 10)).unwrap();
    let c = compare_runs(tmp.path(), tmp.path()).unwrap();
    assert_eq!(c.success_delta(), 0.0);
    assert_eq!(c.first_success_delta(), 0.0);
    assert_eq!(c.topo.mmd_trend, c.baseline.mmd_trend);
}

#[test]
fn first_success_matches_a_scan() {
    let header = topo::policy::train::LOG_HEADER;
    let pattern = |hits: &[usize], n: usize| {
        let mut s = format!("{header}\n");
        for e in 0..n {
            s.push_str(&format!("{e},0,{},0.5,0,0.1,1\n", u8::from(hits.contains(&e))));
        }
        s
    };
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    // 1-based first successes: 4, 1, never (counts as 21); median 4
    let hits: [&[usize]; 3] = [&[3, 9], &[0], &[]];
    for (seed, h) in hits.iter().enumerate() {
        fs::write(a.path().join(format!("seed_{seed}.csv")), pattern(h, 20)).unwrap();
        fs::write(b.path().join(format!("seed_{seed}.csv")), pattern(&[], 20)).unwrap();
    }
    let c = compare_runs(a.path(), b.path()).unwrap();
    let mut scan: Vec<f64> = hits
        .iter()
        .map(|h| h.iter().min().map_or(21.0, |&e| (e + 1) as f64))
        .collect();
    scan.sort_by(f64::total_cmp);
    assert_eq!(c.topo.median_first_success, scan[1]);
    assert_eq!(c.baseline.median_first_success, 21.0);
}

#[test]
fn config_file_values_can_be_overridden() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("run.cfg");
    fs::write(&path, "episodes = 40\nsigma = 0.5\n# comment\nseeds = 1, 2\n").unwrap();
    let mut cfg = ExperimentConfig::from_file(&path).unwrap();
    assert_eq!(cfg.episodes, 40);
    assert_eq!(cfg.topo.sigma, 0.5);
    cfg.set("sigma", "3").unwrap();
    assert_eq!(cfg.topo.sigma, 3.0);
    assert!(cfg.set("no_such_key", "1").is_err());
}
