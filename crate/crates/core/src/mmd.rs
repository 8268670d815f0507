//! Kernel two-sample distance between trajectories.
//!
//! Each trajectory is treated as an empirical sample of its state-action
//! visitation distribution. Pairs are projected by a feature map, compared
//! with a Gaussian (or Laplace) kernel, and summarised by the biased
//! V-statistic estimate of the squared maximum mean discrepancy. The distance
//! of a trajectory to a demonstration buffer is the minimum over the buffer.

use std::cmp::Ordering;

use log::warn;

use crate::demo_store::DemoBuffer;
use crate::error::{Error, Result};
use crate::trajectory::{ActionValue, Observation, Trajectory};

/// Negative V-statistic values down to this magnitude are rounding noise and clamp to zero.
pub const CLAMP_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelKind {
    Gaussian,
    Laplace,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BandwidthMode {
    Fixed,
    MedianHeuristic,
}

/// The map `g` applied to a state-action pair before the kernel sees it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FeatureMap {
    StateAction,
    StateOnly,
    /// Selected state coordinates, e.g. a position.
    Coordinates(Vec<usize>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct KernelConfig {
    pub kernel: KernelKind,
    /// Length-scale; the active value when `bandwidth_mode` is `MedianHeuristic`
    /// is whatever the trainer froze for the current cycle.
    pub bandwidth: f64,
    pub bandwidth_mode: BandwidthMode,
    pub feature_map: FeatureMap,
    /// Per-dimension divisors applied after projection.
    pub feature_scale: Option<Vec<f64>>,
}

impl Default for KernelConfig {
    fn default() -> Self {
        KernelConfig {
            kernel: KernelKind::Gaussian,
            bandwidth: 1.0,
            bandwidth_mode: BandwidthMode::Fixed,
            feature_map: FeatureMap::StateOnly,
            feature_scale: None,
        }
    }
}

impl KernelConfig {
    pub fn validate(&self, observation_dim: usize) -> Result<()> {
        if self.bandwidth_mode == BandwidthMode::Fixed && !(self.bandwidth > 0.0 && self.bandwidth.is_finite()) {
            return Err(Error::Config(format!(
                "kernel bandwidth must be positive, got {}",
                self.bandwidth
            )));
        }
        if let FeatureMap::Coordinates(indices) = &self.feature_map {
            if indices.is_empty() {
                return Err(Error::Config("coordinate projection needs at least one index".into()));
            }
            if let Some(&bad) = indices.iter().find(|&&i| i >= observation_dim) {
                return Err(Error::Config(format!(
                    "projection index {bad} out of range for observation dimension {observation_dim}"
                )));
            }
        }
        if let Some(scale) = &self.feature_scale {
            if scale.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
                return Err(Error::Config("feature scale entries must be positive".into()));
            }
        }
        Ok(())
    }

    pub fn with_bandwidth(&self, bandwidth: f64) -> Self {
        KernelConfig {
            bandwidth,
            ..self.clone()
        }
    }

    fn eval(&self, u: &[f64], v: &[f64]) -> f64 {
        match self.kernel {
            KernelKind::Gaussian => {
                let d2: f64 = u.iter().zip(v).map(|(a, b)| (a - b) * (a - b)).sum();
                (-d2 / (2.0 * self.bandwidth * self.bandwidth)).exp()
            }
            KernelKind::Laplace => {
                let d1: f64 = u.iter().zip(v).map(|(a, b)| (a - b).abs()).sum();
                (-d1 / self.bandwidth).exp()
            }
        }
    }
}

/// Projected samples of one trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSet {
    pub points: Vec<Vec<f64>>,
    pub source_id: u64,
}

impl FeatureSet {
    pub fn new(points: Vec<Vec<f64>>, source_id: u64) -> Result<Self> {
        let Some(first) = points.first() else {
            return Err(Error::Usage("feature set must be non-empty".into()));
        };
        let dim = first.len();
        if points.iter().any(|p| p.len() != dim) {
            return Err(Error::Usage("feature points differ in dimension".into()));
        }
        Ok(FeatureSet { points, source_id })
    }

    pub fn from_trajectory(traj: &Trajectory, cfg: &KernelConfig) -> Result<Self> {
        let points = traj
            .transitions()
            .iter()
            .map(|t| project(&t.state, &t.action, cfg))
            .collect::<Result<Vec<_>>>()?;
        FeatureSet::new(points, traj.id())
    }

    pub fn dim(&self) -> usize {
        self.points[0].len()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DistanceReport {
    /// One entry per transition; every entry is the owning trajectory's distance.
    pub per_pair_distance: Vec<f64>,
    pub min_demo_id: u64,
}

impl DistanceReport {
    pub fn distance(&self) -> f64 {
        self.per_pair_distance.first().copied().unwrap_or(0.0)
    }
}

pub fn project(state: &Observation, action: &ActionValue, cfg: &KernelConfig) -> Result<Vec<f64>> {
    let mut out = match &cfg.feature_map {
        FeatureMap::StateAction => {
            let mut v = state.0.clone();
            action.encode_into(&mut v);
            v
        }
        FeatureMap::StateOnly => state.0.clone(),
        FeatureMap::Coordinates(indices) => indices
            .iter()
            .map(|&i| {
                state.get(i).copied().ok_or_else(|| {
                    Error::Config(format!(
                        "projection index {i} out of range for observation dimension {}",
                        state.len()
                    ))
                })
            })
            .collect::<Result<Vec<_>>>()?,
    };
    if let Some(scale) = &cfg.feature_scale {
        if scale.len() != out.len() {
            return Err(Error::Config(format!(
                "feature scale has {} entries but projected features have {}",
                scale.len(),
                out.len()
            )));
        }
        for (x, s) in out.iter_mut().zip(scale) {
            *x /= s;
        }
    }
    Ok(out)
}

fn check_dims(u: &[f64], v: &[f64]) -> Result<()> {
    if u.len() != v.len() {
        return Err(Error::Usage(format!(
            "kernel arguments differ in dimension: {} vs {}",
            u.len(),
            v.len()
        )));
    }
    Ok(())
}

/// `exp(-|u - v|^2 / (2 bandwidth^2))`.
pub fn gaussian_kernel(u: &[f64], v: &[f64], bandwidth: f64) -> Result<f64> {
    check_dims(u, v)?;
    if !(bandwidth > 0.0) {
        return Err(Error::Usage(format!("bandwidth must be positive, got {bandwidth}")));
    }
    let d2: f64 = u.iter().zip(v).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok((-d2 / (2.0 * bandwidth * bandwidth)).exp())
}

/// `exp(-|u - v|_1 / bandwidth)`.
pub fn laplace_kernel(u: &[f64], v: &[f64], bandwidth: f64) -> Result<f64> {
    check_dims(u, v)?;
    if !(bandwidth > 0.0) {
        return Err(Error::Usage(format!("bandwidth must be positive, got {bandwidth}")));
    }
    let d1: f64 = u.iter().zip(v).map(|(a, b)| (a - b).abs()).sum();
    Ok((-d1 / bandwidth).exp())
}

/// Median-heuristic bandwidth over all distinct pairs in the union of `sets`:
/// `sqrt(median(|x_i - x_j|^2) / 2)`, taking the lower median for even counts.
/// Falls back to 1.0 with a warning when the median distance is zero.
pub fn median_heuristic(sets: &[FeatureSet]) -> Result<f64> {
    let points: Vec<&[f64]> = sets
        .iter()
        .flat_map(|s| s.points.iter().map(Vec::as_slice))
        .collect();
    if points.len() < 2 {
        return Err(Error::Usage(
            "median heuristic needs at least two points".into(),
        ));
    }
    let dim = points[0].len();
    if points.iter().any(|p| p.len() != dim) {
        return Err(Error::Usage("feature points differ in dimension".into()));
    }
    let mut sq = Vec::with_capacity(points.len() * (points.len() - 1) / 2);
    for (i, u) in points.iter().enumerate() {
        for v in &points[i + 1..] {
            sq.push(u.iter().zip(v.iter()).map(|(a, b)| (a - b) * (a - b)).sum::<f64>());
        }
    }
    let mid = (sq.len() - 1) / 2;
    let (_, median, _) = sq.select_nth_unstable_by(mid, f64::total_cmp);
    let median = *median;
    if median <= 0.0 {
        warn!("median pairwise distance is zero; falling back to bandwidth 1.0");
        return Ok(1.0);
    }
    Ok((median / 2.0).sqrt())
}

/// Neumaier-compensated running sum.
#[derive(Debug, Default, Clone, Copy)]
struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn total(self) -> f64 {
        self.sum + self.carry
    }
}

fn mean_kernel(a: &FeatureSet, b: &FeatureSet, cfg: &KernelConfig) -> f64 {
    let mut acc = CompensatedSum::default();
    for x in &a.points {
        let mut row = CompensatedSum::default();
        for y in &b.points {
            row.add(cfg.eval(x, y));
        }
        acc.add(row.total());
    }
    acc.total() / (a.len() as f64 * b.len() as f64)
}

/// Total order on feature sets used to fix the evaluation order of the cross term.
fn canonical_cmp(a: &FeatureSet, b: &FeatureSet) -> Ordering {
    a.len().cmp(&b.len()).then_with(|| {
        a.points
            .iter()
            .flatten()
            .zip(b.points.iter().flatten())
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(Ordering::Equal)
    })
}

fn cross_term(a: &FeatureSet, b: &FeatureSet, cfg: &KernelConfig) -> f64 {
    if canonical_cmp(a, b) == Ordering::Greater {
        mean_kernel(b, a, cfg)
    } else {
        mean_kernel(a, b, cfg)
    }
}

fn check_sets(a: &FeatureSet, b: &FeatureSet) -> Result<()> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Usage("MMD needs non-empty sample sets".into()));
    }
    if a.dim() != b.dim() {
        return Err(Error::Usage(format!(
            "feature sets differ in dimension: {} vs {}",
            a.dim(),
            b.dim()
        )));
    }
    Ok(())
}

/// The V-statistic before clamping. Analytically non-negative.
pub fn mmd2_unclamped(a: &FeatureSet, b: &FeatureSet, cfg: &KernelConfig) -> Result<f64> {
    check_sets(a, b)?;
    let aa = mean_kernel(a, a, cfg);
    let bb = mean_kernel(b, b, cfg);
    Ok((aa + bb) - 2.0 * cross_term(a, b, cfg))
}

/// Biased squared-MMD estimate between two sample sets, clamped at zero.
pub fn mmd2(a: &FeatureSet, b: &FeatureSet, cfg: &KernelConfig) -> Result<f64> {
    mmd2_unclamped(a, b, cfg).map(|v| v.max(0.0))
}

/// Precomputed demonstration features for repeated distance queries within one cycle.
#[derive(Debug, Clone)]
pub struct DemoFeatures {
    sets: Vec<FeatureSet>,
    self_terms: Vec<f64>,
    cfg: KernelConfig,
}

impl DemoFeatures {
    pub fn new(demos: &DemoBuffer, cfg: &KernelConfig) -> Result<Self> {
        if demos.is_empty() {
            return Err(Error::Config("demonstration buffer is empty".into()));
        }
        let sets = demos
            .iter()
            .map(|d| FeatureSet::from_trajectory(d, cfg))
            .collect::<Result<Vec<_>>>()?;
        let self_terms = sets.iter().map(|s| mean_kernel(s, s, cfg)).collect();
        Ok(DemoFeatures {
            sets,
            self_terms,
            cfg: cfg.clone(),
        })
    }

    pub fn sets(&self) -> &[FeatureSet] {
        &self.sets
    }

    pub fn config(&self) -> &KernelConfig {
        &self.cfg
    }

    /// Minimum squared MMD from `set` to any demonstration, with the arg-min id.
    /// Ties go to the lowest demonstration id.
    pub fn min_distance(&self, set: &FeatureSet) -> Result<(f64, u64)> {
        let own = mean_kernel(set, set, &self.cfg);
        let mut best: Option<(f64, u64)> = None;
        for (demo, &demo_self) in self.sets.iter().zip(&self.self_terms) {
            check_sets(set, demo)?;
            let d = ((own + demo_self) - 2.0 * cross_term(set, demo, &self.cfg)).max(0.0);
            let better = match best {
                None => true,
                Some((bd, bid)) => d < bd || (d == bd && demo.source_id < bid),
            };
            if better {
                best = Some((d, demo.source_id));
            }
        }
        best.ok_or_else(|| Error::Config("demonstration buffer is empty".into()))
    }

    pub fn per_pair_distance(&self, traj: &Trajectory) -> Result<DistanceReport> {
        let set = FeatureSet::from_trajectory(traj, &self.cfg)?;
        let (d, id) = self.min_distance(&set)?;
        Ok(DistanceReport {
            per_pair_distance: vec![d; traj.len()],
            min_demo_id: id,
        })
    }
}

/// `min over demos of mmd2(traj, demo)` and the arg-min demonstration id.
pub fn traj_to_demos_distance(traj: &Trajectory, demos: &DemoBuffer, cfg: &KernelConfig) -> Result<(f64, u64)> {
    let features = DemoFeatures::new(demos, cfg)?;
    let set = FeatureSet::from_trajectory(traj, cfg)?;
    features.min_distance(&set)
}

/// Broadcasts the trajectory's demonstration distance to every one of its steps.
pub fn per_pair_distance(traj: &Trajectory, demos: &DemoBuffer, cfg: &KernelConfig) -> Result<DistanceReport> {
    DemoFeatures::new(demos, cfg)?.per_pair_distance(traj)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trajectory::Transition;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn scalar_gaussian(u: &[f64], v: &[f64], bw: f64) -> f64 {
        let mut d2 = 0.0;
        for i in 0..u.len() {
            let d = u[i] - v[i];
            d2 += d * d;
        }
        (-d2 / (2.0 * bw * bw)).exp()
    }

    fn brute_mmd2(a: &[Vec<f64>], b: &[Vec<f64>], bw: f64) -> f64 {
        let mut kxx = 0.0;
        for x in a {
            for y in a {
                kxx += scalar_gaussian(x, y, bw);
            }
        }
        let mut kxy = 0.0;
        for x in a {
            for y in b {
                kxy += scalar_gaussian(x, y, bw);
            }
        }
        let mut kyy = 0.0;
        for x in b {
            for y in b {
                kyy += scalar_gaussian(x, y, bw);
            }
        }
        let (n, m) = (a.len() as f64, b.len() as f64);
        kxx / (n * n) - 2.0 * kxy / (n * m) + kyy / (m * m)
    }

    fn random_points(rng: &mut ChaCha8Rng, n: usize, dim: usize) -> Vec<Vec<f64>> {
        (0..n)
            .map(|_| (0..dim).map(|_| rng.random_range(-2.0..2.0)).collect())
            .collect()
    }

    fn traj_from_states(id: u64, states: &[Vec<f64>]) -> Trajectory {
        let mut t = Trajectory::new(id);
        for s in states {
            t.push(Transition {
                state: Observation(s.clone()),
                action: ActionValue::Discrete(0),
                extrinsic_reward: 0.0,
                next_state: Observation(s.clone()),
                done: false,
                log_prob: 0.0,
            })
            .unwrap();
        }
        t
    }

    fn gaussian(bw: f64) -> KernelConfig {
        KernelConfig::default().with_bandwidth(bw)
    }

    #[test]
    fn projections() {
        let s = Observation(vec![1.0, 2.0, 3.0, 4.0]);
        let a = ActionValue::Discrete(1);
        let only = KernelConfig::default();
        assert_eq!(project(&s, &a, &only).unwrap(), s.0);

        let coords = KernelConfig {
            feature_map: FeatureMap::Coordinates(vec![0, 1]),
            ..KernelConfig::default()
        };
        assert_eq!(project(&s, &a, &coords).unwrap(), vec![1.0, 2.0]);

        let sa = KernelConfig {
            feature_map: FeatureMap::StateAction,
            ..KernelConfig::default()
        };
        let grid = Observation(vec![3.0, 7.0]);
        assert_eq!(project(&grid, &ActionValue::Discrete(2), &sa).unwrap(), vec![3.0, 7.0, 2.0]);
        let cont = ActionValue::Continuous(vec![0.5, -0.5]);
        assert_eq!(project(&grid, &cont, &sa).unwrap(), vec![3.0, 7.0, 0.5, -0.5]);

        let bad = KernelConfig {
            feature_map: FeatureMap::Coordinates(vec![0, 9]),
            ..KernelConfig::default()
        };
        assert!(matches!(project(&s, &a, &bad), Err(Error::Config(_))));
        assert!(bad.validate(4).is_err());
    }

    #[test]
    fn feature_scale_divides() {
        let cfg = KernelConfig {
            feature_map: FeatureMap::Coordinates(vec![0, 1]),
            feature_scale: Some(vec![2.0, 4.0]),
            ..KernelConfig::default()
        };
        let s = Observation(vec![1.0, 2.0, 3.0]);
        assert_eq!(project(&s, &ActionValue::Discrete(0), &cfg).unwrap(), vec![0.5, 0.5]);
    }

    #[test]
    fn gaussian_kernel_closed_forms() {
        assert_eq!(gaussian_kernel(&[1.0, -2.0], &[1.0, -2.0], 0.7).unwrap(), 1.0);
        // |u - v|^2 = 2 bw^2 -> exp(-1)
        let bw = 1.5;
        let v = gaussian_kernel(&[0.0, 0.0], &[bw, bw], bw).unwrap();
        assert!((v - 0.36787944117144233).abs() < 1e-15);
        assert!(gaussian_kernel(&[0.0], &[0.0, 1.0], 1.0).is_err());
        assert!(gaussian_kernel(&[0.0], &[1.0], 0.0).is_err());
    }

    #[test]
    fn gaussian_kernel_matches_scalar_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let dim = rng.random_range(1..9);
            let u: Vec<f64> = (0..dim).map(|_| rng.random_range(-3.0..3.0)).collect();
            let v: Vec<f64> = (0..dim).map(|_| rng.random_range(-3.0..3.0)).collect();
            let bw = rng.random_range(0.1..4.0);
            let got = gaussian_kernel(&u, &v, bw).unwrap();
            assert!((got - scalar_gaussian(&u, &v, bw)).abs() < 1e-12);
        }
    }

    #[test]
    fn laplace_kernel_closed_form() {
        let v = laplace_kernel(&[0.0, 0.0], &[1.0, -1.0], 2.0).unwrap();
        assert!((v - (-1.0f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn median_heuristic_cases() {
        let two = FeatureSet::new(vec![vec![0.0, 0.0], vec![3.0, 4.0]], 0).unwrap();
        let bw = median_heuristic(&[two]).unwrap();
        assert!((bw - (25.0f64 / 2.0).sqrt()).abs() < 1e-15);

        let same = FeatureSet::new(vec![vec![1.0, 1.0]; 5], 0).unwrap();
        assert_eq!(median_heuristic(&[same]).unwrap(), 1.0);

        let one = FeatureSet::new(vec![vec![1.0]], 0).unwrap();
        assert!(median_heuristic(&[one]).is_err());
    }

    #[test]
    fn median_heuristic_matches_sorted_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for trial in 0..20 {
            let pts = random_points(&mut rng, 10, 3);
            let split = 1 + trial % 8;
            let sets = vec![
                FeatureSet::new(pts[..split].to_vec(), 0).unwrap(),
                FeatureSet::new(pts[split..].to_vec(), 1).unwrap(),
            ];
            let mut d = Vec::new();
            for i in 0..pts.len() {
                for j in i + 1..pts.len() {
                    d.push(scalar_gaussian_sq(&pts[i], &pts[j]));
                }
            }
            d.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let expected = (d[(d.len() - 1) / 2] / 2.0).sqrt();
            assert_eq!(median_heuristic(&sets).unwrap(), expected);
        }
    }

    fn scalar_gaussian_sq(u: &[f64], v: &[f64]) -> f64 {
        let mut s = 0.0;
        for i in 0..u.len() {
            s += (u[i] - v[i]) * (u[i] - v[i]);
        }
        s
    }

    #[test]
    fn mmd2_identical_sets_is_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let pts = random_points(&mut rng, 17, 4);
        let a = FeatureSet::new(pts.clone(), 0).unwrap();
        let b = FeatureSet::new(pts, 1).unwrap();
        assert!(mmd2(&a, &b, &gaussian(0.8)).unwrap().abs() < 1e-10);
    }

    #[test]
    fn mmd2_singletons_closed_form() {
        let u = vec![0.3, -1.0];
        let v = vec![1.1, 0.4];
        let bw = 0.9;
        let a = FeatureSet::new(vec![u.clone()], 0).unwrap();
        let b = FeatureSet::new(vec![v.clone()], 1).unwrap();
        let expected = 2.0 * (1.0 - scalar_gaussian(&u, &v, bw));
        assert!((mmd2(&a, &b, &gaussian(bw)).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn mmd2_matches_double_sum_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let pa = random_points(&mut rng, 16, 3);
        let pb = random_points(&mut rng, 23, 3);
        let expected = brute_mmd2(&pa, &pb, 1.3);
        let a = FeatureSet::new(pa, 0).unwrap();
        let b = FeatureSet::new(pb, 1).unwrap();
        assert!((mmd2(&a, &b, &gaussian(1.3)).unwrap() - expected).abs() < 1e-10);
    }

    #[test]
    fn mmd2_rejects_bad_sets() {
        assert!(FeatureSet::new(vec![], 0).is_err());
        let a = FeatureSet::new(vec![vec![0.0]], 0).unwrap();
        let b = FeatureSet::new(vec![vec![0.0, 1.0]], 1).unwrap();
        assert!(mmd2(&a, &b, &gaussian(1.0)).is_err());
    }

    fn buffer_of(trajs: Vec<Trajectory>) -> DemoBuffer {
        let cap = trajs.len();
        DemoBuffer::from_trajectories(trajs, cap, true).unwrap()
    }

    #[test]
    fn distance_to_demos() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let cfg = gaussian(1.0);
        let traj = traj_from_states(100, &random_points(&mut rng, 12, 2));
        let demos: Vec<Trajectory> = (0..3)
            .map(|i| traj_from_states(i, &random_points(&mut rng, 8 + i as usize, 2)))
            .collect();

        // self-distance
        let mut with_self = demos.clone();
        with_self.push(traj.clone());
        let (d, id) = traj_to_demos_distance(&traj, &buffer_of(with_self), &cfg).unwrap();
        assert_eq!((d, id), (0.0, 100));

        // singleton buffer equals mmd2 directly
        let one = buffer_of(vec![demos[0].clone()]);
        let (d, _) = traj_to_demos_distance(&traj, &one, &cfg).unwrap();
        let direct = mmd2(
            &FeatureSet::from_trajectory(&traj, &cfg).unwrap(),
            &FeatureSet::from_trajectory(&demos[0], &cfg).unwrap(),
            &cfg,
        )
        .unwrap();
        assert_eq!(d, direct);

        // three demos: enumerate independently
        let oracle = demos
            .iter()
            .map(|demo| {
                let sa: Vec<Vec<f64>> = traj.transitions().iter().map(|t| t.state.0.clone()).collect();
                let sb: Vec<Vec<f64>> = demo.transitions().iter().map(|t| t.state.0.clone()).collect();
                (brute_mmd2(&sa, &sb, 1.0), demo.id())
            })
            .min_by(|x, y| x.0.partial_cmp(&y.0).unwrap())
            .unwrap();
        let (d, id) = traj_to_demos_distance(&traj, &buffer_of(demos), &cfg).unwrap();
        assert!((d - oracle.0).abs() < 1e-10);
        assert_eq!(id, oracle.1);
    }

    #[test]
    fn ties_go_to_lowest_id() {
        let cfg = gaussian(1.0);
        let states = vec![vec![0.0, 0.0], vec![1.0, 0.0]];
        let demos = buffer_of(vec![traj_from_states(9, &states), traj_from_states(4, &states)]);
        let probe = traj_from_states(50, &[vec![0.5, 0.5]]);
        assert_eq!(traj_to_demos_distance(&probe, &demos, &cfg).unwrap().1, 4);
    }

    #[test]
    fn per_pair_distance_broadcasts() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let cfg = gaussian(1.0);
        let traj = traj_from_states(1, &random_points(&mut rng, 5, 2));
        let demos = buffer_of(vec![traj_from_states(2, &random_points(&mut rng, 6, 2))]);
        let report = per_pair_distance(&traj, &demos, &cfg).unwrap();
        assert_eq!(report.per_pair_distance.len(), 5);
        let (d, id) = traj_to_demos_distance(&traj, &demos, &cfg).unwrap();
        assert!(report.per_pair_distance.iter().all(|&x| x == d));
        assert_eq!(report.min_demo_id, id);

        let own = buffer_of(vec![traj.clone()]);
        let report = per_pair_distance(&traj, &own, &cfg).unwrap();
        assert!(report.per_pair_distance.iter().all(|&x| x == 0.0));
    }

    fn arb_set(dim: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
        prop::collection::vec(prop::collection::vec(-3.0f64..3.0, dim), 1..20)
    }

    proptest! {
        #[test]
        fn mmd2_self_is_zero(pts in arb_set(3), bw in 0.2f64..3.0) {
            let a = FeatureSet::new(pts, 0).unwrap();
            prop_assert!(mmd2(&a, &a, &gaussian(bw)).unwrap().abs() < 1e-10);
        }

        #[test]
        fn mmd2_symmetric_bitwise(pa in arb_set(2), pb in arb_set(2), bw in 0.2f64..3.0) {
            let a = FeatureSet::new(pa, 0).unwrap();
            let b = FeatureSet::new(pb, 1).unwrap();
            let cfg = gaussian(bw);
            prop_assert_eq!(mmd2(&a, &b, &cfg).unwrap().to_bits(), mmd2(&b, &a, &cfg).unwrap().to_bits());
        }

        #[test]
        fn clamping_is_rounding_only(pa in arb_set(2), pb in arb_set(2), bw in 0.2f64..3.0) {
            let a = FeatureSet::new(pa, 0).unwrap();
            let b = FeatureSet::new(pb, 1).unwrap();
            prop_assert!(mmd2_unclamped(&a, &b, &gaussian(bw)).unwrap() >= -CLAMP_TOLERANCE);
        }

        #[test]
        fn adding_a_demo_never_increases_distance(
            probe in arb_set(2), d1 in arb_set(2), d2 in arb_set(2), extra in arb_set(2)
        ) {
            let cfg = gaussian(1.0);
            let probe = traj_from_states(99, &probe);
            let base = vec![traj_from_states(0, &d1), traj_from_states(1, &d2)];
            let (before, _) = traj_to_demos_distance(&probe, &buffer_of(base.clone()), &cfg).unwrap();
            let mut more = base;
            more.push(traj_from_states(2, &extra));
            let (after, _) = traj_to_demos_distance(&probe, &buffer_of(more), &cfg).unwrap();
            prop_assert!(after <= before);
        }

        #[test]
        fn gaussian_kernel_monotone_in_distance(mut radii in prop::collection::vec(0.0f64..10.0, 2..20), bw in 0.1f64..5.0) {
            radii.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let values: Vec<f64> = radii
                .iter()
                .map(|r| gaussian_kernel(&[0.0, 0.0], &[*r, 0.0], bw).unwrap())
                .collect();
            for w in values.windows(2) {
                prop_assert!(w[1] <= w[0]);
            }
        }
    }
}
