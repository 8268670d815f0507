//! Action distributions: categorical over logits and diagonal Gaussian with a
//! state-independent log standard deviation.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::trajectory::ActionValue;

pub const LOG_STD_MIN: f64 = -5.0;
pub const LOG_STD_MAX: f64 = 2.0;

/// Numerically stable log-softmax.
pub fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|z| (z - max).exp()).sum::<f64>().ln();
    logits.iter().map(|z| z - lse).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub enum DistParams {
    Categorical { logits: Vec<f64> },
    Gaussian { mean: Vec<f64>, log_std: Vec<f64> },
}

/// Gradients of a scalar with respect to the distribution's raw parameters.
#[derive(Debug, Clone, PartialEq)]
pub enum DistGrad {
    Categorical { logits: Vec<f64> },
    Gaussian { mean: Vec<f64>, log_std: Vec<f64> },
}

impl DistParams {
    pub fn sample(&self, rng: &mut impl Rng) -> (ActionValue, f64) {
        match self {
            DistParams::Categorical { logits } => {
                let logp = log_softmax(logits);
                let u: f64 = rng.random();
                let mut acc = 0.0;
                let mut choice = logp.len() - 1;
                for (i, lp) in logp.iter().enumerate() {
                    acc += lp.exp();
                    if u < acc {
                        choice = i;
                        break;
                    }
                }
                (ActionValue::Discrete(choice), logp[choice])
            }
            DistParams::Gaussian { mean, log_std } => {
                let action: Vec<f64> = mean
                    .iter()
                    .zip(log_std)
                    .map(|(m, ls)| m + ls.exp() * rng.sample::<f64, _>(StandardNormal))
                    .collect();
                let lp = gaussian_log_prob(mean, log_std, &action);
                (ActionValue::Continuous(action), lp)
            }
        }
    }

    /// Most likely action: arg-max logit or the mean.
    pub fn mode(&self) -> ActionValue {
        match self {
            DistParams::Categorical { logits } => {
                let best = logits
                    .iter()
                    .enumerate()
                    .fold((0, f64::NEG_INFINITY), |acc, (i, &z)| if z > acc.1 { (i, z) } else { acc });
                ActionValue::Discrete(best.0)
            }
            DistParams::Gaussian { mean, .. } => ActionValue::Continuous(mean.clone()),
        }
    }

    pub fn log_prob(&self, action: &ActionValue) -> f64 {
        match (self, action) {
            (DistParams::Categorical { logits }, ActionValue::Discrete(a)) => log_softmax(logits)[*a],
            (DistParams::Gaussian { mean, log_std }, ActionValue::Continuous(a)) => gaussian_log_prob(mean, log_std, a),
            _ => panic!("action kind does not match distribution"),
        }
    }

    pub fn entropy(&self) -> f64 {
        match self {
            DistParams::Categorical { logits } => {
                let logp = log_softmax(logits);
                -logp.iter().map(|lp| lp.exp() * lp).sum::<f64>()
            }
            DistParams::Gaussian { log_std, .. } => log_std
                .iter()
                .map(|ls| ls + 0.5 * (2.0 * PI * std::f64::consts::E).ln())
                .sum(),
        }
    }

    /// `(log_prob, entropy)` together with `d/dparams (w_lp * log_prob + w_ent * entropy)`.
    pub fn log_prob_entropy_grad(&self, action: &ActionValue, w_lp: f64, w_ent: f64) -> (f64, f64, DistGrad) {
        match (self, action) {
            (DistParams::Categorical { logits }, ActionValue::Discrete(a)) => {
                let logp = log_softmax(logits);
                let entropy = -logp.iter().map(|lp| lp.exp() * lp).sum::<f64>();
                let grad = logp
                    .iter()
                    .enumerate()
                    .map(|(j, lp)| {
                        let p = lp.exp();
                        let d_lp = f64::from(u8::from(j == *a)) - p;
                        let d_ent = -p * (lp + entropy);
                        w_lp * d_lp + w_ent * d_ent
                    })
                    .collect();
                (logp[*a], entropy, DistGrad::Categorical { logits: grad })
            }
            (DistParams::Gaussian { mean, log_std }, ActionValue::Continuous(a)) => {
                let lp = gaussian_log_prob(mean, log_std, a);
                let entropy = self.entropy();
                let mut g_mean = Vec::with_capacity(mean.len());
                let mut g_ls = Vec::with_capacity(mean.len());
                for ((m, ls), x) in mean.iter().zip(log_std).zip(a) {
                    let var = (2.0 * ls).exp();
                    let d = x - m;
                    g_mean.push(w_lp * d / var);
                    g_ls.push(w_lp * (d * d / var - 1.0) + w_ent);
                }
                (lp, entropy, DistGrad::Gaussian { mean: g_mean, log_std: g_ls })
            }
            _ => panic!("action kind does not match distribution"),
        }
    }
}

pub fn gaussian_log_prob(mean: &[f64], log_std: &[f64], action: &[f64]) -> f64 {
    mean.iter()
        .zip(log_std)
        .zip(action)
        .map(|((m, ls), a)| {
            let z = (a - m) / ls.exp();
            -0.5 * z * z - ls - 0.5 * (2.0 * PI).ln()
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn softmax_normalises() {
        let lp = log_softmax(&[0.3, -1.2, 2.5, 0.0]);
        let total: f64 = lp.iter().map(|v| v.exp()).sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn saturated_logit_dominates() {
        let d = DistParams::Categorical {
            logits: vec![0.0, 30.0, 0.0, 0.0],
        };
        let p = d.log_prob(&ActionValue::Discrete(1)).exp();
        assert!(p >= 1.0 - 1e-9);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..1000 {
            assert_eq!(d.sample(&mut rng).0, ActionValue::Discrete(1));
        }
    }

    #[test]
    fn categorical_frequencies_match_probabilities() {
        let logits = vec![0.5, -0.3, 1.1, 0.0];
        let probs: Vec<f64> = log_softmax(&logits).iter().map(|v| v.exp()).collect();
        let d = DistParams::Categorical { logits };
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let n = 100_000;
        let mut counts = [0usize; 4];
        for _ in 0..n {
            let (a, lp) = d.sample(&mut rng);
            let i = a.as_discrete().unwrap();
            assert!((lp - probs[i].ln()).abs() < 1e-12);
            counts[i] += 1;
        }
        for (c, p) in counts.iter().zip(&probs) {
            let freq = *c as f64 / n as f64;
            let se = (p * (1.0 - p) / n as f64).sqrt();
            assert!((freq - p).abs() < 3.0 * se, "freq {freq} vs p {p}");
        }
    }

    /// With log-std at its floor, `std = e^-5 ~ 0.0067`. 99% of standard normal
    /// draws fall within 2.576 std, i.e. about 0.0174 of the mean.
    #[test]
    fn narrow_gaussian_concentrates() {
        let d = DistParams::Gaussian {
            mean: vec![0.25],
            log_std: vec![LOG_STD_MIN],
        };
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let n = 10_000;
        let mut inside = 0;
        for _ in 0..n {
            let (a, lp) = d.sample(&mut rng);
            let ActionValue::Continuous(v) = &a else { unreachable!() };
            assert!((lp - d.log_prob(&a)).abs() < 1e-12);
            if (v[0] - 0.25).abs() < 0.02 {
                inside += 1;
            }
        }
        assert!(inside as f64 >= 0.99 * n as f64, "{inside}");
    }

    #[test]
    fn gaussian_log_prob_standard_normal() {
        let lp = gaussian_log_prob(&[0.0], &[0.0], &[0.0]);
        assert!((lp - -0.5 * (2.0 * PI).ln()).abs() < 1e-15);
    }

    fn fd_check(d: &DistParams, a: &ActionValue) {
        let (w_lp, w_ent) = (0.7, -0.3);
        let (_, _, grad) = d.log_prob_entropy_grad(a, w_lp, w_ent);
        let f = |d: &DistParams| w_lp * d.log_prob(a) + w_ent * d.entropy();
        let h = 1e-6;
        match (d, grad) {
            (DistParams::Categorical { logits }, DistGrad::Categorical { logits: g }) => {
                for i in 0..logits.len() {
                    let mut hi = logits.clone();
                    hi[i] += h;
                    let mut lo = logits.clone();
                    lo[i] -= h;
                    let fd = (f(&DistParams::Categorical { logits: hi }) - f(&DistParams::Categorical { logits: lo })) / (2.0 * h);
                    assert!((fd - g[i]).abs() < 1e-8);
                }
            }
            (DistParams::Gaussian { mean, log_std }, DistGrad::Gaussian { mean: gm, log_std: gl }) => {
                for i in 0..mean.len() {
                    let mut hi = mean.clone();
                    hi[i] += h;
                    let mut lo = mean.clone();
                    lo[i] -= h;
                    let fd = (f(&DistParams::Gaussian { mean: hi, log_std: log_std.clone() })
                        - f(&DistParams::Gaussian { mean: lo, log_std: log_std.clone() }))
                        / (2.0 * h);
                    assert!((fd - gm[i]).abs() < 1e-7);
                    let mut hi = log_std.clone();
                    hi[i] += h;
                    let mut lo = log_std.clone();
                    lo[i] -= h;
                    let fd = (f(&DistParams::Gaussian { mean: mean.clone(), log_std: hi })
                        - f(&DistParams::Gaussian { mean: mean.clone(), log_std: lo }))
                        / (2.0 * h);
                    assert!((fd - gl[i]).abs() < 1e-7);
                }
            }
            _ => unreachable!(),
        }
    }

    #[test]
    fn analytic_gradients() {
        fd_check(
            &DistParams::Categorical {
                logits: vec![0.2, -0.4, 1.0],
            },
            &ActionValue::Discrete(2),
        );
        fd_check(
            &DistParams::Gaussian {
                mean: vec![0.1, -0.5],
                log_std: vec![-0.3, 0.2],
            },
            &ActionValue::Continuous(vec![0.4, -1.1]),
        );
    }
}
