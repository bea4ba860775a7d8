use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::learners::{train_weighted, TaskMode};
use crate::model::{sign_label, Example, LinearHypothesis, Sample};

use super::gap::{round_errors, run_rounds};
use super::{
    alpha, check_domains, misses, pooled, reweight, train_renormalized, BoostConfig, BoostOutput, BoostTrace,
    Ensemble, Member, RoundTrace, StopReason,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BaselineKind {
    AdaBoostT,
    AdaBoostTS,
    TrAdaBoost,
    TransferBoost,
    AdaBoostR2T,
    AdaBoostR2TS,
    TrAdaBoostR2,
}

impl BaselineKind {
    pub fn mode(self) -> TaskMode {
        match self {
            Self::AdaBoostT | Self::AdaBoostTS | Self::TrAdaBoost | Self::TransferBoost => TaskMode::Classification,
            Self::AdaBoostR2T | Self::AdaBoostR2TS | Self::TrAdaBoostR2 => TaskMode::Regression,
        }
    }
}

/// Fixed per-round multiplier of misclassified source weights in TrAdaBoost.
pub fn tradaboost_source_factor(n_source: usize, rounds: usize) -> f64 {
    1.0 / (1.0 + (2.0 * (n_source as f64).ln() / rounds as f64).sqrt())
}

/// Runs a comparison booster. Only `rounds`, `base`, `mode` and
/// `epsilon_floor` of `cfg` are used; the penalty and clipping settings are
/// ignored.
pub fn run_baseline(kind: BaselineKind, source: &Sample, target: &Sample, cfg: &BoostConfig) -> Result<BoostOutput> {
    let cfg = cfg.unpenalized();
    cfg.validate()?;
    cfg.require_mode(kind.mode())?;
    check_domains(source, target, cfg.mode)?;
    match kind {
        BaselineKind::AdaBoostT | BaselineKind::AdaBoostR2T => {
            run_rounds(target.examples(), 0, &cfg, |d| Ok(vec![0.0; d.len()]))
        }
        BaselineKind::AdaBoostTS | BaselineKind::AdaBoostR2TS => {
            run_rounds(&pooled(source, target), source.len(), &cfg, |d| Ok(vec![0.0; d.len()]))
        }
        BaselineKind::TrAdaBoost | BaselineKind::TrAdaBoostR2 => tradaboost(source, target, &cfg),
        BaselineKind::TransferBoost => transfer_boost(source, target, &cfg),
    }
}

/// TrAdaBoost and its regression form: source weights shrink by a fixed
/// factor on mistakes, target weights grow by the target-only error rate,
/// and the ensemble votes with the second half of the rounds.
fn tradaboost(source: &Sample, target: &Sample, cfg: &BoostConfig) -> Result<BoostOutput> {
    let all = pooled(source, target);
    let ns = source.len();
    let n = all.len();
    let log_src = tradaboost_source_factor(ns, cfg.rounds).ln();
    let mut d = vec![1.0 / n as f64; n];
    let mut members = Vec::new();
    let mut rounds = Vec::new();
    let mut stop = StopReason::Completed;
    for k in 1..=cfg.rounds {
        let h = train_weighted(&all, &d, &cfg.base)?;
        let Some(err) = round_errors(&h, &all, cfg.mode) else {
            members.push(Member {
                alpha: alpha(cfg.epsilon_floor),
                h,
            });
            stop = StopReason::PerfectFit { round: k };
            break;
        };
        let target_mass: f64 = d[ns..].iter().sum();
        let eps: f64 = d[ns..].iter().zip(&err[ns..]).map(|(w, e)| w * e).sum::<f64>() / target_mass;
        if eps >= 0.5 {
            stop = StopReason::WeakLearnerFailed { round: k, epsilon: eps };
            if members.is_empty() {
                members.push(Member { alpha: 1.0, h });
            }
            break;
        }
        let eps = eps.max(cfg.epsilon_floor);
        let a = alpha(eps);
        let beta: Vec<f64> = err
            .iter()
            .enumerate()
            .map(|(i, e)| if i < ns { log_src * e } else { a * e })
            .collect();
        let r = reweight(&d, &beta, 1.0);
        rounds.push(RoundTrace {
            k,
            weights: std::mem::replace(&mut d, r.weights),
            epsilon: eps,
            alpha: a,
            z: r.z,
            unnormalized: r.unnormalized,
            clipped: r.clipped,
        });
        members.push(Member { alpha: a, h });
    }
    let start = members.len().div_ceil(2).saturating_sub(1);
    let members = members.split_off(start);
    Ok(BoostOutput {
        ensemble: Ensemble::new(members, cfg.mode),
        trace: BoostTrace {
            n_source: ns,
            rounds,
            stop,
            final_weights: d,
        },
    })
}

/// TransferBoost with a single source: source weights additionally scale by
/// `exp(tau)`, where `tau` is the drop in target error from adding the
/// source to the training set.
fn transfer_boost(source: &Sample, target: &Sample, cfg: &BoostConfig) -> Result<BoostOutput> {
    let all = pooled(source, target);
    let ns = source.len();
    let n = all.len();
    let mut d = vec![1.0 / n as f64; n];
    let mut members = Vec::new();
    let mut rounds = Vec::new();
    let mut stop = StopReason::Completed;
    for k in 1..=cfg.rounds {
        let h = train_weighted(&all, &d, &cfg.base)?;
        let miss = misses(&h, &all);
        let eps: f64 = d.iter().zip(&miss).filter(|(_, m)| **m).map(|(w, _)| w).sum();
        if eps >= 0.5 {
            stop = StopReason::WeakLearnerFailed { round: k, epsilon: eps };
            if members.is_empty() {
                members.push(Member { alpha: 1.0, h });
            }
            break;
        }
        let eps = eps.max(cfg.epsilon_floor);
        let a = 0.5 * alpha(eps);
        let ht = train_renormalized(&all[ns..], &d[ns..], &cfg.base)?;
        let tau = target_error(&ht, &all[ns..], &d[ns..]) - target_error_from(&miss[ns..], &d[ns..]);
        let beta: Vec<f64> = all
            .iter()
            .enumerate()
            .map(|(i, e)| {
                let margin = -a * e.y * sign_label(h.score(&e.x));
                if i < ns {
                    margin + tau
                } else {
                    margin
                }
            })
            .collect();
        let r = reweight(&d, &beta, 1.0);
        rounds.push(RoundTrace {
            k,
            weights: std::mem::replace(&mut d, r.weights),
            epsilon: eps,
            alpha: a,
            z: r.z,
            unnormalized: r.unnormalized,
            clipped: r.clipped,
        });
        members.push(Member { alpha: a, h });
    }
    Ok(BoostOutput {
        ensemble: Ensemble::new(members, cfg.mode),
        trace: BoostTrace {
            n_source: ns,
            rounds,
            stop,
            final_weights: d,
        },
    })
}

fn target_error(h: &LinearHypothesis, examples: &[Example], weights: &[f64]) -> f64 {
    target_error_from(&misses(h, examples), weights)
}

/// Weighted error with the weights rescaled to sum 1.
fn target_error_from(miss: &[bool], weights: &[f64]) -> f64 {
    let total: f64 = weights.iter().sum();
    miss.iter().zip(weights).filter(|(m, _)| **m).map(|(_, w)| w).sum::<f64>() / total
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boost::gap::{gap_boost, gap_boost_r};
    use crate::learners::TrainSpec;
    use crate::model::DomainTag;
    use rand::{RngExt, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn problem(seed: u64, classification: bool, flip: f64) -> (Sample, Sample) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut draw = |n: usize, flip: f64, tag| {
            let xs: Vec<Vec<f64>> = (0..n).map(|_| (0..2).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect()).collect();
            let ys = xs
                .iter()
                .map(|x| {
                    let s = x[0] + 0.3 * x[1] + 0.4 * (rng.random::<f64>() - 0.5);
                    if classification {
                        let y = sign_label(s);
                        if rng.random_bool(flip) {
                            -y
                        } else {
                            y
                        }
                    } else {
                        s
                    }
                })
                .collect();
            Sample::from_rows(xs, ys, tag).unwrap()
        };
        let s = draw(50, flip, DomainTag::Source);
        let t = draw(20, 0.0, DomainTag::Target);
        (s, t)
    }

    #[test]
    fn source_factor_matches_hand_value() {
        // sqrt(2 ln 100 / 20) = sqrt(0.4605170) = 0.6786140
        let f = tradaboost_source_factor(100, 20);
        assert!((f - 1.0 / 1.678_614_0).abs() < 1e-6);
        assert!((f - 0.5957).abs() < 1e-4);
    }

    #[test]
    fn pooled_adaboost_equals_unpenalized_gap_boost_bitwise() {
        let spec = TrainSpec::logistic(0.05).with_augment(true);
        let (s, t) = problem(3, true, 0.1);
        let cfg = BoostConfig::classification(spec).unpenalized();
        let a = run_baseline(BaselineKind::AdaBoostTS, &s, &t, &cfg).unwrap();
        let b = gap_boost(&s, &t, &cfg).unwrap();
        assert_eq!(a, b);

        let spec = TrainSpec::squared(0.05).with_augment(true);
        let (s, t) = problem(3, false, 0.0);
        let cfg = BoostConfig::regression(spec).unpenalized();
        let a = run_baseline(BaselineKind::AdaBoostR2TS, &s, &t, &cfg).unwrap();
        let b = gap_boost_r(&s, &t, &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn target_only_ignores_source() {
        let spec = TrainSpec::logistic(0.05).with_augment(true);
        let (s, t) = problem(4, true, 0.0);
        let (s2, _) = problem(99, true, 0.4);
        let cfg = BoostConfig::classification(spec);
        let a = run_baseline(BaselineKind::AdaBoostT, &s, &t, &cfg).unwrap();
        let b = run_baseline(BaselineKind::AdaBoostT, &s2, &t, &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.trace.n_source, 0);
    }

    #[test]
    fn tradaboost_first_round_update() {
        let spec = TrainSpec::logistic(0.05).with_augment(true);
        let (s, t) = problem(6, true, 0.3);
        let cfg = BoostConfig {
            rounds: 4,
            ..BoostConfig::classification(spec)
        };
        let out = run_baseline(BaselineKind::TrAdaBoost, &s, &t, &cfg).unwrap();
        let all = pooled(&s, &t);
        let n = all.len();
        let h = train_weighted(&all, &vec![1.0 / n as f64; n], &spec).unwrap();
        let miss = misses(&h, &all);
        let eps_t = miss[50..].iter().filter(|m| **m).count() as f64 / 20.0;
        let bt = eps_t.max(1e-10) / (1.0 - eps_t.max(1e-10));
        let b = tradaboost_source_factor(50, 4);
        let raw: Vec<f64> = (0..n)
            .map(|i| match (i < 50, miss[i]) {
                (true, true) => b,
                (false, true) => 1.0 / bt,
                _ => 1.0,
            })
            .collect();
        let z: f64 = raw.iter().sum();
        let d2 = &out.trace.rounds[1].weights;
        for i in 0..n {
            assert!((d2[i] - raw[i] / z).abs() < 1e-12);
        }
        // Second half of four rounds: rounds 2, 3 and 4.
        assert_eq!(out.trace.stop, StopReason::Completed);
        assert_eq!(out.ensemble.members.len(), 3);
    }

    #[test]
    fn baselines_respect_mode() {
        let (s, t) = problem(7, true, 0.0);
        let cfg = BoostConfig::classification(TrainSpec::logistic(0.1));
        assert!(run_baseline(BaselineKind::AdaBoostR2T, &s, &t, &cfg).is_err());
        for kind in [
            BaselineKind::AdaBoostT,
            BaselineKind::AdaBoostTS,
            BaselineKind::TrAdaBoost,
            BaselineKind::TransferBoost,
        ] {
            let out = run_baseline(kind, &s, &t, &cfg).unwrap();
            out.trace.check_invariants(1.0).unwrap();
            assert!(out.ensemble.error_rate(&t).unwrap() < 0.5);
        }
        let (s, t) = problem(7, false, 0.0);
        let cfg = BoostConfig::regression(TrainSpec::squared(0.01).with_augment(true));
        for kind in [BaselineKind::AdaBoostR2T, BaselineKind::AdaBoostR2TS, BaselineKind::TrAdaBoostR2] {
            let out = run_baseline(kind, &s, &t, &cfg).unwrap();
            out.trace.check_invariants(1.0).unwrap();
            assert!(out.ensemble.rmse(&t).unwrap() < 1.0);
        }
    }

    #[test]
    fn transfer_boost_rewards_helpful_source() {
        let spec = TrainSpec::logistic(0.05).with_augment(true);
        let (s, t) = problem(8, true, 0.0);
        let cfg = BoostConfig {
            rounds: 1,
            ..BoostConfig::classification(spec)
        };
        let out = run_baseline(BaselineKind::TransferBoost, &s, &t, &cfg).unwrap();
        let r = &out.trace.rounds[0];
        let all = pooled(&s, &t);
        let n = all.len();
        let h = train_weighted(&all, &vec![1.0 / n as f64; n], &spec).unwrap();
        let ht = train_weighted(t.examples(), &[1.0 / 20.0; 20], &spec).unwrap();
        let err = |h: &crate::model::LinearHypothesis| misses(h, t.examples()).iter().filter(|m| **m).count() as f64 / 20.0;
        let tau = err(&ht) - err(&h);
        let a = r.alpha;
        let e0 = &all[0];
        let expect = (1.0 / n as f64) * (-a * e0.y * sign_label(h.score(&e0.x)) + tau).exp();
        assert!((r.unnormalized[0] - expect).abs() < 1e-15);
    }
}
