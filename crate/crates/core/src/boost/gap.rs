use crate::error::Result;
use crate::learners::{normalize_by_max, train_weighted, TaskMode};
use crate::model::{sign_label, Example, LinearHypothesis, Sample};

use super::{
    abs_residuals, alpha, check_domains, misses, pooled, reweight, train_renormalized, BoostConfig, BoostOutput,
    BoostTrace, Ensemble, Member, RoundTrace, StopReason,
};

/// Gap-minimizing boosting for classification.
///
/// Each round trains a joint learner on the pooled weighted sample and one
/// auxiliary learner per domain. Weights grow by `alpha` on mistakes and by
/// `rho` where the auxiliary learners disagree in sign (or, for target
/// points in agreement-bonus mode, where they agree).
pub fn gap_boost(source: &Sample, target: &Sample, cfg: &BoostConfig) -> Result<BoostOutput> {
    cfg.validate()?;
    cfg.require_mode(TaskMode::Classification)?;
    check_domains(source, target, TaskMode::Classification)?;
    let all = pooled(source, target);
    let ns = source.len();
    run_rounds(&all, ns, cfg, |d| {
        let hs = train_renormalized(&all[..ns], &d[..ns], &cfg.base)?;
        let ht = train_renormalized(&all[ns..], &d[ns..], &cfg.base)?;
        Ok(all
            .iter()
            .enumerate()
            .map(|(i, e)| {
                let disagree = sign_label(hs.score(&e.x)) != sign_label(ht.score(&e.x));
                if i < ns {
                    cfg.rho_s * indicator(disagree)
                } else if cfg.agreement_bonus {
                    cfg.rho_t * indicator(!disagree)
                } else {
                    cfg.rho_t * indicator(disagree)
                }
            })
            .collect())
    })
}

/// Gap-minimizing boosting for regression.
///
/// Mistakes are absolute residuals scaled by the round's largest residual;
/// disagreement is `|h_S(x) - h_T(x)|` scaled by its per-domain maximum (zero
/// when that maximum is zero). In agreement-bonus mode target points gain
/// `rho_t (1 - kappa)`.
pub fn gap_boost_r(source: &Sample, target: &Sample, cfg: &BoostConfig) -> Result<BoostOutput> {
    cfg.validate()?;
    cfg.require_mode(TaskMode::Regression)?;
    check_domains(source, target, TaskMode::Regression)?;
    let all = pooled(source, target);
    let ns = source.len();
    run_rounds(&all, ns, cfg, |d| {
        let hs = train_renormalized(&all[..ns], &d[..ns], &cfg.base)?;
        let ht = train_renormalized(&all[ns..], &d[ns..], &cfg.base)?;
        let gaps: Vec<f64> = all.iter().map(|e| (hs.score(&e.x) - ht.score(&e.x)).abs()).collect();
        let kappa_s = normalize_by_max(&gaps[..ns]).unwrap_or_else(|| vec![0.0; ns]);
        let kappa_t = normalize_by_max(&gaps[ns..]).unwrap_or_else(|| vec![0.0; all.len() - ns]);
        let mut penalty: Vec<f64> = kappa_s.iter().map(|k| cfg.rho_s * k).collect();
        penalty.extend(kappa_t.iter().map(|k| {
            if cfg.agreement_bonus {
                cfg.rho_t * (1.0 - k)
            } else {
                cfg.rho_t * k
            }
        }));
        Ok(penalty)
    })
}

fn indicator(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

/// Per-example mistake magnitudes in `[0, 1]`; `None` on a perfect
/// regression fit.
pub(super) fn round_errors(h: &LinearHypothesis, examples: &[Example], mode: TaskMode) -> Option<Vec<f64>> {
    match mode {
        TaskMode::Classification => Some(misses(h, examples).into_iter().map(indicator).collect()),
        TaskMode::Regression => normalize_by_max(&abs_residuals(h, examples)),
    }
}

/// Shared AdaBoost-style loop: `beta_i = penalty_i + alpha * err_i`.
///
/// `penalty` is called once per retained round with the current weights.
pub(super) fn run_rounds(
    all: &[Example],
    n_source: usize,
    cfg: &BoostConfig,
    mut penalty: impl FnMut(&[f64]) -> Result<Vec<f64>>,
) -> Result<BoostOutput> {
    let n = all.len();
    let mut d = vec![1.0 / n as f64; n];
    let mut members = Vec::new();
    let mut rounds = Vec::new();
    let mut stop = StopReason::Completed;
    for k in 1..=cfg.rounds {
        let h = train_weighted(all, &d, &cfg.base)?;
        let Some(err) = round_errors(&h, all, cfg.mode) else {
            members.push(Member {
                alpha: alpha(cfg.epsilon_floor),
                h,
            });
            stop = StopReason::PerfectFit { round: k };
            break;
        };
        let eps: f64 = d.iter().zip(&err).map(|(w, e)| w * e).sum();
        if eps >= 0.5 {
            stop = StopReason::WeakLearnerFailed { round: k, epsilon: eps };
            if members.is_empty() {
                members.push(Member { alpha: 1.0, h });
            }
            break;
        }
        let eps = eps.max(cfg.epsilon_floor);
        let a = alpha(eps);
        let pen = penalty(&d)?;
        let beta: Vec<f64> = pen.iter().zip(&err).map(|(p, e)| p + a * e).collect();
        let r = reweight(&d, &beta, cfg.gamma_max);
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
            n_source,
            rounds,
            stop,
            final_weights: d,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learners::TrainSpec;
    use crate::model::DomainTag;
    use rand::{RngExt, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn sample(rows: &[(&[f64], f64)], tag: DomainTag) -> Sample {
        Sample::from_rows(rows.iter().map(|r| r.0.to_vec()).collect(), rows.iter().map(|r| r.1).collect(), tag).unwrap()
    }

    fn noisy_problem(seed: u64, classification: bool) -> (Sample, Sample) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut draw = |n: usize, shift: f64, tag| {
            let xs: Vec<Vec<f64>> = (0..n).map(|_| (0..3).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect()).collect();
            let ys = xs
                .iter()
                .map(|x| {
                    let s = x[0] - 0.5 * x[1] + shift * x[2] + 0.6 * (rng.random::<f64>() - 0.5);
                    if classification {
                        sign_label(s)
                    } else {
                        s
                    }
                })
                .collect();
            Sample::from_rows(xs, ys, tag).unwrap()
        };
        let s = draw(40, 1.0, DomainTag::Source);
        let t = draw(15, 0.0, DomainTag::Target);
        (s, t)
    }

    /// Classic AdaBoost written with `beta = eps / (1 - eps)` multipliers on
    /// correctly classified points.
    fn adaboost_oracle(all: &[Example], rounds: usize, spec: &TrainSpec) -> Vec<(Vec<f64>, f64, f64)> {
        let n = all.len();
        let mut d = vec![1.0 / n as f64; n];
        let mut out = Vec::new();
        for _ in 0..rounds {
            let h = train_weighted(all, &d, spec).unwrap();
            let correct: Vec<bool> = all.iter().map(|e| sign_label(h.predict(&e.x).unwrap()) == e.y).collect();
            let eps: f64 = d.iter().zip(&correct).filter(|(_, c)| !**c).map(|(w, _)| w).sum();
            if eps >= 0.5 {
                break;
            }
            let b = eps / (1.0 - eps);
            out.push((d.clone(), eps, (1.0 / b).ln()));
            let next: Vec<f64> = d.iter().zip(&correct).map(|(w, c)| if *c { w * b } else { *w }).collect();
            let z: f64 = next.iter().sum();
            d = next.into_iter().map(|w| w / z).collect();
        }
        out
    }

    #[test]
    fn unpenalized_gap_boost_is_adaboost() {
        let spec = TrainSpec::logistic(0.05).with_augment(true);
        for seed in 0..5 {
            let (s, t) = noisy_problem(seed, true);
            let cfg = BoostConfig {
                rounds: 8,
                ..BoostConfig::classification(spec)
            }
            .unpenalized();
            let out = gap_boost(&s, &t, &cfg).unwrap();
            let oracle = adaboost_oracle(&pooled(&s, &t), 8, &spec);
            assert_eq!(out.trace.rounds.len(), oracle.len());
            for (r, (d, eps, a)) in out.trace.rounds.iter().zip(&oracle) {
                assert!((r.epsilon - eps).abs() < 1e-9);
                assert!((r.alpha - a).abs() < 1e-9);
                for (x, y) in r.weights.iter().zip(d) {
                    assert!((x - y).abs() < 1e-9);
                }
            }
            out.trace.check_invariants(cfg.gamma_max).unwrap();
        }
    }

    /// AdaBoost.R2 with linear loss, combining by the alpha-weighted mean.
    fn adaboost_r2_oracle(all: &[Example], rounds: usize, spec: &TrainSpec) -> Vec<(Vec<f64>, f64, f64)> {
        let n = all.len();
        let mut d = vec![1.0 / n as f64; n];
        let mut out = Vec::new();
        for _ in 0..rounds {
            let h = train_weighted(all, &d, spec).unwrap();
            let res: Vec<f64> = all.iter().map(|e| (h.predict(&e.x).unwrap() - e.y).abs()).collect();
            let big = res.iter().copied().fold(0.0, f64::max);
            let l: Vec<f64> = res.iter().map(|r| r / big).collect();
            let eps: f64 = d.iter().zip(&l).map(|(w, li)| w * li).sum();
            if eps >= 0.5 {
                break;
            }
            let b = eps / (1.0 - eps);
            out.push((d.clone(), eps, (1.0 / b).ln()));
            let next: Vec<f64> = d.iter().zip(&l).map(|(w, li)| w * b.powf(1.0 - li)).collect();
            let z: f64 = next.iter().sum();
            d = next.into_iter().map(|w| w / z).collect();
        }
        out
    }

    #[test]
    fn unpenalized_gap_boost_r_is_adaboost_r2() {
        let spec = TrainSpec::squared(0.01).with_augment(true);
        for seed in 0..5 {
            let (s, t) = noisy_problem(seed, false);
            let cfg = BoostConfig {
                rounds: 8,
                ..BoostConfig::regression(spec)
            }
            .unpenalized();
            let out = gap_boost_r(&s, &t, &cfg).unwrap();
            let oracle = adaboost_r2_oracle(&pooled(&s, &t), 8, &spec);
            assert_eq!(out.trace.rounds.len(), oracle.len());
            for (r, (d, eps, a)) in out.trace.rounds.iter().zip(&oracle) {
                assert!((r.epsilon - eps).abs() < 1e-9);
                assert!((r.alpha - a).abs() < 1e-9);
                for (x, y) in r.weights.iter().zip(d) {
                    assert!((x - y).abs() < 1e-9);
                }
            }
            let total: f64 = out.ensemble.members.iter().map(|m| m.alpha).sum();
            assert!((total - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn single_round_is_the_base_learner() {
        let spec = TrainSpec::logistic(0.1).with_augment(true);
        let (s, t) = noisy_problem(11, true);
        let cfg = BoostConfig {
            rounds: 1,
            ..BoostConfig::classification(spec)
        };
        let out = gap_boost(&s, &t, &cfg).unwrap();
        assert_eq!(out.ensemble.members.len(), 1);
        let h = train_weighted(&pooled(&s, &t), &vec![1.0 / 55.0; 55], &spec).unwrap();
        for e in t.examples() {
            assert_eq!(out.ensemble.predict(&e.x).unwrap(), sign_label(h.predict(&e.x).unwrap()));
        }

        let spec = TrainSpec::squared(0.1).with_augment(true);
        let (s, t) = noisy_problem(12, false);
        let out = gap_boost_r(&s, &t, &BoostConfig { rounds: 1, ..BoostConfig::regression(spec) }).unwrap();
        let h = &out.ensemble.members[0].h;
        assert_eq!(out.ensemble.members[0].alpha, 1.0);
        assert_eq!(out.ensemble.predict(&[0.3, 0.2, 0.1]).unwrap(), h.predict(&[0.3, 0.2, 0.1]).unwrap());
    }

    #[test]
    fn hand_built_disagreement_is_penalized_once() {
        // Source: two points on the positive side, one far negative point
        // labelled +1 so the source learner flips sign there; the target
        // learner keeps the plain orientation. Base learner: ridge on labels.
        let s = sample(&[(&[1.0], 1.0), (&[2.0], 1.0), (&[-3.0], 1.0)], DomainTag::Source);
        let t = sample(&[(&[1.0], 1.0), (&[-1.0], -1.0), (&[2.0], 1.0)], DomainTag::Target);
        let spec = TrainSpec::squared(0.1).with_augment(true);
        let rho_s = -0.7;
        let cfg = BoostConfig {
            rounds: 2,
            rho_s,
            rho_t: 0.0,
            gamma_max: 1.0,
            ..BoostConfig::classification(spec)
        };
        let out = gap_boost(&s, &t, &cfg).unwrap();

        // Independent simulation of the first round.
        let all = pooled(&s, &t);
        let d1 = vec![1.0 / 6.0; 6];
        let h = train_weighted(&all, &d1, &spec).unwrap();
        let hs = train_weighted(s.examples(), &[1.0 / 3.0; 3], &spec).unwrap();
        let ht = train_weighted(t.examples(), &[1.0 / 3.0; 3], &spec).unwrap();
        let disagree: Vec<bool> = all
            .iter()
            .map(|e| sign_label(hs.predict(&e.x).unwrap()) != sign_label(ht.predict(&e.x).unwrap()))
            .collect();
        assert_eq!(disagree[..3].iter().filter(|b| **b).count(), 1);
        assert!(disagree[2]);
        let miss: Vec<bool> = all.iter().map(|e| sign_label(h.predict(&e.x).unwrap()) != e.y).collect();
        let eps: f64 = miss.iter().filter(|m| **m).count() as f64 / 6.0;
        let a = ((1.0 - eps) / eps).ln();
        let raw: Vec<f64> = (0..6)
            .map(|i| {
                let mut b = if miss[i] { a } else { 0.0 };
                if disagree[i] && i < 3 {
                    b += rho_s;
                }
                d1[i] * b.exp()
            })
            .collect();
        let z: f64 = raw.iter().sum();
        let d2 = &out.trace.rounds[1].weights;
        for i in 0..6 {
            assert!((d2[i] - raw[i] / z).abs() < 1e-12);
        }
        assert!((d2[2] - d1[2] * (rho_s + if miss[2] { a } else { 0.0 }).exp() / z).abs() < 1e-12);
    }

    #[test]
    fn perfect_fit_stops_regression() {
        // Zero labels make the ridge solution exactly zero.
        let xs = vec![vec![1.0], vec![2.0], vec![3.0]];
        let s = Sample::from_rows(xs.clone(), vec![0.0; 3], DomainTag::Source).unwrap();
        let t = Sample::from_rows(xs, vec![0.0; 3], DomainTag::Target).unwrap();
        let spec = TrainSpec::squared(0.5);
        let out = gap_boost_r(&s, &t, &BoostConfig::regression(spec)).unwrap();
        assert_eq!(out.ensemble.members.len(), 1);
        assert_eq!(out.trace.stop, StopReason::PerfectFit { round: 1 });
        assert_eq!(out.ensemble.predict(&[5.0]).unwrap(), 0.0);
    }

    #[test]
    fn weak_learner_failure_keeps_first_hypothesis() {
        // XOR-like labels defeat a linear learner with no intercept.
        let rows: &[(&[f64], f64)] = &[(&[1.0, 1.0], 1.0), (&[-1.0, -1.0], 1.0), (&[1.0, -1.0], -1.0), (&[-1.0, 1.0], -1.0)];
        let s = sample(rows, DomainTag::Source);
        let t = sample(rows, DomainTag::Target);
        let out = gap_boost(&s, &t, &BoostConfig::classification(TrainSpec::logistic(1.0))).unwrap();
        assert!(matches!(out.trace.stop, StopReason::WeakLearnerFailed { round: 1, .. }));
        assert_eq!(out.ensemble.members.len(), 1);
        assert!(out.trace.rounds.is_empty());
    }

    #[test]
    fn more_negative_source_penalty_never_raises_source_weights() {
        let spec = TrainSpec::logistic(0.05).with_augment(true);
        let (s, t) = noisy_problem(21, true);
        let base = BoostConfig {
            rounds: 5,
            ..BoostConfig::classification(spec)
        };
        let out = gap_boost(&s, &t, &base).unwrap();
        let all = pooled(&s, &t);
        let ns = s.len();
        // Replay each traced state with a harsher source penalty.
        for r in &out.trace.rounds {
            let d = &r.weights;
            let h = train_weighted(&all, d, &spec).unwrap();
            let hs = train_renormalized(&all[..ns], &d[..ns], &spec).unwrap();
            let ht = train_renormalized(&all[ns..], &d[ns..], &spec).unwrap();
            let next = |rho_s: f64| {
                let beta: Vec<f64> = all
                    .iter()
                    .enumerate()
                    .map(|(i, e)| {
                        let dis = sign_label(hs.score(&e.x)) != sign_label(ht.score(&e.x));
                        let miss = sign_label(h.score(&e.x)) != e.y;
                        let p = if i < ns { rho_s } else { base.rho_t };
                        p * indicator(dis) + r.alpha * indicator(miss)
                    })
                    .collect();
                reweight(d, &beta, base.gamma_max).unnormalized
            };
            let mild = next(base.rho_s);
            assert_eq!(mild, r.unnormalized);
            let harsh = next(base.rho_s - 1.0);
            for i in 0..ns {
                assert!(harsh[i] <= mild[i]);
            }
        }
    }

    #[test]
    fn runs_are_deterministic() {
        let spec = TrainSpec::logistic(0.05).with_augment(true);
        let (s, t) = noisy_problem(5, true);
        let cfg = BoostConfig {
            gamma_max: 0.05,
            ..BoostConfig::classification(spec)
        };
        let a = gap_boost(&s, &t, &cfg).unwrap();
        let b = gap_boost(&s, &t, &cfg).unwrap();
        assert_eq!(a, b);
        a.trace.check_invariants(cfg.gamma_max).unwrap();
    }

    #[test]
    fn mode_and_domains_are_checked() {
        let (s, t) = noisy_problem(1, true);
        let cfg = BoostConfig::regression(TrainSpec::squared(1.0));
        assert!(gap_boost(&s, &t, &cfg).is_err());
        let empty = Sample::new(vec![], DomainTag::Source);
        assert!(empty.is_err() || gap_boost(&empty.unwrap(), &t, &BoostConfig::default()).is_err());
        let cfg = BoostConfig {
            rounds: 0,
            ..BoostConfig::default()
        };
        assert!(gap_boost(&s, &t, &cfg).is_err());
    }
}
