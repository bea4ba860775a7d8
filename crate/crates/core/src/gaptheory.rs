//! Performance gaps for instance weighting and hypothesis transfer, the
//! complexity bounds they imply on the learned hypothesis, and the terms of
//! the weight-dependent stability bound.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::learners::{fit, mean_loss, weighted_loss, Problem, TrainSpec};
use crate::loss::{LossKind, LossSpec};
use crate::model::{norm, BoundInputs, Example, LinearHypothesis, Sample, WeightVector};

/// Tolerance below zero accepted for a gap (minimizer property up to solver accuracy).
pub const GAP_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GapKind {
    InstanceWeighting,
    HypothesisTransfer,
}

/// Flat record of a performance gap and the norm bound it yields.
///
/// For hypothesis transfer there is a single target-side gap: `nabla_t`
/// carries it, `nabla_s` is zero, and `norm_hs` holds the norm of the
/// combined source prior.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapReport {
    pub kind: GapKind,
    pub nabla_s: f64,
    pub nabla_t: f64,
    pub nabla: f64,
    pub norm_hs: f64,
    pub norm_ht: f64,
    pub norm_hstar: f64,
    pub eta: f64,
    pub lambda: f64,
    pub lemma_bound: f64,
    pub slack: f64,
    /// False when the minimizers come from an iterative solver or a smoothed
    /// surrogate, so the gap is only accurate to solver tolerance.
    pub exact: bool,
}

impl GapReport {
    /// Gap components are nonnegative up to `tol`.
    pub fn gaps_nonnegative(&self, tol: f64) -> bool {
        self.nabla_s >= -tol && self.nabla_t >= -tol
    }

    pub fn bound_holds(&self, tol: f64) -> bool {
        self.slack >= -tol
    }

    /// Radius `m` with `||h*|| <= m` implied by the instance-weighting gap.
    fn instance_radius(&self, lambda: f64) -> f64 {
        let arg = self.nabla / (2.0 * lambda * (1.0 - 2.0 * self.eta))
            + (self.norm_hs.powi(2) + self.norm_ht.powi(2)) / 2.0;
        arg.max(0.0).sqrt()
    }
}

fn check_eta(eta: f64, upper: f64) -> Result<()> {
    if !(eta >= 0.0 && eta < upper) {
        return Err(Error::param("eta", format!("must lie in [0, {upper}), got {eta}")));
    }
    Ok(())
}

fn check_dims(a: &Sample, b: &Sample) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            actual: b.dim(),
        });
    }
    Ok(())
}

/// Instance-transfer gap for the weights of a [`WeightVector`].
pub fn instance_gap(
    target: &Sample,
    source: &Sample,
    gamma: &WeightVector,
    spec: &TrainSpec,
    eta: f64,
) -> Result<GapReport> {
    instance_gap_weighted(target, source, gamma.target(), gamma.source(), spec, eta)
}

/// Instance-transfer gap for arbitrary nonnegative per-domain weights.
///
/// `h_s` and `h_t` minimize each domain's weighted loss plus
/// `eta * lambda * ||h||^2` (the minimum-norm least-squares solution when
/// `eta == 0` and the loss is squared); `h*` minimizes the pooled weighted
/// loss plus `lambda * ||h||^2`.
pub fn instance_gap_weighted(
    target: &Sample,
    source: &Sample,
    target_weights: &[f64],
    source_weights: &[f64],
    spec: &TrainSpec,
    eta: f64,
) -> Result<GapReport> {
    spec.validate()?;
    check_eta(eta, 0.5)?;
    check_dims(target, source)?;
    let lambda = spec.lambda;
    let inner = eta * lambda;

    let h_s = fit(&Problem::new(source.examples(), source_weights, inner), spec)?;
    let h_t = fit(&Problem::new(target.examples(), target_weights, inner), spec)?;

    let pooled: Vec<Example> = target.examples().iter().chain(source.examples()).cloned().collect();
    let pooled_w: Vec<f64> = target_weights.iter().chain(source_weights).copied().collect();
    let h_star = fit(&Problem::new(&pooled, &pooled_w, lambda), spec)?;

    let v = |h: &LinearHypothesis, s: &Sample, w: &[f64]| {
        weighted_loss(h, s.examples(), w, spec.loss) + inner * h.norm().powi(2)
    };
    let nabla_s = v(&h_t, source, source_weights) - v(&h_s, source, source_weights);
    let nabla_t = v(&h_s, target, target_weights) - v(&h_t, target, target_weights);

    let mut report = GapReport {
        kind: GapKind::InstanceWeighting,
        nabla_s,
        nabla_t,
        nabla: nabla_s + nabla_t,
        norm_hs: h_s.norm(),
        norm_ht: h_t.norm(),
        norm_hstar: h_star.norm(),
        eta,
        lambda,
        lemma_bound: 0.0,
        slack: 0.0,
        exact: spec.loss == LossKind::Squared,
    };
    report.lemma_bound = report.instance_radius(lambda);
    report.slack = report.lemma_bound - report.norm_hstar;
    Ok(report)
}

/// Worst-case loss implied by the instance-weighting complexity bound.
///
/// Hinge: `1 + R m`. `Lq`: `(Y + R m)^q`, with `Y >= max |y|`.
pub fn loss_bound(gap: &GapReport, inputs: &BoundInputs, loss: &LossSpec, label_bound: f64) -> Result<f64> {
    if gap.kind != GapKind::InstanceWeighting {
        return Err(Error::param("gap", "loss bounds apply to instance-weighting gaps"));
    }
    check_eta(gap.eta, 0.5)?;
    let m = gap.instance_radius(inputs.lambda);
    match loss.kind {
        LossKind::Hinge => Ok(1.0 + inputs.radius * m),
        LossKind::Lq { q } => {
            if !(label_bound.is_finite() && label_bound >= 0.0) {
                return Err(Error::param("label_bound", format!("must be >= 0, got {label_bound}")));
            }
            Ok((label_bound + inputs.radius * m).powf(q))
        }
        other => Err(Error::UnsupportedLoss(other)),
    }
}

/// Components of the weight-dependent stability bound on the target risk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityTerms {
    pub n: usize,
    pub source_mass: f64,
    pub max_weight: f64,
    pub sum_sq: f64,
    /// `max_weight * rho^2 R^2 / lambda`.
    pub beta_bar: f64,
    /// `sum_sq * rho^2 R^2 / lambda`.
    pub delta_bar: f64,
    /// `sqrt(N log(1/delta) / 2)`.
    pub confidence_factor: f64,
    /// `source_mass * dist_y`, absent when no discrepancy constant was given.
    pub discrepancy_term: Option<f64>,
    /// Everything on the right-hand side except the empirical loss and the
    /// discrepancy term.
    pub stability_excess: f64,
}

impl StabilityTerms {
    /// Right-hand side given the weighted empirical loss of `h*`; `None`
    /// when the discrepancy constant is unavailable.
    pub fn bound(&self, empirical_loss: f64) -> Option<f64> {
        self.discrepancy_term
            .map(|d| empirical_loss + d + self.stability_excess)
    }
}

pub fn stability_terms(gamma: &WeightVector, inputs: &BoundInputs) -> StabilityTerms {
    let n = gamma.len();
    let max_weight = gamma.max();
    let sum_sq = gamma.sum_sq();
    let source_mass = gamma.source_mass();
    let scale = inputs.rho.powi(2) * inputs.radius.powi(2) / inputs.lambda;
    let beta_bar = max_weight * scale;
    let delta_bar = sum_sq * scale;
    let confidence_factor = (n as f64 * (1.0 / inputs.delta).ln() / 2.0).sqrt();
    let stability_excess =
        beta_bar + (beta_bar + delta_bar + max_weight * inputs.loss_bound) * confidence_factor;
    StabilityTerms {
        n,
        source_mass,
        max_weight,
        sum_sq,
        beta_bar,
        delta_bar,
        confidence_factor,
        discrepancy_term: inputs.dist_y.map(|d| source_mass * d),
        stability_excess,
    }
}

/// Source hypotheses with fixed combination weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisBank {
    hypotheses: Vec<LinearHypothesis>,
    xi: Vec<f64>,
}

impl HypothesisBank {
    pub fn new(hypotheses: Vec<LinearHypothesis>, xi: Vec<f64>) -> Result<Self> {
        let first = hypotheses.first().ok_or(Error::EmptySample)?;
        if xi.len() != hypotheses.len() {
            return Err(Error::DimensionMismatch {
                expected: hypotheses.len(),
                actual: xi.len(),
            });
        }
        if xi.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("combination weights"));
        }
        for h in &hypotheses {
            if h.w.len() != first.w.len() || h.augmented != first.augmented {
                return Err(Error::DimensionMismatch {
                    expected: first.w.len(),
                    actual: h.w.len(),
                });
            }
        }
        Ok(Self { hypotheses, xi })
    }

    /// Equal weights `1/K`.
    pub fn uniform(hypotheses: Vec<LinearHypothesis>) -> Result<Self> {
        let k = hypotheses.len().max(1);
        Self::new(hypotheses, vec![1.0 / k as f64; k])
    }

    pub fn hypotheses(&self) -> &[LinearHypothesis] {
        &self.hypotheses
    }

    pub fn xi(&self) -> &[f64] {
        &self.xi
    }

    /// `sum_k xi_k h_k`.
    pub fn combined(&self) -> LinearHypothesis {
        let first = &self.hypotheses[0];
        let mut w = vec![0.0; first.w.len()];
        for (h, xi) in self.hypotheses.iter().zip(&self.xi) {
            for (acc, v) in w.iter_mut().zip(&h.w) {
                *acc += xi * v;
            }
        }
        LinearHypothesis {
            w,
            augmented: first.augmented,
        }
    }
}

/// Trains the target hypothesis regularized toward the bank's combination
/// and reports the hypothesis-transfer gap.
///
/// The gap compares the prior against the minimum-norm unregularized
/// least-squares fit on the target, so only squared loss is accepted.
/// Returns [`Error::BoundViolation`] if `||h*||` exceeds its bound by more
/// than [`GAP_TOL`].
pub fn hypothesis_transfer_train(
    target: &Sample,
    bank: &HypothesisBank,
    spec: &TrainSpec,
) -> Result<(LinearHypothesis, GapReport)> {
    spec.validate()?;
    if spec.loss != LossKind::Squared {
        return Err(Error::UnsupportedLoss(spec.loss));
    }
    let prior = bank.combined();
    let expected = target.dim() + usize::from(spec.augment);
    if prior.w.len() != expected || prior.augmented != spec.augment {
        return Err(Error::DimensionMismatch {
            expected,
            actual: prior.w.len(),
        });
    }
    let n = target.len();
    let weights = vec![1.0 / n as f64; n];
    let h_star = fit(
        &Problem::new(target.examples(), &weights, spec.lambda).with_center(&prior.w),
        spec,
    )?;
    let h_t = fit(&Problem::new(target.examples(), &weights, 0.0), spec)?;

    let nabla = mean_loss(&prior, target.examples(), spec.loss) - mean_loss(&h_t, target.examples(), spec.loss);
    let norm_prior = norm(&prior.w);
    let lemma_bound = (nabla.max(0.0) / spec.lambda).sqrt() + norm_prior;
    let norm_hstar = h_star.norm();
    let report = GapReport {
        kind: GapKind::HypothesisTransfer,
        nabla_s: 0.0,
        nabla_t: nabla,
        nabla,
        norm_hs: norm_prior,
        norm_ht: h_t.norm(),
        norm_hstar,
        eta: 0.0,
        lambda: spec.lambda,
        lemma_bound,
        slack: lemma_bound - norm_hstar,
        exact: true,
    };
    if !report.bound_holds(GAP_TOL) {
        return Err(Error::BoundViolation {
            lemma: "hypothesis transfer",
            value: norm_hstar,
            bound: lemma_bound,
        });
    }
    Ok((h_star, report))
}
