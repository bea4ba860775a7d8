//! Gap-minimizing boosting for transfer learning and its baselines.
//!
//! Weight vectors are laid out source first, then target. All boosters are
//! deterministic functions of their inputs.

mod baselines;
mod gap;

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::learners::{train_weighted, TaskMode, TrainSpec};
use crate::model::{sign_label, Example, LinearHypothesis, Sample};

pub use baselines::{run_baseline, tradaboost_source_factor, BaselineKind};
pub use gap::{gap_boost, gap_boost_r};

/// Tolerance of the weight-simplex and clipping invariants.
pub const WEIGHT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoostConfig {
    pub rounds: usize,
    pub rho_s: f64,
    pub rho_t: f64,
    pub gamma_max: f64,
    pub base: TrainSpec,
    pub mode: TaskMode,
    /// Target weights gain `rho_t` where the auxiliary learners agree.
    pub agreement_bonus: bool,
    pub epsilon_floor: f64,
}

impl Default for BoostConfig {
    fn default() -> Self {
        Self {
            rounds: 20,
            rho_s: 0.5f64.ln(),
            rho_t: 0.0,
            gamma_max: 1.0,
            base: TrainSpec::logistic(1.0).with_augment(true),
            mode: TaskMode::Classification,
            agreement_bonus: false,
            epsilon_floor: 1e-10,
        }
    }
}

impl BoostConfig {
    pub fn classification(base: TrainSpec) -> Self {
        Self {
            base,
            ..Self::default()
        }
    }

    pub fn regression(base: TrainSpec) -> Self {
        Self {
            base,
            mode: TaskMode::Regression,
            ..Self::default()
        }
    }

    /// Plain AdaBoost settings: no disagreement penalty, no clipping.
    pub fn unpenalized(mut self) -> Self {
        self.rho_s = 0.0;
        self.rho_t = 0.0;
        self.gamma_max = 1.0;
        self.agreement_bonus = false;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.rounds == 0 {
            return Err(Error::param("rounds", "must be >= 1"));
        }
        if !(self.rho_s.is_finite() && self.rho_s <= 0.0) {
            return Err(Error::param("rho_s", format!("must be <= 0, got {}", self.rho_s)));
        }
        if !self.rho_t.is_finite() {
            return Err(Error::NonFinite("rho_t"));
        }
        if self.agreement_bonus {
            if self.rho_t < 0.0 {
                return Err(Error::param(
                    "rho_t",
                    format!("must be >= 0 in agreement-bonus mode, got {}", self.rho_t),
                ));
            }
        } else if !(self.rho_s <= self.rho_t && self.rho_t <= 0.0) {
            return Err(Error::param(
                "rho_t",
                format!("need rho_s <= rho_t <= 0, got rho_s = {}, rho_t = {}", self.rho_s, self.rho_t),
            ));
        }
        if !(self.gamma_max > 0.0 && self.gamma_max <= 1.0) {
            return Err(Error::param("gamma_max", format!("must lie in (0, 1], got {}", self.gamma_max)));
        }
        if !(self.epsilon_floor > 0.0 && self.epsilon_floor < 0.5) {
            return Err(Error::param(
                "epsilon_floor",
                format!("must lie in (0, 0.5), got {}", self.epsilon_floor),
            ));
        }
        self.base.validate()
    }

    fn require_mode(&self, mode: TaskMode) -> Result<()> {
        if self.mode != mode {
            return Err(Error::param("mode", format!("expected {mode:?}, got {:?}", self.mode)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Member {
    pub alpha: f64,
    pub h: LinearHypothesis,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ensemble {
    pub members: Vec<Member>,
    pub mode: TaskMode,
}

impl Ensemble {
    fn new(members: Vec<Member>, mode: TaskMode) -> Self {
        let mut e = Self { members, mode };
        if mode == TaskMode::Regression {
            let total: f64 = e.members.iter().map(|m| m.alpha).sum();
            for m in &mut e.members {
                m.alpha /= total;
            }
        }
        e
    }

    /// Classification: `sign(sum alpha_k sign(h_k(x)))`; regression: the
    /// alpha-weighted mean of the member predictions.
    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        let mut acc = 0.0;
        for m in &self.members {
            let p = m.h.predict(x)?;
            acc += m.alpha
                * match self.mode {
                    TaskMode::Classification => sign_label(p),
                    TaskMode::Regression => p,
                };
        }
        Ok(match self.mode {
            TaskMode::Classification => sign_label(acc),
            TaskMode::Regression => acc,
        })
    }

    pub fn error_rate(&self, sample: &Sample) -> Result<f64> {
        let mut wrong = 0usize;
        for e in sample.examples() {
            if self.predict(&e.x)? != e.y {
                wrong += 1;
            }
        }
        Ok(wrong as f64 / sample.len() as f64)
    }

    pub fn rmse(&self, sample: &Sample) -> Result<f64> {
        let mut sse = 0.0;
        for e in sample.examples() {
            sse += (self.predict(&e.x)? - e.y).powi(2);
        }
        Ok((sse / sample.len() as f64).sqrt())
    }

    /// Error rate for classification, RMSE for regression.
    pub fn score(&self, sample: &Sample) -> Result<f64> {
        match self.mode {
            TaskMode::Classification => self.error_rate(sample),
            TaskMode::Regression => self.rmse(sample),
        }
    }
}

/// State of one retained boosting round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundTrace {
    /// 1-based round index.
    pub k: usize,
    /// `D_k`, the distribution the round trained on.
    pub weights: Vec<f64>,
    pub epsilon: f64,
    pub alpha: f64,
    /// `Z_{k+1}` before clipping.
    pub z: f64,
    /// `D_{k+1}` after clipping, before normalization.
    pub unnormalized: Vec<f64>,
    pub clipped: usize,
}

impl RoundTrace {
    pub fn max_weight(&self) -> f64 {
        self.weights.iter().copied().fold(0.0, f64::max)
    }

    pub fn source_mass(&self, n_source: usize) -> f64 {
        self.weights[..n_source].iter().sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "reason", rename_all = "snake_case")]
pub enum StopReason {
    Completed,
    /// `epsilon >= 0.5`; the round was discarded.
    WeakLearnerFailed { round: usize, epsilon: f64 },
    /// Zero training error in a regression round; the round was kept.
    PerfectFit { round: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoostTrace {
    pub n_source: usize,
    pub rounds: Vec<RoundTrace>,
    pub stop: StopReason,
    /// Distribution after the last retained round.
    pub final_weights: Vec<f64>,
}

impl BoostTrace {
    /// One row per round: `k, epsilon, alpha, max_weight, source_mass`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["k", "epsilon", "alpha", "max_weight", "source_mass"])?;
        for r in &self.rounds {
            w.write_record([
                r.k.to_string(),
                r.epsilon.to_string(),
                r.alpha.to_string(),
                r.max_weight().to_string(),
                r.source_mass(self.n_source).to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Checks the simplex, clipping and positive-alpha invariants.
    pub fn check_invariants(&self, gamma_max: f64) -> Result<()> {
        let violation = |value: f64, bound: f64| Error::BoundViolation {
            lemma: "boosting weight invariant",
            value,
            bound,
        };
        for r in &self.rounds {
            let total: f64 = r.weights.iter().sum();
            if (total - 1.0).abs() > WEIGHT_TOL {
                return Err(violation(total, 1.0));
            }
            if let Some(w) = r.weights.iter().find(|w| !(**w >= 0.0)) {
                return Err(violation(-*w, 0.0));
            }
            let cap = gamma_max * r.z + 1e-12;
            if let Some(w) = r.unnormalized.iter().find(|w| **w > cap) {
                return Err(violation(*w, cap));
            }
            if !(r.alpha > 0.0) {
                return Err(violation(-r.alpha, 0.0));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoostOutput {
    pub ensemble: Ensemble,
    pub trace: BoostTrace,
}

/// Result of one multiplicative update with clipping.
#[derive(Debug, Clone, PartialEq)]
pub struct Reweighted {
    /// Sum of `D exp(beta)` before clipping.
    pub z: f64,
    /// Clipped, not yet normalized weights.
    pub unnormalized: Vec<f64>,
    pub clipped: usize,
    pub weights: Vec<f64>,
}

/// `D' = D exp(beta)`, capped at `gamma_max * sum(D')`, then normalized.
pub fn reweight(d: &[f64], beta: &[f64], gamma_max: f64) -> Reweighted {
    let mut next: Vec<f64> = d.iter().zip(beta).map(|(w, b)| w * b.exp()).collect();
    let z: f64 = next.iter().sum();
    let cap = gamma_max * z;
    let mut clipped = 0;
    for w in &mut next {
        if *w > cap {
            *w = cap;
            clipped += 1;
        }
    }
    let total: f64 = next.iter().sum();
    let weights = next.iter().map(|w| w / total).collect();
    Reweighted {
        z,
        unnormalized: next,
        clipped,
        weights,
    }
}

/// `log((1 - eps) / eps)`.
pub(crate) fn alpha(eps: f64) -> f64 {
    ((1.0 - eps) / eps).ln()
}

/// Pooled sample in boosting order: source first, then target.
pub(crate) fn pooled(source: &Sample, target: &Sample) -> Vec<Example> {
    source.examples().iter().chain(target.examples()).cloned().collect()
}

pub(crate) fn check_domains(source: &Sample, target: &Sample, mode: TaskMode) -> Result<()> {
    if source.is_empty() || target.is_empty() {
        return Err(Error::EmptySample);
    }
    if source.dim() != target.dim() {
        return Err(Error::DimensionMismatch {
            expected: target.dim(),
            actual: source.dim(),
        });
    }
    if mode == TaskMode::Classification {
        source.check_classification()?;
        target.check_classification()?;
    }
    Ok(())
}

/// Trains on a slice of the weights rescaled to sum 1.
pub(crate) fn train_renormalized(examples: &[Example], weights: &[f64], spec: &TrainSpec) -> Result<LinearHypothesis> {
    let total: f64 = weights.iter().sum();
    let w: Vec<f64> = weights.iter().map(|v| v / total).collect();
    train_weighted(examples, &w, spec)
}

pub(crate) fn misses(h: &LinearHypothesis, examples: &[Example]) -> Vec<bool> {
    examples.iter().map(|e| sign_label(h.score(&e.x)) != e.y).collect()
}

pub(crate) fn abs_residuals(h: &LinearHypothesis, examples: &[Example]) -> Vec<f64> {
    examples.iter().map(|e| (h.score(&e.x) - e.y).abs()).collect()
}
