//! Weighted, L2-regularized linear base learners.
//!
//! Every learner minimizes
//!
//! ```text
//!     sum_i w_i * loss(<h, x_i> + o_i, y_i) + lambda * ||h - c||^2
//! ```
//!
//! where the offsets `o` and the center `c` are zero for ordinary training
//! and are used by the hypothesis-transfer and block-coordinate multitask
//! solvers. Squared loss is solved in closed form; logistic, smoothed hinge
//! and `Lq` (q >= 2) use a damped Newton iteration started at zero.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{design, min_norm_lstsq, solve_spd};
use crate::loss::{loss, surrogate, LossKind};
use crate::model::{norm_sq, sign_label, Example, LinearHypothesis, SIMPLEX_TOL};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskMode {
    Classification,
    Regression,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainSpec {
    pub loss: LossKind,
    pub lambda: f64,
    /// Stopping threshold on the objective's gradient norm, relative to
    /// `max(1, sum of weights)`.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Append a constant-1 feature (regularized like the others).
    pub augment: bool,
}

impl Default for TrainSpec {
    fn default() -> Self {
        Self {
            loss: LossKind::Squared,
            lambda: 1.0,
            tolerance: 1e-10,
            max_iterations: 10_000,
            augment: false,
        }
    }
}

impl TrainSpec {
    pub fn new(loss: LossKind, lambda: f64) -> Result<Self> {
        let spec = Self {
            loss,
            lambda,
            ..Self::default()
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn squared(lambda: f64) -> Self {
        Self::new(LossKind::Squared, lambda).unwrap()
    }

    pub fn logistic(lambda: f64) -> Self {
        Self::new(LossKind::Logistic, lambda).unwrap()
    }

    pub fn with_augment(mut self, augment: bool) -> Self {
        self.augment = augment;
        self
    }

    pub fn with_lambda(mut self, lambda: f64) -> Self {
        self.lambda = lambda;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda.is_finite() && self.lambda > 0.0) {
            return Err(Error::param("lambda", format!("must be > 0, got {}", self.lambda)));
        }
        if !(self.tolerance.is_finite() && self.tolerance > 0.0) {
            return Err(Error::param("tolerance", format!("must be > 0, got {}", self.tolerance)));
        }
        if self.max_iterations == 0 {
            return Err(Error::param("max_iterations", "must be >= 1"));
        }
        check_trainable(self.loss)
    }

    /// Exact regularized objective `sum_i w_i loss(h(x_i), y_i) + lambda ||h||^2`.
    pub fn objective(&self, h: &LinearHypothesis, examples: &[Example], weights: &[f64]) -> f64 {
        weighted_loss(h, examples, weights, self.loss) + self.lambda * h.norm().powi(2)
    }
}

fn check_trainable(kind: LossKind) -> Result<()> {
    match kind {
        LossKind::Absolute => Err(Error::UnsupportedLoss(kind)),
        LossKind::Lq { q } if q < 2.0 => Err(Error::UnsupportedLoss(kind)),
        _ => Ok(()),
    }
}

/// `sum_i w_i * loss(h(x_i), y_i)` with the exact (unsmoothed) loss.
pub fn weighted_loss(h: &LinearHypothesis, examples: &[Example], weights: &[f64], kind: LossKind) -> f64 {
    examples
        .iter()
        .zip(weights)
        .map(|(e, w)| w * loss(kind, h.score(&e.x), e.y))
        .sum()
}

/// Average loss over a sample.
pub fn mean_loss(h: &LinearHypothesis, examples: &[Example], kind: LossKind) -> f64 {
    let n = examples.len() as f64;
    examples.iter().map(|e| loss(kind, h.score(&e.x), e.y)).sum::<f64>() / n
}

/// Minimizer of `sum_i w_i loss(<h, x_i>, y_i) + lambda ||h||^2`.
///
/// Weights need not sum to one. The result is deterministic in its inputs.
pub fn train_weighted(examples: &[Example], weights: &[f64], spec: &TrainSpec) -> Result<LinearHypothesis> {
    spec.validate()?;
    fit(&Problem::new(examples, weights, spec.lambda), spec)
}

/// A weighted regularized problem, possibly with per-example offsets on the
/// prediction and a nonzero regularization center.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Problem<'a> {
    pub examples: &'a [Example],
    pub weights: &'a [f64],
    pub lambda: f64,
    pub offsets: Option<&'a [f64]>,
    pub center: Option<&'a [f64]>,
}

impl<'a> Problem<'a> {
    pub fn new(examples: &'a [Example], weights: &'a [f64], lambda: f64) -> Self {
        Self {
            examples,
            weights,
            lambda,
            offsets: None,
            center: None,
        }
    }

    pub fn with_center(mut self, center: &'a [f64]) -> Self {
        self.center = Some(center);
        self
    }

    pub fn with_offsets(mut self, offsets: &'a [f64]) -> Self {
        self.offsets = Some(offsets);
        self
    }

    fn offset(&self, i: usize) -> f64 {
        self.offsets.map_or(0.0, |o| o[i])
    }

    fn validate(&self, augment: bool) -> Result<usize> {
        let first = self.examples.first().ok_or(Error::EmptySample)?;
        let d = first.dim();
        let dim = d + usize::from(augment);
        if self.weights.len() != self.examples.len() {
            return Err(Error::DimensionMismatch {
                expected: self.examples.len(),
                actual: self.weights.len(),
            });
        }
        if self.weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::InvalidWeights("weights must be finite and nonnegative".into()));
        }
        for e in self.examples {
            if e.dim() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    actual: e.dim(),
                });
            }
            if e.x.iter().any(|v| !v.is_finite()) || !e.y.is_finite() {
                return Err(Error::NonFinite("training sample"));
            }
        }
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return Err(Error::param("lambda", format!("must be >= 0, got {}", self.lambda)));
        }
        if let Some(o) = self.offsets {
            if o.len() != self.examples.len() {
                return Err(Error::DimensionMismatch {
                    expected: self.examples.len(),
                    actual: o.len(),
                });
            }
        }
        if let Some(c) = self.center {
            if c.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    actual: c.len(),
                });
            }
        }
        Ok(dim)
    }

    /// Objective value with the training surrogate of the loss.
    fn surrogate_value(&self, kind: LossKind, w: &[f64], augment: bool) -> f64 {
        let h = hyp(w, augment);
        let data: f64 = self
            .examples
            .iter()
            .enumerate()
            .map(|(i, e)| self.weights[i] * surrogate(kind, h.score(&e.x) + self.offset(i), e.y).0)
            .sum();
        data + self.lambda * self.penalty(w)
    }

    fn penalty(&self, w: &[f64]) -> f64 {
        match self.center {
            Some(c) => w.iter().zip(c).map(|(a, b)| (a - b).powi(2)).sum(),
            None => norm_sq(w),
        }
    }

    fn gradient_and_hessian(&self, kind: LossKind, w: &[f64], augment: bool) -> (DVector<f64>, DMatrix<f64>) {
        let dim = w.len();
        let h = hyp(w, augment);
        let mut grad = DVector::zeros(dim);
        let mut hess = DMatrix::zeros(dim, dim);
        let mut xt = vec![0.0; dim];
        for (i, e) in self.examples.iter().enumerate() {
            let wi = self.weights[i];
            if wi == 0.0 {
                continue;
            }
            let (_, g1, g2) = surrogate(kind, h.score(&e.x) + self.offset(i), e.y);
            xt[..e.dim()].copy_from_slice(&e.x);
            if augment {
                xt[dim - 1] = 1.0;
            }
            for a in 0..dim {
                grad[a] += wi * g1 * xt[a];
                if g2 != 0.0 {
                    let s = wi * g2 * xt[a];
                    for b in 0..=a {
                        hess[(a, b)] += s * xt[b];
                    }
                }
            }
        }
        for a in 0..dim {
            for b in 0..a {
                hess[(b, a)] = hess[(a, b)];
            }
            let c = self.center.map_or(0.0, |c| c[a]);
            grad[a] += 2.0 * self.lambda * (w[a] - c);
            hess[(a, a)] += 2.0 * self.lambda;
        }
        (grad, hess)
    }
}

fn hyp(w: &[f64], augment: bool) -> LinearHypothesis {
    LinearHypothesis {
        w: w.to_vec(),
        augmented: augment,
    }
}

/// Solves a [`Problem`]; `lambda == 0` is only accepted for squared loss,
/// where the minimum-norm minimizer is returned.
pub(crate) fn fit(problem: &Problem<'_>, spec: &TrainSpec) -> Result<LinearHypothesis> {
    check_trainable(spec.loss)?;
    let dim = problem.validate(spec.augment)?;
    let w = match spec.loss {
        LossKind::Squared => fit_squared(problem, spec.augment, dim)?,
        kind => {
            if problem.lambda == 0.0 {
                return Err(Error::param(
                    "lambda",
                    format!("unregularized {kind:?} minimizer has no closed form"),
                ));
            }
            newton(problem, kind, spec.augment, dim, spec.tolerance, spec.max_iterations)?
        }
    };
    LinearHypothesis::with_augmentation(w, spec.augment)
}

fn fit_squared(problem: &Problem<'_>, augment: bool, dim: usize) -> Result<Vec<f64>> {
    let x = design(problem.examples, augment);
    let target = DVector::from_iterator(
        problem.examples.len(),
        problem.examples.iter().enumerate().map(|(i, e)| e.y - problem.offset(i)),
    );
    if problem.lambda == 0.0 {
        // Rows scaled by sqrt(w) turn the weighted problem into plain least squares.
        let sw: Vec<f64> = problem.weights.iter().map(|w| w.sqrt()).collect();
        let mut xs = x;
        for (i, s) in sw.iter().enumerate() {
            xs.row_mut(i).scale_mut(*s);
        }
        let ys = DVector::from_iterator(target.len(), target.iter().zip(&sw).map(|(y, s)| y * s));
        return Ok(min_norm_lstsq(xs, &ys)?.iter().copied().collect());
    }
    let mut xw = x.clone();
    for (i, w) in problem.weights.iter().enumerate() {
        xw.row_mut(i).scale_mut(*w);
    }
    let mut a = xw.transpose() * &x;
    let mut b = xw.transpose() * target;
    for j in 0..dim {
        a[(j, j)] += problem.lambda;
        if let Some(c) = problem.center {
            b[j] += problem.lambda * c[j];
        }
    }
    Ok(solve_spd(a, &b)?.iter().copied().collect())
}

fn newton(
    problem: &Problem<'_>,
    kind: LossKind,
    augment: bool,
    dim: usize,
    tol: f64,
    max_iter: usize,
) -> Result<Vec<f64>> {
    let mass: f64 = problem.weights.iter().sum();
    let tol = tol * mass.max(1.0);
    let mut w = vec![0.0; dim];
    let mut f = problem.surrogate_value(kind, &w, augment);
    let mut grad_norm = f64::INFINITY;
    for _ in 0..max_iter {
        let (g, hess) = problem.gradient_and_hessian(kind, &w, augment);
        grad_norm = g.norm();
        if grad_norm <= tol {
            return Ok(w);
        }
        let step = match hess.cholesky() {
            Some(chol) => -chol.solve(&g),
            None => -g.clone(),
        };
        let slope = g.dot(&step);
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            let cand: Vec<f64> = w.iter().zip(step.iter()).map(|(a, s)| a + t * s).collect();
            let fc = problem.surrogate_value(kind, &cand, augment);
            let armijo = fc <= f + 1e-4 * t * slope;
            // Near the optimum objective differences drown in rounding; fall
            // back to requiring a smaller gradient.
            let flat = (fc - f).abs() <= 1e-14 * (1.0 + f.abs())
                && problem.gradient_and_hessian(kind, &cand, augment).0.norm() < grad_norm;
            if armijo || flat {
                w = cand;
                f = fc;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    let (g, _) = problem.gradient_and_hessian(kind, &w, augment);
    let final_norm = g.norm().min(grad_norm);
    if final_norm <= tol {
        return Ok(w);
    }
    Err(Error::NotConverged {
        iterations: max_iter,
        grad_norm: final_norm,
    })
}

/// Weighted error of `h` for one boosting round.
///
/// Classification: weighted 0-1 error with ties labelled +1. Regression:
/// weighted absolute error divided by the largest absolute error of the
/// round; [`Error::PerfectFit`] when that maximum is zero.
pub fn weighted_error(h: &LinearHypothesis, examples: &[Example], weights: &[f64], mode: TaskMode) -> Result<f64> {
    if weights.len() != examples.len() {
        return Err(Error::DimensionMismatch {
            expected: examples.len(),
            actual: weights.len(),
        });
    }
    let total: f64 = weights.iter().sum();
    if (total - 1.0).abs() > SIMPLEX_TOL {
        return Err(Error::InvalidWeights(format!("weights sum to {total}, not 1")));
    }
    match mode {
        TaskMode::Classification => Ok(examples
            .iter()
            .zip(weights)
            .filter(|(e, _)| sign_label(h.score(&e.x)) != e.y)
            .map(|(_, w)| w)
            .sum()),
        TaskMode::Regression => {
            let residuals: Vec<f64> = examples.iter().map(|e| (h.score(&e.x) - e.y).abs()).collect();
            let errs = normalize_by_max(&residuals).ok_or(Error::PerfectFit)?;
            Ok(errs.iter().zip(weights).map(|(e, w)| e * w).sum())
        }
    }
}

/// Divides by the maximum entry; `None` when every entry is zero.
pub(crate) fn normalize_by_max(values: &[f64]) -> Option<Vec<f64>> {
    let max = values.iter().copied().fold(0.0, f64::max);
    (max > 0.0).then(|| values.iter().map(|v| v / max).collect())
}
