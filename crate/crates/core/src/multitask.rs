//! Linear multitask learning: task weighting, parameter sharing and task
//! covariance, each with its performance gap and per-task norm bound.
//!
//! Each task's empirical loss averages over that task's own examples.
//! Squared loss is solved in closed form through stacked normal equations;
//! other trainable losses fall back to block-coordinate minimization.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::learners::{fit, mean_loss, Problem, TrainSpec};
use crate::linalg::{design, solve_spd, spd_inverse};
use crate::loss::{surrogate, LossKind};
use crate::model::{Example, LinearHypothesis, Sample, SIMPLEX_TOL};

/// Gradient tolerance of the block-coordinate solver.
pub const BLOCK_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskSet {
    tasks: Vec<Sample>,
}

impl TaskSet {
    pub fn new(tasks: Vec<Sample>) -> Result<Self> {
        let first = tasks.first().ok_or(Error::EmptySample)?;
        let d = first.dim();
        if let Some(bad) = tasks.iter().find(|t| t.dim() != d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                actual: bad.dim(),
            });
        }
        Ok(Self { tasks })
    }

    pub fn tasks(&self) -> &[Sample] {
        &self.tasks
    }

    pub fn len(&self) -> usize {
        self.tasks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tasks.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.tasks[0].dim()
    }
}

/// Task relation coefficients of one task over all K tasks (a simplex point).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskRelation {
    gamma: Vec<f64>,
}

impl TaskRelation {
    pub fn new(gamma: Vec<f64>) -> Result<Self> {
        if gamma.iter().any(|g| !(g.is_finite() && *g >= 0.0)) {
            return Err(Error::InvalidWeights("task relation entries must be >= 0".into()));
        }
        let total: f64 = gamma.iter().sum();
        if (total - 1.0).abs() > SIMPLEX_TOL {
            return Err(Error::InvalidWeights(format!("task relation sums to {total}, not 1")));
        }
        Ok(Self { gamma })
    }

    pub fn uniform(k: usize) -> Result<Self> {
        Self::new(vec![1.0 / k as f64; k])
    }

    pub fn one_hot(k: usize, j: usize) -> Result<Self> {
        let mut g = vec![0.0; k];
        *g.get_mut(j).ok_or_else(|| Error::param("j", format!("task {j} out of range")))? = 1.0;
        Self::new(g)
    }

    pub fn gamma(&self) -> &[f64] {
        &self.gamma
    }
}

/// Positive-definite task covariance `Omega` with its derived quantities.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceSpec {
    omega: DMatrix<f64>,
    precision: DMatrix<f64>,
    sigma_max: f64,
    omega_sum: f64,
}

impl CovarianceSpec {
    /// From a row-major K x K covariance.
    pub fn new(omega: Vec<Vec<f64>>) -> Result<Self> {
        let m = square(omega)?;
        let precision = spd_inverse(m.clone())?;
        Self::assemble(m, precision)
    }

    /// From the inverse covariance `Omega^{-1}`.
    pub fn from_precision(precision: Vec<Vec<f64>>) -> Result<Self> {
        let p = square(precision)?;
        let omega = spd_inverse(p.clone())?;
        Self::assemble(omega, p)
    }

    fn assemble(omega: DMatrix<f64>, precision: DMatrix<f64>) -> Result<Self> {
        let eig = SymmetricEigen::new(omega.clone());
        if eig.eigenvalues.iter().any(|v| *v <= 0.0) {
            return Err(Error::NotPositiveDefinite);
        }
        let sigma_max = eig.eigenvalues.max();
        let omega_sum = precision.sum();
        Ok(Self {
            omega,
            precision,
            sigma_max,
            omega_sum,
        })
    }

    pub fn k(&self) -> usize {
        self.omega.nrows()
    }

    /// Largest eigenvalue of `Omega`.
    pub fn sigma_max(&self) -> f64 {
        self.sigma_max
    }

    /// Sum of the entries of `Omega^{-1}`.
    pub fn omega_sum(&self) -> f64 {
        self.omega_sum
    }

    pub fn precision(&self, k: usize, l: usize) -> f64 {
        self.precision[(k, l)]
    }
}

fn square(rows: Vec<Vec<f64>>) -> Result<DMatrix<f64>> {
    let k = rows.len();
    if k == 0 {
        return Err(Error::param("omega", "matrix is empty"));
    }
    if let Some(r) = rows.iter().find(|r| r.len() != k) {
        return Err(Error::DimensionMismatch {
            expected: k,
            actual: r.len(),
        });
    }
    let m = DMatrix::from_fn(k, k, |i, j| rows[i][j]);
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("omega"));
    }
    let asym = (&m - m.transpose()).abs().max();
    if asym > 1e-12 * m.abs().max().max(1.0) {
        return Err(Error::param("omega", "matrix is not symmetric"));
    }
    Ok(m)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MtlKind {
    TaskWeighting,
    ParameterSharing,
    TaskCovariance,
}

/// Norm bound of one task's learned hypothesis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskBound {
    pub task: usize,
    pub norm_hstar: f64,
    /// Norm of the task's single-task reference minimizer.
    pub norm_hbar: f64,
    /// `sqrt(c * nabla + ||h_bar||^2)`.
    pub bound: f64,
    pub slack: f64,
    /// `sqrt(c * nabla) + ||h_bar||`, from strong convexity of the reference
    /// objectives. Always at least `bound`.
    pub certified: f64,
    pub certified_slack: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MtlGap {
    pub kind: MtlKind,
    pub nabla: f64,
    pub bounds: Vec<TaskBound>,
    pub exact: bool,
}

impl MtlGap {
    pub fn min_slack(&self) -> f64 {
        self.bounds.iter().map(|b| b.slack).fold(f64::INFINITY, f64::min)
    }

    pub fn min_certified_slack(&self) -> f64 {
        self.bounds.iter().map(|b| b.certified_slack).fold(f64::INFINITY, f64::min)
    }
}

/// Per-task hypotheses of a multitask solver.
///
/// Task weighting trains one task, so `hypotheses` holds the single
/// `h_j*` and `task` names it. Parameter sharing additionally records the
/// shared component and the task-specific offsets, with
/// `hypotheses[k] = shared + offsets[k]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MtlSolution {
    pub hypotheses: Vec<LinearHypothesis>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub task: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub shared: Option<LinearHypothesis>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub offsets: Option<Vec<LinearHypothesis>>,
    pub gap: MtlGap,
}

fn uniform_weights(n: usize, scale: f64) -> Vec<f64> {
    vec![scale / n as f64; n]
}

fn task_fit(task: &Sample, lambda: f64, spec: &TrainSpec) -> Result<LinearHypothesis> {
    let w = uniform_weights(task.len(), 1.0);
    fit(&Problem::new(task.examples(), &w, lambda), spec)
}

/// Minimizer of `(1/K) sum_k L_k(h) + lambda ||h||^2`.
fn pooled_fit(tasks: &TaskSet, lambda: f64, spec: &TrainSpec) -> Result<LinearHypothesis> {
    let k = tasks.len() as f64;
    let (examples, weights) = pooled(tasks, |t| 1.0 / k / tasks.tasks[t].len() as f64);
    fit(&Problem::new(&examples, &weights, lambda), spec)
}

fn pooled(tasks: &TaskSet, weight: impl Fn(usize) -> f64) -> (Vec<Example>, Vec<f64>) {
    let mut examples = Vec::new();
    let mut weights = Vec::new();
    for (t, s) in tasks.tasks.iter().enumerate() {
        let w = weight(t);
        examples.extend(s.examples().iter().cloned());
        weights.extend(std::iter::repeat_n(w, s.len()));
    }
    (examples, weights)
}

/// `L_k(h) + reg ||h||^2`.
fn task_objective(h: &LinearHypothesis, task: &Sample, reg: f64, loss: LossKind) -> f64 {
    mean_loss(h, task.examples(), loss) + reg * h.norm().powi(2)
}

fn exact(spec: &TrainSpec) -> bool {
    spec.loss == LossKind::Squared
}

/// Task weighting for task `j`: minimizes `sum_k gamma_k L_k(h) + lambda ||h||^2`.
///
/// The gap is `sum_{k != j} gamma_k [V_k(hbar_j) - V_k(hbar_k)]` with
/// `V_k(h) = L_k(h) + eta lambda ||h||^2`; the bound is
/// `sqrt(nabla / (lambda (1 - eta)) + ||hbar_j||^2)`.
pub fn task_weighting_train(
    tasks: &TaskSet,
    j: usize,
    rel: &TaskRelation,
    spec: &TrainSpec,
    eta: f64,
) -> Result<MtlSolution> {
    spec.validate()?;
    if !(eta >= 0.0 && eta < 1.0) {
        return Err(Error::param("eta", format!("must lie in [0, 1), got {eta}")));
    }
    let k = tasks.len();
    if rel.gamma.len() != k {
        return Err(Error::DimensionMismatch {
            expected: k,
            actual: rel.gamma.len(),
        });
    }
    if j >= k {
        return Err(Error::param("j", format!("task {j} out of range for {k} tasks")));
    }
    let (examples, weights) = pooled(tasks, |t| rel.gamma[t] / tasks.tasks[t].len() as f64);
    let h_star = fit(&Problem::new(&examples, &weights, spec.lambda), spec)?;

    let reg = eta * spec.lambda;
    let h_bar_j = task_fit(&tasks.tasks[j], reg, spec)?;
    let mut nabla = 0.0;
    for (t, task) in tasks.tasks.iter().enumerate() {
        if t == j || rel.gamma[t] == 0.0 {
            continue;
        }
        let h_bar = task_fit(task, reg, spec)?;
        nabla += rel.gamma[t]
            * (task_objective(&h_bar_j, task, reg, spec.loss) - task_objective(&h_bar, task, reg, spec.loss));
    }
    let norm_hbar = h_bar_j.norm();
    let bound = (nabla.max(0.0) / (spec.lambda * (1.0 - eta)) + norm_hbar.powi(2)).sqrt();
    let certified = (nabla.max(0.0) / (spec.lambda * (1.0 - eta))).sqrt() + norm_hbar;
    let norm_hstar = h_star.norm();
    Ok(MtlSolution {
        hypotheses: vec![h_star],
        task: Some(j),
        shared: None,
        offsets: None,
        gap: MtlGap {
            kind: MtlKind::TaskWeighting,
            nabla,
            bounds: vec![TaskBound {
                task: j,
                norm_hstar,
                norm_hbar,
                bound,
                slack: bound - norm_hstar,
                certified,
                certified_slack: certified - norm_hstar,
            }],
            exact: exact(spec),
        },
    })
}

/// Parameter sharing `h_k = w_0 + w_k`, minimizing
/// `(1/K) sum_k [L_k(w_0 + w_k) + lambda0 ||w_0||^2 + lambda ||w_k||^2]`.
///
/// `spec.lambda` is ignored in favour of the two explicit strengths.
pub fn parameter_sharing_train(
    tasks: &TaskSet,
    lambda0: f64,
    lambda: f64,
    spec: &TrainSpec,
) -> Result<MtlSolution> {
    for (name, v) in [("lambda0", lambda0), ("lambda", lambda)] {
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::param(name, format!("must be > 0, got {v}")));
        }
    }
    let spec = spec.with_lambda(lambda);
    spec.validate()?;
    let (shared, offsets) = if spec.loss == LossKind::Squared {
        sharing_squared(tasks, lambda0, lambda, spec.augment)?
    } else {
        sharing_blocks(tasks, lambda0, lambda, &spec)?
    };
    let hypotheses: Vec<LinearHypothesis> = offsets
        .iter()
        .map(|wk| LinearHypothesis {
            w: shared.w.iter().zip(&wk.w).map(|(a, b)| a + b).collect(),
            augmented: spec.augment,
        })
        .collect();

    let k = tasks.len() as f64;
    let lambda_bar = lambda0 * lambda / (lambda0 + lambda);
    let h0 = pooled_fit(tasks, lambda0, &spec)?;
    let v0: f64 = tasks
        .tasks
        .iter()
        .map(|t| mean_loss(&h0, t.examples(), spec.loss))
        .sum::<f64>()
        / k
        + lambda0 * h0.norm().powi(2);
    let mut nabla = k * v0;
    let mut h_bars = Vec::with_capacity(tasks.len());
    for task in &tasks.tasks {
        let hb = task_fit(task, lambda_bar, &spec)?;
        nabla -= task_objective(&hb, task, lambda_bar, spec.loss);
        h_bars.push(hb);
    }
    let bounds = per_task_bounds(&hypotheses, &h_bars, nabla.max(0.0) / lambda_bar);
    Ok(MtlSolution {
        hypotheses,
        task: None,
        shared: Some(shared),
        offsets: Some(offsets),
        gap: MtlGap {
            kind: MtlKind::ParameterSharing,
            nabla,
            bounds,
            exact: exact(&spec),
        },
    })
}

fn per_task_bounds(
    hypotheses: &[LinearHypothesis],
    h_bars: &[LinearHypothesis],
    radius_sq: f64,
) -> Vec<TaskBound> {
    hypotheses
        .iter()
        .zip(h_bars)
        .enumerate()
        .map(|(task, (h, hb))| {
            let norm_hbar = hb.norm();
            let bound = (radius_sq + norm_hbar * norm_hbar).sqrt();
            let certified = radius_sq.sqrt() + norm_hbar;
            let norm_hstar = h.norm();
            TaskBound {
                task,
                norm_hstar,
                norm_hbar,
                bound,
                slack: bound - norm_hstar,
                certified,
                certified_slack: certified - norm_hstar,
            }
        })
        .collect()
}

/// Per-task Gram matrices `X_k^T X_k / N_k` and moments `X_k^T y_k / N_k`.
fn task_moments(tasks: &TaskSet, augment: bool) -> Vec<(DMatrix<f64>, DVector<f64>)> {
    tasks
        .tasks
        .iter()
        .map(|t| {
            let x = design(t.examples(), augment);
            let y = DVector::from_iterator(t.len(), t.labels());
            let n = t.len() as f64;
            ((x.transpose() * &x) / n, (x.transpose() * y) / n)
        })
        .collect()
}

fn sharing_squared(
    tasks: &TaskSet,
    lambda0: f64,
    lambda: f64,
    augment: bool,
) -> Result<(LinearHypothesis, Vec<LinearHypothesis>)> {
    let k = tasks.len();
    let kf = k as f64;
    let d = tasks.dim() + usize::from(augment);
    let moments = task_moments(tasks, augment);
    // Unknowns [w_0, w_1, ..., w_K]; half the Hessian of the objective.
    let mut a = DMatrix::zeros((k + 1) * d, (k + 1) * d);
    let mut b = DVector::zeros((k + 1) * d);
    for (t, (g, r)) in moments.iter().enumerate() {
        let g = g / kf;
        let r = r / kf;
        let o = (t + 1) * d;
        for p in 0..d {
            for q in 0..d {
                a[(p, q)] += g[(p, q)];
                a[(p, o + q)] += g[(p, q)];
                a[(o + p, q)] += g[(p, q)];
                a[(o + p, o + q)] += g[(p, q)];
            }
            b[p] += r[p];
            b[o + p] += r[p];
            a[(o + p, o + p)] += lambda / kf;
        }
    }
    for p in 0..d {
        a[(p, p)] += lambda0;
    }
    let sol = solve_spd(a, &b)?;
    let block = |i: usize| LinearHypothesis {
        w: sol.rows(i * d, d).iter().copied().collect(),
        augmented: augment,
    };
    Ok((block(0), (1..=k).map(block).collect()))
}

/// `sum_i weight * loss'(<h, x_i> + o_i, y_i) * x_i` (augmented when asked).
fn data_gradient(examples: &[Example], offsets: &[f64], h: &[f64], weight: f64, spec: &TrainSpec, out: &mut [f64]) {
    let hyp = LinearHypothesis {
        w: h.to_vec(),
        augmented: spec.augment,
    };
    for (e, o) in examples.iter().zip(offsets) {
        let (_, g, _) = surrogate(spec.loss, hyp.score(&e.x) + o, e.y);
        let c = weight * g;
        for (acc, x) in out.iter_mut().zip(&e.x) {
            *acc += c * x;
        }
        if spec.augment {
            out[e.x.len()] += c;
        }
    }
}

fn scores(examples: &[Example], h: &LinearHypothesis) -> Vec<f64> {
    examples.iter().map(|e| h.score(&e.x)).collect()
}

fn sharing_blocks(
    tasks: &TaskSet,
    lambda0: f64,
    lambda: f64,
    spec: &TrainSpec,
) -> Result<(LinearHypothesis, Vec<LinearHypothesis>)> {
    let k = tasks.len();
    let kf = k as f64;
    let d = tasks.dim() + usize::from(spec.augment);
    let mut w0 = LinearHypothesis::zeros(tasks.dim(), spec.augment);
    let mut wk = vec![w0.clone(); k];
    let (all, weights) = pooled(tasks, |t| 1.0 / kf / tasks.tasks[t].len() as f64);
    let mut grad_norm = f64::INFINITY;
    for _ in 0..spec.max_iterations {
        // Shared block with task offsets fixed.
        let offsets: Vec<f64> = tasks
            .tasks
            .iter()
            .zip(&wk)
            .flat_map(|(t, h)| scores(t.examples(), h))
            .collect();
        w0 = fit(&Problem::new(&all, &weights, lambda0).with_offsets(&offsets), spec)?;
        for (t, task) in tasks.tasks.iter().enumerate() {
            let off = scores(task.examples(), &w0);
            let w = uniform_weights(task.len(), 1.0 / kf);
            wk[t] = fit(&Problem::new(task.examples(), &w, lambda / kf).with_offsets(&off), spec)?;
        }
        // Full gradient of the joint objective.
        let mut g0: Vec<f64> = w0.w.iter().map(|v| 2.0 * lambda0 * v).collect();
        let mut total = 0.0;
        for (t, task) in tasks.tasks.iter().enumerate() {
            let off = scores(task.examples(), &w0);
            let mut gk: Vec<f64> = wk[t].w.iter().map(|v| 2.0 * lambda / kf * v).collect();
            let mut data = vec![0.0; d];
            data_gradient(task.examples(), &off, &wk[t].w, 1.0 / kf / task.len() as f64, spec, &mut data);
            for p in 0..d {
                gk[p] += data[p];
                g0[p] += data[p];
            }
            total += gk.iter().map(|v| v * v).sum::<f64>();
        }
        total += g0.iter().map(|v| v * v).sum::<f64>();
        grad_norm = total.sqrt();
        if grad_norm <= BLOCK_TOL {
            return Ok((w0, wk));
        }
    }
    Err(Error::NotConverged {
        iterations: spec.max_iterations,
        grad_norm,
    })
}

/// Task covariance: minimizes `(1/K) sum_k L_k(h_k) + tr(H^T Omega^{-1} H)`.
///
/// The gap uses `V_k(h) = L_k(h) + (K / sigma_max) ||h||^2` and the pooled
/// `V_0(h) = (1/K) sum_k L_k(h) + omega ||h||^2`; the bound is
/// `sqrt(sigma_max nabla / K + ||hbar_j||^2)`.
pub fn task_covariance_train(tasks: &TaskSet, cov: &CovarianceSpec, spec: &TrainSpec) -> Result<MtlSolution> {
    let k = tasks.len();
    if cov.k() != k {
        return Err(Error::DimensionMismatch {
            expected: k,
            actual: cov.k(),
        });
    }
    let spec = *spec;
    let mut check = spec;
    check.lambda = 1.0;
    check.validate()?;
    let hypotheses = if spec.loss == LossKind::Squared {
        covariance_squared(tasks, cov, spec.augment)?
    } else {
        covariance_blocks(tasks, cov, &spec)?
    };

    let kf = k as f64;
    let single_reg = kf / cov.sigma_max;
    let h0 = pooled_fit(tasks, cov.omega_sum, &spec)?;
    let v0: f64 = tasks
        .tasks
        .iter()
        .map(|t| mean_loss(&h0, t.examples(), spec.loss))
        .sum::<f64>()
        / kf
        + cov.omega_sum * h0.norm().powi(2);
    let mut nabla = kf * v0;
    let mut h_bars = Vec::with_capacity(k);
    for task in &tasks.tasks {
        let hb = task_fit(task, single_reg, &spec)?;
        nabla -= task_objective(&hb, task, single_reg, spec.loss);
        h_bars.push(hb);
    }
    let sigma_max = cov.sigma_max;
    let bounds = per_task_bounds(&hypotheses, &h_bars, sigma_max * nabla.max(0.0) / kf);
    Ok(MtlSolution {
        hypotheses,
        task: None,
        shared: None,
        offsets: None,
        gap: MtlGap {
            kind: MtlKind::TaskCovariance,
            nabla,
            bounds,
            exact: exact(&spec),
        },
    })
}

fn covariance_squared(tasks: &TaskSet, cov: &CovarianceSpec, augment: bool) -> Result<Vec<LinearHypothesis>> {
    let k = tasks.len();
    let kf = k as f64;
    let d = tasks.dim() + usize::from(augment);
    let moments = task_moments(tasks, augment);
    let mut a = DMatrix::zeros(k * d, k * d);
    let mut b = DVector::zeros(k * d);
    for (t, (g, r)) in moments.iter().enumerate() {
        let o = t * d;
        for p in 0..d {
            for q in 0..d {
                a[(o + p, o + q)] += g[(p, q)] / kf;
            }
            b[o + p] = r[p] / kf;
        }
        for l in 0..k {
            let pkl = cov.precision[(t, l)];
            for p in 0..d {
                a[(o + p, l * d + p)] += pkl;
            }
        }
    }
    let sol = solve_spd(a, &b)?;
    Ok((0..k)
        .map(|t| LinearHypothesis {
            w: sol.rows(t * d, d).iter().copied().collect(),
            augmented: augment,
        })
        .collect())
}

fn covariance_blocks(tasks: &TaskSet, cov: &CovarianceSpec, spec: &TrainSpec) -> Result<Vec<LinearHypothesis>> {
    let k = tasks.len();
    let kf = k as f64;
    let d = tasks.dim() + usize::from(spec.augment);
    let mut hs = vec![LinearHypothesis::zeros(tasks.dim(), spec.augment); k];
    let mut grad_norm = f64::INFINITY;
    for _ in 0..spec.max_iterations {
        for t in 0..k {
            // P_tt ||h_t - c||^2 reproduces the terms of the trace involving h_t.
            let ptt = cov.precision[(t, t)];
            let mut center = vec![0.0; d];
            for (l, h) in hs.iter().enumerate() {
                if l != t {
                    let c = -cov.precision[(t, l)] / ptt;
                    for (acc, v) in center.iter_mut().zip(&h.w) {
                        *acc += c * v;
                    }
                }
            }
            let task = &tasks.tasks[t];
            let w = uniform_weights(task.len(), 1.0 / kf);
            hs[t] = fit(&Problem::new(task.examples(), &w, ptt).with_center(&center), spec)?;
        }
        let mut total = 0.0;
        for (t, task) in tasks.tasks.iter().enumerate() {
            let mut g = vec![0.0; d];
            let zeros = vec![0.0; task.len()];
            data_gradient(task.examples(), &zeros, &hs[t].w, 1.0 / kf / task.len() as f64, spec, &mut g);
            for (l, h) in hs.iter().enumerate() {
                let c = 2.0 * cov.precision[(t, l)];
                for (acc, v) in g.iter_mut().zip(&h.w) {
                    *acc += c * v;
                }
            }
            total += g.iter().map(|v| v * v).sum::<f64>();
        }
        grad_norm = total.sqrt();
        if grad_norm <= BLOCK_TOL {
            return Ok(hs);
        }
    }
    Err(Error::NotConverged {
        iterations: spec.max_iterations,
        grad_norm,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learners::train_weighted;
    use crate::model::DomainTag;
    use rand::{RngExt, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_tasks(seed: u64, k: usize, n: usize, d: usize, classification: bool) -> TaskSet {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let base: Vec<f64> = (0..d).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
        let tasks = (0..k)
            .map(|t| {
                let w: Vec<f64> = base.iter().map(|b| b + 0.5 * (rng.random::<f64>() - 0.5)).collect();
                let nt = n + t;
                let xs: Vec<Vec<f64>> = (0..nt)
                    .map(|_| (0..d).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect())
                    .collect();
                let ys = xs
                    .iter()
                    .map(|x| {
                        let s: f64 = x.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>() + 0.2 * (rng.random::<f64>() - 0.5);
                        if classification {
                            if s >= 0.0 { 1.0 } else { -1.0 }
                        } else {
                            s
                        }
                    })
                    .collect();
                Sample::from_rows(xs, ys, DomainTag::Task(t)).unwrap()
            })
            .collect();
        TaskSet::new(tasks).unwrap()
    }

    fn ridge(task: &Sample, lambda: f64, spec: &TrainSpec) -> LinearHypothesis {
        let n = task.len();
        train_weighted(task.examples(), &vec![1.0 / n as f64; n], &spec.with_lambda(lambda)).unwrap()
    }

    fn close(a: &LinearHypothesis, b: &LinearHypothesis, tol: f64) -> bool {
        a.w.iter().zip(&b.w).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn one_hot_relation_is_single_task_ridge() {
        let ts = random_tasks(1, 3, 12, 3, false);
        let spec = TrainSpec::squared(0.4);
        let sol = task_weighting_train(&ts, 1, &TaskRelation::one_hot(3, 1).unwrap(), &spec, 0.0).unwrap();
        assert!(close(&sol.hypotheses[0], &ridge(&ts.tasks()[1], 0.4, &spec), 1e-12));
        assert_eq!(sol.gap.nabla, 0.0);
    }

    #[test]
    fn identical_tasks_have_zero_weighting_gap() {
        let one = random_tasks(2, 1, 15, 3, false).tasks()[0].clone();
        let ts = TaskSet::new(vec![one.clone(), one.clone(), one.clone()]).unwrap();
        let spec = TrainSpec::squared(0.2);
        let sol = task_weighting_train(&ts, 0, &TaskRelation::uniform(3).unwrap(), &spec, 0.5).unwrap();
        assert!(sol.gap.nabla.abs() < 1e-12);
        assert!(close(&sol.hypotheses[0], &ridge(&one, 0.2, &spec), 1e-10));
    }

    #[test]
    fn task_weighting_rejects_bad_eta_and_index() {
        let ts = random_tasks(3, 2, 5, 2, false);
        let rel = TaskRelation::uniform(2).unwrap();
        let spec = TrainSpec::squared(1.0);
        assert!(task_weighting_train(&ts, 0, &rel, &spec, 1.0).is_err());
        assert!(task_weighting_train(&ts, 2, &rel, &spec, 0.0).is_err());
        assert!(TaskRelation::new(vec![0.5, 0.6]).is_err());
    }

    #[test]
    fn sharing_single_task_is_ridge_with_combined_strength() {
        let ts = random_tasks(4, 1, 20, 3, false);
        let spec = TrainSpec::squared(1.0);
        let (l0, l) = (0.3, 0.7);
        let sol = parameter_sharing_train(&ts, l0, l, &spec).unwrap();
        let lbar = l0 * l / (l0 + l);
        assert!(close(&sol.hypotheses[0], &ridge(&ts.tasks()[0], lbar, &spec), 1e-10));
    }

    #[test]
    fn sharing_decomposition_is_exact() {
        let ts = random_tasks(5, 3, 10, 2, false);
        let sol = parameter_sharing_train(&ts, 0.5, 0.2, &TrainSpec::squared(1.0)).unwrap();
        let w0 = sol.shared.as_ref().unwrap();
        for (h, wk) in sol.hypotheses.iter().zip(sol.offsets.as_ref().unwrap()) {
            for i in 0..h.w.len() {
                assert_eq!(h.w[i], w0.w[i] + wk.w[i]);
            }
        }
    }

    #[test]
    fn sharing_identical_tasks_have_equal_offsets() {
        let one = random_tasks(6, 1, 15, 3, false).tasks()[0].clone();
        let ts = TaskSet::new(vec![one.clone(), one.clone(), one]).unwrap();
        let sol = parameter_sharing_train(&ts, 0.5, 0.5, &TrainSpec::squared(1.0)).unwrap();
        let offs = sol.offsets.unwrap();
        assert!(close(&offs[0], &offs[1], 1e-10) && close(&offs[1], &offs[2], 1e-10));
    }

    #[test]
    fn isotropic_precision_decouples_tasks() {
        let ts = random_tasks(7, 3, 14, 3, false);
        let lambda = 0.6;
        let p = lambda / 3.0;
        let cov = CovarianceSpec::from_precision(vec![
            vec![p, 0.0, 0.0],
            vec![0.0, p, 0.0],
            vec![0.0, 0.0, p],
        ])
        .unwrap();
        assert!((cov.sigma_max() - 3.0 / lambda).abs() < 1e-12);
        let spec = TrainSpec::squared(1.0);
        let sol = task_covariance_train(&ts, &cov, &spec).unwrap();
        for (h, task) in sol.hypotheses.iter().zip(ts.tasks()) {
            assert!(close(h, &ridge(task, lambda, &spec), 1e-10));
        }
    }

    #[test]
    fn sharing_is_a_covariance_special_case() {
        let ts = random_tasks(11, 3, 10, 2, false);
        let (l0, l, k) = (0.4, 0.9, 3.0);
        let a = l / k;
        let b = l * l / (k * k * (l0 + l));
        let prec: Vec<Vec<f64>> = (0..3)
            .map(|i| (0..3).map(|j| if i == j { a - b } else { -b }).collect())
            .collect();
        let cov = CovarianceSpec::from_precision(prec).unwrap();
        let spec = TrainSpec::squared(1.0);
        let x = parameter_sharing_train(&ts, l0, l, &spec).unwrap();
        let y = task_covariance_train(&ts, &cov, &spec).unwrap();
        for (p, q) in x.hypotheses.iter().zip(&y.hypotheses) {
            assert!(close(p, q, 1e-10));
        }
    }

    #[test]
    fn permuting_tasks_permutes_solutions() {
        let ts = random_tasks(12, 3, 9, 2, false);
        let rev = TaskSet::new(ts.tasks().iter().rev().cloned().collect()).unwrap();
        let spec = TrainSpec::squared(1.0);
        let a = parameter_sharing_train(&ts, 0.3, 0.5, &spec).unwrap();
        let b = parameter_sharing_train(&rev, 0.3, 0.5, &spec).unwrap();
        for (p, q) in a.hypotheses.iter().zip(b.hypotheses.iter().rev()) {
            assert!(close(p, q, 1e-10));
        }
        assert!((a.gap.nabla - b.gap.nabla).abs() < 1e-10);
    }

    #[test]
    fn huge_shared_penalty_decouples_into_single_task_ridge() {
        let ts = random_tasks(13, 2, 12, 2, false);
        let spec = TrainSpec::squared(1.0);
        let sol = parameter_sharing_train(&ts, 1e9, 0.5, &spec).unwrap();
        for (h, task) in sol.hypotheses.iter().zip(ts.tasks()) {
            assert!(close(h, &ridge(task, 0.5, &spec), 1e-6));
        }
    }

    #[test]
    fn one_by_one_covariance_is_ridge() {
        let ts = random_tasks(8, 1, 10, 2, false);
        let sigma = 2.5;
        let cov = CovarianceSpec::new(vec![vec![sigma]]).unwrap();
        let spec = TrainSpec::squared(1.0);
        let sol = task_covariance_train(&ts, &cov, &spec).unwrap();
        assert!(close(&sol.hypotheses[0], &ridge(&ts.tasks()[0], 1.0 / sigma, &spec), 1e-10));
    }

    #[test]
    fn covariance_must_be_positive_definite() {
        assert!(CovarianceSpec::new(vec![vec![1.0, 2.0], vec![2.0, 1.0]]).is_err());
        assert!(CovarianceSpec::new(vec![vec![1.0, 0.5], vec![0.4, 1.0]]).is_err());
        assert!(CovarianceSpec::new(vec![vec![1.0, 0.0]]).is_err());
    }

    #[test]
    fn block_solvers_agree_with_closed_form_on_squared_loss() {
        // Lq with q = 2 is the squared loss routed through the iterative path.
        let ts = random_tasks(9, 3, 12, 2, false);
        let sq = TrainSpec::squared(1.0);
        let it = TrainSpec::new(LossKind::Lq { q: 2.0 }, 1.0).unwrap();
        let a = parameter_sharing_train(&ts, 0.4, 0.3, &sq).unwrap();
        let b = parameter_sharing_train(&ts, 0.4, 0.3, &it).unwrap();
        for (x, y) in a.hypotheses.iter().zip(&b.hypotheses) {
            assert!(close(x, y, 1e-7));
        }
        let cov = CovarianceSpec::new(vec![
            vec![2.0, 0.5, 0.1],
            vec![0.5, 1.5, 0.3],
            vec![0.1, 0.3, 1.0],
        ])
        .unwrap();
        let a = task_covariance_train(&ts, &cov, &sq).unwrap();
        let b = task_covariance_train(&ts, &cov, &it).unwrap();
        for (x, y) in a.hypotheses.iter().zip(&b.hypotheses) {
            assert!(close(x, y, 1e-7));
        }
    }

    #[test]
    fn logistic_multitask_solvers_converge() {
        let ts = random_tasks(10, 3, 20, 2, true);
        let spec = TrainSpec::logistic(1.0);
        let sol = parameter_sharing_train(&ts, 0.1, 0.1, &spec).unwrap();
        assert!(!sol.gap.exact);
        assert!(sol.gap.nabla >= -1e-6);
        let cov = CovarianceSpec::new(vec![
            vec![5.0, 1.0, 0.0],
            vec![1.0, 5.0, 1.0],
            vec![0.0, 1.0, 5.0],
        ])
        .unwrap();
        let sol = task_covariance_train(&ts, &cov, &spec).unwrap();
        assert!(sol.gap.nabla >= -1e-6);
        assert!(sol.gap.min_certified_slack() >= -1e-6);
    }
}
