//! Domain types shared by every learner: labelled examples, domain-tagged
//! samples, instance weights and linear hypotheses.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on `sum(weights) == 1`.
pub const SIMPLEX_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Example {
    pub x: Vec<f64>,
    pub y: f64,
}

impl Example {
    pub fn new(x: Vec<f64>, y: f64) -> Result<Self> {
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("features"));
        }
        if !y.is_finite() {
            return Err(Error::NonFinite("label"));
        }
        Ok(Self { x, y })
    }

    pub fn dim(&self) -> usize {
        self.x.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DomainTag {
    Source,
    Target,
    Task(usize),
}

/// Nonempty, dimension-uniform list of examples from one domain or task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    examples: Vec<Example>,
    tag: DomainTag,
}

impl Sample {
    pub fn new(examples: Vec<Example>, tag: DomainTag) -> Result<Self> {
        let first = examples.first().ok_or(Error::EmptySample)?;
        let dim = first.dim();
        for e in &examples {
            if e.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    actual: e.dim(),
                });
            }
            if e.x.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("features"));
            }
            if !e.y.is_finite() {
                return Err(Error::NonFinite("label"));
            }
        }
        Ok(Self { examples, tag })
    }

    /// Builds a sample from parallel feature rows and labels.
    pub fn from_rows(xs: Vec<Vec<f64>>, ys: Vec<f64>, tag: DomainTag) -> Result<Self> {
        if xs.len() != ys.len() {
            return Err(Error::DimensionMismatch {
                expected: xs.len(),
                actual: ys.len(),
            });
        }
        let examples = xs
            .into_iter()
            .zip(ys)
            .map(|(x, y)| Example { x, y })
            .collect();
        Self::new(examples, tag)
    }

    pub fn examples(&self) -> &[Example] {
        &self.examples
    }

    pub fn into_examples(self) -> Vec<Example> {
        self.examples
    }

    pub fn tag(&self) -> DomainTag {
        self.tag
    }

    pub fn with_tag(mut self, tag: DomainTag) -> Self {
        self.tag = tag;
        self
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.examples[0].dim()
    }

    pub fn labels(&self) -> impl Iterator<Item = f64> + '_ {
        self.examples.iter().map(|e| e.y)
    }

    /// Checks that every label is exactly -1 or +1.
    pub fn check_classification(&self) -> Result<()> {
        match self.examples.iter().find(|e| e.y != 1.0 && e.y != -1.0) {
            Some(e) => Err(Error::InvalidLabel(e.y)),
            None => Ok(()),
        }
    }

    /// Largest Euclidean feature norm.
    pub fn max_norm(&self) -> f64 {
        self.examples
            .iter()
            .map(|e| norm(&e.x))
            .fold(0.0, f64::max)
    }

    /// Subsample by index, keeping the tag.
    pub fn select(&self, indices: &[usize]) -> Result<Self> {
        let examples = indices.iter().map(|&i| self.examples[i].clone()).collect();
        Self::new(examples, self.tag)
    }

    /// Concatenation of several samples (tag of the first).
    pub fn concat(parts: &[&Sample]) -> Result<Self> {
        let first = parts.first().ok_or(Error::EmptySample)?;
        let examples = parts
            .iter()
            .flat_map(|s| s.examples.iter().cloned())
            .collect();
        Self::new(examples, first.tag)
    }
}

/// Per-instance weights over a target sample followed by a source sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightVector {
    target: Vec<f64>,
    source: Vec<f64>,
}

impl WeightVector {
    pub fn new(target: Vec<f64>, source: Vec<f64>) -> Result<Self> {
        check_nonnegative(&target)?;
        check_nonnegative(&source)?;
        let total: f64 = target.iter().chain(&source).sum();
        if (total - 1.0).abs() > SIMPLEX_TOL {
            return Err(Error::InvalidWeights(format!("weights sum to {total}, not 1")));
        }
        Ok(Self { target, source })
    }

    /// Uniform weights 1/(n_target + n_source).
    pub fn uniform(n_target: usize, n_source: usize) -> Result<Self> {
        let n = n_target + n_source;
        if n == 0 {
            return Err(Error::EmptySample);
        }
        let w = 1.0 / n as f64;
        Self::new(vec![w; n_target], vec![w; n_source])
    }

    /// Normalizes arbitrary nonnegative weights onto the simplex.
    pub fn normalized(target: Vec<f64>, source: Vec<f64>) -> Result<Self> {
        check_nonnegative(&target)?;
        check_nonnegative(&source)?;
        let total: f64 = target.iter().chain(&source).sum();
        if total <= 0.0 {
            return Err(Error::InvalidWeights("total weight is zero".into()));
        }
        let scale = |v: Vec<f64>| v.into_iter().map(|w| w / total).collect();
        Ok(Self {
            target: scale(target),
            source: scale(source),
        })
    }

    pub fn target(&self) -> &[f64] {
        &self.target
    }

    pub fn source(&self) -> &[f64] {
        &self.source
    }

    pub fn len(&self) -> usize {
        self.target.len() + self.source.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn iter(&self) -> impl Iterator<Item = f64> + '_ {
        self.target.iter().chain(&self.source).copied()
    }

    pub fn source_mass(&self) -> f64 {
        self.source.iter().sum()
    }

    pub fn max(&self) -> f64 {
        self.iter().fold(0.0, f64::max)
    }

    pub fn sum_sq(&self) -> f64 {
        self.iter().map(|w| w * w).sum()
    }
}

fn check_nonnegative(w: &[f64]) -> Result<()> {
    match w.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
        Some(v) => Err(Error::InvalidWeights(format!("entry {v} is not a finite nonnegative number"))),
        None => Ok(()),
    }
}

/// Linear hypothesis `x -> <w, x>`, optionally over `[x, 1]`.
///
/// When `augmented` is set the last coordinate of `w` multiplies a constant
/// feature and is penalized like every other coordinate, so `norm()` is the
/// exact quantity the complexity bounds refer to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearHypothesis {
    pub w: Vec<f64>,
    #[serde(default)]
    pub augmented: bool,
}

impl LinearHypothesis {
    pub fn new(w: Vec<f64>) -> Result<Self> {
        Self::with_augmentation(w, false)
    }

    pub fn with_augmentation(w: Vec<f64>, augmented: bool) -> Result<Self> {
        if w.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("hypothesis"));
        }
        if augmented && w.is_empty() {
            return Err(Error::param("w", "augmented hypothesis needs a bias coordinate"));
        }
        Ok(Self { w, augmented })
    }

    pub fn zeros(dim: usize, augmented: bool) -> Self {
        Self {
            w: vec![0.0; dim + usize::from(augmented)],
            augmented,
        }
    }

    /// Feature dimension accepted by `predict`.
    pub fn input_dim(&self) -> usize {
        self.w.len() - usize::from(self.augmented)
    }

    pub fn norm(&self) -> f64 {
        norm(&self.w)
    }

    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                actual: x.len(),
            });
        }
        Ok(self.score(x))
    }

    /// Inner product without the dimension check.
    pub(crate) fn score(&self, x: &[f64]) -> f64 {
        let dot = dot(&self.w[..x.len()], x);
        if self.augmented {
            dot + self.w[x.len()]
        } else {
            dot
        }
    }

    pub fn classify(&self, x: &[f64]) -> Result<f64> {
        self.predict(x).map(sign_label)
    }
}

pub fn predict(h: &LinearHypothesis, x: &[f64]) -> Result<f64> {
    h.predict(x)
}

/// Classification label of a real score; ties go to +1.
pub fn sign_label(score: f64) -> f64 {
    if score >= 0.0 {
        1.0
    } else {
        -1.0
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

pub(crate) fn norm_sq(v: &[f64]) -> f64 {
    dot(v, v)
}

/// Constants entering the stability bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundInputs {
    /// Radius with `||x||_2 <= radius` on the sample.
    pub radius: f64,
    pub rho: f64,
    pub lambda: f64,
    pub delta: f64,
    /// Y-discrepancy between target and source; not estimable from data.
    pub dist_y: Option<f64>,
    /// Upper bound on the loss.
    pub loss_bound: f64,
}

impl BoundInputs {
    /// Validates the constants and checks `radius` against every sample given.
    pub fn new(
        radius: f64,
        rho: f64,
        lambda: f64,
        delta: f64,
        dist_y: Option<f64>,
        loss_bound: f64,
        samples: &[&Sample],
    ) -> Result<Self> {
        if !(radius.is_finite() && radius >= 0.0) {
            return Err(Error::param("radius", format!("must be >= 0, got {radius}")));
        }
        if !(rho.is_finite() && rho >= 0.0) {
            return Err(Error::param("rho", format!("must be >= 0, got {rho}")));
        }
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(Error::param("lambda", format!("must be > 0, got {lambda}")));
        }
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::param("delta", format!("must lie in (0, 1), got {delta}")));
        }
        if let Some(d) = dist_y {
            if !(d.is_finite() && d >= 0.0) {
                return Err(Error::param("dist_y", format!("must be >= 0, got {d}")));
            }
        }
        if !(loss_bound.is_finite() && loss_bound >= 0.0) {
            return Err(Error::param("loss_bound", format!("must be >= 0, got {loss_bound}")));
        }
        for s in samples {
            let m = s.max_norm();
            if m > radius {
                return Err(Error::param(
                    "radius",
                    format!("{radius} is below the largest feature norm {m}"),
                ));
            }
        }
        Ok(Self {
            radius,
            rho,
            lambda,
            delta,
            dist_y,
            loss_bound,
        })
    }
}
