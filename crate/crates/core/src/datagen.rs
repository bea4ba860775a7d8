//! Synthetic transfer problems and CSV ingestion.

use std::path::Path;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{DomainTag, Example, Sample};

/// Number of input features of the Friedman generator.
pub const FRIEDMAN_DIM: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FriedmanParams {
    pub a: [f64; 4],
    pub b: [f64; 5],
    pub c: [f64; 5],
    pub noise_sd: f64,
}

impl Default for FriedmanParams {
    fn default() -> Self {
        Self {
            a: [1.0; 4],
            b: [1.0; 5],
            c: [0.0; 5],
            noise_sd: 1.0,
        }
    }
}

impl FriedmanParams {
    pub fn noiseless(mut self) -> Self {
        self.noise_sd = 0.0;
        self
    }

    fn validate(&self) -> Result<()> {
        let all = self.a.iter().chain(&self.b).chain(&self.c);
        if all.clone().any(|v| !v.is_finite()) || !self.noise_sd.is_finite() {
            return Err(Error::NonFinite("friedman parameters"));
        }
        if self.noise_sd < 0.0 {
            return Err(Error::param("noise_sd", "must be >= 0"));
        }
        Ok(())
    }

    /// Noise-free response at `x` (only the first five features matter).
    pub fn response(&self, x: &[f64]) -> f64 {
        let (a, b, c) = (&self.a, &self.b, &self.c);
        let u = |i: usize| b[i] * x[i] + c[i];
        a[0] * 10.0 * (std::f64::consts::PI * u(0) * u(1)).sin()
            + a[1] * 20.0 * (u(2) - 0.5).powi(2)
            + a[2] * 10.0 * u(3)
            + a[3] * 5.0 * u(4)
    }
}

/// `n` points with features uniform on `[0, 1]^10`.
pub fn friedman_generate(n: usize, params: &FriedmanParams, seed: u64) -> Result<Sample> {
    if n == 0 {
        return Err(Error::param("n", "must be >= 1"));
    }
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, params.noise_sd).map_err(|e| Error::param("noise_sd", e.to_string()))?;
    let examples = (0..n)
        .map(|_| {
            let x: Vec<f64> = (0..FRIEDMAN_DIM).map(|_| rng.random::<f64>()).collect();
            let y = params.response(&x) + noise.sample(&mut rng);
            Example { x, y }
        })
        .collect();
    Sample::new(examples, DomainTag::Target)
}

/// A source/target pair. `source` is `None` for target-only problems.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferProblem {
    pub source: Option<Sample>,
    pub target: Sample,
}

impl TransferProblem {
    pub fn source(&self) -> Result<&Sample> {
        self.source.as_ref().ok_or(Error::EmptySample)
    }
}

/// Draws a perturbed parameter set for one source domain.
pub fn friedman_source_params(rng: &mut ChaCha8Rng) -> FriedmanParams {
    let ab = Normal::new(1.0, 0.1).expect("valid normal");
    let c = Normal::new(0.0, 0.05).expect("valid normal");
    let mut p = FriedmanParams::default();
    for v in p.a.iter_mut().chain(p.b.iter_mut()) {
        *v = ab.sample(rng);
    }
    for v in &mut p.c {
        *v = c.sample(rng);
    }
    p
}

/// Target: standard Friedman function. Each of `n_sources` domains draws
/// its own perturbed parameters and contributes `n_src` points to the pooled
/// source sample.
pub fn friedman_transfer(n_src: usize, n_tgt: usize, n_sources: usize, seed: u64) -> Result<TransferProblem> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let target = friedman_generate(n_tgt, &FriedmanParams::default(), rng.random())?;
    let mut parts = Vec::with_capacity(n_sources);
    for _ in 0..n_sources {
        let params = friedman_source_params(&mut rng);
        parts.push(friedman_generate(n_src, &params, rng.random())?);
    }
    let source = if parts.is_empty() {
        None
    } else {
        let refs: Vec<&Sample> = parts.iter().collect();
        Some(Sample::concat(&refs)?.with_tag(DomainTag::Source))
    };
    Ok(TransferProblem { source, target })
}

fn pearson(xs: impl Iterator<Item = f64> + Clone, ys: &[f64]) -> Option<f64> {
    let n = ys.len() as f64;
    let mx = xs.clone().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx).powi(2);
        syy += (y - my).powi(2);
    }
    (sxx > 0.0 && syy > 0.0).then(|| sxy / (sxx * syy).sqrt())
}

/// Index of the feature whose absolute correlation with the label is closest
/// to `target_corr`. Constant features are skipped.
pub fn shift_feature(sample: &Sample, target_corr: f64) -> Result<usize> {
    let ys: Vec<f64> = sample.labels().collect();
    let my = ys.iter().sum::<f64>() / ys.len() as f64;
    if ys.iter().all(|y| *y == my) {
        return Err(Error::ConstantLabel);
    }
    let mut best: Option<(usize, f64)> = None;
    for j in 0..sample.dim() {
        let Some(r) = pearson(sample.examples().iter().map(|e| e.x[j]), &ys) else {
            continue;
        };
        let dist = (r.abs() - target_corr).abs();
        if best.is_none_or(|(_, d)| dist < d) {
            best = Some((j, dist));
        }
    }
    best.map(|(j, _)| j).ok_or(Error::param("sample", "every feature is constant"))
}

/// Splits into low, medium and high thirds of the selected feature, then
/// removes that feature. Remainders go to the lower thirds first.
pub fn feature_shift_split(sample: &Sample, target_corr: f64) -> Result<[Sample; 3]> {
    if sample.dim() < 2 {
        return Err(Error::param("sample", "need at least 2 features"));
    }
    if sample.len() < 3 {
        return Err(Error::param("sample", "need at least 3 examples"));
    }
    let j = shift_feature(sample, target_corr)?;
    let mut order: Vec<usize> = (0..sample.len()).collect();
    order.sort_by(|&a, &b| sample.examples()[a].x[j].total_cmp(&sample.examples()[b].x[j]));
    let n = sample.len();
    let sizes = [n / 3 + usize::from(n % 3 > 0), n / 3 + usize::from(n % 3 > 1), n / 3];
    let mut start = 0;
    let parts = sizes.map(|len| {
        let idx = &order[start..start + len];
        start += len;
        let examples = idx
            .iter()
            .map(|&i| {
                let e = &sample.examples()[i];
                let mut x = e.x.clone();
                x.remove(j);
                Example { x, y: e.y }
            })
            .collect();
        Sample::new(examples, sample.tag())
    });
    let [a, b, c] = parts;
    Ok([a?, b?, c?])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianShift {
    /// Class mean of the positive class; the negative class sits at `-mu`.
    pub mu: Vec<f64>,
    /// Translation applied to source inputs.
    pub shift: Vec<f64>,
    pub flip_prob: f64,
}

impl GaussianShift {
    pub fn new(mu: Vec<f64>, shift: Vec<f64>, flip_prob: f64) -> Result<Self> {
        if mu.is_empty() {
            return Err(Error::param("mu", "must be nonempty"));
        }
        if shift.len() != mu.len() {
            return Err(Error::DimensionMismatch {
                expected: mu.len(),
                actual: shift.len(),
            });
        }
        if mu.iter().chain(&shift).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("gaussian shift parameters"));
        }
        if !(0.0..0.5).contains(&flip_prob) {
            return Err(Error::param("flip_prob", format!("must lie in [0, 0.5), got {flip_prob}")));
        }
        Ok(Self { mu, shift, flip_prob })
    }
}

fn gaussian_cloud(
    n: usize,
    mu: &[f64],
    shift: Option<&[f64]>,
    flip_prob: f64,
    tag: DomainTag,
    rng: &mut ChaCha8Rng,
) -> Result<Sample> {
    let std = Normal::new(0.0, 1.0).expect("valid normal");
    let examples = (0..n)
        .map(|_| {
            let y = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            let x = mu
                .iter()
                .enumerate()
                .map(|(i, m)| y * m + std.sample(rng) + shift.map_or(0.0, |s| s[i]))
                .collect();
            let y = if flip_prob > 0.0 && rng.random_bool(flip_prob) { -y } else { y };
            Example { x, y }
        })
        .collect();
    Sample::new(examples, tag)
}

/// Target: unit-variance class clouds at `+-mu` with balanced labels.
/// Source: the same clouds translated by `shift`, labels flipped with
/// probability `flip_prob`.
pub fn gaussian_shift_classification(
    n_src: usize,
    n_tgt: usize,
    params: &GaussianShift,
    seed: u64,
) -> Result<TransferProblem> {
    let params = GaussianShift::new(params.mu.clone(), params.shift.clone(), params.flip_prob)?;
    if n_src == 0 || n_tgt == 0 {
        return Err(Error::EmptySample);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let target = gaussian_cloud(n_tgt, &params.mu, None, 0.0, DomainTag::Target, &mut rng)?;
    let source = gaussian_cloud(n_src, &params.mu, Some(&params.shift), params.flip_prob, DomainTag::Source, &mut rng)?;
    Ok(TransferProblem {
        source: Some(source),
        target,
    })
}

/// Reads a headed numeric CSV; `label_column` names the label, every other
/// column is a feature in file order.
pub fn load_csv(path: impl AsRef<Path>, label_column: &str, tag: DomainTag) -> Result<Sample> {
    let mut reader = csv::Reader::from_path(path)?;
    let headers = reader.headers()?.clone();
    let label = headers
        .iter()
        .position(|h| h == label_column)
        .ok_or_else(|| Error::param("label_column", format!("no column named {label_column:?}")))?;
    let mut examples = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record?;
        let mut x = Vec::with_capacity(record.len().saturating_sub(1));
        let mut y = 0.0;
        for (col, cell) in record.iter().enumerate() {
            let v: f64 = cell.trim().parse().map_err(|_| Error::Parse {
                row: row + 1,
                column: headers.get(col).unwrap_or("").to_string(),
                value: cell.to_string(),
            })?;
            if col == label {
                y = v;
            } else {
                x.push(v);
            }
        }
        examples.push(Example::new(x, y)?);
    }
    Sample::new(examples, tag)
}

/// Writes columns `x0..x{d-1},y` with 17 significant digits.
pub fn save_csv(sample: &Sample, path: impl AsRef<Path>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header: Vec<String> = (0..sample.dim()).map(|j| format!("x{j}")).collect();
    header.push("y".into());
    w.write_record(&header)?;
    for e in sample.examples() {
        let row = e.x.iter().chain(std::iter::once(&e.y)).map(|v| format!("{v:.16e}"));
        w.write_record(row)?;
    }
    w.flush()?;
    Ok(())
}

/// Per-feature centering and scaling fitted on a training sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    /// Population standard deviation; constant features use 1.
    pub scale: Vec<f64>,
}

impl Standardizer {
    pub fn fit(sample: &Sample) -> Result<Self> {
        if sample.is_empty() {
            return Err(Error::EmptySample);
        }
        let n = sample.len() as f64;
        let d = sample.dim();
        let mut mean = vec![0.0; d];
        for e in sample.examples() {
            for (m, x) in mean.iter_mut().zip(&e.x) {
                *m += x / n;
            }
        }
        let mut var = vec![0.0; d];
        for e in sample.examples() {
            for j in 0..d {
                var[j] += (e.x[j] - mean[j]).powi(2) / n;
            }
        }
        let scale = var.into_iter().map(|v| if v > 0.0 { v.sqrt() } else { 1.0 }).collect();
        Ok(Self { mean, scale })
    }

    pub fn transform(&self, sample: &Sample) -> Result<Sample> {
        if sample.dim() != self.mean.len() {
            return Err(Error::DimensionMismatch {
                expected: self.mean.len(),
                actual: sample.dim(),
            });
        }
        let examples = sample
            .examples()
            .iter()
            .map(|e| Example {
                x: e.x
                    .iter()
                    .zip(self.mean.iter().zip(&self.scale))
                    .map(|(x, (m, s))| (x - m) / s)
                    .collect(),
                y: e.y,
            })
            .collect();
        Sample::new(examples, sample.tag())
    }
}
