//! Seeded experiment runner: train/test splits of the target sample, an
//! algorithm grid, parameter sweeps and mean/standard-error aggregation.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::boost::{gap_boost, gap_boost_r, run_baseline, BaselineKind, BoostConfig, BoostOutput};
use crate::datagen::{
    friedman_transfer, gaussian_shift_classification, load_csv, GaussianShift, Standardizer, TransferProblem,
};
use crate::error::{Error, Result};
use crate::learners::{TaskMode, TrainSpec};
use crate::loss::LossKind;
use crate::model::{DomainTag, Sample};

/// Salt separating split randomness from data generation.
const SPLIT_SALT: u64 = 0x9e37_79b9_7f4a_7c15;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProblemSpec {
    GaussianShift {
        n_src: usize,
        n_tgt: usize,
        mu: Vec<f64>,
        shift: Vec<f64>,
        #[serde(default)]
        flip_prob: f64,
    },
    Friedman {
        n_src: usize,
        n_tgt: usize,
        #[serde(default = "default_sources")]
        n_sources: usize,
    },
    Csv {
        source: PathBuf,
        target: PathBuf,
        #[serde(default = "default_label")]
        label_column: String,
        mode: TaskMode,
    },
}

fn default_sources() -> usize {
    3
}

fn default_label() -> String {
    "y".into()
}

impl ProblemSpec {
    pub fn mode(&self) -> TaskMode {
        match self {
            Self::GaussianShift { .. } => TaskMode::Classification,
            Self::Friedman { .. } => TaskMode::Regression,
            Self::Csv { mode, .. } => *mode,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::GaussianShift { .. } => "gaussian_shift",
            Self::Friedman { .. } => "friedman",
            Self::Csv { .. } => "csv",
        }
    }

    fn target_size(&self) -> Result<usize> {
        match self {
            Self::GaussianShift { n_tgt, .. } | Self::Friedman { n_tgt, .. } => Ok(*n_tgt),
            Self::Csv { .. } => Ok(self.generate(0)?.target.len()),
        }
    }

    /// Draws (or loads) the full problem for one seed.
    pub fn generate(&self, seed: u64) -> Result<TransferProblem> {
        match self {
            Self::GaussianShift {
                n_src,
                n_tgt,
                mu,
                shift,
                flip_prob,
            } => {
                let params = GaussianShift::new(mu.clone(), shift.clone(), *flip_prob)?;
                gaussian_shift_classification(*n_src, *n_tgt, &params, seed)
            }
            Self::Friedman {
                n_src,
                n_tgt,
                n_sources,
            } => friedman_transfer(*n_src, *n_tgt, *n_sources, seed),
            Self::Csv {
                source,
                target,
                label_column,
                ..
            } => Ok(TransferProblem {
                source: Some(load_csv(source, label_column, DomainTag::Source)?),
                target: load_csv(target, label_column, DomainTag::Target)?,
            }),
        }
    }
}

/// Hyperparameters of a gap-minimizing booster; unset fields use the
/// experiment defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GapParams {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho_s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho_t: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub agreement_bonus: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum AlgorithmSpec {
    GapBoost(GapParams),
    GapBoostR(GapParams),
    #[serde(rename = "adaboost_t")]
    AdaBoostT,
    #[serde(rename = "adaboost_ts")]
    AdaBoostTS,
    #[serde(rename = "tradaboost")]
    TrAdaBoost,
    #[serde(rename = "transferboost")]
    TransferBoost,
    #[serde(rename = "adaboost_r2_t")]
    AdaBoostR2T,
    #[serde(rename = "adaboost_r2_ts")]
    AdaBoostR2TS,
    #[serde(rename = "tradaboost_r2")]
    TrAdaBoostR2,
}

impl AlgorithmSpec {
    pub fn label(&self) -> &'static str {
        match self {
            Self::GapBoost(_) => "gap_boost",
            Self::GapBoostR(_) => "gap_boost_r",
            Self::AdaBoostT => "adaboost_t",
            Self::AdaBoostTS => "adaboost_ts",
            Self::TrAdaBoost => "tradaboost",
            Self::TransferBoost => "transferboost",
            Self::AdaBoostR2T => "adaboost_r2_t",
            Self::AdaBoostR2TS => "adaboost_r2_ts",
            Self::TrAdaBoostR2 => "tradaboost_r2",
        }
    }

    fn baseline(&self) -> Option<BaselineKind> {
        Some(match self {
            Self::GapBoost(_) | Self::GapBoostR(_) => return None,
            Self::AdaBoostT => BaselineKind::AdaBoostT,
            Self::AdaBoostTS => BaselineKind::AdaBoostTS,
            Self::TrAdaBoost => BaselineKind::TrAdaBoost,
            Self::TransferBoost => BaselineKind::TransferBoost,
            Self::AdaBoostR2T => BaselineKind::AdaBoostR2T,
            Self::AdaBoostR2TS => BaselineKind::AdaBoostR2TS,
            Self::TrAdaBoostR2 => BaselineKind::TrAdaBoostR2,
        })
    }

    pub fn mode(&self) -> TaskMode {
        match self {
            Self::GapBoost(_) => TaskMode::Classification,
            Self::GapBoostR(_) => TaskMode::Regression,
            other => other.baseline().map(BaselineKind::mode).unwrap_or(TaskMode::Classification),
        }
    }

    fn gap_params_mut(&mut self) -> Option<&mut GapParams> {
        match self {
            Self::GapBoost(p) | Self::GapBoostR(p) => Some(p),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    ErrorRate,
    Rmse,
}

impl Metric {
    fn for_mode(mode: TaskMode) -> Self {
        match mode {
            TaskMode::Classification => Self::ErrorRate,
            TaskMode::Regression => Self::Rmse,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::ErrorRate => "error_rate",
            Self::Rmse => "rmse",
        }
    }
}

/// Base learner settings; the loss defaults to logistic for classification
/// and squared for regression.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BaseSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub loss: Option<LossKind>,
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    #[serde(default = "default_true")]
    pub augment: bool,
}

fn default_lambda() -> f64 {
    1.0
}

fn default_true() -> bool {
    true
}

impl Default for BaseSpec {
    fn default() -> Self {
        Self {
            loss: None,
            lambda: default_lambda(),
            augment: true,
        }
    }
}

impl BaseSpec {
    pub fn resolve(&self, mode: TaskMode) -> Result<TrainSpec> {
        let loss = self.loss.unwrap_or(match mode {
            TaskMode::Classification => LossKind::Logistic,
            TaskMode::Regression => LossKind::Squared,
        });
        Ok(TrainSpec::new(loss, self.lambda)?.with_augment(self.augment))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_name")]
    pub name: String,
    pub problem: ProblemSpec,
    pub algorithms: Vec<AlgorithmSpec>,
    pub target_fractions: Vec<f64>,
    pub seeds: Vec<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metric: Option<Metric>,
    #[serde(default = "default_rounds")]
    pub rounds: usize,
    #[serde(default = "default_rho_s")]
    pub rho_s: f64,
    #[serde(default)]
    pub rho_t: f64,
    /// Defaults to `1 / sqrt(n_target_train)` per cell.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma_max: Option<f64>,
    #[serde(default)]
    pub base: BaseSpec,
    #[serde(default)]
    pub standardize: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

fn default_name() -> String {
    "experiment".into()
}

fn default_rounds() -> usize {
    20
}

fn default_rho_s() -> f64 {
    0.5f64.ln()
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::config(format!("line {} column {}", e.line(), e.column()), e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config(path.display().to_string(), e.to_string()))?;
        Self::from_json(&text)
    }

    pub fn metric(&self) -> Metric {
        self.metric.unwrap_or_else(|| Metric::for_mode(self.problem.mode()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::config("seeds", "need at least one seed"));
        }
        if self.algorithms.is_empty() {
            return Err(Error::config("algorithms", "need at least one algorithm"));
        }
        if self.target_fractions.is_empty() {
            return Err(Error::config("target_fractions", "need at least one fraction"));
        }
        let mode = self.problem.mode();
        if self.metric() != Metric::for_mode(mode) {
            return Err(Error::config("metric", format!("{:?} does not fit a {mode:?} problem", self.metric())));
        }
        let n_tgt = self.problem.target_size()?;
        for (i, f) in self.target_fractions.iter().enumerate() {
            let path = format!("target_fractions[{i}]");
            if !(*f > 0.0 && *f <= 1.0) {
                return Err(Error::config(path, format!("must lie in (0, 1], got {f}")));
            }
            if train_size(*f, n_tgt) >= n_tgt {
                return Err(Error::config(path, format!("fraction {f} leaves an empty test set")));
            }
        }
        self.base.resolve(mode).map_err(|e| Error::config("base", e.to_string()))?;
        for (i, alg) in self.algorithms.iter().enumerate() {
            if alg.mode() != mode {
                return Err(Error::config(
                    format!("algorithms[{i}]"),
                    format!("{} needs a {:?} problem", alg.label(), alg.mode()),
                ));
            }
            let cfg = self.boost_config(alg, mode, train_size(self.target_fractions[0], n_tgt))?;
            cfg.validate().map_err(|e| Error::config(format!("algorithms[{i}]"), e.to_string()))?;
        }
        Ok(())
    }

    fn boost_config(&self, alg: &AlgorithmSpec, mode: TaskMode, n_target_train: usize) -> Result<BoostConfig> {
        let base = self.base.resolve(mode)?;
        let mut cfg = BoostConfig {
            rounds: self.rounds,
            rho_s: self.rho_s,
            rho_t: self.rho_t,
            gamma_max: self.gamma_max.unwrap_or(1.0 / (n_target_train as f64).sqrt()),
            base,
            mode,
            agreement_bonus: false,
            epsilon_floor: 1e-10,
        };
        if let AlgorithmSpec::GapBoost(p) | AlgorithmSpec::GapBoostR(p) = alg {
            cfg.rho_s = p.rho_s.unwrap_or(cfg.rho_s);
            cfg.rho_t = p.rho_t.unwrap_or(cfg.rho_t);
            cfg.gamma_max = p.gamma_max.unwrap_or(cfg.gamma_max);
            cfg.agreement_bonus = p.agreement_bonus.unwrap_or(false);
        }
        Ok(cfg)
    }
}

fn train_size(fraction: f64, n: usize) -> usize {
    ((fraction * n as f64).round() as usize).max(1)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub algorithm: String,
    pub problem: String,
    pub seed: u64,
    pub target_fraction: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub axis: Option<SweepAxis>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub axis_value: Option<f64>,
    pub hyperparameters: BTreeMap<String, f64>,
    pub metric: Metric,
    pub value: f64,
    pub seconds: f64,
}

impl ResultRecord {
    /// Equality ignoring the wall-clock field.
    pub fn same_outcome(&self, other: &Self) -> bool {
        Self { seconds: 0.0, ..self.clone() } == Self { seconds: 0.0, ..other.clone() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub algorithm: String,
    pub target_fraction: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub axis_value: Option<f64>,
    pub metric: Metric,
    pub n: usize,
    pub mean: f64,
    pub stderr: f64,
}

/// Mean and standard error (sample standard deviation over `sqrt(n)`).
pub fn mean_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Groups by (algorithm, fraction, axis value) in record order.
pub fn aggregate(records: &[ResultRecord]) -> Vec<AggregateRow> {
    let mut groups: Vec<(AggregateRow, Vec<f64>)> = Vec::new();
    for r in records {
        let found = groups.iter_mut().find(|(g, _)| {
            g.algorithm == r.algorithm && g.target_fraction == r.target_fraction && g.axis_value == r.axis_value
        });
        match found {
            Some((_, vals)) => vals.push(r.value),
            None => groups.push((
                AggregateRow {
                    algorithm: r.algorithm.clone(),
                    target_fraction: r.target_fraction,
                    axis_value: r.axis_value,
                    metric: r.metric,
                    n: 0,
                    mean: 0.0,
                    stderr: 0.0,
                },
                vec![r.value],
            )),
        }
    }
    groups
        .into_iter()
        .map(|(mut g, vals)| {
            let (mean, stderr) = mean_stderr(&vals);
            g.n = vals.len();
            g.mean = mean;
            g.stderr = stderr;
            g
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    RhoS,
    RhoT,
    /// Sets `rho_s = v`, `rho_t = -v` and enables the target agreement bonus.
    RhoJoint,
    GammaMax,
    TargetFraction,
}

impl std::str::FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        serde_json::from_value(serde_json::Value::String(s.replace('-', "_")))
            .map_err(|_| Error::config("axis", format!("unknown sweep axis {s:?}")))
    }
}

impl SweepAxis {
    /// Applies one grid value to every gap-minimizing algorithm (or to the
    /// fraction list).
    pub fn apply(self, cfg: &ExperimentConfig, v: f64) -> ExperimentConfig {
        let mut cfg = cfg.clone();
        if self == Self::TargetFraction {
            cfg.target_fractions = vec![v];
            return cfg;
        }
        for alg in &mut cfg.algorithms {
            let Some(p) = alg.gap_params_mut() else { continue };
            match self {
                Self::RhoS => p.rho_s = Some(v),
                Self::RhoT => p.rho_t = Some(v),
                Self::RhoJoint => {
                    p.rho_s = Some(v);
                    p.rho_t = Some(-v);
                    p.agreement_bonus = Some(true);
                }
                Self::GammaMax => p.gamma_max = Some(v),
                Self::TargetFraction => unreachable!(),
            }
        }
        cfg
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunOutput {
    pub records: Vec<ResultRecord>,
    pub aggregates: Vec<AggregateRow>,
}

/// One cell's split of a problem: source, target train, target test.
#[derive(Debug, Clone, PartialEq)]
pub struct Split {
    pub source: Sample,
    pub train: Sample,
    pub test: Sample,
}

/// Shuffles the target with `seed` and keeps `fraction` of it for training.
pub fn split_problem(problem: &TransferProblem, fraction: f64, seed: u64, standardize: bool) -> Result<Split> {
    let n = problem.target.len();
    let n_train = train_size(fraction, n);
    if n_train >= n {
        return Err(Error::param("target_fraction", format!("{fraction} leaves an empty test set")));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed ^ SPLIT_SALT));
    let train = problem.target.select(&idx[..n_train])?;
    let test = problem.target.select(&idx[n_train..])?;
    let source = problem.source()?.clone();
    if !standardize {
        return Ok(Split { source, train, test });
    }
    let st = Standardizer::fit(&Sample::concat(&[&source, &train])?)?;
    Ok(Split {
        source: st.transform(&source)?,
        train: st.transform(&train)?,
        test: st.transform(&test)?,
    })
}

/// Trains one algorithm on a split.
pub fn run_algorithm(alg: &AlgorithmSpec, split: &Split, cfg: &BoostConfig) -> Result<BoostOutput> {
    match alg {
        AlgorithmSpec::GapBoost(_) => gap_boost(&split.source, &split.train, cfg),
        AlgorithmSpec::GapBoostR(_) => gap_boost_r(&split.source, &split.train, cfg),
        other => run_baseline(other.baseline().expect("baseline"), &split.source, &split.train, cfg),
    }
}

fn hyperparameters(alg: &AlgorithmSpec, cfg: &BoostConfig) -> BTreeMap<String, f64> {
    let mut h = BTreeMap::from([
        ("rounds".to_string(), cfg.rounds as f64),
        ("lambda".to_string(), cfg.base.lambda),
    ]);
    if alg.baseline().is_none() {
        h.insert("rho_s".into(), cfg.rho_s);
        h.insert("rho_t".into(), cfg.rho_t);
        h.insert("gamma_max".into(), cfg.gamma_max);
        h.insert("agreement_bonus".into(), f64::from(u8::from(cfg.agreement_bonus)));
    }
    h
}

struct Cell {
    axis_value: Option<f64>,
    fraction_idx: usize,
    algorithm_idx: usize,
    seed_idx: usize,
    cfg_idx: usize,
}

impl Cell {
    fn key(&self) -> (f64, usize, usize, usize) {
        (self.axis_value.unwrap_or(0.0), self.fraction_idx, self.algorithm_idx, self.seed_idx)
    }
}

fn run_cells(configs: &[ExperimentConfig], axis: Option<(SweepAxis, &[f64])>, jobs: Option<usize>) -> Result<RunOutput> {
    for (i, c) in configs.iter().enumerate() {
        c.validate().map_err(|e| match (e, axis) {
            (Error::Config { path, reason }, Some((_, grid))) => Error::config(format!("grid[{}] {path}", i), format!("{reason} (value {})", grid[i])),
            (e, _) => e,
        })?;
    }
    let mut cells = Vec::new();
    for (ci, c) in configs.iter().enumerate() {
        for fi in 0..c.target_fractions.len() {
            for ai in 0..c.algorithms.len() {
                for si in 0..c.seeds.len() {
                    cells.push(Cell {
                        axis_value: axis.map(|(_, g)| g[ci]),
                        fraction_idx: fi,
                        algorithm_idx: ai,
                        seed_idx: si,
                        cfg_idx: ci,
                    });
                }
            }
        }
    }
    let work = || -> Result<Vec<(Cell, ResultRecord)>> {
        cells
            .into_par_iter()
            .map(|cell| {
                let c = &configs[cell.cfg_idx];
                let seed = c.seeds[cell.seed_idx];
                let fraction = c.target_fractions[cell.fraction_idx];
                let alg = &c.algorithms[cell.algorithm_idx];
                let problem = c.problem.generate(seed)?;
                let split = split_problem(&problem, fraction, seed, c.standardize)?;
                let bcfg = c.boost_config(alg, c.problem.mode(), split.train.len())?;
                let start = Instant::now();
                let out = run_algorithm(alg, &split, &bcfg)?;
                let value = out.ensemble.score(&split.test)?;
                let seconds = start.elapsed().as_secs_f64();
                let record = ResultRecord {
                    algorithm: alg.label().into(),
                    problem: c.name.clone(),
                    seed,
                    target_fraction: fraction,
                    axis: axis.map(|(a, _)| a),
                    axis_value: cell.axis_value,
                    hyperparameters: hyperparameters(alg, &bcfg),
                    metric: c.metric(),
                    value,
                    seconds,
                };
                Ok((cell, record))
            })
            .collect()
    };
    let mut done = match jobs {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::config("jobs", e.to_string()))?
            .install(work)?,
        None => work()?,
    };
    done.sort_by(|(a, _), (b, _)| {
        let (ka, kb) = (a.key(), b.key());
        ka.0.total_cmp(&kb.0).then(ka.1.cmp(&kb.1)).then(ka.2.cmp(&kb.2)).then(ka.3.cmp(&kb.3))
    });
    let records: Vec<ResultRecord> = done.into_iter().map(|(_, r)| r).collect();
    let aggregates = aggregate(&records);
    Ok(RunOutput { records, aggregates })
}

/// Runs every (fraction, algorithm, seed) cell; records are ordered by that
/// key regardless of scheduling.
pub fn run_experiment(cfg: &ExperimentConfig, jobs: Option<usize>) -> Result<RunOutput> {
    run_cells(std::slice::from_ref(cfg), None, jobs)
}

pub fn sweep(cfg: &ExperimentConfig, axis: SweepAxis, grid: &[f64], jobs: Option<usize>) -> Result<RunOutput> {
    if grid.is_empty() {
        return Err(Error::config("grid", "must be nonempty"));
    }
    if grid.iter().any(|v| !v.is_finite()) {
        return Err(Error::config("grid", "values must be finite"));
    }
    let configs: Vec<ExperimentConfig> = grid.iter().map(|v| axis.apply(cfg, *v)).collect();
    run_cells(&configs, Some((axis, grid)), jobs)
}

fn opt(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

/// Long-format CSV, one row per record.
pub fn write_records_csv(records: &[ResultRecord], path: impl AsRef<Path>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "algorithm",
        "problem",
        "seed",
        "target_fraction",
        "axis",
        "axis_value",
        "metric",
        "value",
        "seconds",
        "hyperparameters",
    ])?;
    for r in records {
        w.write_record([
            r.algorithm.clone(),
            r.problem.clone(),
            r.seed.to_string(),
            r.target_fraction.to_string(),
            r.axis.map(|a| serde_json::to_value(a).map(|v| v.as_str().unwrap_or_default().to_string())).transpose()?.unwrap_or_default(),
            opt(r.axis_value),
            r.metric.name().into(),
            r.value.to_string(),
            r.seconds.to_string(),
            serde_json::to_string(&r.hyperparameters)?,
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_aggregate_csv(rows: &[AggregateRow], path: impl AsRef<Path>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["algorithm", "target_fraction", "axis_value", "metric", "n", "mean", "stderr"])?;
    for r in rows {
        w.write_record([
            r.algorithm.clone(),
            r.target_fraction.to_string(),
            opt(r.axis_value),
            r.metric.name().into(),
            r.n.to_string(),
            r.mean.to_string(),
            r.stderr.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub config: ExperimentConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub axis: Option<SweepAxis>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub grid: Vec<f64>,
    pub n_records: usize,
}

/// Writes `records.csv`, `aggregate.csv` and `manifest.json` into `dir`.
pub fn write_outputs(dir: impl AsRef<Path>, out: &RunOutput, manifest: &Manifest) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)?;
    write_records_csv(&out.records, dir.join("records.csv"))?;
    write_aggregate_csv(&out.aggregates, dir.join("aggregate.csv"))?;
    std::fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(manifest)?)?;
    Ok(())
}
