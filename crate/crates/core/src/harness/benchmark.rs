use std::path::PathBuf;
use std::time::Instant;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::method::Method;
use super::metrics::{balanced_accuracy, mean_std};
use crate::baselines::{
    best_source_select, fit_forward_reg, fit_no_transfer, fit_rls_src_feat, BaselineModel,
};
use crate::data::{
    inject_noise, load_dataset_csv, load_predictions_csv, load_sources_csv, split_indices,
    synth_transfer_task, Dataset, SourceEnsemble, SplitCounts, SynthConfig,
};
use crate::error::{Error, Result};
use crate::math::{ColumnOrigin, DesignMatrix};
use crate::oracle::{
    check_approximation_bound, check_norm_bounds, support_count, ENUMERATION_LIMIT,
};
use crate::selector::{
    greedy_select, SearchStrategy, SelectConfig, SelectionResult, StopReason, DEFAULT_DELTA,
    DEFAULT_LAMBDA, DEFAULT_SAMPLE_COUNT,
};

/// Version tag written into every report.
pub const REPORT_SCHEMA: &str = "greedytl-report/1";

/// Where the per-repetition train/test data comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TaskSpec {
    /// Fresh synthetic task per repetition; its `seed` is replaced by the
    /// repetition seed.
    Synth(SynthConfig),
    /// Stratified draws from a labeled pool. Sources come either from an
    /// affine sources CSV or from a predictions CSV row-aligned with `data`.
    Files {
        data: PathBuf,
        sources: Option<PathBuf>,
        preds: Option<PathBuf>,
        split: SplitCounts,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub methods: Vec<Method>,
    /// Selection budget for the greedy methods; `None` means unlimited.
    pub k: Option<usize>,
    pub lambda: f64,
    pub delta: f64,
    /// Candidate sample size of `greedytl59`.
    pub samples: usize,
    /// Repetition `r` uses seed `seed + r`.
    pub seed: u64,
    pub reps: usize,
    /// Standard-normal columns appended to train and test features.
    pub noise_dims: usize,
    /// Compare GreedyTL against exhaustive search when `k` is set and the
    /// enumeration is small enough.
    pub bound_check: bool,
    pub task: TaskSpec,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            methods: Method::ALL.to_vec(),
            k: None,
            lambda: DEFAULT_LAMBDA,
            delta: DEFAULT_DELTA,
            samples: DEFAULT_SAMPLE_COUNT,
            seed: 0,
            reps: 10,
            noise_dims: 0,
            bound_check: false,
            task: TaskSpec::Synth(SynthConfig::default()),
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.methods.is_empty() {
            return Err(Error::Parameter("no methods requested".into()));
        }
        if self.reps == 0 {
            return Err(Error::Parameter("reps must be at least 1".into()));
        }
        if self.k == Some(0) {
            return Err(Error::Parameter("k must be at least 1".into()));
        }
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(Error::Parameter(format!(
                "lambda must be positive, got {}",
                self.lambda
            )));
        }
        if !(self.delta >= 0.0 && self.delta.is_finite()) {
            return Err(Error::Parameter(format!(
                "delta must be non-negative, got {}",
                self.delta
            )));
        }
        if self.samples == 0 {
            return Err(Error::Parameter("samples must be at least 1".into()));
        }
        if let TaskSpec::Files {
            sources: Some(_),
            preds: Some(_),
            ..
        } = self.task
        {
            return Err(Error::Parameter(
                "give either a sources file or a predictions file, not both".into(),
            ));
        }
        Ok(())
    }

    pub fn rep_seeds(&self) -> Vec<u64> {
        (0..self.reps as u64)
            .map(|r| self.seed.wrapping_add(r))
            .collect()
    }

    fn select_config(&self, strategy: SearchStrategy) -> SelectConfig {
        SelectConfig {
            k: self.k.unwrap_or(usize::MAX),
            lambda: self.lambda,
            delta: self.delta,
            strategy,
        }
    }
}

/// Greedy-vs-exhaustive comparison for one repetition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundDigest {
    pub gamma: f64,
    pub epsilon: f64,
    pub opt_value: f64,
    pub greedy_value: f64,
    pub bound_rhs: f64,
    pub condition_met: bool,
    pub holds: bool,
}

/// One method on one repetition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunCell {
    pub rep: usize,
    pub seed: u64,
    pub accuracy: Option<f64>,
    pub error: Option<String>,
    pub fit_seconds: f64,
    /// Selected columns in selection order, for sparse methods.
    pub support: Option<Vec<ColumnOrigin>>,
    pub stop_reason: Option<StopReason>,
    /// `λ‖w‖² + R̂(T∘h)` on the training set.
    pub objective: Option<f64>,
    pub norm_bound_holds: Option<bool>,
    /// Upper bound on the best source-subset risk plus `λ`.
    pub source_bound: Option<f64>,
    pub tau_inf: Option<f64>,
    pub bound: Option<BoundDigest>,
}

impl RunCell {
    fn new(rep: usize, seed: u64) -> Self {
        Self {
            rep,
            seed,
            accuracy: None,
            error: None,
            fit_seconds: 0.0,
            support: None,
            stop_reason: None,
            objective: None,
            norm_bound_holds: None,
            source_bound: None,
            tau_inf: None,
            bound: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: Method,
    /// Set for methods that select using test labels.
    pub non_comparable: bool,
    pub mean: Option<f64>,
    pub std: Option<f64>,
    pub completed: usize,
    pub failed: usize,
    pub mean_fit_seconds: f64,
    pub runs: Vec<RunCell>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Software {
    pub name: String,
    pub version: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema: String,
    pub software: Software,
    pub config: ExperimentConfig,
    pub seeds: Vec<u64>,
    pub methods: Vec<MethodSummary>,
}

impl Report {
    pub fn method(&self, method: Method) -> Option<&MethodSummary> {
        self.methods.iter().find(|s| s.method == method)
    }

    /// Copy with every wall-clock field zeroed, for reproducibility checks.
    pub fn without_timings(&self) -> Report {
        let mut r = self.clone();
        for s in &mut r.methods {
            s.mean_fit_seconds = 0.0;
            for c in &mut s.runs {
                c.fit_seconds = 0.0;
            }
        }
        r
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// One line per method: `method,mean,std,completed,failed,mean_fit_seconds,non_comparable`.
    pub fn summary_csv(&self) -> String {
        let mut out =
            String::from("method,mean,std,completed,failed,mean_fit_seconds,non_comparable\n");
        let opt = |v: Option<f64>| v.map_or(String::new(), |v| v.to_string());
        for s in &self.methods {
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                s.method,
                opt(s.mean),
                opt(s.std),
                s.completed,
                s.failed,
                s.mean_fit_seconds,
                s.non_comparable
            ));
        }
        out
    }
}

/// Raw train/test blocks of one repetition.
struct RepData {
    train_x: DMatrix<f64>,
    train_h: DMatrix<f64>,
    train_y: Vec<f64>,
    test_x: DMatrix<f64>,
    test_h: DMatrix<f64>,
    test_y: Vec<f64>,
}

enum SourceInput {
    None,
    Ensemble(SourceEnsemble),
    Preds(DMatrix<f64>),
}

/// Task inputs loaded once and shared by all repetitions.
enum Prepared {
    Synth(SynthConfig),
    Files {
        pool: Dataset,
        sources: SourceInput,
        split: SplitCounts,
    },
}

fn prepare(task: &TaskSpec) -> Result<Prepared> {
    match task {
        TaskSpec::Synth(cfg) => Ok(Prepared::Synth(*cfg)),
        TaskSpec::Files {
            data,
            sources,
            preds,
            split,
        } => {
            let pool = load_dataset_csv(data)?;
            let sources = match (sources, preds) {
                (Some(path), None) => SourceInput::Ensemble(load_sources_csv(path)?),
                (None, Some(path)) => {
                    let p = load_predictions_csv(path)?;
                    if p.m() != pool.m() {
                        return Err(Error::Dimension(format!(
                            "predictions file has {} rows, data has {}",
                            p.m(),
                            pool.m()
                        )));
                    }
                    SourceInput::Preds(p.x)
                }
                _ => SourceInput::None,
            };
            Ok(Prepared::Files {
                pool,
                sources,
                split: *split,
            })
        }
    }
}

fn noise_seeds(seed: u64) -> (u64, u64) {
    let base = seed.wrapping_add(0x9E37_79B9_7F4A_7C15);
    (base, base.wrapping_add(1))
}

fn build_rep(prepared: &Prepared, seed: u64, noise_dims: usize) -> Result<RepData> {
    let (train, test, train_h, test_h) = match prepared {
        Prepared::Synth(cfg) => {
            let task = synth_transfer_task(&SynthConfig { seed, ..*cfg })?;
            let train_h = task.sources.apply(&task.train.x)?;
            let test_h = task.sources.apply(&task.test.x)?;
            (task.train, task.test, train_h, test_h)
        }
        Prepared::Files {
            pool,
            sources,
            split,
        } => {
            let (tr, te) = split_indices(&pool.y, *split, seed)?;
            let train = pool.rows(&tr);
            let test = pool.rows(&te);
            let (train_h, test_h) = match sources {
                SourceInput::None => (DMatrix::zeros(tr.len(), 0), DMatrix::zeros(te.len(), 0)),
                SourceInput::Ensemble(s) => (s.apply(&train.x)?, s.apply(&test.x)?),
                SourceInput::Preds(p) => (p.select_rows(&tr), p.select_rows(&te)),
            };
            (train, test, train_h, test_h)
        }
    };
    let (s_train, s_test) = noise_seeds(seed);
    let train = inject_noise(&train, noise_dims, s_train);
    let test = inject_noise(&test, noise_dims, s_test);
    Ok(RepData {
        train_x: train.x,
        train_h,
        train_y: train.y,
        test_x: test.x,
        test_h,
        test_y: test.y,
    })
}

fn selection_digest(
    cell: &mut RunCell,
    sel: &SelectionResult,
    design: &DesignMatrix,
    train_h: &DMatrix<f64>,
) -> Result<()> {
    cell.support = Some(sel.support.iter().map(|&j| design.origin()[j]).collect());
    cell.stop_reason = Some(sel.stop_reason);
    let diag = check_norm_bounds(sel, design, train_h)?;
    cell.objective = Some(diag.objective);
    cell.norm_bound_holds = Some(diag.norm_bound_holds);
    cell.source_bound = diag.source_bound;
    cell.tau_inf = Some(diag.tau_inf);
    Ok(())
}

fn linear_predictions(
    design: &DesignMatrix,
    sel: &SelectionResult,
    rep: &RepData,
) -> Result<Vec<f64>> {
    let z = design.transform_raw(&rep.test_x, &rep.test_h)?;
    let mut out = vec![0.0; z.nrows()];
    for &(j, w) in sel.weights.entries() {
        for (o, v) in out.iter_mut().zip(z.column(j).iter()) {
            *o += w * v;
        }
    }
    Ok(out)
}

fn run_method(
    method: Method,
    config: &ExperimentConfig,
    rep: &RepData,
    cell: &mut RunCell,
) -> Result<Vec<f64>> {
    let assemble = || DesignMatrix::assemble(&rep.train_x, &rep.train_h, &rep.train_y);
    match method {
        Method::Greedytl | Method::Greedytl59 | Method::ForwardReg => {
            let start = Instant::now();
            let design = assemble()?;
            let sel = match method {
                Method::ForwardReg => {
                    let BaselineModel::ForwardReg { selection } =
                        fit_forward_reg(&design, config.k.unwrap_or(usize::MAX), config.delta)?
                    else {
                        unreachable!()
                    };
                    selection
                }
                Method::Greedytl => {
                    greedy_select(&design, &config.select_config(SearchStrategy::Full))?
                }
                _ => greedy_select(
                    &design,
                    &config.select_config(SearchStrategy::Randomized {
                        sample_count: config.samples,
                        seed: cell.seed,
                    }),
                )?,
            };
            cell.fit_seconds = start.elapsed().as_secs_f64();
            selection_digest(cell, &sel, &design, &rep.train_h)?;
            if method == Method::Greedytl && config.bound_check {
                if let Some(k) = config.k {
                    if support_count(design.p(), k) <= ENUMERATION_LIMIT {
                        let b = check_approximation_bound(&design, k, config.lambda)?;
                        cell.bound = Some(BoundDigest {
                            gamma: b.gamma,
                            epsilon: b.epsilon,
                            opt_value: b.opt_value,
                            greedy_value: b.greedy_value,
                            bound_rhs: b.bound_rhs,
                            condition_met: b.condition_met,
                            holds: b.holds,
                        });
                    }
                }
            }
            linear_predictions(&design, &sel, rep)
        }
        Method::RlsSrcFeat => {
            let start = Instant::now();
            let design = assemble()?;
            let model = fit_rls_src_feat(&design, config.lambda)?;
            cell.fit_seconds = start.elapsed().as_secs_f64();
            let z = design.transform_raw(&rep.test_x, &rep.test_h)?;
            model.predict(&rep.test_x, &z, &rep.test_h)
        }
        Method::NoTransfer => {
            let start = Instant::now();
            let model = fit_no_transfer(&rep.train_x, &rep.train_y, config.lambda)?;
            cell.fit_seconds = start.elapsed().as_secs_f64();
            model.predict(&rep.test_x, &DMatrix::zeros(0, 0), &rep.test_h)
        }
        Method::AverageKt => {
            BaselineModel::AverageKt.predict(&rep.test_x, &DMatrix::zeros(0, 0), &rep.test_h)
        }
        Method::BestSource => {
            let start = Instant::now();
            let model = best_source_select(&rep.test_h, &rep.test_y)?;
            cell.fit_seconds = start.elapsed().as_secs_f64();
            if let BaselineModel::BestSource { index, .. } = model {
                cell.support = Some(vec![ColumnOrigin::Source(index)]);
            }
            model.predict(&rep.test_x, &DMatrix::zeros(0, 0), &rep.test_h)
        }
    }
}

fn run_rep(
    config: &ExperimentConfig,
    prepared: &Prepared,
    rep: usize,
    seed: u64,
) -> Result<Vec<RunCell>> {
    let data = build_rep(prepared, seed, config.noise_dims)?;
    Ok(config
        .methods
        .iter()
        .map(|&method| {
            let mut cell = RunCell::new(rep, seed);
            match run_method(method, config, &data, &mut cell)
                .and_then(|preds| balanced_accuracy(&preds, &data.test_y))
            {
                Ok(acc) => cell.accuracy = Some(acc),
                Err(e) => cell.error = Some(e.to_string()),
            }
            cell
        })
        .collect())
}

/// Runs every method on every repetition. Repetitions run in parallel;
/// a failing method only marks its own cell.
pub fn run_benchmark(config: &ExperimentConfig) -> Result<Report> {
    config.validate()?;
    let prepared = prepare(&config.task)?;
    let seeds = config.rep_seeds();
    let per_rep: Vec<Vec<RunCell>> = seeds
        .par_iter()
        .enumerate()
        .map(|(rep, &seed)| run_rep(config, &prepared, rep, seed))
        .collect::<Result<_>>()?;

    let methods = config
        .methods
        .iter()
        .enumerate()
        .map(|(i, &method)| {
            let runs: Vec<RunCell> = per_rep.iter().map(|cells| cells[i].clone()).collect();
            let accs: Vec<f64> = runs.iter().filter_map(|c| c.accuracy).collect();
            let stats = mean_std(&accs);
            MethodSummary {
                method,
                non_comparable: method.non_comparable(),
                mean: stats.map(|s| s.0),
                std: stats.map(|s| s.1),
                completed: accs.len(),
                failed: runs.len() - accs.len(),
                mean_fit_seconds: runs.iter().map(|c| c.fit_seconds).sum::<f64>()
                    / runs.len() as f64,
                runs,
            }
        })
        .collect();

    Ok(Report {
        schema: REPORT_SCHEMA.into(),
        software: Software {
            name: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
        },
        config: config.clone(),
        seeds,
        methods,
    })
}
