//! Held-out predictive evaluation across folds and models.
//!
//! For every (model, fold) pair the fold's dyads are treated as missing, the
//! model is refitted, B graphs are drawn conditionally on the remaining
//! dyads, and the draws are scored against the observed graph. Jobs run on a
//! bounded rayon pool; each job seeds itself from (master seed, model, fold)
//! and results are merged in (model, fold) order, so reports do not depend
//! on the worker count.

use std::collections::{BTreeMap, HashMap};
use std::time::Instant;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::estimation::{fit, mple, EstimatorConfig, FitResult};
use crate::graph::{all_dyads, Dyad, DyadSet, Graph, GraphError, PartialGraph};
use crate::metrics::{
    betweenness_centrality, centralization_of, degree_centrality, eigenvector_centrality,
    eigenvector_centrality_from, exact_marginal_change_score, marginal_estimate, total_squared_loss,
    CentralizationKind, ConfusionMatrix, MetricRow, MetricsError, ReliabilityAccumulator,
};
use crate::rng::{derive_seed, rng_from_seed, RNG_ALGORITHM};
use crate::sampler::{sample_with, SamplerConfig};
use crate::terms::{Model, ModelError, ModelSpec};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("number of folds must be in 1..={max}, got {got}")]
    FoldCount { got: usize, max: usize },
    #[error("subset size must be in 1..={max}, got {got}")]
    SubsetSize { got: usize, max: usize },
    #[error("invalid partition: {0}")]
    Partition(String),
    #[error("at least one draw is required")]
    NoDraws,
    #[error("no models to evaluate")]
    NoModels,
    #[error("every fold failed for model `{model}`; first error: {first}")]
    AllFoldsFailed { model: String, first: String },
    #[error("could not build worker pool: {0}")]
    Pool(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Strategy {
    LeaveOneOut,
    /// `folds: None` means n - 1 folds.
    LeaveMOut { folds: Option<usize> },
    NodeHeldOut,
    Explicit { folds: Vec<DyadSet> },
}

impl Strategy {
    pub fn label(&self) -> &'static str {
        match self {
            Strategy::LeaveOneOut => "leave-1-out",
            Strategy::LeaveMOut { .. } => "leave-M-out",
            Strategy::NodeHeldOut => "node",
            Strategy::Explicit { .. } => "explicit",
        }
    }

    /// How many folds hold out each evaluated dyad.
    pub fn multiplicity(&self) -> usize {
        match self {
            Strategy::NodeHeldOut => 2,
            _ => 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub strategy: Strategy,
    pub seed: u64,
    pub n: usize,
    pub folds: Vec<DyadSet>,
    /// Evaluation restricted to these dyads, when set.
    pub subset: Option<DyadSet>,
}

impl FoldPlan {
    pub fn len(&self) -> usize {
        self.folds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.folds.is_empty()
    }

    /// Checks disjointness (leave-out) or the two-fold cover (node-held-out).
    pub fn validate(&self) -> Result<(), HarnessError> {
        let nd = all_dyads(self.n).count();
        let mut hits = vec![0usize; nd];
        for f in &self.folds {
            f.check(self.n)?;
            if f.is_empty() {
                return Err(HarnessError::Partition("empty fold".into()));
            }
            for d in f {
                hits[d.index(self.n)] += 1;
            }
        }
        let allowed = self.subset.as_ref().map(|s| s.mask(self.n));
        let k = self.strategy.multiplicity();
        for (idx, &h) in hits.iter().enumerate() {
            let in_subset = allowed.as_ref().is_none_or(|m| m[idx]);
            if h > k || (!in_subset && h > 0) {
                return Err(HarnessError::Partition(format!(
                    "dyad {} is held out {h} times",
                    Dyad::from_index(idx, self.n)?
                )));
            }
        }
        Ok(())
    }
}

fn chunk(dyads: Vec<Dyad>, m: usize) -> Vec<DyadSet> {
    let total = dyads.len();
    let mut out = Vec::with_capacity(m);
    let mut it = dyads.into_iter();
    for k in 0..m {
        let size = total / m + usize::from(k < total % m);
        out.push(DyadSet::new(it.by_ref().take(size).collect()).expect("distinct dyads"));
    }
    out
}

/// Builds the fold plan. `subset_size` draws D_s uniformly at random.
pub fn build_partition(
    n: usize,
    strategy: &Strategy,
    seed: u64,
    subset_size: Option<usize>,
) -> Result<FoldPlan, HarnessError> {
    let nd = all_dyads(n).count();
    let subset = match subset_size {
        None => None,
        Some(s) if s == 0 || s > nd => return Err(HarnessError::SubsetSize { got: s, max: nd }),
        Some(s) => {
            let mut all: Vec<Dyad> = all_dyads(n).collect();
            all.shuffle(&mut rng_from_seed(derive_seed(seed, &[1])));
            all.truncate(s);
            all.sort_by_key(|d| d.index(n));
            Some(DyadSet::new(all)?)
        }
    };
    let pool: Vec<Dyad> = match &subset {
        Some(s) => s.as_slice().to_vec(),
        None => all_dyads(n).collect(),
    };
    let in_pool = |d: &Dyad| subset.as_ref().is_none_or(|s| s.as_slice().contains(d));
    let shuffled = |m: usize| -> Result<Vec<DyadSet>, HarnessError> {
        if m == 0 || m > pool.len() {
            return Err(HarnessError::FoldCount { got: m, max: pool.len() });
        }
        let mut d = pool.clone();
        d.shuffle(&mut rng_from_seed(derive_seed(seed, &[0])));
        Ok(chunk(d, m))
    };
    let folds = match strategy {
        Strategy::LeaveOneOut => shuffled(pool.len())?,
        Strategy::LeaveMOut { folds } => shuffled(folds.unwrap_or(n.saturating_sub(1)))?,
        Strategy::NodeHeldOut => (0..n)
            .map(|v| DyadSet::new(DyadSet::incident(v, n).iter().copied().filter(in_pool).collect()))
            .collect::<Result<Vec<_>, _>>()?
            .into_iter()
            .filter(|f| !f.is_empty())
            .collect(),
        Strategy::Explicit { folds } => folds.clone(),
    };
    let plan = FoldPlan {
        strategy: strategy.clone(),
        seed,
        n,
        folds,
        subset,
    };
    plan.validate()?;
    Ok(plan)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HopeConfig {
    /// Conditional draws per fold (B).
    pub draws: usize,
    pub seed: u64,
    /// Worker threads; `None` uses all available cores.
    pub workers: Option<usize>,
    /// Estimator settings for fold fits (and the full-data fit).
    pub estimator: EstimatorConfig,
    /// Sampler settings for the conditional draws; the seed is derived per fold.
    pub sampler: SamplerConfig,
    /// Start each fold fit at the full-data MPLE.
    pub warm_start: bool,
    /// Under leave-1-out with a dyadic independence model, use exact
    /// change-score marginals for the marginal estimates.
    pub exact_loo_marginals: bool,
    /// Compute node- and graph-level metrics.
    pub structural_metrics: bool,
    /// Fit every model to the full graph for AIC and BIC.
    pub full_fit: bool,
}

impl Default for HopeConfig {
    fn default() -> Self {
        HopeConfig {
            draws: 500,
            seed: 1,
            workers: None,
            estimator: EstimatorConfig {
                compute_loglik: false,
                ..EstimatorConfig::default()
            },
            sampler: SamplerConfig::default(),
            warm_start: true,
            exact_loo_marginals: false,
            structural_metrics: true,
            full_fit: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NamedModel {
    pub name: String,
    pub spec: ModelSpec,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DyadPrediction {
    pub i: usize,
    pub j: usize,
    pub observed: bool,
    pub yhat: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FoldMetrics {
    pub edge_acc: Option<f64>,
    pub null_acc: Option<f64>,
    pub overall_acc: Option<f64>,
    pub tsl: f64,
    pub mse_degree: Option<f64>,
    pub mse_betweenness: Option<f64>,
    pub mse_eigen: Option<f64>,
    pub rmse_deg_centralization: Option<f64>,
    pub rmse_betw_centralization: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FoldReport {
    pub fold: usize,
    pub held_out: usize,
    pub seed: u64,
    pub theta: Option<Vec<f64>>,
    pub iterations: Option<usize>,
    pub gradient_norm: Option<f64>,
    pub warnings: Vec<String>,
    pub error: Option<String>,
    pub confusion: ConfusionMatrix,
    pub metrics: Option<FoldMetrics>,
    pub predictions: Vec<DyadPrediction>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelReport {
    pub name: String,
    pub spec: String,
    pub coef_names: Vec<String>,
    pub full_fit: Option<FitResult>,
    pub full_fit_error: Option<String>,
    pub warm_start: Option<Vec<f64>>,
    pub row: MetricRow,
    pub confusion: ConfusionMatrix,
    pub failed_folds: usize,
    pub folds: Vec<FoldReport>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub schema_version: u32,
    pub master_seed: u64,
    pub draws: usize,
    pub rng: String,
    pub sampler: SamplerConfig,
    pub estimator: EstimatorConfig,
    pub warm_start: String,
    pub exact_loo_marginals: bool,
    pub partition_note: String,
    pub betweenness_scale: String,
    pub tsl_divisor: f64,
    pub excluded_folds: usize,
}

/// Wall-clock measurements; excluded from reproducibility comparisons.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub started_unix: u64,
    pub workers: usize,
    pub partition_secs: f64,
    pub fit_secs_mean: f64,
    pub combine_secs: f64,
    pub total_secs: f64,
    /// partition + mean fold time x folds / workers + combination
    pub predicted_secs: f64,
    pub predicted_serial_secs: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HopeReport {
    pub strategy: String,
    pub plan: FoldPlan,
    pub models: Vec<ModelReport>,
    pub provenance: Provenance,
    pub timing: Timing,
}

impl HopeReport {
    /// The report with wall-clock fields cleared, for reproducibility checks.
    pub fn without_timing(&self) -> HopeReport {
        HopeReport {
            timing: Timing::default(),
            ..self.clone()
        }
    }
}

/// Predicted HOPE wall time: partition + fit x folds / cores + combination.
pub fn runtime_model(cores: usize, folds: usize, fit_secs: f64, partition_secs: f64, combine_secs: f64) -> f64 {
    partition_secs + fit_secs * folds as f64 / cores.max(1) as f64 + combine_secs
}

/// Scores computed on one simulated graph.
#[derive(Clone, Debug)]
struct Structural {
    degree: Vec<f64>,
    betweenness: Vec<f64>,
    eigen: Vec<f64>,
    deg_cz: Option<f64>,
    betw_cz: Option<f64>,
}

impl Structural {
    fn of(g: &Graph, eigen_start: Option<&[f64]>) -> Self {
        let degree = degree_centrality(g);
        let betweenness = betweenness_centrality(g);
        let eigen = match eigen_start {
            Some(s) => eigenvector_centrality_from(g, Some(s)).scores,
            None => eigenvector_centrality(g).scores,
        };
        Structural {
            deg_cz: centralization_of(&degree, CentralizationKind::Degree),
            betw_cz: centralization_of(&betweenness, CentralizationKind::Betweenness),
            degree,
            betweenness,
            eigen,
        }
    }
}

/// Per-fold accumulation, mergeable in fold order.
#[derive(Clone, Debug)]
struct FoldTally {
    confusion: ConfusionMatrix,
    yhat: BTreeMap<Dyad, f64>,
    degree: ReliabilityAccumulator,
    betweenness: ReliabilityAccumulator,
    eigen: ReliabilityAccumulator,
    deg_cz_sq: f64,
    betw_cz_sq: f64,
    draws: usize,
}

struct Job<'a> {
    graph: &'a Graph,
    model: &'a Model,
    fold: &'a DyadSet,
    observed: &'a Structural,
    cfg: &'a HopeConfig,
    start: Option<&'a [f64]>,
    exact_marginals: bool,
    seed: u64,
}

impl Job<'_> {
    fn run(&self) -> Result<(FitResult, FoldTally), String> {
        let pg = PartialGraph::new(self.graph, self.fold.clone()).map_err(|e| e.to_string())?;
        let mut est = self.cfg.estimator.clone();
        est.seed = derive_seed(self.seed, &[0]);
        est.compute_loglik = false;
        let fitted = fit(&pg, self.model, &est, self.start).map_err(|e| e.to_string())?;
        let theta = fitted.theta();
        let mut samp = self.cfg.sampler.clone();
        samp.seed = derive_seed(self.seed, &[1]);
        let held: Vec<Dyad> = self.fold.as_slice().to_vec();
        let draws = sample_with(&pg, &theta, self.model, self.cfg.draws, &samp, |c| {
            let g = c.graph();
            let states: Vec<bool> = held.iter().map(|d| g.has_dyad(*d)).collect();
            (states, pg.agrees_with(g))
        })
        .map_err(|e| e.to_string())?;
        if draws.iter().any(|(_, ok)| !ok) {
            return Err("a conditional draw changed an observed dyad".into());
        }

        let obs = self.observed;
        let mut tally = FoldTally {
            confusion: ConfusionMatrix::default(),
            yhat: BTreeMap::new(),
            degree: ReliabilityAccumulator::new(obs.degree.clone()),
            betweenness: ReliabilityAccumulator::new(obs.betweenness.clone()),
            eigen: ReliabilityAccumulator::new(obs.eigen.clone()),
            deg_cz_sq: 0.0,
            betw_cz_sq: 0.0,
            draws: draws.len(),
        };
        let mut ones = vec![0usize; held.len()];
        let mut cache: HashMap<Vec<bool>, Structural> = HashMap::new();
        for (states, _) in &draws {
            for (k, d) in held.iter().enumerate() {
                tally.confusion.record(self.graph.has_dyad(*d), states[k]);
                ones[k] += usize::from(states[k]);
            }
            if self.cfg.structural_metrics {
                let s = cache.entry(states.clone()).or_insert_with(|| {
                    let mut g = pg.base().clone();
                    for (d, &on) in held.iter().zip(states) {
                        g.set_edge(*d, on);
                    }
                    Structural::of(&g, Some(&obs.eigen))
                });
                tally.degree.add(&s.degree).map_err(|e| e.to_string())?;
                tally.betweenness.add(&s.betweenness).map_err(|e| e.to_string())?;
                tally.eigen.add(&s.eigen).map_err(|e| e.to_string())?;
                if let (Some(o), Some(v)) = (obs.deg_cz, s.deg_cz) {
                    tally.deg_cz_sq += (o - v) * (o - v);
                }
                if let (Some(o), Some(v)) = (obs.betw_cz, s.betw_cz) {
                    tally.betw_cz_sq += (o - v) * (o - v);
                }
            }
        }
        for (k, d) in held.iter().enumerate() {
            let p = if self.exact_marginals {
                exact_marginal_change_score(pg.base(), *d, &theta, self.model)
            } else {
                marginal_estimate(ones[k], draws.len())
            };
            tally.yhat.insert(*d, p);
        }
        Ok((fitted, tally))
    }
}

fn fold_metrics(graph: &Graph, tally: &FoldTally, structural: bool, n: usize) -> FoldMetrics {
    let acc = tally.confusion.accuracy();
    let tsl = tally
        .yhat
        .iter()
        .map(|(d, p)| {
            let y = if graph.has_dyad(*d) { 1.0 } else { 0.0 };
            (p - y) * (p - y)
        })
        .sum();
    let b = tally.draws as f64;
    let mse = |a: &ReliabilityAccumulator| structural.then(|| a.finish().ok().map(|r| r.mse)).flatten();
    let rmse = |sq: f64| (structural && n >= 3).then(|| (sq / b).sqrt());
    FoldMetrics {
        edge_acc: acc.edge,
        null_acc: acc.null,
        overall_acc: acc.overall,
        tsl,
        mse_degree: mse(&tally.degree),
        mse_betweenness: mse(&tally.betweenness),
        mse_eigen: mse(&tally.eigen),
        rmse_deg_centralization: rmse(tally.deg_cz_sq),
        rmse_betw_centralization: rmse(tally.betw_cz_sq),
    }
}

fn now_unix() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

/// Runs HOPE for every model over the plan's folds.
pub fn run_hope(
    graph: &Graph,
    models: &[NamedModel],
    plan: &FoldPlan,
    cfg: &HopeConfig,
) -> Result<HopeReport, HarnessError> {
    let t0 = Instant::now();
    let started_unix = now_unix();
    if cfg.draws == 0 {
        return Err(HarnessError::NoDraws);
    }
    if models.is_empty() {
        return Err(HarnessError::NoModels);
    }
    if plan.n != graph.n() {
        return Err(HarnessError::Partition(format!(
            "plan is for {} nodes, graph has {}",
            plan.n,
            graph.n()
        )));
    }
    plan.validate()?;
    cfg.estimator
        .validate()
        .map_err(|e| HarnessError::Partition(format!("estimator configuration: {e}")))?;
    let compiled = models
        .iter()
        .map(|m| m.spec.compile(graph))
        .collect::<Result<Vec<_>, _>>()?;

    let workers = cfg.workers.unwrap_or_else(rayon::current_num_threads).max(1);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| HarnessError::Pool(e.to_string()))?;

    let observed = if cfg.structural_metrics {
        Structural::of(graph, None)
    } else {
        Structural {
            degree: Vec::new(),
            betweenness: Vec::new(),
            eigen: Vec::new(),
            deg_cz: None,
            betw_cz: None,
        }
    };
    let full = PartialGraph::fully_observed(graph);
    let partition_secs = t0.elapsed().as_secs_f64();

    let (starts, full_fits): (Vec<Option<Vec<f64>>>, Vec<Result<FitResult, String>>) = pool.install(|| {
        compiled
            .par_iter()
            .enumerate()
            .map(|(i, model)| {
                let start = cfg
                    .warm_start
                    .then(|| mple(&full, model).ok().map(|f| f.theta()))
                    .flatten();
                let full_fit = if cfg.full_fit {
                    let mut est = cfg.estimator.clone();
                    est.seed = derive_seed(cfg.seed, &[i as u64, u64::MAX]);
                    est.compute_loglik = true;
                    fit(&full, model, &est, start.as_deref()).map_err(|e| e.to_string())
                } else {
                    Err("full-data fit not requested".to_string())
                };
                (start, full_fit)
            })
            .collect::<Vec<_>>()
            .into_iter()
            .unzip()
    });

    let jobs: Vec<(usize, usize)> = (0..compiled.len())
        .flat_map(|i| (0..plan.folds.len()).map(move |m| (i, m)))
        .collect();
    let loo = matches!(plan.strategy, Strategy::LeaveOneOut);
    let fit_t0 = Instant::now();
    let results: Vec<(u64, Result<(FitResult, FoldTally), String>)> = pool.install(|| {
        jobs.par_iter()
            .map(|&(i, m)| {
                let seed = derive_seed(cfg.seed, &[i as u64, m as u64]);
                let job = Job {
                    graph,
                    model: &compiled[i],
                    fold: &plan.folds[m],
                    observed: &observed,
                    cfg,
                    start: starts[i].as_deref(),
                    exact_marginals: cfg.exact_loo_marginals
                        && loo
                        && plan.folds[m].len() == 1
                        && compiled[i].is_dyad_independent(),
                    seed,
                };
                (seed, job.run())
            })
            .collect()
    });
    let fit_secs_total = fit_t0.elapsed().as_secs_f64() * workers as f64;
    let combine_t0 = Instant::now();

    let divisor = plan.strategy.multiplicity() as f64;
    let mut model_reports = Vec::with_capacity(models.len());
    let mut excluded = 0;
    let mut results = results.into_iter();
    for (i, named) in models.iter().enumerate() {
        let mut folds = Vec::with_capacity(plan.folds.len());
        let mut confusion = ConfusionMatrix::default();
        let mut kept_folds = Vec::new();
        let mut predictions = Vec::new();
        let mut degree = ReliabilityAccumulator::new(observed.degree.clone());
        let mut betweenness = ReliabilityAccumulator::new(observed.betweenness.clone());
        let mut eigen = ReliabilityAccumulator::new(observed.eigen.clone());
        let (mut deg_sq, mut betw_sq, mut total_draws) = (0.0, 0.0, 0usize);
        let mut failed = 0;
        let mut first_error = None;
        for m in 0..plan.folds.len() {
            let (seed, outcome) = results.next().expect("one result per job");
            let held_out = plan.folds[m].len();
            match outcome {
                Ok((fitted, tally)) => {
                    confusion.merge(&tally.confusion);
                    degree.merge(&tally.degree);
                    betweenness.merge(&tally.betweenness);
                    eigen.merge(&tally.eigen);
                    deg_sq += tally.deg_cz_sq;
                    betw_sq += tally.betw_cz_sq;
                    total_draws += tally.draws;
                    let metrics = fold_metrics(graph, &tally, cfg.structural_metrics, graph.n());
                    folds.push(FoldReport {
                        fold: m,
                        held_out,
                        seed,
                        theta: Some(fitted.theta()),
                        iterations: Some(fitted.diagnostics.iterations),
                        gradient_norm: Some(fitted.diagnostics.gradient_norm),
                        warnings: fitted.diagnostics.warnings.clone(),
                        error: None,
                        confusion: tally.confusion,
                        metrics: Some(metrics),
                        predictions: tally
                            .yhat
                            .iter()
                            .map(|(d, p)| DyadPrediction {
                                i: d.i(),
                                j: d.j(),
                                observed: graph.has_dyad(*d),
                                yhat: *p,
                            })
                            .collect(),
                    });
                    kept_folds.push(plan.folds[m].clone());
                    predictions.push(tally.yhat);
                }
                Err(e) => {
                    failed += 1;
                    first_error.get_or_insert_with(|| e.clone());
                    folds.push(FoldReport {
                        fold: m,
                        held_out,
                        seed,
                        theta: None,
                        iterations: None,
                        gradient_norm: None,
                        warnings: Vec::new(),
                        error: Some(e),
                        confusion: ConfusionMatrix::default(),
                        metrics: None,
                        predictions: Vec::new(),
                    });
                }
            }
        }
        if kept_folds.is_empty() {
            return Err(HarnessError::AllFoldsFailed {
                model: named.name.clone(),
                first: first_error.unwrap_or_default(),
            });
        }
        excluded += failed;
        let loss = total_squared_loss(graph, &kept_folds, &predictions, divisor)?;
        let acc = confusion.accuracy();
        let structural = cfg.structural_metrics;
        let rel = |a: &ReliabilityAccumulator| structural.then(|| a.finish().ok()).flatten();
        let (rd, rb, re) = (rel(&degree), rel(&betweenness), rel(&eigen));
        let rmse = |sq: f64| (structural && graph.n() >= 3).then(|| (sq / total_draws as f64).sqrt());
        let row = MetricRow {
            edge_acc: acc.edge,
            null_acc: acc.null,
            overall_acc: acc.overall,
            tsl: loss.reported,
            tsl_raw: loss.raw,
            rho_degree: rd.and_then(|r| r.rho),
            rho_betweenness: rb.and_then(|r| r.rho),
            rho_eigen: re.and_then(|r| r.rho),
            rmse_betw_centralization: rmse(betw_sq),
            rmse_deg_centralization: rmse(deg_sq),
            mse_degree: rd.map(|r| r.mse),
            mse_betweenness: rb.map(|r| r.mse),
            mse_eigen: re.map(|r| r.mse),
        };
        let (full_fit, full_fit_error) = match &full_fits[i] {
            Ok(f) => (Some(f.clone()), None),
            Err(e) => (None, Some(e.clone())),
        };
        model_reports.push(ModelReport {
            name: named.name.clone(),
            spec: named.spec.to_string(),
            coef_names: compiled[i].coef_names().to_vec(),
            full_fit,
            full_fit_error,
            warm_start: starts[i].clone(),
            row,
            confusion,
            failed_folds: failed,
            folds,
        });
    }

    let combine_secs = combine_t0.elapsed().as_secs_f64();
    let fits = jobs.len().max(1) as f64;
    let fit_secs_mean = fit_secs_total / fits;
    let timing = Timing {
        started_unix,
        workers,
        partition_secs,
        fit_secs_mean,
        combine_secs,
        total_secs: t0.elapsed().as_secs_f64(),
        predicted_secs: runtime_model(workers, jobs.len(), fit_secs_mean, partition_secs, combine_secs),
        predicted_serial_secs: runtime_model(1, jobs.len(), fit_secs_mean, partition_secs, combine_secs),
    };
    Ok(HopeReport {
        strategy: plan.strategy.label().to_string(),
        plan: plan.clone(),
        models: model_reports,
        provenance: Provenance {
            schema_version: SCHEMA_VERSION,
            master_seed: cfg.seed,
            draws: cfg.draws,
            rng: RNG_ALGORITHM.to_string(),
            sampler: cfg.sampler.clone(),
            estimator: cfg.estimator.clone(),
            warm_start: if cfg.warm_start {
                "fold fits start at the full-data MPLE".into()
            } else {
                "fold fits start at their own MPLE".into()
            },
            exact_loo_marginals: cfg.exact_loo_marginals,
            partition_note: "one partition per seed, shared by all models".into(),
            betweenness_scale: "raw (unnormalized) betweenness scores".into(),
            tsl_divisor: divisor,
            excluded_folds: excluded,
        },
        timing,
    })
}

/// Column order of the metric table.
pub const CSV_COLUMNS: [&str; 19] = [
    "schema_version",
    "model",
    "aic",
    "bic",
    "type",
    "edge_acc",
    "null_acc",
    "overall_acc",
    "tsl",
    "rho_degree",
    "rho_betweenness",
    "rho_eigen",
    "rmse_betw_centralization",
    "rmse_deg_centralization",
    "tsl_raw",
    "mse_degree",
    "mse_betweenness",
    "mse_eigen",
    "failed_folds",
];

fn cell(v: Option<f64>) -> String {
    v.map(|x| format!("{x}")).unwrap_or_default()
}

/// One row per (model, strategy), models in order within each report.
pub fn write_metric_csv<W: std::io::Write>(reports: &[HopeReport], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_COLUMNS)?;
    for r in reports {
        for m in &r.models {
            let fit = m.full_fit.as_ref();
            w.write_record([
                SCHEMA_VERSION.to_string(),
                m.name.clone(),
                cell(fit.and_then(|f| f.aic)),
                cell(fit.and_then(|f| f.bic)),
                r.strategy.clone(),
                cell(m.row.edge_acc),
                cell(m.row.null_acc),
                cell(m.row.overall_acc),
                format!("{}", m.row.tsl),
                cell(m.row.rho_degree),
                cell(m.row.rho_betweenness),
                cell(m.row.rho_eigen),
                cell(m.row.rmse_betw_centralization),
                cell(m.row.rmse_deg_centralization),
                format!("{}", m.row.tsl_raw),
                cell(m.row.mse_degree),
                cell(m.row.mse_betweenness),
                cell(m.row.mse_eigen),
                m.failed_folds.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Long-format per-fold values: model, type, fold, metric, value.
pub fn write_plot_csv<W: std::io::Write>(reports: &[HopeReport], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["model", "type", "fold", "metric", "value"])?;
    for r in reports {
        for m in &r.models {
            for f in &m.folds {
                let Some(fm) = &f.metrics else { continue };
                let values = [
                    ("edge_acc", fm.edge_acc),
                    ("null_acc", fm.null_acc),
                    ("overall_acc", fm.overall_acc),
                    ("tsl", Some(fm.tsl)),
                    ("mse_degree", fm.mse_degree),
                    ("mse_betweenness", fm.mse_betweenness),
                    ("mse_eigen", fm.mse_eigen),
                    ("rmse_deg_centralization", fm.rmse_deg_centralization),
                    ("rmse_betw_centralization", fm.rmse_betw_centralization),
                ];
                for (name, v) in values {
                    if let Some(v) = v {
                        w.write_record([
                            m.name.clone(),
                            r.strategy.clone(),
                            f.fold.to_string(),
                            name.to_string(),
                            format!("{v}"),
                        ])?;
                    }
                }
            }
        }
    }
    w.flush()?;
    Ok(())
}
