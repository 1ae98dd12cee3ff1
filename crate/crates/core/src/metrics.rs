//! Dyad-, node- and graph-level predictive metrics.

use std::collections::{BTreeMap, VecDeque};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{Dyad, DyadSet, Graph};
use crate::terms::{dot, Model};

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("no marginal estimate for held-out dyad {dyad} in fold {fold}")]
    MissingPrediction { fold: usize, dyad: Dyad },
    #[error("{0} predictions supplied for {1} folds")]
    FoldCount(usize, usize),
    #[error("at least one simulated draw is required")]
    NoDraws,
    #[error("centrality vector has length {got}, expected {expected}")]
    Length { expected: usize, got: usize },
}

/// Jeffreys-shrunk marginal edge probability (0.5 + ones) / (draws + 1).
pub fn marginal_estimate(ones: usize, draws: usize) -> f64 {
    debug_assert!(draws >= 1 && ones <= draws);
    (0.5 + ones as f64) / (draws as f64 + 1.0)
}

/// Exact conditional edge probability of `d` when it is the only unobserved
/// dyad: logistic(theta . delta(d)).
pub fn exact_marginal_change_score(g: &Graph, d: Dyad, theta: &[f64], model: &Model) -> f64 {
    let eta = dot(theta, &model.change_stats(g, d));
    1.0 / (1.0 + (-eta).exp())
}

#[derive(Copy, Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
}

#[derive(Copy, Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Accuracy {
    pub edge: Option<f64>,
    pub null: Option<f64>,
    pub overall: Option<f64>,
}

impl ConfusionMatrix {
    pub fn record(&mut self, truth: bool, predicted: bool) {
        match (truth, predicted) {
            (true, true) => self.tp += 1,
            (false, true) => self.fp += 1,
            (true, false) => self.fn_ += 1,
            (false, false) => self.tn += 1,
        }
    }

    pub fn merge(&mut self, other: &ConfusionMatrix) {
        self.tp += other.tp;
        self.fp += other.fp;
        self.fn_ += other.fn_;
        self.tn += other.tn;
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }

    /// Zero denominators give `None` rather than 0.
    pub fn accuracy(&self) -> Accuracy {
        let ratio = |a: u64, b: u64| (b > 0).then(|| a as f64 / b as f64);
        Accuracy {
            edge: ratio(self.tp, self.tp + self.fn_),
            null: ratio(self.tn, self.tn + self.fp),
            overall: ratio(self.tp + self.tn, self.total()),
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SquaredLoss {
    pub raw: f64,
    /// `raw` divided by the number of times each dyad is held out.
    pub reported: f64,
    pub divisor: f64,
}

/// Total squared loss over folds. `predictions[m]` maps each dyad of
/// `folds[m]` to its marginal estimate; `divisor` is 2 for node-held-out.
pub fn total_squared_loss(
    y_obs: &Graph,
    folds: &[DyadSet],
    predictions: &[BTreeMap<Dyad, f64>],
    divisor: f64,
) -> Result<SquaredLoss, MetricsError> {
    if folds.len() != predictions.len() {
        return Err(MetricsError::FoldCount(predictions.len(), folds.len()));
    }
    let mut raw = 0.0;
    for (m, (fold, pred)) in folds.iter().zip(predictions).enumerate() {
        for d in fold {
            let p = *pred
                .get(d)
                .ok_or(MetricsError::MissingPrediction { fold: m, dyad: *d })?;
            let y = if y_obs.has_dyad(*d) { 1.0 } else { 0.0 };
            raw += (p - y) * (p - y);
        }
    }
    Ok(SquaredLoss {
        raw,
        reported: raw / divisor,
        divisor,
    })
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CentralityKind {
    Degree,
    Betweenness,
    Eigenvector,
}

pub fn degree_centrality(g: &Graph) -> Vec<f64> {
    g.degrees().iter().map(|&d| d as f64).collect()
}

fn adjacency(g: &Graph) -> Vec<Vec<usize>> {
    (0..g.n()).map(|v| g.neighbors(v).collect()).collect()
}

/// Brandes accumulation over unweighted geodesics; each unordered pair is
/// counted once and unreachable pairs contribute nothing.
pub fn betweenness_centrality(g: &Graph) -> Vec<f64> {
    let n = g.n();
    let adj = adjacency(g);
    let mut bc = vec![0.0; n];
    let mut sigma = vec![0.0f64; n];
    let mut dist = vec![-1i64; n];
    let mut delta = vec![0.0; n];
    let mut preds: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut stack = Vec::with_capacity(n);
    let mut queue = VecDeque::with_capacity(n);
    for s in 0..n {
        for v in 0..n {
            sigma[v] = 0.0;
            dist[v] = -1;
            delta[v] = 0.0;
            preds[v].clear();
        }
        sigma[s] = 1.0;
        dist[s] = 0;
        queue.push_back(s);
        while let Some(v) = queue.pop_front() {
            stack.push(v);
            for &w in &adj[v] {
                if dist[w] < 0 {
                    dist[w] = dist[v] + 1;
                    queue.push_back(w);
                }
                if dist[w] == dist[v] + 1 {
                    sigma[w] += sigma[v];
                    preds[w].push(v);
                }
            }
        }
        while let Some(w) = stack.pop() {
            for &v in &preds[w] {
                delta[v] += sigma[v] / sigma[w] * (1.0 + delta[w]);
            }
            if w != s {
                bc[w] += delta[w];
            }
        }
    }
    bc.iter().map(|b| b / 2.0).collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct Eigenvector {
    pub scores: Vec<f64>,
    pub eigenvalue: f64,
    pub warning: Option<String>,
}

const EIGEN_TOL: f64 = 1e-10;
const EIGEN_MAX_ITER: usize = 200_000;

/// Power iteration on A + I from `start` until ||A c - lambda c|| < 1e-10.
fn power_iteration(adj: &[Vec<usize>], start: &[f64]) -> (Vec<f64>, f64, bool) {
    let n = adj.len();
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let mut c = start.to_vec();
    let s = norm(&c);
    c.iter_mut().for_each(|x| *x /= s);
    let mut next = vec![0.0; n];
    for _ in 0..EIGEN_MAX_ITER {
        for v in 0..n {
            next[v] = adj[v].iter().map(|&w| c[w]).sum();
        }
        // next = A c here
        let lambda: f64 = next.iter().zip(&c).map(|(a, b)| a * b).sum();
        let resid = next
            .iter()
            .zip(&c)
            .map(|(a, b)| (a - lambda * b).powi(2))
            .sum::<f64>()
            .sqrt();
        if resid < EIGEN_TOL {
            return (c, lambda, true);
        }
        for v in 0..n {
            next[v] += c[v];
        }
        let s = norm(&next);
        for v in 0..n {
            c[v] = next[v] / s;
        }
    }
    let ac: Vec<f64> = (0..n).map(|v| adj[v].iter().map(|&w| c[w]).sum()).collect();
    let lambda = ac.iter().zip(&c).map(|(a, b)| a * b).sum();
    (c, lambda, false)
}

fn components(adj: &[Vec<usize>]) -> Vec<Vec<usize>> {
    let n = adj.len();
    let mut seen = vec![false; n];
    let mut out = Vec::new();
    for s in 0..n {
        if seen[s] {
            continue;
        }
        seen[s] = true;
        let mut comp = vec![s];
        let mut k = 0;
        while k < comp.len() {
            for &w in &adj[comp[k]] {
                if !seen[w] {
                    seen[w] = true;
                    comp.push(w);
                }
            }
            k += 1;
        }
        out.push(comp);
    }
    out
}

/// Principal eigenvector of the adjacency matrix, unit Euclidean norm,
/// nonnegative orientation.
pub fn eigenvector_centrality(g: &Graph) -> Eigenvector {
    eigenvector_centrality_from(g, None)
}

/// As [`eigenvector_centrality`], starting the iteration at `start` (for
/// example the scores of a nearby graph) instead of the all-ones vector.
pub fn eigenvector_centrality_from(g: &Graph, start: Option<&[f64]>) -> Eigenvector {
    let n = g.n();
    if g.edge_count() == 0 {
        return Eigenvector {
            scores: vec![0.0; n],
            eigenvalue: 0.0,
            warning: Some("graph has no edges; eigenvector centrality set to zero".into()),
        };
    }
    let adj = adjacency(g);
    let ones = vec![1.0; n];
    let init = match start {
        Some(s) if s.len() == n && s.iter().all(|x| *x >= 0.0) => {
            // keep every coordinate reachable so no component is lost
            s.iter().map(|x| x + 1e-3).collect()
        }
        _ => ones,
    };
    let (mut c, lambda, converged) = power_iteration(&adj, &init);
    let mut warning = (!converged).then(|| "power iteration did not reach the 1e-10 residual".to_string());

    let comps = components(&adj);
    if comps.len() > 1 {
        let radii: Vec<f64> = comps
            .iter()
            .filter(|comp| comp.len() > 1)
            .map(|comp| {
                let local: Vec<Vec<usize>> = {
                    let mut pos = vec![usize::MAX; n];
                    for (k, &v) in comp.iter().enumerate() {
                        pos[v] = k;
                    }
                    comp.iter().map(|&v| adj[v].iter().map(|&w| pos[w]).collect()).collect()
                };
                power_iteration(&local, &vec![1.0; comp.len()]).1
            })
            .collect();
        let top = radii.iter().filter(|r| (*r - lambda).abs() < 1e-8).count();
        if top > 1 {
            warning = Some(format!(
                "leading eigenvalue {lambda:.6} is shared by {top} components; the eigenvector is not unique"
            ));
        }
    }
    for x in &mut c {
        if x.abs() < 1e-300 {
            *x = 0.0;
        }
        *x = x.abs();
    }
    Eigenvector {
        scores: c,
        eigenvalue: lambda,
        warning,
    }
}

pub fn centrality(g: &Graph, kind: CentralityKind) -> Vec<f64> {
    match kind {
        CentralityKind::Degree => degree_centrality(g),
        CentralityKind::Betweenness => betweenness_centrality(g),
        CentralityKind::Eigenvector => eigenvector_centrality(g).scores,
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Reliability {
    /// `None` when the observed scores do not vary.
    pub rho: Option<f64>,
    pub mse: f64,
    pub tss: f64,
}

/// Streaming accumulator for the coefficient of reliability.
#[derive(Clone, Debug, PartialEq)]
pub struct ReliabilityAccumulator {
    observed: Vec<f64>,
    sse: f64,
    draws: usize,
}

impl ReliabilityAccumulator {
    pub fn new(observed: Vec<f64>) -> Self {
        ReliabilityAccumulator {
            observed,
            sse: 0.0,
            draws: 0,
        }
    }

    pub fn add(&mut self, simulated: &[f64]) -> Result<(), MetricsError> {
        if simulated.len() != self.observed.len() {
            return Err(MetricsError::Length {
                expected: self.observed.len(),
                got: simulated.len(),
            });
        }
        self.sse += simulated
            .iter()
            .zip(&self.observed)
            .map(|(s, o)| (s - o) * (s - o))
            .sum::<f64>();
        self.draws += 1;
        Ok(())
    }

    pub fn merge(&mut self, other: &ReliabilityAccumulator) {
        self.sse += other.sse;
        self.draws += other.draws;
    }

    pub fn finish(&self) -> Result<Reliability, MetricsError> {
        if self.draws == 0 {
            return Err(MetricsError::NoDraws);
        }
        let n = self.observed.len() as f64;
        let mean = self.observed.iter().sum::<f64>() / n;
        let tss: f64 = self.observed.iter().map(|o| (o - mean) * (o - mean)).sum();
        let mse = self.sse / (self.draws as f64 * n);
        let rho = (tss > 1e-12 * (1.0 + mean * mean)).then(|| 1.0 - mse / (tss / n));
        Ok(Reliability { rho, mse, tss })
    }
}

/// rho_C = 1 - MSE_C / (TSS / n) over every simulated centrality vector.
pub fn reliability_rho(observed: &[f64], simulated: &[Vec<f64>]) -> Result<Reliability, MetricsError> {
    let mut acc = ReliabilityAccumulator::new(observed.to_vec());
    for s in simulated {
        acc.add(s)?;
    }
    acc.finish()
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum CentralizationKind {
    Degree,
    Betweenness,
}

/// Freeman centralization of precomputed scores, divided by the maximum
/// attained by the n-node star. `None` for n < 3.
pub fn centralization_of(scores: &[f64], kind: CentralizationKind) -> Option<f64> {
    let n = scores.len();
    if n < 3 {
        return None;
    }
    let nf = n as f64;
    let max = scores.iter().cloned().fold(f64::MIN, f64::max);
    let total: f64 = scores.iter().map(|c| max - c).sum();
    let bound = match kind {
        CentralizationKind::Degree => (nf - 1.0) * (nf - 2.0),
        CentralizationKind::Betweenness => (nf - 1.0).powi(2) * (nf - 2.0) / 2.0,
    };
    Some(total / bound)
}

pub fn centralization(g: &Graph, kind: CentralizationKind) -> Option<f64> {
    let scores = match kind {
        CentralizationKind::Degree => degree_centrality(g),
        CentralizationKind::Betweenness => betweenness_centrality(g),
    };
    centralization_of(&scores, kind)
}

/// Root mean squared gap between the observed and simulated centralizations.
pub fn rmse_centralization(observed: f64, simulated: &[f64]) -> Result<f64, MetricsError> {
    if simulated.is_empty() {
        return Err(MetricsError::NoDraws);
    }
    let ms = simulated.iter().map(|s| (observed - s).powi(2)).sum::<f64>() / simulated.len() as f64;
    Ok(ms.sqrt())
}

/// One row of the metric table.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub edge_acc: Option<f64>,
    pub null_acc: Option<f64>,
    pub overall_acc: Option<f64>,
    /// Reported total squared loss (halved under node-held-out).
    pub tsl: f64,
    pub tsl_raw: f64,
    pub rho_degree: Option<f64>,
    pub rho_betweenness: Option<f64>,
    pub rho_eigen: Option<f64>,
    pub rmse_betw_centralization: Option<f64>,
    pub rmse_deg_centralization: Option<f64>,
    pub mse_degree: Option<f64>,
    pub mse_betweenness: Option<f64>,
    pub mse_eigen: Option<f64>,
}
