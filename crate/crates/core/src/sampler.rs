//! Metropolis-Hastings toggle sampler over graphs, optionally restricted to a
//! free set of dyads so that every other dyad keeps its observed state.

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{Dyad, Graph, PartialGraph};
use crate::rng::{derive_seed, rng_from_seed, Rng};
use crate::terms::{dot, Model, ModelError};

#[derive(Debug, Error)]
pub enum SamplerError {
    #[error("no free dyads to sample")]
    EmptyFreeSet,
    #[error("at least one draw is required")]
    NoDraws,
    #[error("invalid sampler configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Copy, Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum Proposal {
    /// Pick a free dyad uniformly at random.
    #[default]
    UniformDyad,
    /// With probability 1/2 pick a free edge, otherwise a free null.
    TieNoTie,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplerConfig {
    /// Toggles before the first retained draw; `None` means 20 per free dyad.
    pub burn_in: Option<usize>,
    /// Toggles between retained draws; `None` means 4 per free dyad.
    pub thin: Option<usize>,
    pub proposal: Proposal,
    pub seed: u64,
    /// Independent chains the draws are split across.
    pub chains: usize,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            burn_in: None,
            thin: None,
            proposal: Proposal::UniformDyad,
            seed: 1,
            chains: 1,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<(), SamplerError> {
        if self.thin == Some(0) {
            return Err(SamplerError::Config("thin must be at least 1".into()));
        }
        if self.chains == 0 {
            return Err(SamplerError::Config("chains must be at least 1".into()));
        }
        Ok(())
    }

    pub fn burn_in_for(&self, free: usize) -> usize {
        self.burn_in.unwrap_or(20 * free)
    }

    pub fn thin_for(&self, free: usize) -> usize {
        self.thin.unwrap_or(4 * free).max(1)
    }
}

/// Free dyads split by current state, for tie/no-tie proposals.
#[derive(Clone, Debug)]
struct TieIndex {
    ties: Vec<usize>,
    nulls: Vec<usize>,
    /// position of free slot k inside `ties` or `nulls`
    pos: Vec<usize>,
}

impl TieIndex {
    fn new(g: &Graph, free: &[Dyad]) -> Self {
        let mut idx = TieIndex {
            ties: Vec::new(),
            nulls: Vec::new(),
            pos: vec![0; free.len()],
        };
        for (k, d) in free.iter().enumerate() {
            let list = if g.has_dyad(*d) {
                &mut idx.ties
            } else {
                &mut idx.nulls
            };
            idx.pos[k] = list.len();
            list.push(k);
        }
        idx
    }

    /// Moves slot `k` to the other list after its dyad was toggled.
    fn flip(&mut self, k: usize, now_on: bool) {
        let (from, to) = if now_on {
            (&mut self.nulls, &mut self.ties)
        } else {
            (&mut self.ties, &mut self.nulls)
        };
        let p = self.pos[k];
        from.swap_remove(p);
        if p < from.len() {
            self.pos[from[p]] = p;
        }
        self.pos[k] = to.len();
        to.push(k);
    }
}

/// One Markov chain: current graph, its cached statistics and its RNG.
#[derive(Clone, Debug)]
pub struct Chain<'m> {
    model: &'m Model,
    graph: Graph,
    stats: Vec<f64>,
    free: Vec<Dyad>,
    tie_index: Option<TieIndex>,
    rng: Rng,
    delta: Vec<f64>,
    proposed: u64,
    accepted: u64,
}

impl<'m> Chain<'m> {
    pub fn new(
        model: &'m Model,
        graph: Graph,
        free: &[Dyad],
        proposal: Proposal,
        seed: u64,
    ) -> Result<Self, SamplerError> {
        if free.is_empty() {
            return Err(SamplerError::EmptyFreeSet);
        }
        let stats = model.stats(&graph);
        let tie_index = (proposal == Proposal::TieNoTie).then(|| TieIndex::new(&graph, free));
        Ok(Chain {
            model,
            stats,
            free: free.to_vec(),
            tie_index,
            rng: rng_from_seed(seed),
            delta: vec![0.0; model.dim()],
            graph,
            proposed: 0,
            accepted: 0,
        })
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    /// Statistics of the current graph, maintained incrementally.
    pub fn stats(&self) -> &[f64] {
        &self.stats
    }

    pub fn acceptance_rate(&self) -> f64 {
        if self.proposed == 0 {
            return 0.0;
        }
        self.accepted as f64 / self.proposed as f64
    }

    fn propose(&mut self) -> (usize, f64) {
        match &self.tie_index {
            None => (self.rng.random_range(0..self.free.len()), 0.0),
            Some(idx) => {
                let (t, nl) = (idx.ties.len(), idx.nulls.len());
                let both = t > 0 && nl > 0;
                let pick_tie = if both { self.rng.random_bool(0.5) } else { t > 0 };
                let p_fwd = if both { 0.5 } else { 1.0 };
                // q(reverse) / q(forward) for the tie/null bucket counts after the move.
                if pick_tie {
                    let k = idx.ties[self.rng.random_range(0..t)];
                    let p_rev = if t - 1 > 0 { 0.5 } else { 1.0 };
                    (k, ((p_rev / (nl + 1) as f64) / (p_fwd / t as f64)).ln())
                } else {
                    let k = idx.nulls[self.rng.random_range(0..nl)];
                    let p_rev = if nl - 1 > 0 { 0.5 } else { 1.0 };
                    (k, ((p_rev / (t + 1) as f64) / (p_fwd / nl as f64)).ln())
                }
            }
        }
    }

    /// One Metropolis-Hastings toggle; returns whether it was accepted.
    pub fn step(&mut self, theta: &[f64]) -> bool {
        let (k, log_q) = self.propose();
        let d = self.free[k];
        self.model.change_stats_into(&self.graph, d, &mut self.delta);
        let on = self.graph.has_dyad(d);
        let s = dot(theta, &self.delta);
        let log_ratio = if on { -s } else { s } + log_q;
        self.proposed += 1;
        let accept = log_ratio >= 0.0 || self.rng.random::<f64>() < log_ratio.exp();
        if accept {
            self.graph.set_edge(d, !on);
            let sign = if on { -1.0 } else { 1.0 };
            for (s, dv) in self.stats.iter_mut().zip(&self.delta) {
                *s += sign * dv;
            }
            if let Some(idx) = &mut self.tie_index {
                idx.flip(k, !on);
            }
            self.accepted += 1;
        }
        accept
    }

    pub fn run(&mut self, theta: &[f64], steps: usize) {
        for _ in 0..steps {
            self.step(theta);
        }
    }

    /// Recomputes the statistics from scratch (drift guard for long runs).
    pub fn refresh_stats(&mut self) {
        self.stats = self.model.stats(&self.graph);
    }
}

/// Observed states with free dyads drawn independently at the observed density.
pub fn initial_state(pg: &PartialGraph, rng: &mut Rng) -> Graph {
    let p = pg.observed_density().unwrap_or(0.5);
    let mut g = pg.base().clone();
    for d in pg.free() {
        g.set_edge(*d, rng.random_bool(p.clamp(0.0, 1.0)));
    }
    g
}

fn split_draws(total: usize, chains: usize) -> Vec<usize> {
    (0..chains)
        .map(|c| total / chains + usize::from(c < total % chains))
        .collect()
}

/// Runs `cfg.chains` independent chains and collects `draws` records in
/// chain order. Chain c uses seed `derive_seed(cfg.seed, [c])`.
pub fn sample_with<T, F>(
    pg: &PartialGraph,
    theta: &[f64],
    model: &Model,
    draws: usize,
    cfg: &SamplerConfig,
    record: F,
) -> Result<Vec<T>, SamplerError>
where
    T: Send,
    F: Fn(&Chain<'_>) -> T + Sync,
{
    cfg.validate()?;
    model.check_theta(theta)?;
    if draws == 0 {
        return Err(SamplerError::NoDraws);
    }
    if pg.free().is_empty() {
        return Err(SamplerError::EmptyFreeSet);
    }
    let nfree = pg.free().len();
    let burn_in = cfg.burn_in_for(nfree);
    let thin = cfg.thin_for(nfree);
    let chains = cfg.chains.min(draws);
    let per_chain = split_draws(draws, chains);

    let run_chain = |c: usize| -> Result<Vec<T>, SamplerError> {
        let seed = derive_seed(cfg.seed, &[c as u64]);
        let mut init_rng = rng_from_seed(derive_seed(seed, &[u64::MAX]));
        let start = initial_state(pg, &mut init_rng);
        let mut chain = Chain::new(model, start, pg.free().as_slice(), cfg.proposal, seed)?;
        chain.run(theta, burn_in);
        let mut out = Vec::with_capacity(per_chain[c]);
        for _ in 0..per_chain[c] {
            chain.run(theta, thin);
            out.push(record(&chain));
        }
        Ok(out)
    };

    let per: Vec<Result<Vec<T>, SamplerError>> = if chains == 1 {
        vec![run_chain(0)]
    } else {
        (0..chains).into_par_iter().map(run_chain).collect()
    };
    let mut all = Vec::with_capacity(draws);
    for r in per {
        all.extend(r?);
    }
    Ok(all)
}

/// Draws `draws` graphs from the model conditional on the observed dyads of `pg`.
pub fn sample_conditional(
    pg: &PartialGraph,
    theta: &[f64],
    model: &Model,
    draws: usize,
    cfg: &SamplerConfig,
) -> Result<Vec<Graph>, SamplerError> {
    sample_with(pg, theta, model, draws, cfg, |c| c.graph().clone())
}

/// Like [`sample_conditional`] but keeps only the statistic vectors.
pub fn sample_stats(
    pg: &PartialGraph,
    theta: &[f64],
    model: &Model,
    draws: usize,
    cfg: &SamplerConfig,
) -> Result<Vec<Vec<f64>>, SamplerError> {
    sample_with(pg, theta, model, draws, cfg, |c| c.stats().to_vec())
}
