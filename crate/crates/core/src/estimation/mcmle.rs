//! Monte Carlo MLE of the face-value likelihood
//! l(theta) = log kappa(theta | y_obs) - log kappa(theta).
//!
//! Each iteration draws statistics from the unconditional model and from the
//! model conditional on the observed dyads, both at the current estimate. The
//! gradient is E[g | y_obs] - E[g]; the step solves against the unconditional
//! covariance and is halved until the importance-sampled log-likelihood ratio
//! is non-negative and the importance weights keep enough effective samples.

use nalgebra::DMatrix;
use rayon::prelude::*;

use super::linalg::{inverse_spd, log_sum_exp, mean_cov, solve_spd};
use super::mple::{check_separation, mple, Design};
use super::{Diagnostics, Direction, EstimationError, EstimatorConfig, FitResult, Method};
use crate::graph::{all_dyads, Dyad, Graph, PartialGraph};
use crate::rng::{derive_seed, rng_from_seed};
use crate::sampler::{initial_state, Chain, SamplerConfig};
use crate::terms::{dot, Model};

/// A set of persistent chains sharing one free set.
pub(crate) struct ChainPool<'m> {
    chains: Vec<Chain<'m>>,
    burn_in: usize,
    thin: usize,
}

impl<'m> ChainPool<'m> {
    pub(crate) fn new(
        model: &'m Model,
        start: &Graph,
        free: &[Dyad],
        cfg: &SamplerConfig,
        seed: u64,
    ) -> Result<Self, EstimationError> {
        let chains = (0..cfg.chains)
            .map(|c| Chain::new(model, start.clone(), free, cfg.proposal, derive_seed(seed, &[c as u64])))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(ChainPool {
            chains,
            burn_in: cfg.burn_in_for(free.len()),
            thin: cfg.thin_for(free.len()),
        })
    }

    /// Burns in at `theta` and then records `draws` statistic vectors, split
    /// across the chains and concatenated in chain order.
    pub(crate) fn draw(&mut self, theta: &[f64], draws: usize) -> Vec<Vec<f64>> {
        let k = self.chains.len();
        let (burn_in, thin) = (self.burn_in, self.thin);
        let work = |(c, chain): (usize, &mut Chain<'m>)| {
            let count = draws / k + usize::from(c < draws % k);
            chain.refresh_stats();
            chain.run(theta, burn_in);
            let mut out = Vec::with_capacity(count);
            for _ in 0..count {
                chain.run(theta, thin);
                out.push(chain.stats().to_vec());
            }
            out
        };
        let parts: Vec<Vec<Vec<f64>>> = if k == 1 {
            self.chains.iter_mut().enumerate().map(work).collect()
        } else {
            self.chains.par_iter_mut().enumerate().map(work).collect()
        };
        parts.into_iter().flatten().collect()
    }
}

/// log mean exp(delta . (x_i - centre)) plus delta . centre.
fn log_mean_exp(delta: &[f64], draws: &[Vec<f64>], centre: &[f64]) -> f64 {
    let base = dot(delta, centre);
    let lse = log_sum_exp(draws.iter().map(|x| {
        x.iter()
            .zip(centre)
            .zip(delta)
            .map(|((a, c), d)| d * (a - c))
            .sum::<f64>()
    }));
    base + lse - (draws.len() as f64).ln()
}

fn effective_sample_size(delta: &[f64], draws: &[Vec<f64>], centre: &[f64]) -> f64 {
    let lw: Vec<f64> = draws
        .iter()
        .map(|x| x.iter().zip(centre).zip(delta).map(|((a, c), d)| d * (a - c)).sum())
        .collect();
    let max = lw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let (s1, s2) = lw.iter().fold((0.0, 0.0), |(s1, s2), l| {
        let w = (l - max).exp();
        (s1 + w, s2 + w * w)
    });
    s1 * s1 / s2
}

/// Adds the smallest ridge that makes `cov` numerically positive definite.
fn regularize(cov: &DMatrix<f64>, warnings: &mut Vec<String>) -> DMatrix<f64> {
    if cov.clone().cholesky().is_some() && super::linalg::condition_ratio(cov) > 1e-10 {
        return cov.clone();
    }
    let scale = (0..cov.nrows()).map(|k| cov[(k, k)]).fold(0.0, f64::max).max(1e-8);
    let mut lambda = 1e-8 * scale;
    loop {
        let mut reg = cov.clone();
        for k in 0..cov.nrows() {
            reg[(k, k)] += lambda;
        }
        if reg.clone().cholesky().is_some() && super::linalg::condition_ratio(&reg) > 1e-10 {
            let msg = format!(
                "simulated statistic covariance is near singular; ridge {lambda:.3e} added"
            );
            if !warnings.contains(&msg) {
                warnings.push(msg);
            }
            return reg;
        }
        lambda *= 10.0;
    }
}

/// Edges coefficient at the observed log-odds, everything else zero.
fn density_start(pg: &PartialGraph, model: &Model) -> Vec<f64> {
    let mut theta = vec![0.0; model.dim()];
    if let Some(k) = model.coef_names().iter().position(|c| c == "edges") {
        let p = pg.observed_density().unwrap_or(0.5).clamp(1e-3, 1.0 - 1e-3);
        theta[k] = (p / (1.0 - p)).ln();
    }
    theta
}

/// Boundary check for coordinates with sign-constant change statistics.
/// Such a statistic is extremal at the empty and complete graphs, and over
/// completions of the observed dyads at all-free-off and all-free-on, so the
/// MLE diverges when every completion sits at one end of the support.
fn check_support_extremes(pg: &PartialGraph, model: &Model) -> Result<(), EstimationError> {
    let n = pg.n();
    let mut empty = pg.base().clone();
    let mut full = pg.base().clone();
    for d in all_dyads(n) {
        empty.set_edge(d, false);
        full.set_edge(d, true);
    }
    let mut off = pg.base().clone();
    let mut on = pg.base().clone();
    for &d in pg.free().iter() {
        off.set_edge(d, false);
        on.set_edge(d, true);
    }
    let (ge, gf, goff, gon) = (model.stats(&empty), model.stats(&full), model.stats(&off), model.stats(&on));
    let names = model.coef_names();
    for (k, sign) in model.monotone_signs().into_iter().enumerate() {
        if sign.is_none() {
            continue;
        }
        let (lo, hi) = (ge[k].min(gf[k]), ge[k].max(gf[k]));
        let (clo, chi) = (goff[k].min(gon[k]), goff[k].max(gon[k]));
        let tol = 1e-9 * (1.0 + lo.abs().max(hi.abs()));
        if hi - lo <= tol {
            return Err(EstimationError::Singular {
                terms: vec![names[k].clone()],
            });
        }
        let direction = if chi <= lo + tol {
            Direction::MinusInfinity
        } else if clo >= hi - tol {
            Direction::PlusInfinity
        } else {
            continue;
        };
        return Err(EstimationError::Boundary {
            coordinate: names[k].clone(),
            direction,
        });
    }
    Ok(())
}

/// Monte Carlo MLE. `start` (e.g. a full-data estimate) replaces the MPLE
/// starting value.
pub fn mcmle(
    pg: &PartialGraph,
    model: &Model,
    cfg: &EstimatorConfig,
    start: Option<&[f64]>,
) -> Result<FitResult, EstimationError> {
    cfg.validate()?;
    let p = model.dim();
    let design = Design::build(pg, model);
    if design.num_dyads() == 0.0 {
        return Err(EstimationError::NothingObserved);
    }
    // Separation of the pseudo-likelihood only implies a boundary MLE when
    // the model is dyadic independent.
    let independent = model.is_dyad_independent();
    if independent {
        check_separation(&design, model)?;
    } else {
        check_support_extremes(pg, model)?;
    }
    let mut theta = match start {
        Some(s) => {
            model.check_theta(s)?;
            s.to_vec()
        }
        None => match mple(pg, model) {
            Ok(f) => f.theta(),
            Err(EstimationError::Boundary { .. } | EstimationError::Singular { .. }) if !independent => {
                density_start(pg, model)
            }
            Err(e) => return Err(e),
        },
    };

    let n = pg.n();
    let everything: Vec<Dyad> = all_dyads(n).collect();
    let mut init_rng = rng_from_seed(derive_seed(cfg.seed, &[2]));
    let start_graph = initial_state(pg, &mut init_rng);
    let mut uncond = ChainPool::new(model, &start_graph, &everything, &cfg.sampler, derive_seed(cfg.seed, &[0]))?;
    let mut cond = if pg.free().is_empty() {
        None
    } else {
        Some(ChainPool::new(
            model,
            &start_graph,
            pg.free().as_slice(),
            &cfg.sampler,
            derive_seed(cfg.seed, &[1]),
        )?)
    };
    let observed_stats = model.stats(pg.base());

    let mut diag = Diagnostics {
        mc_samples: cfg.mc_samples,
        ..Diagnostics::default()
    };
    let mut converged = false;
    let mut last_cov = DMatrix::zeros(p, p);
    let mut last_cond_cov: Option<DMatrix<f64>> = None;
    for it in 1..=cfg.max_iter {
        diag.iterations = it;
        let u = uncond.draw(&theta, cfg.mc_samples);
        let (mean_u, cov_u) = mean_cov(&u);
        let c = cond.as_mut().map(|pool| pool.draw(&theta, cfg.mc_samples));
        let mean_c = match &c {
            Some(c) => {
                let (m, cc) = mean_cov(c);
                last_cond_cov = Some(cc);
                m
            }
            None => observed_stats.clone(),
        };
        let grad: Vec<f64> = mean_c.iter().zip(&mean_u).map(|(a, b)| a - b).collect();
        let t = (0..p)
            .map(|k| grad[k].abs() / cov_u[(k, k)].sqrt().max(1e-8))
            .fold(0.0, f64::max);
        diag.gradient_trace.push(t);
        diag.gradient_norm = t;
        last_cov = cov_u.clone();

        let h = regularize(&cov_u, &mut diag.warnings);
        let step = solve_spd(&h, &grad).expect("regularized covariance is positive definite");
        let mut alpha = 1.0;
        let mut delta = vec![0.0; p];
        for h in 0..=cfg.max_step_halvings {
            for k in 0..p {
                delta[k] = alpha * step[k];
            }
            let ess = effective_sample_size(&delta, &u, &mean_u);
            let gain = match &c {
                Some(c) => log_mean_exp(&delta, c, &mean_c),
                None => dot(&delta, &observed_stats),
            } - log_mean_exp(&delta, &u, &mean_u);
            if (gain >= 0.0 && ess >= cfg.min_ess_fraction * u.len() as f64) || h == cfg.max_step_halvings {
                break;
            }
            alpha *= 0.5;
        }
        for k in 0..p {
            theta[k] += delta[k];
        }
        if t < cfg.grad_tol {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(EstimationError::NotConverged {
            iterations: cfg.max_iter,
            trace: diag.gradient_trace,
        });
    }

    // Observed information of the face-value likelihood: Var[g] - Var[g | y_obs].
    let info = match last_cond_cov {
        Some(cc) => &last_cov - cc,
        None => last_cov,
    };
    let se = inverse_spd(&info).and_then(|inv| {
        let s: Vec<f64> = (0..p).map(|k| inv[(k, k)].sqrt()).collect();
        s.iter().all(|v| v.is_finite()).then_some(s)
    });
    if se.is_none() {
        diag.warnings
            .push("information matrix is not positive definite; standard errors unavailable".into());
    }
    Ok(FitResult::new(Method::Mcmle, model, theta, se, pg.num_observed(), diag))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimation::exact::ExactLikelihood;
    use crate::graph::DyadSet;
    use crate::terms::ModelSpec;

    fn cfg(samples: usize, tol: f64) -> EstimatorConfig {
        EstimatorConfig {
            mc_samples: samples,
            grad_tol: tol,
            compute_loglik: false,
            ..EstimatorConfig::default()
        }
    }

    #[test]
    fn agrees_with_mple_for_independent_model() {
        let g = Graph::from_edges(10, [(0, 1), (1, 2), (2, 3), (3, 4), (5, 6), (6, 7), (0, 9), (4, 8), (2, 7)])
            .unwrap()
            .with_node_attr("a", vec![1., 1., 1., 2., 2., 2., 1., 2., 1., 2.])
            .unwrap();
        let m = ModelSpec::parse("edges + nodematch(\"a\")").unwrap().compile(&g).unwrap();
        let pg = PartialGraph::fully_observed(&g);
        let exact = mple(&pg, &m).unwrap();
        let mc = mcmle(&pg, &m, &cfg(4000, 0.02), Some(&[0.0, 0.0])).unwrap();
        for (a, b) in exact.theta().iter().zip(mc.theta()) {
            assert!((a - b).abs() < 0.15, "{a} vs {b}");
        }
    }

    #[test]
    fn matches_exact_mle_small_graph() {
        let g = Graph::from_edges(5, [(0, 1), (1, 2), (0, 2), (2, 3), (3, 4)]).unwrap();
        let m = ModelSpec::parse("edges + gwesp(0.5)").unwrap().compile(&g).unwrap();
        let pg = PartialGraph::fully_observed(&g);
        let exact = ExactLikelihood::new(&pg, &m).unwrap().fit().unwrap();
        let mc = mcmle(&pg, &m, &cfg(20000, 0.01), None).unwrap();
        for (a, b) in exact.theta().iter().zip(mc.theta()) {
            assert!((a - b).abs() < 0.1, "{:?} vs {:?}", exact.theta(), mc.theta());
        }
    }

    #[test]
    fn matches_exact_mle_with_missing_dyads() {
        let g = Graph::from_edges(5, [(0, 1), (1, 2), (0, 2), (2, 3), (3, 4), (1, 4)]).unwrap();
        let free = DyadSet::new(vec![Dyad::new(0, 1).unwrap(), Dyad::new(2, 4).unwrap()]).unwrap();
        let pg = PartialGraph::new(&g, free).unwrap();
        let m = ModelSpec::parse("edges + gwesp(0.5)").unwrap().compile(&g).unwrap();
        let exact = ExactLikelihood::new(&pg, &m).unwrap().fit().unwrap();
        let mc = mcmle(&pg, &m, &cfg(20000, 0.01), None).unwrap();
        for (a, b) in exact.theta().iter().zip(mc.theta()) {
            assert!((a - b).abs() < 0.15, "{:?} vs {:?}", exact.theta(), mc.theta());
        }
    }

    #[test]
    fn triangle_with_isolate_is_interior() {
        // separated for the pseudo-likelihood, but the MLE exists
        let g = Graph::from_edges(4, [(0, 1), (0, 2), (1, 2)]).unwrap();
        let m = ModelSpec::parse("edges + gwesp(0.5)").unwrap().compile(&g).unwrap();
        let pg = PartialGraph::fully_observed(&g);
        let exact = ExactLikelihood::new(&pg, &m).unwrap().fit().unwrap();
        let mc = mcmle(&pg, &m, &cfg(20000, 0.01), None).unwrap();
        for (a, b) in exact.theta().iter().zip(mc.theta()) {
            assert!((a - b).abs() < 0.1, "{:?} vs {:?}", exact.theta(), mc.theta());
        }
    }

    #[test]
    fn deterministic_given_seed() {
        let g = Graph::from_edges(6, [(0, 1), (1, 2), (0, 2), (3, 4), (4, 5)]).unwrap();
        let m = ModelSpec::parse("edges + gwesp(0.5)").unwrap().compile(&g).unwrap();
        let pg = PartialGraph::fully_observed(&g);
        let a = mcmle(&pg, &m, &cfg(500, 0.2), None).unwrap();
        let b = mcmle(&pg, &m, &cfg(500, 0.2), None).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn triangle_free_graph_is_boundary() {
        let g = Graph::cycle(6);
        let m = ModelSpec::parse("edges + gwesp(0.5)").unwrap().compile(&g).unwrap();
        let err = mcmle(&PartialGraph::fully_observed(&g), &m, &cfg(200, 0.1), None).unwrap_err();
        assert!(matches!(err, EstimationError::Boundary { ref coordinate, .. } if coordinate.starts_with("gwesp")));
    }

    #[test]
    fn non_convergence_reports_trace() {
        let g = Graph::from_edges(6, [(0, 1), (1, 2), (0, 2), (3, 4), (4, 5)]).unwrap();
        let m = ModelSpec::parse("edges + gwesp(0.5)").unwrap().compile(&g).unwrap();
        let mut c = cfg(50, 1e-9);
        c.max_iter = 3;
        match mcmle(&PartialGraph::fully_observed(&g), &m, &c, None) {
            Err(EstimationError::NotConverged { iterations, trace }) => {
                assert_eq!(iterations, 3);
                assert_eq!(trace.len(), 3);
            }
            other => panic!("{other:?}"),
        }
    }
}
