//! Log-likelihood at a fitted parameter.
//!
//! Dyadic independence models have a closed form. Otherwise both normalizers
//! are estimated by path sampling along t -> t theta from the uniform graph:
//! log kappa(theta) = N ln 2 + int_0^1 theta . E_{t theta}[g] dt, and the
//! conditional normalizer likewise with |free| ln 2 and E[g | y_obs].

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::linalg::{log1p_exp, mean_cov};
use super::mcmle::ChainPool;
use super::mple::Design;
use super::{EstimationError, EstimatorConfig};
use crate::graph::{all_dyads, Dyad, Graph, PartialGraph};
use crate::rng::{derive_seed, rng_from_seed};
use crate::sampler::initial_state;
use crate::terms::{dot, Model};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LoglikEstimate {
    pub loglik: f64,
    /// Monte Carlo standard error, ignoring autocorrelation; `None` when exact.
    pub mc_se: Option<f64>,
    pub method: String,
}

/// Composite Simpson weights on an even number of intervals, trapezoid otherwise.
fn quadrature_weights(points: usize) -> Vec<f64> {
    let m = points - 1;
    let h = 1.0 / m as f64;
    if m % 2 == 0 {
        (0..points)
            .map(|k| {
                let c = if k == 0 || k == m {
                    1.0
                } else if k % 2 == 1 {
                    4.0
                } else {
                    2.0
                };
                c * h / 3.0
            })
            .collect()
    } else {
        (0..points)
            .map(|k| if k == 0 || k == m { h / 2.0 } else { h })
            .collect()
    }
}

/// Integral of theta . E_{t theta}[g] over t in [0, 1] with its MC variance.
fn path_integral(
    model: &Model,
    theta: &[f64],
    start: &Graph,
    free: &[Dyad],
    cfg: &EstimatorConfig,
    stream: u64,
) -> Result<(f64, f64), EstimationError> {
    let weights = quadrature_weights(cfg.path_points);
    let points: Vec<usize> = (0..cfg.path_points).collect();
    let per_point = points
        .par_iter()
        .map(|&k| -> Result<(f64, f64), EstimationError> {
            let t = k as f64 / (cfg.path_points - 1) as f64;
            let at: Vec<f64> = theta.iter().map(|v| v * t).collect();
            let mut sampler = cfg.sampler.clone();
            sampler.chains = 1;
            let mut pool = ChainPool::new(model, start, free, &sampler, derive_seed(cfg.seed, &[stream, k as u64]))?;
            let draws = pool.draw(&at, cfg.path_samples);
            let (mean, cov) = mean_cov(&draws);
            let p = theta.len();
            let mut var = 0.0;
            for a in 0..p {
                for b in 0..p {
                    var += theta[a] * theta[b] * cov[(a, b)];
                }
            }
            Ok((dot(theta, &mean), var / draws.len() as f64))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let value = per_point.iter().zip(&weights).map(|((v, _), w)| w * v).sum();
    let var = per_point.iter().zip(&weights).map(|((_, s), w)| w * w * s).sum();
    Ok((value, var))
}

/// Face-value log-likelihood of `pg` at `theta`.
pub fn loglik_path_sampling(
    theta: &[f64],
    model: &Model,
    pg: &PartialGraph,
    cfg: &EstimatorConfig,
) -> Result<LoglikEstimate, EstimationError> {
    model.check_theta(theta)?;
    if pg.num_observed() == 0 {
        return Err(EstimationError::NothingObserved);
    }
    if model.is_dyad_independent() {
        return Ok(LoglikEstimate {
            loglik: Design::build(pg, model).loglik(theta),
            mc_se: None,
            method: "exact".into(),
        });
    }
    cfg.validate()?;
    let n = pg.n();
    let everything: Vec<Dyad> = all_dyads(n).collect();
    let mut init_rng = rng_from_seed(derive_seed(cfg.seed, &[5]));
    let start = initial_state(pg, &mut init_rng);

    let ln2 = std::f64::consts::LN_2;
    let (integral, var) = path_integral(model, theta, &start, &everything, cfg, 3)?;
    let log_kappa = everything.len() as f64 * ln2 + integral;
    let (log_kappa_cond, var_cond) = if pg.free().is_empty() {
        (dot(theta, &model.stats(pg.base())), 0.0)
    } else {
        let (i, v) = path_integral(model, theta, &start, pg.free().as_slice(), cfg, 4)?;
        (pg.free().len() as f64 * ln2 + i, v)
    };
    Ok(LoglikEstimate {
        loglik: log_kappa_cond - log_kappa,
        mc_se: Some((var + var_cond).sqrt()),
        method: format!("path sampling ({} bridge points)", cfg.path_points),
    })
}

/// Closed-form log normalizer of a dyadic independence model.
pub fn log_normalizer_independent(model: &Model, g: &Graph, theta: &[f64]) -> f64 {
    let mut x = vec![0.0; model.dim()];
    all_dyads(g.n())
        .map(|d| {
            model.change_stats_into(g, d, &mut x);
            log1p_exp(dot(theta, &x))
        })
        .sum()
}
