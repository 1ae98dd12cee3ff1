//! Parameter estimation for (partially observed) graphs.
//!
//! * [`mple`]: maximum pseudo-likelihood by IRLS; the exact MLE for dyadic
//!   independence models.
//! * [`mcmle`]: Monte Carlo maximum likelihood on the face-value likelihood,
//!   by stochastic Fisher scoring with importance-sampled step control.
//! * [`exact`]: brute-force enumeration for tiny graphs (test oracle).
//! * [`path`]: log-likelihood by path sampling from the uniform graph.

pub mod exact;
pub mod mcmle;
pub mod mple;
pub mod path;

mod linalg;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::PartialGraph;
use crate::sampler::{SamplerConfig, SamplerError};
use crate::terms::{Model, ModelError};

pub use exact::ExactLikelihood;
pub use mcmle::mcmle;
pub use mple::mple;
pub use path::{loglik_path_sampling, LoglikEstimate};

#[derive(Debug, Error)]
pub enum EstimationError {
    #[error(
        "MLE is on the boundary: `{coordinate}` diverges to {direction}; \
         the observed statistic sits at the edge of its support"
    )]
    Boundary {
        coordinate: String,
        direction: Direction,
    },
    #[error("singular normal equations: statistics {terms:?} are collinear on the observed dyads; remove one of these terms")]
    Singular { terms: Vec<String> },
    #[error("no convergence after {iterations} iterations (standardized gradient trace: {trace:?})")]
    NotConverged { iterations: usize, trace: Vec<f64> },
    #[error("no observed dyads to fit")]
    NothingObserved,
    #[error("exact enumeration limit exceeded: {0}")]
    TooLarge(String),
    #[error("invalid estimator configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Sampler(#[from] SamplerError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    #[serde(rename = "+inf")]
    PlusInfinity,
    #[serde(rename = "-inf")]
    MinusInfinity,
}

impl std::fmt::Display for Direction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Direction::PlusInfinity => write!(f, "+infinity"),
            Direction::MinusInfinity => write!(f, "-infinity"),
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    Mple,
    Mcmle,
    Exact,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EstimatorConfig {
    /// `None` picks MPLE for dyadic independence models and MCMLE otherwise.
    pub method: Option<Method>,
    pub max_iter: usize,
    /// Convergence threshold on the largest |E[g | obs] - E[g]| / sd(g).
    pub grad_tol: f64,
    /// Draws per expectation per iteration.
    pub mc_samples: usize,
    pub max_step_halvings: usize,
    /// Minimum effective sample size fraction of the importance weights
    /// for a trial step to be accepted.
    pub min_ess_fraction: f64,
    /// Burn-in, thinning, proposal and chain count for the MC expectations.
    /// The seed field is ignored in favour of [`EstimatorConfig::seed`].
    pub sampler: SamplerConfig,
    pub seed: u64,
    /// Estimate the log-likelihood (and AIC/BIC) after fitting.
    pub compute_loglik: bool,
    /// Bridge points on the path from the uniform graph to the estimate.
    pub path_points: usize,
    pub path_samples: usize,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        EstimatorConfig {
            method: None,
            max_iter: 60,
            grad_tol: 0.1,
            mc_samples: 1024,
            max_step_halvings: 12,
            min_ess_fraction: 0.1,
            sampler: SamplerConfig::default(),
            seed: 1,
            compute_loglik: true,
            path_points: 21,
            path_samples: 1000,
        }
    }
}

impl EstimatorConfig {
    pub fn validate(&self) -> Result<(), EstimationError> {
        let bad = |m: &str| Err(EstimationError::Config(m.to_string()));
        if self.max_iter == 0 {
            return bad("max_iter must be positive");
        }
        if !(self.grad_tol > 0.0) {
            return bad("grad_tol must be positive");
        }
        if self.mc_samples < 2 {
            return bad("mc_samples must be at least 2");
        }
        if self.path_points < 2 {
            return bad("path_points must be at least 2");
        }
        if self.path_samples < 2 {
            return bad("path_samples must be at least 2");
        }
        if !(0.0..=1.0).contains(&self.min_ess_fraction) {
            return bad("min_ess_fraction must be in [0, 1]");
        }
        self.sampler.validate()?;
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Coefficient {
    pub name: String,
    pub estimate: f64,
    pub std_err: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub iterations: usize,
    /// Final standardized gradient (sup norm), or the raw gradient sup norm for MPLE/exact.
    pub gradient_norm: f64,
    pub gradient_trace: Vec<f64>,
    pub mc_samples: usize,
    pub loglik_method: Option<String>,
    pub loglik_mc_se: Option<f64>,
    pub warnings: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub method: Method,
    pub model: String,
    pub coefficients: Vec<Coefficient>,
    pub loglik: Option<f64>,
    pub aic: Option<f64>,
    pub bic: Option<f64>,
    pub n_observed_dyads: usize,
    pub diagnostics: Diagnostics,
}

impl FitResult {
    pub(crate) fn new(
        method: Method,
        model: &Model,
        theta: Vec<f64>,
        std_err: Option<Vec<f64>>,
        n_observed_dyads: usize,
        diagnostics: Diagnostics,
    ) -> Self {
        let coefficients = model
            .coef_names()
            .iter()
            .zip(&theta)
            .enumerate()
            .map(|(k, (name, &estimate))| Coefficient {
                name: name.clone(),
                estimate,
                std_err: std_err.as_ref().map(|s| s[k]),
            })
            .collect();
        FitResult {
            method,
            model: model.spec().to_string(),
            coefficients,
            loglik: None,
            aic: None,
            bic: None,
            n_observed_dyads,
            diagnostics,
        }
    }

    pub fn theta(&self) -> Vec<f64> {
        self.coefficients.iter().map(|c| c.estimate).collect()
    }

    pub fn std_errors(&self) -> Option<Vec<f64>> {
        self.coefficients.iter().map(|c| c.std_err).collect()
    }

    pub fn dim(&self) -> usize {
        self.coefficients.len()
    }

    /// Stores `loglik` and derives AIC = -2l + 2p and BIC = -2l + p ln(N_obs).
    pub fn set_loglik(&mut self, loglik: f64) {
        let p = self.dim() as f64;
        self.loglik = Some(loglik);
        self.aic = Some(-2.0 * loglik + 2.0 * p);
        self.bic = Some(-2.0 * loglik + p * (self.n_observed_dyads as f64).ln());
    }
}

/// Fits `model` to `pg` with the method chosen by `cfg`.
pub fn fit(
    pg: &PartialGraph,
    model: &Model,
    cfg: &EstimatorConfig,
    start: Option<&[f64]>,
) -> Result<FitResult, EstimationError> {
    cfg.validate()?;
    let method = cfg.method.unwrap_or(if model.is_dyad_independent() {
        Method::Mple
    } else {
        Method::Mcmle
    });
    let mut result = match method {
        Method::Mple => mple(pg, model)?,
        Method::Mcmle => mcmle(pg, model, cfg, start)?,
        Method::Exact => ExactLikelihood::new(pg, model)?.fit()?,
    };
    if cfg.compute_loglik && result.loglik.is_none() {
        let est = loglik_path_sampling(&result.theta(), model, pg, cfg)?;
        result.diagnostics.loglik_method = Some(est.method.clone());
        result.diagnostics.loglik_mc_se = est.mc_se;
        result.set_loglik(est.loglik);
    }
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Graph;
    use crate::terms::ModelSpec;

    #[test]
    fn bic_minus_aic_closed_form() {
        let g = Graph::new(36);
        let m = ModelSpec::parse("edges").unwrap().compile(&g).unwrap();
        let mut r = FitResult::new(Method::Mple, &m, vec![-1.5], None, 630, Diagnostics::default());
        r.set_loglik(-299.40);
        let diff = r.bic.unwrap() - r.aic.unwrap();
        assert!((diff - ((630f64).ln() - 2.0)).abs() < 1e-12);
        assert!((diff - 4.446).abs() < 5e-4);
    }

    #[test]
    fn config_validation() {
        let mut c = EstimatorConfig::default();
        assert!(c.validate().is_ok());
        c.mc_samples = 1;
        assert!(c.validate().is_err());
    }
}
