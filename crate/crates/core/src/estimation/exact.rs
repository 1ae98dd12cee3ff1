//! Exact likelihood by enumerating every graph on a few nodes. Used as a
//! reference for the samplers and estimators on tiny problems.

use std::collections::HashMap;

use nalgebra::DMatrix;

use super::linalg::{inverse_spd, log_sum_exp, solve_spd};
use super::{Diagnostics, Direction, EstimationError, FitResult, Method};
use crate::graph::{all_dyads, Dyad, Graph, PartialGraph};
use crate::terms::{dot, Model};

/// Largest node count for unconditional enumeration (15 dyads).
pub const MAX_NODES: usize = 6;
/// Largest free set for conditional enumeration.
pub const MAX_FREE: usize = 25;

/// Visits every configuration of `dyads` starting from `start`, in Gray-code
/// order so that consecutive graphs differ by one toggle.
pub fn enumerate<F>(model: &Model, start: &Graph, dyads: &[Dyad], mut visit: F)
where
    F: FnMut(&Graph, &[f64]),
{
    let mut g = start.clone();
    let mut s = model.stats(&g);
    let mut delta = vec![0.0; model.dim()];
    visit(&g, &s);
    for k in 1u64..(1u64 << dyads.len()) {
        let d = dyads[k.trailing_zeros() as usize];
        model.change_stats_into(&g, d, &mut delta);
        let sign = if g.has_dyad(d) { -1.0 } else { 1.0 };
        g.toggle_in_place(d);
        for (a, b) in s.iter_mut().zip(&delta) {
            *a += sign * b;
        }
        visit(&g, &s);
    }
}

/// Distinct statistic vectors with multiplicities.
#[derive(Clone, Debug)]
pub struct Support {
    pub points: Vec<Vec<f64>>,
    pub counts: Vec<f64>,
}

impl Support {
    fn collect(model: &Model, start: &Graph, dyads: &[Dyad]) -> Self {
        let mut index: HashMap<Vec<i64>, usize> = HashMap::new();
        let mut sup = Support {
            points: Vec::new(),
            counts: Vec::new(),
        };
        enumerate(model, start, dyads, |_, s| {
            let key: Vec<i64> = s.iter().map(|v| (v * 1e8).round() as i64).collect();
            let r = *index.entry(key).or_insert_with(|| {
                sup.points.push(s.to_vec());
                sup.counts.push(0.0);
                sup.points.len() - 1
            });
            sup.counts[r] += 1.0;
        });
        sup
    }

    fn single(point: Vec<f64>) -> Self {
        Support {
            points: vec![point],
            counts: vec![1.0],
        }
    }

    fn log_weights(&self, theta: &[f64]) -> Vec<f64> {
        self.points
            .iter()
            .zip(&self.counts)
            .map(|(s, c)| c.ln() + dot(theta, s))
            .collect()
    }

    pub fn log_normalizer(&self, theta: &[f64]) -> f64 {
        log_sum_exp(self.log_weights(theta))
    }

    /// Mean and covariance of the statistics under exp(theta . g).
    pub fn moments(&self, theta: &[f64]) -> (Vec<f64>, DMatrix<f64>) {
        let p = theta.len();
        let lw = self.log_weights(theta);
        let lz = log_sum_exp(lw.iter().copied());
        let mut mean = vec![0.0; p];
        let probs: Vec<f64> = lw.iter().map(|l| (l - lz).exp()).collect();
        for (s, w) in self.points.iter().zip(&probs) {
            for k in 0..p {
                mean[k] += w * s[k];
            }
        }
        let mut cov = DMatrix::zeros(p, p);
        for (s, w) in self.points.iter().zip(&probs) {
            for a in 0..p {
                for b in 0..p {
                    cov[(a, b)] += w * (s[a] - mean[a]) * (s[b] - mean[b]);
                }
            }
        }
        (mean, cov)
    }
}

/// Face-value likelihood of a partially observed graph by enumeration.
pub struct ExactLikelihood<'m> {
    model: &'m Model,
    uncond: Support,
    cond: Support,
    n_observed: usize,
}

impl<'m> ExactLikelihood<'m> {
    pub fn new(pg: &PartialGraph, model: &'m Model) -> Result<Self, EstimationError> {
        let n = pg.n();
        if n > MAX_NODES {
            return Err(EstimationError::TooLarge(format!(
                "{n} nodes; enumeration supports at most {MAX_NODES}"
            )));
        }
        if pg.num_observed() == 0 {
            return Err(EstimationError::NothingObserved);
        }
        let everything: Vec<Dyad> = all_dyads(n).collect();
        let uncond = Support::collect(model, &Graph::new(n).with_covariates_of(pg.base()), &everything);
        let cond = if pg.free().is_empty() {
            Support::single(model.stats(pg.base()))
        } else {
            Support::collect(model, pg.base(), pg.free().as_slice())
        };
        Ok(ExactLikelihood {
            model,
            uncond,
            cond,
            n_observed: pg.num_observed(),
        })
    }

    pub fn log_normalizer(&self, theta: &[f64]) -> f64 {
        self.uncond.log_normalizer(theta)
    }

    /// Log of the sum of exp(theta . g) over completions of the observed dyads.
    pub fn log_normalizer_conditional(&self, theta: &[f64]) -> f64 {
        self.cond.log_normalizer(theta)
    }

    pub fn loglik(&self, theta: &[f64]) -> f64 {
        self.log_normalizer_conditional(theta) - self.log_normalizer(theta)
    }

    pub fn expected_stats(&self, theta: &[f64]) -> Vec<f64> {
        self.uncond.moments(theta).0
    }

    pub fn gradient(&self, theta: &[f64]) -> Vec<f64> {
        let (mc, _) = self.cond.moments(theta);
        let (mu, _) = self.uncond.moments(theta);
        mc.iter().zip(&mu).map(|(a, b)| a - b).collect()
    }

    /// Observed information Var[g] - Var[g | y_obs].
    pub fn information(&self, theta: &[f64]) -> DMatrix<f64> {
        let (_, cu) = self.uncond.moments(theta);
        let (_, cc) = self.cond.moments(theta);
        cu - cc
    }

    /// A coordinate whose every completion of the observed dyads sits at the
    /// minimum or maximum of its unconditional support.
    fn boundary_coordinate(&self) -> Result<(), EstimationError> {
        let names = self.model.coef_names();
        for k in 0..self.model.dim() {
            let range = |sup: &Support| {
                sup.points.iter().fold((f64::MAX, f64::MIN), |(lo, hi), s| (lo.min(s[k]), hi.max(s[k])))
            };
            let (lo, hi) = range(&self.uncond);
            let (clo, chi) = range(&self.cond);
            let tol = 1e-9 * (1.0 + hi.abs().max(lo.abs()));
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

    /// Damped Newton ascent on the exact log-likelihood.
    pub fn fit(&self) -> Result<FitResult, EstimationError> {
        self.boundary_coordinate()?;
        let p = self.model.dim();
        let mut theta = vec![0.0; p];
        let mut ll = self.loglik(&theta);
        let mut diag = Diagnostics::default();
        for it in 1..=500 {
            diag.iterations = it;
            let grad = self.gradient(&theta);
            let norm = grad.iter().map(|g| g.abs()).fold(0.0, f64::max);
            diag.gradient_norm = norm;
            let (_, cu) = self.uncond.moments(&theta);
            let step = solve_spd(&self.information(&theta), &grad)
                .filter(|s| dot(s, &grad) > 0.0)
                .or_else(|| {
                    let mut reg = cu.clone();
                    for k in 0..p {
                        reg[(k, k)] += 1e-6;
                    }
                    solve_spd(&reg, &grad)
                })
                .unwrap_or_else(|| grad.clone());
            // A small gradient alone is not enough: along a direction of
            // divergence the gradient vanishes but the Newton step does not.
            let step_norm = step.iter().map(|s| s.abs()).fold(0.0, f64::max);
            if norm < 1e-9 && step_norm < 1e-6 && theta.iter().all(|t| t.abs() < 25.0) {
                let se = inverse_spd(&self.information(&theta))
                    .map(|inv| (0..p).map(|k| inv[(k, k)].sqrt()).collect());
                let mut fit = FitResult::new(Method::Exact, self.model, theta, se, self.n_observed, diag);
                fit.set_loglik(ll);
                fit.diagnostics.loglik_method = Some("exact".into());
                return Ok(fit);
            }
            let mut alpha = 1.0;
            let mut next = theta.clone();
            for _ in 0..60 {
                for k in 0..p {
                    next[k] = theta[k] + alpha * step[k];
                }
                if self.loglik(&next) >= ll {
                    break;
                }
                alpha *= 0.5;
            }
            theta = next;
            ll = self.loglik(&theta);
            if theta.iter().any(|t| t.abs() > 25.0) {
                break;
            }
        }
        let (k, &t) = theta
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
            .expect("model has at least one term");
        Err(EstimationError::Boundary {
            coordinate: self.model.coef_names()[k].clone(),
            direction: if t > 0.0 {
                Direction::PlusInfinity
            } else {
                Direction::MinusInfinity
            },
        })
    }
}

/// Exact distribution of the free dyads given the observed ones, keyed by
/// [`Graph::dyad_mask`].
pub fn conditional_pmf(
    pg: &PartialGraph,
    model: &Model,
    theta: &[f64],
) -> Result<HashMap<u64, f64>, EstimationError> {
    if pg.free().len() > MAX_FREE.min(20) || pg.base().num_dyads() > 64 {
        return Err(EstimationError::TooLarge(format!(
            "{} free dyads on {} nodes",
            pg.free().len(),
            pg.n()
        )));
    }
    let mut logs: Vec<(u64, f64)> = Vec::new();
    enumerate(model, pg.base(), pg.free().as_slice(), |g, s| {
        logs.push((g.dyad_mask(), dot(theta, s)));
    });
    let lz = log_sum_exp(logs.iter().map(|(_, l)| *l));
    Ok(logs.into_iter().map(|(m, l)| (m, (l - lz).exp())).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::DyadSet;
    use crate::terms::ModelSpec;

    #[test]
    fn edges_normalizer_closed_form() {
        let g = Graph::from_edges(4, [(0, 1), (1, 2)]).unwrap();
        let m = ModelSpec::parse("edges").unwrap().compile(&g).unwrap();
        let ex = ExactLikelihood::new(&PartialGraph::fully_observed(&g), &m).unwrap();
        let th = [-0.7];
        let closed = 6.0 * (1.0 + (-0.7f64).exp()).ln();
        assert!((ex.log_normalizer(&th) - closed).abs() < 1e-12);
        let fit = ex.fit().unwrap();
        assert!((fit.theta()[0] - (2.0f64 / 4.0).ln()).abs() < 1e-8);
    }

    #[test]
    fn uniform_normalizer_counts_graphs() {
        let g = Graph::new(5);
        let m = ModelSpec::parse("edges + gwesp(0.5) + gwdegree(0.8)").unwrap().compile(&g).unwrap();
        let ex = ExactLikelihood::new(&PartialGraph::fully_observed(&g), &m).unwrap();
        assert!((ex.log_normalizer(&[0.0; 3]) - 10.0 * 2f64.ln()).abs() < 1e-10);
    }

    #[test]
    fn conditional_normalizer_counts_completions() {
        let g = Graph::from_edges(4, [(0, 1), (2, 3)]).unwrap();
        let free = DyadSet::new(vec![Dyad::new(0, 2).unwrap(), Dyad::new(1, 3).unwrap(), Dyad::new(0, 1).unwrap()]).unwrap();
        let pg = PartialGraph::new(&g, free).unwrap();
        let m = ModelSpec::parse("edges + gwesp(0.5)").unwrap().compile(&g).unwrap();
        let ex = ExactLikelihood::new(&pg, &m).unwrap();
        assert!((ex.log_normalizer_conditional(&[0.0, 0.0]) - 3.0 * 2f64.ln()).abs() < 1e-12);
        let pmf = conditional_pmf(&pg, &m, &[0.3, -0.2]).unwrap();
        assert_eq!(pmf.len(), 8);
        assert!((pmf.values().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn gray_code_stats_match_direct() {
        let g = Graph::new(5);
        let m = ModelSpec::parse("edges + gwesp(0.7) + gwdegree(0.4)").unwrap().compile(&g).unwrap();
        let dyads: Vec<Dyad> = all_dyads(5).collect();
        let mut worst: f64 = 0.0;
        enumerate(&m, &g, &dyads, |h, s| {
            for (a, b) in m.stats(h).iter().zip(s) {
                worst = worst.max((a - b).abs());
            }
        });
        assert!(worst < 1e-9);
    }

    #[test]
    fn flat_direction_is_boundary_not_a_fit() {
        // A 4-cycle with its chord unobserved: the gradient vanishes far out
        // along a ridge, but no finite maximizer exists.
        let g = Graph::from_edges(4, [(0, 2), (0, 3), (1, 2), (1, 3)]).unwrap();
        let pg = PartialGraph::new(&g, DyadSet::new(vec![Dyad::new(0, 1).unwrap()]).unwrap()).unwrap();
        let m = ModelSpec::parse("edges + gwesp(0.5)").unwrap().compile(&g).unwrap();
        let ex = ExactLikelihood::new(&pg, &m).unwrap();
        assert!(matches!(ex.fit(), Err(EstimationError::Boundary { .. })));
    }

    #[test]
    fn complete_graph_is_boundary() {
        let g = Graph::complete(4);
        let m = ModelSpec::parse("edges").unwrap().compile(&g).unwrap();
        let ex = ExactLikelihood::new(&PartialGraph::fully_observed(&g), &m).unwrap();
        assert!(matches!(
            ex.fit(),
            Err(EstimationError::Boundary {
                direction: Direction::PlusInfinity,
                ..
            })
        ));
    }

    #[test]
    fn too_large_is_rejected() {
        let g = Graph::new(7);
        let m = ModelSpec::parse("edges").unwrap().compile(&g).unwrap();
        assert!(matches!(
            ExactLikelihood::new(&PartialGraph::fully_observed(&g), &m),
            Err(EstimationError::TooLarge(_))
        ));
    }
}
