//! Maximum pseudo-likelihood: logistic regression of observed dyad states on
//! their change statistics, computed at the observed graph with unobserved
//! dyads set to zero.

use std::collections::HashMap;

use nalgebra::DMatrix;

use super::linalg::{collinear_coordinates, condition_ratio, inverse_spd, log1p_exp, logistic, solve_spd};
use super::{Diagnostics, Direction, EstimationError, FitResult, Method};
use crate::graph::PartialGraph;
use crate::terms::{dot, Model};

/// Distinct change-statistic rows with their dyad and edge counts.
#[derive(Clone, Debug)]
pub struct Design {
    pub rows: Vec<Vec<f64>>,
    pub total: Vec<f64>,
    pub edges: Vec<f64>,
}

impl Design {
    pub fn build(pg: &PartialGraph, model: &Model) -> Self {
        let g = pg.base();
        let mut index: HashMap<Vec<u64>, usize> = HashMap::new();
        let mut design = Design {
            rows: Vec::new(),
            total: Vec::new(),
            edges: Vec::new(),
        };
        let mut x = vec![0.0; model.dim()];
        for d in pg.observed_dyads() {
            model.change_stats_into(g, d, &mut x);
            let key: Vec<u64> = x.iter().map(|v| (v + 0.0).to_bits()).collect();
            let r = *index.entry(key).or_insert_with(|| {
                design.rows.push(x.clone());
                design.total.push(0.0);
                design.edges.push(0.0);
                design.rows.len() - 1
            });
            design.total[r] += 1.0;
            if g.has_dyad(d) {
                design.edges[r] += 1.0;
            }
        }
        design
    }

    pub fn num_dyads(&self) -> f64 {
        self.total.iter().sum()
    }

    pub fn loglik(&self, theta: &[f64]) -> f64 {
        self.rows
            .iter()
            .enumerate()
            .map(|(r, x)| {
                let eta = dot(theta, x);
                self.edges[r] * eta - self.total[r] * log1p_exp(eta)
            })
            .sum()
    }

    /// Score vector and Fisher information.
    fn score_info(&self, theta: &[f64]) -> (Vec<f64>, DMatrix<f64>) {
        let p = theta.len();
        let mut score = vec![0.0; p];
        let mut info = DMatrix::zeros(p, p);
        for (r, x) in self.rows.iter().enumerate() {
            let mu = logistic(dot(theta, x));
            let resid = self.edges[r] - self.total[r] * mu;
            let w = self.total[r] * mu * (1.0 - mu);
            for a in 0..p {
                score[a] += resid * x[a];
                for b in 0..p {
                    info[(a, b)] += w * x[a] * x[b];
                }
            }
        }
        (score, info)
    }

    fn gram(&self, p: usize) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(p, p);
        for (r, x) in self.rows.iter().enumerate() {
            for a in 0..p {
                for b in 0..p {
                    m[(a, b)] += self.total[r] * x[a] * x[b];
                }
            }
        }
        m
    }
}

/// Detects coordinates whose estimate diverges: a sign-constant change
/// statistic whose nonzero rows are all edges or all nulls.
pub fn check_separation(design: &Design, model: &Model) -> Result<(), EstimationError> {
    for k in 0..model.dim() {
        let (mut pos, mut neg) = (false, false);
        let (mut tot, mut ones) = (0.0, 0.0);
        for (r, x) in design.rows.iter().enumerate() {
            if x[k] > 0.0 {
                pos = true;
            } else if x[k] < 0.0 {
                neg = true;
            } else {
                continue;
            }
            tot += design.total[r];
            ones += design.edges[r];
        }
        if !pos && !neg {
            return Err(EstimationError::Singular {
                terms: vec![model.coef_names()[k].clone()],
            });
        }
        if pos && neg {
            continue;
        }
        let up = if ones == 0.0 {
            false
        } else if ones == tot {
            true
        } else {
            continue;
        };
        let direction = if up == pos {
            Direction::PlusInfinity
        } else {
            Direction::MinusInfinity
        };
        return Err(EstimationError::Boundary {
            coordinate: model.coef_names()[k].clone(),
            direction,
        });
    }
    Ok(())
}

/// Newton-Raphson with step halving on the logistic log-likelihood.
pub(crate) fn irls(
    design: &Design,
    model: &Model,
    start: &[f64],
) -> Result<(Vec<f64>, DMatrix<f64>, usize, f64), EstimationError> {
    let p = model.dim();
    let mut theta = start.to_vec();
    let mut ll = design.loglik(&theta);
    for it in 1..=200 {
        let (score, info) = design.score_info(&theta);
        let step = solve_spd(&info, &score).ok_or_else(|| EstimationError::Singular {
            terms: collinear_coordinates(&info)
                .into_iter()
                .map(|k| model.coef_names()[k].clone())
                .collect(),
        })?;
        let mut alpha = 1.0;
        let mut next = theta.clone();
        let mut next_ll = f64::NEG_INFINITY;
        for _ in 0..40 {
            for k in 0..p {
                next[k] = theta[k] + alpha * step[k];
            }
            next_ll = design.loglik(&next);
            if next_ll >= ll - 1e-12 * ll.abs().max(1.0) {
                break;
            }
            alpha *= 0.5;
        }
        let change = step.iter().map(|s| (alpha * s).abs()).fold(0.0, f64::max);
        theta = next;
        ll = next_ll;
        let big = theta.iter().map(|t| t.abs()).fold(0.0, f64::max);
        if big > 1e3 {
            break;
        }
        if change < 1e-10 * (1.0 + big) {
            let (score, info) = design.score_info(&theta);
            let norm = score.iter().map(|s| s.abs()).fold(0.0, f64::max);
            return Ok((theta, info, it, norm));
        }
    }
    let (k, &t) = theta
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
        .expect("model has at least one term");
    Err(EstimationError::Boundary {
        coordinate: model.coef_names()[k].clone(),
        direction: if t > 0.0 {
            Direction::PlusInfinity
        } else {
            Direction::MinusInfinity
        },
    })
}

/// Maximum pseudo-likelihood estimate. For dyadic independence models this
/// is the MLE and the returned log-likelihood, AIC and BIC are exact.
pub fn mple(pg: &PartialGraph, model: &Model) -> Result<FitResult, EstimationError> {
    let design = Design::build(pg, model);
    if design.num_dyads() == 0.0 {
        return Err(EstimationError::NothingObserved);
    }
    check_separation(&design, model)?;
    let p = model.dim();
    let gram = design.gram(p);
    if condition_ratio(&gram) < 1e-12 {
        return Err(EstimationError::Singular {
            terms: collinear_coordinates(&gram)
                .into_iter()
                .map(|k| model.coef_names()[k].clone())
                .collect(),
        });
    }
    let (theta, info, iterations, norm) = irls(&design, model, &vec![0.0; p])?;
    let se = inverse_spd(&info).map(|inv| (0..p).map(|k| inv[(k, k)].sqrt()).collect());
    let mut diagnostics = Diagnostics {
        iterations,
        gradient_norm: norm,
        ..Diagnostics::default()
    };
    if !model.is_dyad_independent() {
        diagnostics
            .warnings
            .push("pseudo-likelihood standard errors are not valid for dyad-dependent terms".into());
    }
    let mut fit = FitResult::new(Method::Mple, model, theta, se, pg.num_observed(), diagnostics);
    if model.is_dyad_independent() {
        fit.set_loglik(design.loglik(&fit.theta()));
        fit.diagnostics.loglik_method = Some("exact".into());
    }
    Ok(fit)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{Dyad, DyadSet, Graph};
    use crate::terms::ModelSpec;

    fn lazega_like() -> Graph {
        // 36 nodes, 115 edges
        let n = 36;
        let mut g = Graph::new(n);
        let mut count = 0;
        'outer: for i in 0..n {
            for j in (i + 1)..n {
                if (i * 7 + j * 3) % 11 < 2 || (i + j) % 13 == 0 {
                    g.set_edge(Dyad::new(i, j).unwrap(), true);
                    count += 1;
                    if count == 115 {
                        break 'outer;
                    }
                }
            }
        }
        assert_eq!(g.edge_count(), 115);
        g
    }

    #[test]
    fn edges_only_closed_form() {
        let g = lazega_like();
        let m = ModelSpec::parse("edges").unwrap().compile(&g).unwrap();
        let fit = mple(&PartialGraph::fully_observed(&g), &m).unwrap();
        let theta = fit.theta()[0];
        assert!((theta - (115.0f64 / 515.0).ln()).abs() < 1e-8);
        assert!((theta + 1.499).abs() < 5e-4);
        // SE of a logit proportion: 1 / sqrt(N p (1 - p))
        let p: f64 = 115.0 / 630.0;
        let se = 1.0 / (630.0 * p * (1.0 - p)).sqrt();
        assert!((fit.std_errors().unwrap()[0] - se).abs() < 1e-8);
        let ll = 115.0 * p.ln() + 515.0 * (1.0 - p).ln();
        assert!((fit.loglik.unwrap() - ll).abs() < 1e-8);
        assert!((fit.aic.unwrap() - 600.8).abs() < 0.05);
        assert!((fit.bic.unwrap() - 605.2).abs() < 0.05);
    }

    #[test]
    fn missing_dyads_are_ignored() {
        let g = lazega_like();
        let free = DyadSet::incident(0, 36);
        let pg = PartialGraph::new(&g, free).unwrap();
        let m = ModelSpec::parse("edges").unwrap().compile(&g).unwrap();
        let fit = mple(&pg, &m).unwrap();
        let obs = pg.num_observed() as f64;
        let e = pg.observed_dyads().filter(|d| g.has_dyad(*d)).count() as f64;
        assert!((fit.theta()[0] - (e / (obs - e)).ln()).abs() < 1e-8);
        assert_eq!(fit.n_observed_dyads, 630 - 35);
    }

    #[test]
    fn separation_names_coordinate() {
        let g = Graph::from_edges(4, [(0, 1), (2, 3)])
            .unwrap()
            .with_node_attr("a", vec![1.0, 1.0, 2.0, 2.0])
            .unwrap();
        let m = ModelSpec::parse("edges + nodematch(\"a\")").unwrap().compile(&g).unwrap();
        match mple(&PartialGraph::fully_observed(&g), &m) {
            Err(EstimationError::Boundary { coordinate, direction }) => {
                assert_eq!(coordinate, "nodematch.a");
                assert_eq!(direction, Direction::PlusInfinity);
            }
            other => panic!("expected boundary error, got {other:?}"),
        }
        let empty = Graph::new(5);
        let m = ModelSpec::parse("edges").unwrap().compile(&empty).unwrap();
        assert!(matches!(
            mple(&PartialGraph::fully_observed(&empty), &m),
            Err(EstimationError::Boundary {
                direction: Direction::MinusInfinity,
                ..
            })
        ));
    }

    #[test]
    fn collinear_terms_are_singular() {
        let g = Graph::from_edges(5, [(0, 1), (1, 2), (3, 4), (0, 4)])
            .unwrap()
            .with_node_attr("a", vec![1.0; 5])
            .unwrap();
        let m = ModelSpec::parse("edges + nodematch(\"a\")").unwrap().compile(&g).unwrap();
        match mple(&PartialGraph::fully_observed(&g), &m) {
            Err(EstimationError::Singular { terms }) => {
                assert_eq!(terms, vec!["edges".to_string(), "nodematch.a".to_string()]);
            }
            other => panic!("expected singular error, got {other:?}"),
        }
    }

    #[test]
    fn logistic_oracle_two_groups() {
        // edges + nodematch on two groups is a saturated 2-cell logistic model.
        let n = 8;
        let attr: Vec<f64> = (0..n).map(|i| (i % 2) as f64).collect();
        let g = Graph::from_edges(n, [(0, 2), (2, 4), (1, 3), (0, 1), (5, 6), (4, 6), (1, 5)])
            .unwrap()
            .with_node_attr("a", attr.clone())
            .unwrap();
        let m = ModelSpec::parse("edges + nodematch(\"a\")").unwrap().compile(&g).unwrap();
        let fit = mple(&PartialGraph::fully_observed(&g), &m).unwrap();
        let (mut same, mut same_e, mut diff, mut diff_e) = (0.0, 0.0, 0.0, 0.0);
        for d in crate::graph::all_dyads(n) {
            let e = if g.has_dyad(d) { 1.0 } else { 0.0 };
            if attr[d.i()] == attr[d.j()] {
                same += 1.0;
                same_e += e;
            } else {
                diff += 1.0;
                diff_e += e;
            }
        }
        let logit = |k: f64, t: f64| (k / (t - k)).ln();
        let th = fit.theta();
        assert!((th[0] - logit(diff_e, diff)).abs() < 1e-8);
        assert!((th[0] + th[1] - logit(same_e, same)).abs() < 1e-8);
    }
}
