//! Summary statistics of an observed network.

use serde::{Deserialize, Serialize};

use crate::graph::Graph;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Descriptives {
    pub size: usize,
    pub edges: usize,
    pub directed: bool,
    pub density: f64,
    pub mean_degree: f64,
    /// Sample standard deviation (n - 1 denominator).
    pub sd_degree: f64,
    /// Adjusted Fisher-Pearson sample skewness; `None` for n < 3 or zero spread.
    pub skewness_degree: Option<f64>,
    pub isolates: usize,
    /// Global clustering coefficient; `None` when there are no connected triples.
    pub transitivity: Option<f64>,
}

pub fn descriptives(g: &Graph) -> Descriptives {
    let n = g.n();
    let degs: Vec<f64> = g.degrees().iter().map(|&d| d as f64).collect();
    let nf = n as f64;
    let mean = degs.iter().sum::<f64>() / nf;
    let m2 = degs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / nf;
    let m3 = degs.iter().map(|d| (d - mean).powi(3)).sum::<f64>() / nf;
    let sd = if n > 1 {
        (m2 * nf / (nf - 1.0)).sqrt()
    } else {
        0.0
    };
    let skewness = (n >= 3 && m2 > 0.0).then(|| {
        let g1 = m3 / m2.powf(1.5);
        g1 * (nf * (nf - 1.0)).sqrt() / (nf - 2.0)
    });
    Descriptives {
        size: n,
        edges: g.edge_count(),
        directed: false,
        density: g.density(),
        mean_degree: mean,
        sd_degree: sd,
        skewness_degree: skewness,
        isolates: g.degrees().iter().filter(|&&d| d == 0).count(),
        transitivity: if n < 3 { None } else { transitivity(g) },
    }
}

pub fn triangle_count(g: &Graph) -> usize {
    g.edge_list()
        .into_iter()
        .map(|(i, j)| g.shared_partners(i, j))
        .sum::<usize>()
        / 3
}

/// 3 x triangles / connected triples.
pub fn transitivity(g: &Graph) -> Option<f64> {
    let triples: usize = g.degrees().iter().map(|&d| d * d.saturating_sub(1) / 2).sum();
    (triples > 0).then(|| 3.0 * triangle_count(g) as f64 / triples as f64)
}
