//! Undirected simple graphs with node attributes, dyad covariates and
//! partially observed (held-out) dyad states.
//!
//! Adjacency is stored as one bit row per node so that neighbourhood
//! intersections (shared partners) reduce to word-wise `AND` + popcount.
//! Every mutation goes through [`Graph::set_edge`], which writes both bits,
//! so `has_edge(i, j) == has_edge(j, i)` holds for every reachable value.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("self-loop on node {0}: loops are not allowed")]
    SelfLoop(usize),
    #[error("node {node} out of range for a graph with {n} nodes")]
    NodeOutOfRange { node: usize, n: usize },
    #[error("dyad index {index} out of range for a graph with {n} nodes")]
    DyadIndexOutOfRange { index: usize, n: usize },
    #[error("dyad ({0}, {1}) appears more than once")]
    DuplicateDyad(usize, usize),
    #[error("attribute `{name}` has {len} values but the graph has {n} nodes")]
    AttributeLength { name: String, len: usize, n: usize },
    #[error("dyad covariate `{name}` must be a symmetric {n}x{n} matrix: {reason}")]
    BadCovariate {
        name: String,
        n: usize,
        reason: String,
    },
    #[error("{path}:{line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },
    #[error("graph must have at least one node")]
    Empty,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Number of unordered pairs among `n` nodes.
pub fn num_dyads(n: usize) -> usize {
    n * n.saturating_sub(1) / 2
}

/// Linear index of the unordered pair `{i, j}` in row-major upper-triangular
/// order: (0,1), (0,2), ..., (0,n-1), (1,2), ...
pub fn dyad_index(i: usize, j: usize, n: usize) -> Result<usize, GraphError> {
    let d = Dyad::new(i, j)?;
    d.check(n)?;
    Ok(d.index(n))
}

/// An unordered node pair, stored with `i < j`.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Dyad {
    i: usize,
    j: usize,
}

impl Dyad {
    pub fn new(a: usize, b: usize) -> Result<Self, GraphError> {
        match a.cmp(&b) {
            std::cmp::Ordering::Less => Ok(Dyad { i: a, j: b }),
            std::cmp::Ordering::Greater => Ok(Dyad { i: b, j: a }),
            std::cmp::Ordering::Equal => Err(GraphError::SelfLoop(a)),
        }
    }

    pub fn from_index(index: usize, n: usize) -> Result<Self, GraphError> {
        if index >= num_dyads(n) {
            return Err(GraphError::DyadIndexOutOfRange { index, n });
        }
        // Row i starts at i*n - i(i+1)/2.
        let mut i = 0;
        let mut start = 0;
        loop {
            let row_len = n - i - 1;
            if index < start + row_len {
                return Ok(Dyad {
                    i,
                    j: i + 1 + (index - start),
                });
            }
            start += row_len;
            i += 1;
        }
    }

    #[inline]
    pub fn i(&self) -> usize {
        self.i
    }

    #[inline]
    pub fn j(&self) -> usize {
        self.j
    }

    #[inline]
    pub fn index(&self, n: usize) -> usize {
        self.i * n - self.i * (self.i + 1) / 2 + (self.j - self.i - 1)
    }

    pub fn check(&self, n: usize) -> Result<(), GraphError> {
        if self.j >= n {
            return Err(GraphError::NodeOutOfRange { node: self.j, n });
        }
        Ok(())
    }

    pub fn contains(&self, v: usize) -> bool {
        self.i == v || self.j == v
    }
}

impl fmt::Display for Dyad {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.i, self.j)
    }
}

/// All dyads of an `n`-node graph in index order.
pub fn all_dyads(n: usize) -> impl Iterator<Item = Dyad> {
    (0..n).flat_map(move |i| ((i + 1)..n).map(move |j| Dyad { i, j }))
}

/// An ordered collection of distinct dyads.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Dyad>", into = "Vec<Dyad>")]
pub struct DyadSet(Vec<Dyad>);

impl DyadSet {
    pub fn new(dyads: Vec<Dyad>) -> Result<Self, GraphError> {
        let mut sorted = dyads.clone();
        sorted.sort_unstable();
        if let Some(w) = sorted.windows(2).find(|w| w[0] == w[1]) {
            return Err(GraphError::DuplicateDyad(w[0].i, w[0].j));
        }
        Ok(DyadSet(dyads))
    }

    pub fn empty() -> Self {
        DyadSet(Vec::new())
    }

    pub fn all(n: usize) -> Self {
        DyadSet(all_dyads(n).collect())
    }

    /// Every dyad incident to node `v`, in order of the other endpoint.
    pub fn incident(v: usize, n: usize) -> Self {
        DyadSet(
            (0..n)
                .filter(|&u| u != v)
                .map(|u| Dyad::new(u, v).expect("u != v"))
                .collect(),
        )
    }

    pub fn check(&self, n: usize) -> Result<(), GraphError> {
        self.0.iter().try_for_each(|d| d.check(n))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Dyad> {
        self.0.iter()
    }

    pub fn as_slice(&self) -> &[Dyad] {
        &self.0
    }

    /// Membership mask indexed by [`Dyad::index`].
    pub fn mask(&self, n: usize) -> Vec<bool> {
        let mut mask = vec![false; num_dyads(n)];
        for d in &self.0 {
            mask[d.index(n)] = true;
        }
        mask
    }
}

impl TryFrom<Vec<Dyad>> for DyadSet {
    type Error = GraphError;
    fn try_from(v: Vec<Dyad>) -> Result<Self, Self::Error> {
        DyadSet::new(v)
    }
}

impl From<DyadSet> for Vec<Dyad> {
    fn from(s: DyadSet) -> Self {
        s.0
    }
}

impl<'a> IntoIterator for &'a DyadSet {
    type Item = &'a Dyad;
    type IntoIter = std::slice::Iter<'a, Dyad>;
    fn into_iter(self) -> Self::IntoIter {
        self.0.iter()
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
struct Covariates {
    nodes: BTreeMap<String, Vec<f64>>,
    dyads: BTreeMap<String, Vec<f64>>,
}

/// Undirected simple graph on nodes `0..n`.
#[derive(Clone, PartialEq)]
pub struct Graph {
    n: usize,
    words: usize,
    rows: Vec<u64>,
    degree: Vec<usize>,
    edges: usize,
    covariates: Arc<Covariates>,
}

impl fmt::Debug for Graph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Graph")
            .field("n", &self.n)
            .field("edges", &self.edge_list())
            .field("node_attrs", &self.covariates.nodes.keys())
            .field("dyad_covariates", &self.covariates.dyads.keys())
            .finish()
    }
}

impl Graph {
    /// Empty graph on `n` nodes.
    pub fn new(n: usize) -> Self {
        let words = n.div_ceil(64).max(1);
        Graph {
            n,
            words,
            rows: vec![0; n * words],
            degree: vec![0; n],
            edges: 0,
            covariates: Arc::new(Covariates::default()),
        }
    }

    pub fn from_edges<I>(n: usize, edges: I) -> Result<Self, GraphError>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        let mut g = Graph::new(n);
        for (a, b) in edges {
            let d = Dyad::new(a, b)?;
            d.check(n)?;
            if g.has_dyad(d) {
                return Err(GraphError::DuplicateDyad(d.i, d.j));
            }
            g.set_edge(d, true);
        }
        Ok(g)
    }

    pub fn complete(n: usize) -> Self {
        let mut g = Graph::new(n);
        for d in all_dyads(n) {
            g.set_edge(d, true);
        }
        g
    }

    /// Star with centre 0.
    pub fn star(n: usize) -> Self {
        Graph::from_edges(n, (1..n).map(|v| (0, v))).expect("valid star")
    }

    pub fn cycle(n: usize) -> Self {
        Graph::from_edges(n, (0..n).map(|v| (v, (v + 1) % n))).expect("valid cycle")
    }

    pub fn with_node_attr(mut self, name: &str, values: Vec<f64>) -> Result<Self, GraphError> {
        if values.len() != self.n {
            return Err(GraphError::AttributeLength {
                name: name.to_string(),
                len: values.len(),
                n: self.n,
            });
        }
        Arc::make_mut(&mut self.covariates)
            .nodes
            .insert(name.to_string(), values);
        Ok(self)
    }

    /// Attach a dense row-major `n x n` symmetric matrix.
    pub fn with_dyad_covariate(mut self, name: &str, matrix: Vec<f64>) -> Result<Self, GraphError> {
        let n = self.n;
        let bad = |reason: String| GraphError::BadCovariate {
            name: name.to_string(),
            n,
            reason,
        };
        if matrix.len() != n * n {
            return Err(bad(format!("got {} entries", matrix.len())));
        }
        for i in 0..n {
            for j in (i + 1)..n {
                if matrix[i * n + j] != matrix[j * n + i] {
                    return Err(bad(format!("entry ({i}, {j}) differs from ({j}, {i})")));
                }
            }
        }
        Arc::make_mut(&mut self.covariates)
            .dyads
            .insert(name.to_string(), matrix);
        Ok(self)
    }

    /// Copies attributes and covariates from `other` (same node count).
    pub fn with_covariates_of(mut self, other: &Graph) -> Self {
        assert_eq!(self.n, other.n, "node count mismatch");
        self.covariates = Arc::clone(&other.covariates);
        self
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn edge_count(&self) -> usize {
        self.edges
    }

    pub fn num_dyads(&self) -> usize {
        num_dyads(self.n)
    }

    pub fn density(&self) -> f64 {
        if self.n < 2 {
            return 0.0;
        }
        self.edges as f64 / self.num_dyads() as f64
    }

    #[inline]
    pub fn degree(&self, v: usize) -> usize {
        self.degree[v]
    }

    pub fn degrees(&self) -> &[usize] {
        &self.degree
    }

    #[inline]
    fn row(&self, v: usize) -> &[u64] {
        &self.rows[v * self.words..(v + 1) * self.words]
    }

    #[inline]
    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        a != b && (self.rows[a * self.words + b / 64] >> (b % 64)) & 1 == 1
    }

    #[inline]
    pub fn has_dyad(&self, d: Dyad) -> bool {
        self.has_edge(d.i, d.j)
    }

    /// Sets the state of `d`; returns the previous state.
    pub fn set_edge(&mut self, d: Dyad, on: bool) -> bool {
        let was = self.has_dyad(d);
        if was != on {
            let (i, j) = (d.i, d.j);
            self.rows[i * self.words + j / 64] ^= 1 << (j % 64);
            self.rows[j * self.words + i / 64] ^= 1 << (i % 64);
            if on {
                self.degree[i] += 1;
                self.degree[j] += 1;
                self.edges += 1;
            } else {
                self.degree[i] -= 1;
                self.degree[j] -= 1;
                self.edges -= 1;
            }
        }
        was
    }

    /// Flips `d` in place.
    pub fn toggle_in_place(&mut self, d: Dyad) {
        let on = !self.has_dyad(d);
        self.set_edge(d, on);
    }

    /// Copy of the graph with `d` flipped.
    pub fn toggle(&self, d: Dyad) -> Result<Graph, GraphError> {
        d.check(self.n)?;
        let mut g = self.clone();
        g.toggle_in_place(d);
        Ok(g)
    }

    pub fn neighbors(&self, v: usize) -> impl Iterator<Item = usize> + '_ {
        bits(self.row(v))
    }

    /// Number of common neighbours of `a` and `b`.
    #[inline]
    pub fn shared_partners(&self, a: usize, b: usize) -> usize {
        self.row(a)
            .iter()
            .zip(self.row(b))
            .map(|(x, y)| (x & y).count_ones() as usize)
            .sum()
    }

    pub fn common_neighbors(&self, a: usize, b: usize) -> impl Iterator<Item = usize> + '_ {
        let (ra, rb) = (self.row(a), self.row(b));
        (0..self.words).flat_map(move |w| {
            let mut word = ra[w] & rb[w];
            std::iter::from_fn(move || {
                if word == 0 {
                    return None;
                }
                let bit = word.trailing_zeros() as usize;
                word &= word - 1;
                Some(w * 64 + bit)
            })
        })
    }

    /// Edges as `(i, j)` with `i < j`, in dyad-index order.
    pub fn edge_list(&self) -> Vec<(usize, usize)> {
        (0..self.n)
            .flat_map(|i| self.neighbors(i).filter(move |&j| j > i).map(move |j| (i, j)))
            .collect()
    }

    pub fn node_attr(&self, name: &str) -> Option<&[f64]> {
        self.covariates.nodes.get(name).map(Vec::as_slice)
    }

    pub fn node_attr_names(&self) -> impl Iterator<Item = &str> {
        self.covariates.nodes.keys().map(String::as_str)
    }

    pub fn dyad_covariate(&self, name: &str) -> Option<&[f64]> {
        self.covariates.dyads.get(name).map(Vec::as_slice)
    }

    pub fn dyad_covariate_names(&self) -> impl Iterator<Item = &str> {
        self.covariates.dyads.keys().map(String::as_str)
    }

    /// Dyad states packed into an integer, bit k = state of dyad index k.
    /// Only meaningful for graphs with at most 64 dyads.
    pub fn dyad_mask(&self) -> u64 {
        assert!(self.num_dyads() <= 64, "too many dyads for a u64 mask");
        all_dyads(self.n)
            .enumerate()
            .filter(|(_, d)| self.has_dyad(*d))
            .fold(0u64, |acc, (k, _)| acc | (1 << k))
    }
}

fn bits(row: &[u64]) -> impl Iterator<Item = usize> + '_ {
    row.iter().enumerate().flat_map(|(w, &word)| {
        let mut word = word;
        std::iter::from_fn(move || {
            if word == 0 {
                return None;
            }
            let bit = word.trailing_zeros() as usize;
            word &= word - 1;
            Some(w * 64 + bit)
        })
    })
}

/// A graph whose states on `free` are unknown.
///
/// The states stored in `base` for free dyads are cleared on construction, so
/// nothing downstream can read a held-out value by accident.
#[derive(Clone, Debug)]
pub struct PartialGraph {
    base: Graph,
    free: DyadSet,
    free_mask: Vec<bool>,
}

impl PartialGraph {
    pub fn new(graph: &Graph, free: DyadSet) -> Result<Self, GraphError> {
        free.check(graph.n())?;
        let mut base = graph.clone();
        for d in &free {
            base.set_edge(*d, false);
        }
        let free_mask = free.mask(graph.n());
        Ok(PartialGraph {
            base,
            free,
            free_mask,
        })
    }

    pub fn fully_observed(graph: &Graph) -> Self {
        PartialGraph::new(graph, DyadSet::empty()).expect("empty free set is valid")
    }

    /// Observed states, with free dyads set to 0.
    pub fn base(&self) -> &Graph {
        &self.base
    }

    pub fn free(&self) -> &DyadSet {
        &self.free
    }

    pub fn n(&self) -> usize {
        self.base.n()
    }

    #[inline]
    pub fn is_free(&self, d: Dyad) -> bool {
        self.free_mask[d.index(self.base.n())]
    }

    pub fn observed_dyads(&self) -> impl Iterator<Item = Dyad> + '_ {
        all_dyads(self.base.n()).filter(|d| !self.is_free(*d))
    }

    pub fn num_observed(&self) -> usize {
        self.base.num_dyads() - self.free.len()
    }

    /// Fraction of observed dyads that are edges; `None` when nothing is observed.
    pub fn observed_density(&self) -> Option<f64> {
        let obs = self.num_observed();
        (obs > 0).then(|| self.base.edge_count() as f64 / obs as f64)
    }

    /// True when `g` matches every observed dyad state.
    pub fn agrees_with(&self, g: &Graph) -> bool {
        g.n() == self.n() && self.observed_dyads().all(|d| g.has_dyad(d) == self.base.has_dyad(d))
    }
}
