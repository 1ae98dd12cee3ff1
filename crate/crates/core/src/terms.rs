//! Model terms: sufficient statistics `g(y)` and their toggle change scores.
//!
//! A [`ModelSpec`] is an ordered list of [`TermSpec`]s. Before use it is
//! compiled against a graph into a [`Model`], which resolves attribute
//! vectors and homophily levels once so the change-score hot path does no
//! lookups.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{Dyad, Graph};

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("model has no terms")]
    NoTerms,
    #[error("node attribute `{0}` not found")]
    MissingAttribute(String),
    #[error("dyad covariate `{0}` not found")]
    MissingCovariate(String),
    #[error("decay must be finite and non-negative, got {0}")]
    BadDecay(f64),
    #[error("nodematch `{attr}`: keep index {index} out of range (attribute has {levels} levels)")]
    BadKeep {
        attr: String,
        index: usize,
        levels: usize,
    },
    #[error("unknown term `{0}`")]
    UnknownTerm(String),
    #[error("cannot parse term `{term}`: {msg}")]
    Syntax { term: String, msg: String },
    #[error("coefficient vector has length {got}, model has {expected} statistics")]
    DimensionMismatch { expected: usize, got: usize },
}

/// One model term.
#[derive(Clone, Debug, PartialEq)]
pub enum TermSpec {
    Edges,
    Gwesp { decay: f64 },
    Gwdegree { decay: f64 },
    /// Count of edges whose endpoints share the attribute value.
    NodeMatch { attr: String },
    /// One count per kept level. `keep` holds 1-based positions into the
    /// ascending list of distinct observed values; `None` keeps all levels.
    NodeMatchDiff { attr: String, keep: Option<Vec<usize>> },
    NodeCov { attr: String },
    EdgeCov { name: String },
}

/// JSON shape of a term, e.g. `{"term":"nodematch","attr":"Office","diff":true,"keep":[1,2]}`.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTerm {
    term: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    decay: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    attr: Option<String>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    diff: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    keep: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    name: Option<String>,
}

impl TryFrom<RawTerm> for TermSpec {
    type Error = ModelError;

    fn try_from(raw: RawTerm) -> Result<Self, Self::Error> {
        let need = |field: Option<String>, what: &str| {
            field.ok_or_else(|| ModelError::Syntax {
                term: raw.term.clone(),
                msg: format!("missing `{what}`"),
            })
        };
        let decay = || {
            raw.decay.ok_or_else(|| ModelError::Syntax {
                term: raw.term.clone(),
                msg: "missing `decay`".into(),
            })
        };
        Ok(match raw.term.to_ascii_lowercase().as_str() {
            "edges" => TermSpec::Edges,
            "gwesp" => TermSpec::Gwesp { decay: decay()? },
            "gwdegree" | "gwdeg" => TermSpec::Gwdegree { decay: decay()? },
            "nodematch" if raw.diff => TermSpec::NodeMatchDiff {
                attr: need(raw.attr.clone(), "attr")?,
                keep: raw.keep.clone(),
            },
            "nodematch" => {
                if raw.keep.is_some() {
                    return Err(ModelError::Syntax {
                        term: raw.term.clone(),
                        msg: "`keep` requires `diff: true`".into(),
                    });
                }
                TermSpec::NodeMatch {
                    attr: need(raw.attr.clone(), "attr")?,
                }
            }
            "nodecov" => TermSpec::NodeCov {
                attr: need(raw.attr.clone(), "attr")?,
            },
            "edgecov" => TermSpec::EdgeCov {
                name: need(raw.name.clone().or(raw.attr.clone()), "name")?,
            },
            other => return Err(ModelError::UnknownTerm(other.to_string())),
        })
    }
}

impl From<&TermSpec> for RawTerm {
    fn from(t: &TermSpec) -> Self {
        let mut raw = RawTerm::default();
        match t {
            TermSpec::Edges => raw.term = "edges".into(),
            TermSpec::Gwesp { decay } => {
                raw.term = "gwesp".into();
                raw.decay = Some(*decay);
            }
            TermSpec::Gwdegree { decay } => {
                raw.term = "gwdegree".into();
                raw.decay = Some(*decay);
            }
            TermSpec::NodeMatch { attr } => {
                raw.term = "nodematch".into();
                raw.attr = Some(attr.clone());
            }
            TermSpec::NodeMatchDiff { attr, keep } => {
                raw.term = "nodematch".into();
                raw.attr = Some(attr.clone());
                raw.diff = true;
                raw.keep = keep.clone();
            }
            TermSpec::NodeCov { attr } => {
                raw.term = "nodecov".into();
                raw.attr = Some(attr.clone());
            }
            TermSpec::EdgeCov { name } => {
                raw.term = "edgecov".into();
                raw.name = Some(name.clone());
            }
        }
        raw
    }
}

impl Serialize for TermSpec {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        RawTerm::from(self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for TermSpec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let raw = RawTerm::deserialize(d)?;
        TermSpec::try_from(raw).map_err(serde::de::Error::custom)
    }
}

impl fmt::Display for TermSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TermSpec::Edges => write!(f, "edges"),
            TermSpec::Gwesp { decay } => write!(f, "gwesp({decay})"),
            TermSpec::Gwdegree { decay } => write!(f, "gwdegree({decay})"),
            TermSpec::NodeMatch { attr } => write!(f, "nodematch({attr})"),
            TermSpec::NodeMatchDiff { attr, keep: None } => write!(f, "nodematch({attr}, diff=T)"),
            TermSpec::NodeMatchDiff {
                attr,
                keep: Some(k),
            } => {
                let k: Vec<String> = k.iter().map(usize::to_string).collect();
                write!(f, "nodematch({attr}, diff=T, keep=c({}))", k.join(","))
            }
            TermSpec::NodeCov { attr } => write!(f, "nodecov({attr})"),
            TermSpec::EdgeCov { name } => write!(f, "edgecov({name})"),
        }
    }
}

/// Ordered list of terms; term order fixes coefficient order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ModelSpec {
    pub terms: Vec<TermSpec>,
}

impl ModelSpec {
    pub fn new(terms: Vec<TermSpec>) -> Self {
        ModelSpec { terms }
    }

    /// Parses either a JSON term array or a formula such as
    /// `edges + gwesp(0.75) + nodematch(Office, diff=T, keep=c(1,2))`.
    pub fn parse(text: &str) -> Result<Self, ModelError> {
        let trimmed = text.trim();
        if trimmed.starts_with('[') {
            return serde_json::from_str(trimmed).map_err(|e| ModelError::Syntax {
                term: trimmed.chars().take(40).collect(),
                msg: e.to_string(),
            });
        }
        let terms = split_top_level(trimmed, '+')
            .into_iter()
            .map(|t| parse_term(t.trim()))
            .collect::<Result<Vec<_>, _>>()?;
        if terms.is_empty() {
            return Err(ModelError::NoTerms);
        }
        Ok(ModelSpec { terms })
    }

    pub fn is_dyad_independent(&self) -> bool {
        self.terms
            .iter()
            .all(|t| !matches!(t, TermSpec::Gwesp { .. } | TermSpec::Gwdegree { .. }))
    }

    /// The model with every dyad-dependent term removed.
    pub fn dyad_independent_part(&self) -> ModelSpec {
        ModelSpec {
            terms: self
                .terms
                .iter()
                .filter(|t| !matches!(t, TermSpec::Gwesp { .. } | TermSpec::Gwdegree { .. }))
                .cloned()
                .collect(),
        }
    }

    pub fn compile(&self, g: &Graph) -> Result<Model, ModelError> {
        Model::compile(self, g)
    }
}

impl fmt::Display for ModelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.terms.iter().map(ToString::to_string).collect();
        write!(f, "{}", parts.join(" + "))
    }
}

fn split_top_level(s: &str, sep: char) -> Vec<&str> {
    let mut parts = Vec::new();
    let mut depth = 0i32;
    let mut start = 0;
    for (idx, c) in s.char_indices() {
        match c {
            '(' => depth += 1,
            ')' => depth -= 1,
            c if c == sep && depth == 0 => {
                parts.push(&s[start..idx]);
                start = idx + c.len_utf8();
            }
            _ => {}
        }
    }
    parts.push(&s[start..]);
    parts.into_iter().filter(|p| !p.trim().is_empty()).collect()
}

fn unquote(s: &str) -> &str {
    s.trim().trim_matches(|c| c == '"' || c == '\'')
}

fn parse_number(term: &str, s: &str) -> Result<f64, ModelError> {
    let s = s.trim();
    let bad = || ModelError::Syntax {
        term: term.to_string(),
        msg: format!("`{s}` is not a number"),
    };
    if let Some(inner) = s.strip_prefix("log(").and_then(|r| r.strip_suffix(')')) {
        return inner.trim().parse::<f64>().map(f64::ln).map_err(|_| bad());
    }
    s.parse().map_err(|_| bad())
}

fn parse_bool(term: &str, s: &str) -> Result<bool, ModelError> {
    match s.trim() {
        "T" | "TRUE" | "true" => Ok(true),
        "F" | "FALSE" | "false" => Ok(false),
        other => Err(ModelError::Syntax {
            term: term.to_string(),
            msg: format!("`{other}` is not a boolean"),
        }),
    }
}

fn parse_index_list(term: &str, s: &str) -> Result<Vec<usize>, ModelError> {
    let s = s.trim();
    let inner = s
        .strip_prefix("c(")
        .and_then(|r| r.strip_suffix(')'))
        .unwrap_or(s);
    inner
        .split(',')
        .map(|v| {
            v.trim().parse::<usize>().map_err(|_| ModelError::Syntax {
                term: term.to_string(),
                msg: format!("`{v}` is not a level index"),
            })
        })
        .collect()
}

fn parse_term(text: &str) -> Result<TermSpec, ModelError> {
    let (name, args) = match text.find('(') {
        Some(open) => {
            let close = text.rfind(')').ok_or_else(|| ModelError::Syntax {
                term: text.to_string(),
                msg: "unbalanced parentheses".into(),
            })?;
            (text[..open].trim(), split_top_level(&text[open + 1..close], ','))
        }
        None => (text.trim(), Vec::new()),
    };
    let mut positional = Vec::new();
    let mut raw = RawTerm {
        term: name.to_string(),
        ..RawTerm::default()
    };
    for arg in args {
        match arg.split_once('=') {
            Some((key, value)) => match key.trim() {
                "diff" => raw.diff = parse_bool(text, value)?,
                "keep" => raw.keep = Some(parse_index_list(text, value)?),
                "decay" => raw.decay = Some(parse_number(text, value)?),
                "fixed" => {}
                other => {
                    return Err(ModelError::Syntax {
                        term: text.to_string(),
                        msg: format!("unknown argument `{other}`"),
                    })
                }
            },
            None => positional.push(arg.trim()),
        }
    }
    if let Some(first) = positional.first() {
        match name.to_ascii_lowercase().as_str() {
            "gwesp" | "gwdegree" | "gwdeg" => raw.decay = Some(parse_number(text, first)?),
            "edgecov" => raw.name = Some(unquote(first).to_string()),
            _ => raw.attr = Some(unquote(first).to_string()),
        }
    }
    TermSpec::try_from(raw)
}

#[derive(Clone, Debug)]
struct Geometric {
    /// `(1 - e^-phi)^k` for k = 0..=n
    pow: Vec<f64>,
    /// `e^phi (1 - (1 - e^-phi)^k)`
    weight: Vec<f64>,
}

impl Geometric {
    fn new(decay: f64, n: usize) -> Self {
        let r = 1.0 - (-decay).exp();
        let scale = decay.exp();
        let pow: Vec<f64> = (0..=n as i32).map(|k| r.powi(k)).collect();
        let weight = pow.iter().map(|p| scale * (1.0 - p)).collect();
        Geometric { pow, weight }
    }
}

#[derive(Clone, Debug)]
enum Compiled {
    Edges,
    Gwesp(Geometric),
    Gwdegree(Geometric),
    NodeMatch(Vec<f64>),
    NodeMatchDiff { x: Vec<f64>, levels: Vec<f64> },
    NodeCov(Vec<f64>),
    EdgeCov(Vec<f64>),
}

impl Compiled {
    fn dim(&self) -> usize {
        match self {
            Compiled::NodeMatchDiff { levels, .. } => levels.len(),
            _ => 1,
        }
    }
}

/// A [`ModelSpec`] bound to one graph's covariates.
#[derive(Clone, Debug)]
pub struct Model {
    spec: ModelSpec,
    n: usize,
    terms: Vec<Compiled>,
    names: Vec<String>,
    dim: usize,
}

fn level_label(v: f64) -> String {
    if v.fract() == 0.0 && v.abs() < 1e15 {
        format!("{}", v as i64)
    } else {
        format!("{v}")
    }
}

impl Model {
    pub fn compile(spec: &ModelSpec, g: &Graph) -> Result<Self, ModelError> {
        if spec.terms.is_empty() {
            return Err(ModelError::NoTerms);
        }
        let n = g.n();
        let attr = |name: &str| {
            g.node_attr(name)
                .map(<[f64]>::to_vec)
                .ok_or_else(|| ModelError::MissingAttribute(name.to_string()))
        };
        let check_decay = |d: f64| {
            if d.is_finite() && d >= 0.0 {
                Ok(d)
            } else {
                Err(ModelError::BadDecay(d))
            }
        };
        let mut terms = Vec::with_capacity(spec.terms.len());
        let mut names = Vec::new();
        for t in &spec.terms {
            match t {
                TermSpec::Edges => {
                    terms.push(Compiled::Edges);
                    names.push("edges".to_string());
                }
                TermSpec::Gwesp { decay } => {
                    terms.push(Compiled::Gwesp(Geometric::new(check_decay(*decay)?, n)));
                    names.push(format!("gwesp.fixed.{decay}"));
                }
                TermSpec::Gwdegree { decay } => {
                    terms.push(Compiled::Gwdegree(Geometric::new(check_decay(*decay)?, n)));
                    names.push(format!("gwdeg.fixed.{decay}"));
                }
                TermSpec::NodeMatch { attr: a } => {
                    terms.push(Compiled::NodeMatch(attr(a)?));
                    names.push(format!("nodematch.{a}"));
                }
                TermSpec::NodeMatchDiff { attr: a, keep } => {
                    let x = attr(a)?;
                    let mut all: Vec<f64> = x.clone();
                    all.sort_by(f64::total_cmp);
                    all.dedup();
                    let levels = match keep {
                        None => all,
                        Some(idx) => {
                            let mut idx = idx.clone();
                            idx.sort_unstable();
                            idx.dedup();
                            idx.iter()
                                .map(|&k| {
                                    if k == 0 || k > all.len() {
                                        Err(ModelError::BadKeep {
                                            attr: a.clone(),
                                            index: k,
                                            levels: all.len(),
                                        })
                                    } else {
                                        Ok(all[k - 1])
                                    }
                                })
                                .collect::<Result<Vec<_>, _>>()?
                        }
                    };
                    names.extend(levels.iter().map(|&l| format!("nodematch.{a}.{}", level_label(l))));
                    terms.push(Compiled::NodeMatchDiff { x, levels });
                }
                TermSpec::NodeCov { attr: a } => {
                    terms.push(Compiled::NodeCov(attr(a)?));
                    names.push(format!("nodecov.{a}"));
                }
                TermSpec::EdgeCov { name } => {
                    let m = g
                        .dyad_covariate(name)
                        .ok_or_else(|| ModelError::MissingCovariate(name.clone()))?;
                    terms.push(Compiled::EdgeCov(m.to_vec()));
                    names.push(format!("edgecov.{name}"));
                }
            }
        }
        let dim = terms.iter().map(Compiled::dim).sum();
        debug_assert_eq!(dim, names.len());
        Ok(Model {
            spec: spec.clone(),
            n,
            terms,
            names,
            dim,
        })
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    /// Statistic dimension p.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn coef_names(&self) -> &[String] {
        &self.names
    }

    pub fn is_dyad_independent(&self) -> bool {
        self.spec.is_dyad_independent()
    }

    /// Per coordinate, the sign shared by every change statistic on every
    /// graph, or `None` when change statistics can take both signs.
    pub fn monotone_signs(&self) -> Vec<Option<f64>> {
        let sign_of = |vals: &mut dyn Iterator<Item = f64>| {
            let (mut pos, mut neg) = (false, false);
            for v in vals {
                pos |= v > 0.0;
                neg |= v < 0.0;
            }
            match (pos, neg) {
                (true, true) => None,
                (false, true) => Some(-1.0),
                _ => Some(1.0),
            }
        };
        let n = self.n;
        let mut out = Vec::with_capacity(self.dim);
        for t in &self.terms {
            match t {
                Compiled::NodeMatchDiff { levels, .. } => out.extend(levels.iter().map(|_| Some(1.0))),
                Compiled::NodeCov(x) => out.push(sign_of(&mut x.iter().copied())),
                Compiled::EdgeCov(m) => {
                    out.push(sign_of(&mut (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| m[i * n + j]))))
                }
                _ => out.push(Some(1.0)),
            }
        }
        out
    }

    pub fn check_theta(&self, theta: &[f64]) -> Result<(), ModelError> {
        if theta.len() != self.dim {
            return Err(ModelError::DimensionMismatch {
                expected: self.dim,
                got: theta.len(),
            });
        }
        Ok(())
    }

    /// Sufficient statistics `g(y)`.
    pub fn stats(&self, g: &Graph) -> Vec<f64> {
        assert_eq!(g.n(), self.n, "graph does not match compiled model");
        let edges = g.edge_list();
        let mut out = Vec::with_capacity(self.dim);
        for t in &self.terms {
            match t {
                Compiled::Edges => out.push(edges.len() as f64),
                Compiled::Gwesp(geo) => {
                    let ep = ep_distribution(g);
                    out.push(ep.iter().enumerate().map(|(k, &c)| geo.weight[k] * c as f64).sum());
                }
                Compiled::Gwdegree(geo) => {
                    let dg = dg_distribution(g);
                    out.push(dg.iter().enumerate().map(|(k, &c)| geo.weight[k] * c as f64).sum());
                }
                Compiled::NodeMatch(x) => {
                    out.push(edges.iter().filter(|(i, j)| x[*i] == x[*j]).count() as f64)
                }
                Compiled::NodeMatchDiff { x, levels } => {
                    for &l in levels {
                        out.push(
                            edges
                                .iter()
                                .filter(|(i, j)| x[*i] == l && x[*j] == l)
                                .count() as f64,
                        );
                    }
                }
                Compiled::NodeCov(x) => out.push(edges.iter().map(|(i, j)| x[*i] + x[*j]).sum()),
                Compiled::EdgeCov(m) => {
                    out.push(edges.iter().map(|(i, j)| m[i * self.n + j]).sum())
                }
            }
        }
        out
    }

    /// Change score `g(y with d on) - g(y with d off)`, written into `out`.
    /// Independent of the current state of `d`.
    pub fn change_stats_into(&self, g: &Graph, d: Dyad, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.dim);
        let (i, j) = (d.i(), d.j());
        let on = g.has_dyad(d);
        let mut k = 0;
        for t in &self.terms {
            match t {
                Compiled::Edges => {
                    out[k] = 1.0;
                    k += 1;
                }
                Compiled::Gwesp(geo) => {
                    // New edge (i,j) contributes w(cn); each common neighbour h
                    // raises the shared-partner count of (i,h) and (j,h) by one.
                    // Counts are taken with (i,j) off, so j (resp. i) is removed
                    // from them when the edge is currently present.
                    let cn = g.shared_partners(i, j);
                    let own = usize::from(on);
                    let mut delta = geo.weight[cn];
                    for h in g.common_neighbors(i, j) {
                        delta += geo.pow[g.shared_partners(i, h) - own];
                        delta += geo.pow[g.shared_partners(j, h) - own];
                    }
                    out[k] = delta;
                    k += 1;
                }
                Compiled::Gwdegree(geo) => {
                    let own = usize::from(on);
                    out[k] = geo.pow[g.degree(i) - own] + geo.pow[g.degree(j) - own];
                    k += 1;
                }
                Compiled::NodeMatch(x) => {
                    out[k] = if x[i] == x[j] { 1.0 } else { 0.0 };
                    k += 1;
                }
                Compiled::NodeMatchDiff { x, levels } => {
                    for &l in levels {
                        out[k] = if x[i] == l && x[j] == l { 1.0 } else { 0.0 };
                        k += 1;
                    }
                }
                Compiled::NodeCov(x) => {
                    out[k] = x[i] + x[j];
                    k += 1;
                }
                Compiled::EdgeCov(m) => {
                    out[k] = m[i * self.n + j];
                    k += 1;
                }
            }
        }
    }

    pub fn change_stats(&self, g: &Graph, d: Dyad) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        self.change_stats_into(g, d, &mut out);
        out
    }
}

/// `EP_k` for k = 0..=n-2: edges whose endpoints have exactly k common neighbours.
pub fn ep_distribution(g: &Graph) -> Vec<usize> {
    let mut ep = vec![0; g.n().saturating_sub(1).max(1)];
    for (i, j) in g.edge_list() {
        ep[g.shared_partners(i, j)] += 1;
    }
    ep
}

/// `D_k` for k = 0..=n-1: nodes with exactly k neighbours.
pub fn dg_distribution(g: &Graph) -> Vec<usize> {
    let mut dg = vec![0; g.n().max(1)];
    for &d in g.degrees() {
        dg[d] += 1;
    }
    dg
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
