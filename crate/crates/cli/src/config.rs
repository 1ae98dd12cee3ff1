use std::path::{Path, PathBuf};

use ergm_hope::datasets::{self, Dataset};
use ergm_hope::harness::Strategy;
use ergm_hope::io::{load_graph, GraphFiles, IndexBase, LoadOptions};
use ergm_hope::{EstimatorConfig, Graph, Method, ModelSpec, SamplerConfig};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NamedPath {
    pub name: String,
    pub path: PathBuf,
}

/// Everything a run depends on. Flags override the values of `--config`, and
/// the merged result is written next to every output so a run can be repeated
/// with `--config <out>/run_config.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    /// Registered dataset name (`lazega`, `teenage`) or a directory holding
    /// `edges.txt` and optionally `attributes.csv`.
    pub dataset: Option<String>,
    pub data_dir: Option<PathBuf>,
    pub edges: Option<PathBuf>,
    pub attributes: Option<PathBuf>,
    pub covariates: Vec<NamedPath>,
    pub nodes: Option<usize>,
    pub index_base: Option<usize>,
    /// Inline formula or JSON, a file holding either, or `m1`..`m5` for a
    /// registered dataset's benchmark models.
    pub models: Vec<String>,
    pub method: Option<Method>,
    pub strategies: Vec<String>,
    pub folds: Option<usize>,
    pub subset: Option<usize>,
    pub draws: Option<usize>,
    pub seed: u64,
    pub workers: Option<usize>,
    pub out: Option<PathBuf>,
    pub theta: Option<Vec<f64>>,
    pub fit: Option<PathBuf>,
    /// `all`, `none`, or a file of dyads in edgelist format.
    pub free: Option<String>,
    pub estimator: EstimatorConfig,
    pub sampler: SamplerConfig,
    pub warm_start: bool,
    pub structural_metrics: bool,
    pub exact_loo_marginals: bool,
    pub check_fixtures: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            dataset: None,
            data_dir: None,
            edges: None,
            attributes: None,
            covariates: Vec::new(),
            nodes: None,
            index_base: None,
            models: Vec::new(),
            method: None,
            strategies: Vec::new(),
            folds: None,
            subset: None,
            draws: None,
            seed: 1,
            workers: None,
            out: None,
            theta: None,
            fit: None,
            free: None,
            estimator: EstimatorConfig::default(),
            sampler: SamplerConfig::default(),
            warm_start: true,
            structural_metrics: true,
            exact_loo_marginals: false,
            check_fixtures: false,
        }
    }
}

pub fn read_config(path: &Path) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
    let value: serde_json::Value = serde_json::from_str(&text)
        .map_err(|e| CliError::Usage(format!("bad config {}: {e}", path.display())))?;
    // emitted configs wrap the run config next to the results
    let value = match value.get("config") {
        Some(inner) if inner.is_object() => inner.clone(),
        _ => value,
    };
    serde_json::from_value(value).map_err(|e| CliError::Usage(format!("bad config {}: {e}", path.display())))
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        if let Some(b) = self.index_base {
            if IndexBase::from_offset(b).is_none() {
                return Err(CliError::Usage(format!("--index-base must be 0 or 1, got {b}")));
            }
        }
        if self.draws == Some(0) {
            return Err(CliError::Usage("--draws must be at least 1".into()));
        }
        if self.workers == Some(0) {
            return Err(CliError::Usage("--workers must be at least 1".into()));
        }
        for s in &self.strategies {
            self.strategy(s)?;
        }
        self.estimator.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        self.sampler.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        Ok(())
    }

    pub fn strategy(&self, s: &str) -> Result<Strategy, CliError> {
        match s.to_ascii_lowercase().as_str() {
            "loo" | "leave-1-out" => Ok(Strategy::LeaveOneOut),
            "lmo" | "leave-m-out" => Ok(Strategy::LeaveMOut { folds: self.folds }),
            "node" => Ok(Strategy::NodeHeldOut),
            other => Err(CliError::Usage(format!("unknown strategy `{other}`; expected loo, lmo or node"))),
        }
    }

    pub fn data_root(&self) -> PathBuf {
        self.data_dir.clone().unwrap_or_else(datasets::data_root)
    }

    /// The registered dataset this run refers to, if any.
    pub fn registered(&self) -> Option<Dataset> {
        let name = self.dataset.as_deref()?;
        if Path::new(name).is_dir() {
            let base = Path::new(name).file_name()?.to_str()?;
            return datasets::by_name(base);
        }
        datasets::by_name(name)
    }

    fn load_options(&self, n: Option<usize>) -> LoadOptions {
        LoadOptions {
            n: self.nodes.or(n),
            index_base: self.index_base.and_then(IndexBase::from_offset),
        }
    }

    pub fn graph_files(&self) -> Result<(GraphFiles, Option<usize>), CliError> {
        let covariates: Vec<(String, PathBuf)> =
            self.covariates.iter().map(|c| (c.name.clone(), c.path.clone())).collect();
        if let Some(edges) = &self.edges {
            let files = GraphFiles {
                edges: edges.clone(),
                attributes: self.attributes.clone(),
                covariates,
            };
            return Ok((files, None));
        }
        let Some(name) = self.dataset.as_deref() else {
            return Err(CliError::Usage("no graph given; pass a dataset or --edges".into()));
        };
        let dir = Path::new(name);
        if dir.is_dir() {
            let attrs = dir.join("attributes.csv");
            let files = GraphFiles {
                edges: dir.join("edges.txt"),
                attributes: self.attributes.clone().or(attrs.is_file().then_some(attrs)),
                covariates,
            };
            return Ok((files, self.registered().map(|d| d.table1.size)));
        }
        match datasets::by_name(name) {
            Some(ds) => {
                let root = self.data_root();
                if !ds.is_installed(&root) {
                    return Err(CliError::Data(format!(
                        "dataset `{}` not installed: expected {} and {}; see DATASETS.md",
                        ds.name,
                        ds.files(&root).edges.display(),
                        root.join(ds.name).join("attributes.csv").display(),
                    )));
                }
                let mut files = ds.files(&root);
                files.covariates = covariates;
                Ok((files, Some(ds.table1.size)))
            }
            None => Err(CliError::Usage(format!(
                "`{name}` is neither a registered dataset (lazega, teenage) nor a directory"
            ))),
        }
    }

    pub fn load_graph(&self) -> Result<Graph, CliError> {
        let (files, n) = self.graph_files()?;
        load_graph(&files, self.load_options(n)).map_err(|e| CliError::Data(e.to_string()))
    }

    /// Resolves `--model` values to `(name, spec)`.
    pub fn model_specs(&self) -> Result<Vec<(String, ModelSpec)>, CliError> {
        if self.models.is_empty() {
            return Err(CliError::Usage("no model given; pass --model".into()));
        }
        self.models.iter().map(|m| self.model_spec(m)).collect()
    }

    fn model_spec(&self, m: &str) -> Result<(String, ModelSpec), CliError> {
        let lower = m.trim().to_ascii_lowercase();
        let number = lower
            .strip_prefix("model")
            .or_else(|| lower.strip_prefix('m'))
            .and_then(|k| k.trim().parse::<usize>().ok());
        if let Some(k) = number {
            let ds = self.registered().ok_or_else(|| {
                CliError::Usage(format!("`{m}` names a benchmark model but the dataset is not registered"))
            })?;
            if !(1..=5).contains(&k) {
                return Err(CliError::Usage(format!("benchmark models are numbered 1 to 5, got {k}")));
            }
            let spec = ds.model(k).map_err(|e| CliError::Usage(e.to_string()))?;
            return Ok((format!("Model {k}"), spec));
        }
        let path = Path::new(m);
        let text = if path.is_file() {
            std::fs::read_to_string(path)
                .map_err(|e| CliError::Usage(format!("cannot read model {}: {e}", path.display())))?
        } else {
            m.to_string()
        };
        let spec = ModelSpec::parse(&text).map_err(|e| CliError::Usage(e.to_string()))?;
        Ok((spec.to_string(), spec))
    }
}
