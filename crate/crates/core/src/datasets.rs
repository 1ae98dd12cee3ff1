//! Reference datasets: where to find them, their published descriptive
//! statistics, the five benchmark model specifications, and the published
//! estimates and HOPE metrics used by the reproduction checks.
//!
//! The data files are not distributed with the crate. A dataset named `x`
//! is looked up as `<root>/x/edges.txt` plus `<root>/x/attributes.csv`,
//! where `<root>` is `$HOPE_DATA_DIR` or `./data`.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::descriptives::Descriptives;
use crate::graph::{Graph, GraphError};
use crate::io::{load_graph, GraphFiles, LoadOptions};
use crate::terms::{ModelError, ModelSpec};

pub const DATA_DIR_ENV: &str = "HOPE_DATA_DIR";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Table1 {
    pub size: usize,
    pub edges: usize,
    pub directed: bool,
    pub density: f64,
    pub mean_degree: f64,
    pub sd_degree: f64,
    pub skewness_degree: f64,
    pub isolates: usize,
    pub transitivity: f64,
}

/// Published estimate and standard error, in model coefficient order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReferenceFit {
    pub estimates: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub aic: f64,
    pub bic: f64,
}

/// Published HOPE metric row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReferenceRow {
    pub model: usize,
    pub strategy: &'static str,
    pub edge_acc: f64,
    pub null_acc: f64,
    pub overall_acc: f64,
    pub tsl: f64,
    pub rho_degree: f64,
    pub rho_betweenness: f64,
    pub rho_eigen: f64,
    pub rmse_betw_centralization: f64,
    pub rmse_deg_centralization: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub name: &'static str,
    pub table1: Table1,
    /// Models 1 to 5 in formula syntax.
    pub models: [&'static str; 5],
    pub fits: [ReferenceFit; 5],
    /// Folds used for leave-M-out in the published runs.
    pub lmo_folds: usize,
    pub hope: Vec<ReferenceRow>,
}

impl Dataset {
    pub fn model(&self, k: usize) -> Result<ModelSpec, ModelError> {
        ModelSpec::parse(self.models[k - 1])
    }

    pub fn files(&self, root: &Path) -> GraphFiles {
        let dir = root.join(self.name);
        GraphFiles {
            edges: dir.join("edges.txt"),
            attributes: Some(dir.join("attributes.csv")),
            covariates: Vec::new(),
        }
    }

    pub fn is_installed(&self, root: &Path) -> bool {
        let f = self.files(root);
        f.edges.is_file() && f.attributes.as_ref().is_some_and(|a| a.is_file())
    }

    pub fn load(&self, root: &Path) -> Result<Graph, GraphError> {
        load_graph(
            &self.files(root),
            LoadOptions {
                n: Some(self.table1.size),
                index_base: None,
            },
        )
    }
}

pub fn data_root() -> PathBuf {
    std::env::var_os(DATA_DIR_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("data"))
}

#[allow(clippy::too_many_arguments)]
fn row(
    model: usize,
    strategy: &'static str,
    v: [f64; 9],
) -> ReferenceRow {
    ReferenceRow {
        model,
        strategy,
        edge_acc: v[0],
        null_acc: v[1],
        overall_acc: v[2],
        tsl: v[3],
        rho_degree: v[4],
        rho_betweenness: v[5],
        rho_eigen: v[6],
        rmse_betw_centralization: v[7],
        rmse_deg_centralization: v[8],
    }
}

fn fit(est: &[f64], se: &[f64], aic: f64, bic: f64) -> ReferenceFit {
    ReferenceFit {
        estimates: est.to_vec(),
        std_errors: se.to_vec(),
        aic,
        bic,
    }
}

pub fn lazega() -> Dataset {
    Dataset {
        name: "lazega",
        table1: Table1 {
            size: 36,
            edges: 115,
            directed: false,
            density: 0.18,
            mean_degree: 6.39,
            sd_degree: 4.18,
            skewness_degree: 0.29,
            isolates: 2,
            transitivity: 0.39,
        },
        models: [
            "edges",
            "edges + gwesp(0.75)",
            "edges + nodecov(\"Seniority\") + nodecov(\"Practice\") + nodematch(\"Practice\") + nodematch(\"Gender\") + nodematch(\"Office\")",
            "edges + gwesp(0.75) + nodecov(\"Seniority\") + nodecov(\"Practice\") + nodematch(\"Practice\") + nodematch(\"Gender\") + nodematch(\"Office\")",
            "edges + gwesp(0.75) + nodecov(\"Seniority\") + nodecov(\"Practice\") + nodematch(\"Practice\", diff=T, keep=2) + nodematch(\"Gender\", diff=T) + nodematch(\"Office\", diff=T, keep=c(1,2))",
        ],
        fits: [
            fit(&[-1.499], &[0.10], 600.8, 605.2),
            fit(&[-3.80, 1.05], &[0.25, 0.12], 524.3, 533.2),
            fit(
                &[-8.31, 0.04, 0.90, 0.88, 1.13, 1.65],
                &[0.95, 0.01, 0.16, 0.23, 0.35, 0.25],
                513.8,
                540.5,
            ),
            fit(
                &[-7.37, 0.93, 0.02, 0.41, 0.76, 0.70, 1.15],
                &[0.73, 0.15, 0.01, 0.12, 0.19, 0.26, 0.20],
                472.0,
                503.2,
            ),
            fit(
                &[-4.67, 0.95, 0.02, -0.37, 1.50, 0.48, 0.59, 1.00, 1.46],
                &[0.78, 0.16, 0.01, 0.22, 0.39, 0.27, 1.35, 0.20, 0.24],
                470.0,
                510.0,
            ),
        ],
        lmo_folds: 35,
        hope: vec![
            row(1, "leave-1-out", [0.192, 0.817, 0.703, 92.55, 0.999, 0.996, 0.999, 0.005, 0.005]),
            row(2, "leave-1-out", [0.388, 0.867, 0.779, 69.067, 0.999, 0.998, 0.999, 0.004, 0.004]),
            row(3, "leave-1-out", [0.306, 0.845, 0.747, 80.701, 0.999, 0.997, 0.999, 0.005, 0.004]),
            row(4, "leave-1-out", [0.43, 0.875, 0.794, 66.334, 0.999, 0.998, 0.999, 0.004, 0.004]),
            row(5, "leave-1-out", [0.434, 0.873, 0.793, 66.54, 0.999, 0.998, 0.999, 0.004, 0.004]),
            row(1, "leave-M-out", [0.18, 0.817, 0.701, 94.747, 0.963, 0.871, 0.962, 0.024, 0.026]),
            row(2, "leave-M-out", [0.37, 0.863, 0.773, 71.45, 0.973, 0.932, 0.969, 0.02, 0.023]),
            row(3, "leave-M-out", [0.307, 0.846, 0.748, 80.951, 0.968, 0.894, 0.966, 0.021, 0.023]),
            row(4, "leave-M-out", [0.419, 0.872, 0.789, 67.412, 0.975, 0.935, 0.971, 0.02, 0.022]),
            row(5, "leave-M-out", [0.422, 0.871, 0.789, 67.842, 0.975, 0.936, 0.971, 0.02, 0.022]),
            row(1, "node", [0.179, 0.816, 0.7, 94.992, 0.943, 0.874, 0.938, 0.021, 0.021]),
            row(2, "node", [0.215, 0.838, 0.724, 88.786, 0.931, 0.915, 0.921, 0.018, 0.021]),
            row(3, "node", [0.3, 0.841, 0.742, 83.656, 0.948, 0.885, 0.947, 0.019, 0.02]),
            row(4, "node", [0.337, 0.863, 0.767, 76.428, 0.945, 0.92, 0.94, 0.018, 0.02]),
            row(5, "node", [0.345, 0.86, 0.766, 77.780, 0.945, 0.921, 0.939, 0.018, 0.02]),
        ],
    }
}

pub fn teenage() -> Dataset {
    Dataset {
        name: "teenage",
        table1: Table1 {
            size: 50,
            edges: 74,
            directed: false,
            density: 0.06,
            mean_degree: 2.96,
            sd_degree: 1.83,
            skewness_degree: 0.65,
            isolates: 3,
            transitivity: 0.42,
        },
        models: [
            "edges",
            "edges + gwesp(log(2)) + gwdegree(0.8)",
            "edges + nodematch(\"drugs_binary\", diff=T)",
            "edges + gwesp(log(2)) + gwdegree(0.8) + nodematch(\"drugs_binary\", diff=T)",
            "edges + gwesp(log(2)) + gwdegree(0.8) + nodematch(\"drugs_binary\", diff=T) + nodematch(\"smoke\", diff=T)",
        ],
        fits: [
            fit(&[-2.74], &[0.12], 560.8, 565.9),
            fit(&[-6.12, 1.783, 2.246], &[0.43, 0.18, 0.43], 453.6, 469.0),
            fit(&[-4.01, 1.42, 3.09], &[0.41, 0.43, 0.59], 535.1, 550.4),
            fit(&[-6.72, 1.71, 2.20, 0.82, 1.57], &[0.55, 0.19, 0.45, 0.35, 0.35], 438.7, 464.2),
            fit(
                &[-6.75, 1.71, 2.21, 0.75, 1.81, 0.13, 0.93, -0.69],
                &[0.54, 0.18, 0.45, 0.36, 0.40, 0.25, 0.75, 0.90],
                443.7,
                484.6,
            ),
        ],
        lmo_folds: 49,
        hope: vec![
            row(1, "leave-1-out", [0.072, 0.930, 0.878, 69.30, 0.999, 0.986, 0.997, 0.011, 0.002]),
            row(2, "leave-1-out", [0.480, 0.965, 0.936, 41.064, 0.999, 0.998, 0.998, 0.004, 0.001]),
            row(3, "leave-1-out", [0.088, 0.948, 0.896, 66.477, 0.999, 0.989, 0.997, 0.010, 0.002]),
            row(4, "leave-1-out", [0.483, 0.968, 0.938, 39.982, 0.999, 0.998, 0.998, 0.004, 0.001]),
            row(5, "leave-1-out", [0.480, 0.966, 0.937, 40.684, 0.999, 0.998, 0.998, 0.004, 0.001]),
            row(1, "leave-M-out", [0.062, 0.939, 0.886, 69.528, 0.932, 0.355, 0.895, 0.064, 0.013]),
            row(2, "leave-M-out", [0.457, 0.962, 0.932, 43.365, 0.958, 0.892, 0.906, 0.027, 0.009]),
            row(3, "leave-M-out", [0.086, 0.941, 0.889, 68.007, 0.934, 0.35, 0.896, 0.065, 0.012]),
            row(4, "leave-M-out", [0.463, 0.964, 0.933, 42.664, 0.959, 0.884, 0.909, 0.028, 0.009]),
            row(5, "leave-M-out", [0.463, 0.963, 0.933, 42.897, 0.959, 0.884, 0.911, 0.027, 0.009]),
            row(1, "node", [0.058, 0.94, 0.886, 140.246, 0.927, 0.477, 0.857, 0.056, 0.01]),
            row(2, "node", [0.076, 0.94, 0.887, 136.863, 0.923, 0.864, 0.766, 0.035, 0.011]),
            row(3, "node", [0.081, 0.941, 0.889, 137.486, 0.927, 0.483, 0.856, 0.055, 0.01]),
            row(4, "node", [0.101, 0.943, 0.892, 132.847, 0.925, 0.859, 0.779, 0.035, 0.011]),
            row(5, "node", [0.097, 0.943, 0.892, 135.706, 0.922, 0.859, 0.778, 0.035, 0.011]),
        ],
    }
}

pub fn all() -> Vec<Dataset> {
    vec![lazega(), teenage()]
}

pub fn by_name(name: &str) -> Option<Dataset> {
    all().into_iter().find(|d| d.name.eq_ignore_ascii_case(name))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RowCheck {
    pub row: &'static str,
    pub expected: f64,
    pub actual: Option<f64>,
    pub tolerance: f64,
    pub pass: bool,
}

/// Compares descriptives against the published table, each row within half
/// a unit of its printed precision.
pub fn verify(reference: &Table1, d: &Descriptives) -> Vec<RowCheck> {
    let check = |row, expected: f64, actual: Option<f64>, tolerance: f64| RowCheck {
        row,
        expected,
        actual,
        tolerance,
        pass: actual.is_some_and(|a| (a - expected).abs() <= tolerance + 1e-12),
    };
    let b = |x: bool| if x { 1.0 } else { 0.0 };
    vec![
        check("Network size", reference.size as f64, Some(d.size as f64), 0.0),
        check("Number of edges", reference.edges as f64, Some(d.edges as f64), 0.0),
        check("Directed", b(reference.directed), Some(b(d.directed)), 0.0),
        check("Network density", reference.density, Some(d.density), 0.005),
        check("Mean degree", reference.mean_degree, Some(d.mean_degree), 0.005),
        check("SD degree", reference.sd_degree, Some(d.sd_degree), 0.005),
        check("Skewness degree", reference.skewness_degree, d.skewness_degree, 0.005),
        check("Number of isolates", reference.isolates as f64, Some(d.isolates as f64), 0.0),
        check("Transitivity", reference.transitivity, d.transitivity, 0.005),
    ]
}
