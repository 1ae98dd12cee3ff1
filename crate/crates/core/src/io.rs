//! Edgelist, node-attribute and dyad-covariate files.
//!
//! Edgelists hold one whitespace-separated `i j` pair per line; `#` starts a
//! comment. Two header comments are understood: `# nodes: <n>` and
//! `# index-base: <0|1>`. Attribute files are CSV with a header row of names
//! and one row per node in node order. Dyad covariates are headerless `n x n`
//! CSV matrices.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::graph::{Dyad, Graph, GraphError};

#[derive(Copy, Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum IndexBase {
    #[default]
    Zero,
    One,
}

impl IndexBase {
    pub fn offset(self) -> usize {
        match self {
            IndexBase::Zero => 0,
            IndexBase::One => 1,
        }
    }

    pub fn from_offset(offset: usize) -> Option<Self> {
        match offset {
            0 => Some(IndexBase::Zero),
            1 => Some(IndexBase::One),
            _ => None,
        }
    }
}

/// Paths making up one dataset on disk.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct GraphFiles {
    pub edges: PathBuf,
    pub attributes: Option<PathBuf>,
    /// `(name, path)` pairs of dyad covariate matrices.
    #[serde(default)]
    pub covariates: Vec<(String, PathBuf)>,
}

#[derive(Copy, Clone, Debug, Default)]
pub struct LoadOptions {
    /// Node count; falls back to the `# nodes:` header.
    pub n: Option<usize>,
    /// Index base; falls back to the `# index-base:` header, then 0.
    pub index_base: Option<IndexBase>,
}

fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> GraphError {
    GraphError::Parse {
        path: path.display().to_string(),
        line,
        msg: msg.into(),
    }
}

struct Header {
    n: Option<usize>,
    base: Option<IndexBase>,
}

fn read_header(path: &Path, text: &str) -> Result<Header, GraphError> {
    let mut header = Header { n: None, base: None };
    for (lineno, line) in text.lines().enumerate() {
        let Some(comment) = line.trim().strip_prefix('#') else {
            continue;
        };
        let Some((key, value)) = comment.split_once(':') else {
            continue;
        };
        let value = value.trim();
        match key.trim() {
            "nodes" => {
                header.n = Some(
                    value
                        .parse()
                        .map_err(|_| parse_err(path, lineno + 1, format!("bad node count `{value}`")))?,
                )
            }
            "index-base" => {
                let base = value
                    .parse::<usize>()
                    .ok()
                    .and_then(IndexBase::from_offset)
                    .ok_or_else(|| parse_err(path, lineno + 1, format!("bad index base `{value}`")))?;
                header.base = Some(base);
            }
            _ => {}
        }
    }
    Ok(header)
}

/// Reads an edgelist. Isolates are kept because `n` is explicit.
pub fn read_edgelist(path: &Path, opts: LoadOptions) -> Result<Graph, GraphError> {
    let text = fs::read_to_string(path)?;
    let header = read_header(path, &text)?;
    let n = opts
        .n
        .or(header.n)
        .ok_or_else(|| parse_err(path, 0, "node count not given and no `# nodes:` header"))?;
    if n == 0 {
        return Err(GraphError::Empty);
    }
    let base = match (opts.index_base, header.base) {
        (Some(a), Some(b)) if a != b => {
            return Err(parse_err(
                path,
                0,
                format!("index base {} conflicts with file header {}", a.offset(), b.offset()),
            ))
        }
        (Some(a), _) => a,
        (None, Some(b)) => b,
        (None, None) => IndexBase::Zero,
    };
    let off = base.offset();

    let mut g = Graph::new(n);
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let lineno = lineno + 1;
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 2 {
            return Err(parse_err(path, lineno, format!("expected `i j`, got `{line}`")));
        }
        let mut ends = [0usize; 2];
        for (slot, field) in ends.iter_mut().zip(&fields) {
            let v: usize = field
                .parse()
                .map_err(|_| parse_err(path, lineno, format!("`{field}` is not a node index")))?;
            if v < off || v - off >= n {
                return Err(parse_err(
                    path,
                    lineno,
                    format!("node {v} outside {off}..{}", n + off),
                ));
            }
            *slot = v - off;
        }
        let d = Dyad::new(ends[0], ends[1])
            .map_err(|_| parse_err(path, lineno, format!("self-loop on node {}", fields[0])))?;
        if g.has_dyad(d) {
            return Err(parse_err(path, lineno, format!("duplicate edge {}", line)));
        }
        g.set_edge(d, true);
    }
    Ok(g)
}

/// Reads a node-attribute CSV and attaches every column to `g`.
pub fn read_attributes(path: &Path, g: Graph) -> Result<Graph, GraphError> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| parse_err(path, 0, e.to_string()))?;
    let names: Vec<String> = reader
        .headers()
        .map_err(|e| parse_err(path, 1, e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    let mut columns: Vec<Vec<f64>> = vec![Vec::new(); names.len()];
    for (row, record) in reader.records().enumerate() {
        let lineno = row + 2;
        let record = record.map_err(|e| parse_err(path, lineno, e.to_string()))?;
        if record.len() != names.len() {
            return Err(parse_err(
                path,
                lineno,
                format!("expected {} fields, got {}", names.len(), record.len()),
            ));
        }
        for (col, field) in columns.iter_mut().zip(record.iter()) {
            let v: f64 = field
                .parse()
                .map_err(|_| parse_err(path, lineno, format!("`{field}` is not numeric")))?;
            col.push(v);
        }
    }
    let mut g = g;
    for (name, values) in names.iter().zip(columns) {
        g = g.with_node_attr(name, values)?;
    }
    Ok(g)
}

/// Reads a headerless `n x n` CSV matrix and attaches it as `name`.
pub fn read_dyad_covariate(path: &Path, name: &str, g: Graph) -> Result<Graph, GraphError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| parse_err(path, 0, e.to_string()))?;
    let mut values = Vec::with_capacity(g.n() * g.n());
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(|e| parse_err(path, row + 1, e.to_string()))?;
        for field in record.iter() {
            values.push(
                field
                    .parse::<f64>()
                    .map_err(|_| parse_err(path, row + 1, format!("`{field}` is not numeric")))?,
            );
        }
    }
    g.with_dyad_covariate(name, values)
}

pub fn load_graph(files: &GraphFiles, opts: LoadOptions) -> Result<Graph, GraphError> {
    let mut g = read_edgelist(&files.edges, opts)?;
    if let Some(attrs) = &files.attributes {
        g = read_attributes(attrs, g)?;
    }
    for (name, path) in &files.covariates {
        g = read_dyad_covariate(path, name, g)?;
    }
    Ok(g)
}

pub fn write_edgelist(g: &Graph, path: &Path, base: IndexBase) -> Result<(), GraphError> {
    let mut out = fs::File::create(path)?;
    write_edgelist_to(g, &mut out, base)?;
    Ok(())
}

pub fn write_edgelist_to<W: Write>(g: &Graph, out: &mut W, base: IndexBase) -> std::io::Result<()> {
    let off = base.offset();
    writeln!(out, "# nodes: {}", g.n())?;
    writeln!(out, "# index-base: {off}")?;
    for (i, j) in g.edge_list() {
        writeln!(out, "{} {}", i + off, j + off)?;
    }
    Ok(())
}

pub fn write_attributes(g: &Graph, path: &Path) -> Result<(), GraphError> {
    let names: Vec<&str> = g.node_attr_names().collect();
    let mut w = csv::Writer::from_path(path).map_err(|e| parse_err(path, 0, e.to_string()))?;
    let to_err = |e: csv::Error| parse_err(path, 0, e.to_string());
    w.write_record(&names).map_err(to_err)?;
    for v in 0..g.n() {
        let row: Vec<String> = names
            .iter()
            .map(|name| g.node_attr(name).expect("listed attribute")[v].to_string())
            .collect();
        w.write_record(&row).map_err(to_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_dyad_covariate(g: &Graph, name: &str, path: &Path) -> Result<(), GraphError> {
    let m = g
        .dyad_covariate(name)
        .ok_or_else(|| parse_err(path, 0, format!("no dyad covariate `{name}`")))?;
    let n = g.n();
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(path)
        .map_err(|e| parse_err(path, 0, e.to_string()))?;
    for i in 0..n {
        let row: Vec<String> = m[i * n..(i + 1) * n].iter().map(f64::to_string).collect();
        w.write_record(&row).map_err(|e| parse_err(path, 0, e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `edges.txt`, `attributes.csv` (if any) and one `<name>.csv` per
/// dyad covariate into `dir`.
pub fn save_graph(g: &Graph, dir: &Path) -> Result<GraphFiles, GraphError> {
    fs::create_dir_all(dir)?;
    let edges = dir.join("edges.txt");
    write_edgelist(g, &edges, IndexBase::Zero)?;
    let attributes = if g.node_attr_names().next().is_some() {
        let p = dir.join("attributes.csv");
        write_attributes(g, &p)?;
        Some(p)
    } else {
        None
    };
    let mut covariates = Vec::new();
    for name in g.dyad_covariate_names() {
        let p = dir.join(format!("{name}.csv"));
        write_dyad_covariate(g, name, &p)?;
        covariates.push((name.to_string(), p));
    }
    Ok(GraphFiles {
        edges,
        attributes,
        covariates,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &Path, name: &str, body: &str) -> PathBuf {
        let p = dir.join(name);
        let mut f = fs::File::create(&p).unwrap();
        f.write_all(body.as_bytes()).unwrap();
        p
    }

    #[test]
    fn empty_edgelist_keeps_isolates() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "e.txt", "# nothing here\n");
        let g = read_edgelist(&p, LoadOptions { n: Some(4), index_base: None }).unwrap();
        assert_eq!(g.n(), 4);
        assert_eq!(g.edge_count(), 0);
    }

    #[test]
    fn one_based_edges() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "e.txt", "1 2\n2 3 # trailing comment\n\n");
        let g = read_edgelist(
            &p,
            LoadOptions {
                n: Some(4),
                index_base: Some(IndexBase::One),
            },
        )
        .unwrap();
        assert_eq!(g.edge_list(), vec![(0, 1), (1, 2)]);
        assert_eq!(g.degree(3), 0);
    }

    #[test]
    fn parse_errors_are_descriptive() {
        let dir = tempfile::tempdir().unwrap();
        let opts = LoadOptions { n: Some(3), index_base: None };
        let cases = [
            ("0 1 2\n", "expected `i j`"),
            ("0 x\n", "not a node index"),
            ("0 1\n1 0\n", "duplicate edge"),
            ("2 2\n", "self-loop"),
            ("0 3\n", "outside"),
        ];
        for (body, needle) in cases {
            let p = write(dir.path(), "bad.txt", body);
            let err = read_edgelist(&p, opts).unwrap_err().to_string();
            assert!(err.contains(needle), "{body:?}: {err}");
        }
    }

    #[test]
    fn header_conflict_detected() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "e.txt", "# nodes: 3\n# index-base: 1\n1 2\n");
        assert!(read_edgelist(
            &p,
            LoadOptions {
                n: None,
                index_base: Some(IndexBase::Zero)
            }
        )
        .is_err());
        let g = read_edgelist(&p, LoadOptions::default()).unwrap();
        assert_eq!(g.edge_list(), vec![(0, 1)]);
    }

    #[test]
    fn attribute_length_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "a.csv", "x,y\n1,2\n3,4\n");
        let err = read_attributes(&p, Graph::new(3)).unwrap_err();
        assert!(matches!(err, GraphError::AttributeLength { .. }), "{err}");
    }

    #[test]
    fn save_load_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let g = Graph::from_edges(5, [(0, 1), (3, 4), (1, 4)])
            .unwrap()
            .with_node_attr("Seniority", vec![1.0, 2.5, 3.0, 0.1, 1e-7])
            .unwrap()
            .with_node_attr("Office", vec![1.0, 2.0, 1.0, 3.0, 1.0])
            .unwrap()
            .with_dyad_covariate("w", {
                let mut m = vec![0.0; 25];
                m[1] = 0.3;
                m[5] = 0.3;
                m
            })
            .unwrap();
        let files = save_graph(&g, dir.path()).unwrap();
        let back = load_graph(&files, LoadOptions::default()).unwrap();
        assert_eq!(back, g);
    }
}
