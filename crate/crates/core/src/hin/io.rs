//! TSV dataset files.
//!
//! * `nodes.tsv`: header `id\ttype\tlabel`, label field may be empty.
//! * `edges.tsv`: header `src\tdst`, undirected.
//! * `features.tsv`: header `id\tdim\tvalue`, sparse triplets, absent = 0.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::{GraphBuilder, HeteroGraph, HinError, TypeId};
use crate::linalg::Matrix;

const NODES_HEADER: &str = "id\ttype\tlabel";
const EDGES_HEADER: &str = "src\tdst";
const FEATURES_HEADER: &str = "id\tdim\tvalue";

/// Standard file names inside a dataset directory.
#[derive(Debug, Clone)]
pub struct DatasetPaths {
    pub nodes: PathBuf,
    pub edges: PathBuf,
    pub features: PathBuf,
}

impl DatasetPaths {
    pub fn in_dir(dir: &Path) -> Self {
        Self {
            nodes: dir.join("nodes.tsv"),
            edges: dir.join("edges.tsv"),
            features: dir.join("features.tsv"),
        }
    }
}

fn read(path: &Path) -> Result<String, HinError> {
    fs::read_to_string(path).map_err(|source| HinError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Data lines after the header as `(line_number, fields)`; CRLF becomes LF.
fn records<'a>(
    text: &'a str,
    file: &str,
    header: &str,
) -> Result<Vec<(usize, Vec<&'a str>)>, HinError> {
    let mut lines = text.lines().map(|l| l.strip_suffix('\r').unwrap_or(l));
    match lines.next() {
        Some(h) if h == header => {}
        other => {
            return Err(HinError::Malformed {
                file: file.to_string(),
                line: 1,
                message: format!("expected header `{}`, found `{}`", header.escape_default(), other.unwrap_or("").escape_default()),
            })
        }
    }
    Ok(lines
        .enumerate()
        .filter(|(_, l)| !l.is_empty())
        .map(|(k, l)| (k + 2, l.split('\t').collect()))
        .collect())
}

pub fn load_hetero_graph(
    nodes_path: &Path,
    edges_path: &Path,
    features_path: Option<&Path>,
) -> Result<HeteroGraph, HinError> {
    let mut b = GraphBuilder::new();

    let file = nodes_path.display().to_string();
    let text = read(nodes_path)?;
    for (line, f) in records(&text, &file, NODES_HEADER)? {
        if !(2..=3).contains(&f.len()) || f[0].is_empty() || f[1].is_empty() {
            return Err(HinError::Malformed {
                file,
                line,
                message: "expected `id<TAB>type<TAB>label`".into(),
            });
        }
        let label = f.get(2).copied().filter(|l| !l.is_empty());
        if b.add_node(f[0], f[1], label).is_none() {
            return Err(HinError::DuplicateNode {
                file,
                line,
                id: f[0].to_string(),
            });
        }
    }

    let file = edges_path.display().to_string();
    let text = read(edges_path)?;
    for (line, f) in records(&text, &file, EDGES_HEADER)? {
        if f.len() != 2 {
            return Err(HinError::Malformed {
                file,
                line,
                message: "expected `src<TAB>dst`".into(),
            });
        }
        let mut ends = [(0, 0); 2];
        for (k, id) in f.iter().enumerate() {
            ends[k] = b.resolve(id).ok_or_else(|| HinError::UnknownNode {
                file: file.clone(),
                line,
                id: id.to_string(),
            })?;
        }
        b.add_edge(ends[0], ends[1]);
    }

    if let Some(path) = features_path {
        let file = path.display().to_string();
        let text = read(path)?;
        let mut triplets: BTreeMap<TypeId, Vec<(usize, usize, f64)>> = BTreeMap::new();
        let mut seen = std::collections::HashSet::new();
        for (line, f) in records(&text, &file, FEATURES_HEADER)? {
            let malformed = |message: &str| HinError::Malformed {
                file: file.clone(),
                line,
                message: message.to_string(),
            };
            if f.len() != 3 {
                return Err(malformed("expected `id<TAB>dim<TAB>value`"));
            }
            let (ty, idx) = b.resolve(f[0]).ok_or_else(|| HinError::UnknownNode {
                file: file.clone(),
                line,
                id: f[0].to_string(),
            })?;
            let dim: usize = f[1].parse().map_err(|_| malformed("dimension is not a non-negative integer"))?;
            let value: f64 = f[2].parse().map_err(|_| malformed("value is not a number"))?;
            if !value.is_finite() {
                return Err(malformed("value is not finite"));
            }
            if !seen.insert((f[0].to_string(), dim)) {
                return Err(malformed("duplicate feature entry"));
            }
            triplets.entry(ty).or_default().push((idx, dim, value));
        }
        for (ty, entries) in triplets {
            let dim = entries.iter().map(|e| e.1).max().unwrap() + 1;
            let mut m = Matrix::zeros(b.node_count(ty), dim);
            for (i, d, v) in entries {
                m[(i, d)] = v;
            }
            b.set_features(ty, m);
        }
    }

    b.build()
}

/// Writes the three TSV files. Nodes are written grouped by type in internal
/// order, so reloading reproduces the same indices.
pub fn save_hetero_graph(g: &HeteroGraph, paths: &DatasetPaths) -> Result<(), HinError> {
    let write = |path: &Path, text: String| {
        fs::write(path, text).map_err(|source| HinError::Io {
            path: path.display().to_string(),
            source,
        })
    };

    let ids = g.ids();
    let mut nodes = format!("{NODES_HEADER}\n");
    for ty in 0..g.node_types().len() {
        for i in 0..g.node_count(ty) {
            let label = g
                .labels()
                .filter(|l| l.node_type == ty)
                .and_then(|l| l.of(i).map(|c| l.classes[c].as_str()))
                .unwrap_or("");
            let _ = writeln!(nodes, "{}\t{}\t{}", ids.external(ty, i), g.type_name(ty), label);
        }
    }
    write(&paths.nodes, nodes)?;

    let mut edges = format!("{EDGES_HEADER}\n");
    for (a, i, b, j) in g.edges() {
        let _ = writeln!(edges, "{}\t{}", ids.external(a, i), ids.external(b, j));
    }
    write(&paths.edges, edges)?;

    let mut feats = format!("{FEATURES_HEADER}\n");
    for ty in 0..g.node_types().len() {
        let Some(m) = g.features(ty) else { continue };
        if m.cols() == 0 {
            continue;
        }
        let last = m.cols() - 1;
        let last_col_empty = (0..m.rows()).all(|i| m[(i, last)] == 0.0);
        for i in 0..m.rows() {
            for (d, &v) in m.row(i).iter().enumerate() {
                // an explicit zero in the last column keeps the width on reload
                let pin_width = last_col_empty && i == 0 && d == last;
                if v != 0.0 || pin_width {
                    let _ = writeln!(feats, "{}\t{}\t{}", ids.external(ty, i), d, v);
                }
            }
        }
    }
    write(&paths.features, feats)
}
