//! Loader for the TU flat-file graph collection format.
//!
//! A collection `DS` in directory `root` consists of
//!
//! * `DS_A.txt`: one directed edge `i, j` per line, 1-based global node ids
//! * `DS_graph_indicator.txt`: the 1-based graph id of every node
//! * `DS_graph_labels.txt` (optional): one integer class per graph
//! * `DS_node_attributes.txt` (optional): comma-separated reals per node
//! * `DS_node_labels.txt` (optional): one integer label per node
//!
//! Commas and whitespace are both accepted as separators.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use denoise_core::{Dataset, Graph, Label, Matrix};
use thiserror::Error;

/// Degree cap for collections that carry neither attributes nor node labels.
pub const DEFAULT_MAX_DEGREE: usize = 64;

#[derive(Debug, Error)]
pub enum TuError {
    #[error("missing file {0}")]
    MissingFile(PathBuf),
    #[error("{}:{line}: malformed line", file.display())]
    MalformedLine { file: PathBuf, line: usize },
    #[error("{}:{line}: node id {id} does not exist", file.display())]
    DanglingNodeId { file: PathBuf, line: usize, id: usize },
    #[error("{}:{line}: edge joins nodes of different graphs", file.display())]
    CrossGraphEdge { file: PathBuf, line: usize },
    #[error("inconsistent counts: {0}")]
    InconsistentCounts(String),
    #[error("reading {}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("graph {graph}: {source}")]
    Graph { graph: usize, source: denoise_core::Error },
}

/// Which graph class is treated as anomalous.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ClassPolicy {
    /// The least frequent graph label; ties go to the larger label value.
    #[default]
    Minority,
    Explicit(i64),
}

/// Preferred source of node features when a collection has both a node
/// label file and a node attribute file. Whichever exists is used when
/// only one does; node degrees are used when neither does.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NodeFeatures {
    /// One-hot node labels.
    #[default]
    Labels,
    Attributes,
    /// Attribute columns followed by one-hot labels.
    Both,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TuOptions {
    pub policy: ClassPolicy,
    pub features: NodeFeatures,
    pub max_degree: usize,
}

impl Default for TuOptions {
    fn default() -> Self {
        TuOptions {
            policy: ClassPolicy::Minority,
            features: NodeFeatures::Labels,
            max_degree: DEFAULT_MAX_DEGREE,
        }
    }
}

/// Where the node attributes of a parsed collection came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AttrSource {
    Attributes,
    AttributesAndLabels,
    NodeLabels,
    Degrees,
}

#[derive(Debug, Clone)]
pub struct TuDataset {
    pub dataset: Dataset,
    /// Raw class of each graph, if the label file exists.
    pub graph_classes: Option<Vec<i64>>,
    /// Raw class mapped to [`Label::Anomalous`].
    pub anomaly_class: Option<i64>,
    pub attr_source: AttrSource,
    /// Non-empty lines in the edge file.
    pub directed_lines: usize,
    pub self_loops_dropped: usize,
}

struct Lines {
    path: PathBuf,
    rows: Vec<(usize, Vec<String>)>,
}

fn read_lines(path: &Path) -> Result<Lines, TuError> {
    let text = fs::read_to_string(path).map_err(|source| {
        if source.kind() == std::io::ErrorKind::NotFound {
            TuError::MissingFile(path.to_path_buf())
        } else {
            TuError::Io {
                path: path.to_path_buf(),
                source,
            }
        }
    })?;
    let rows = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            let fields = l
                .split(|c: char| c == ',' || c.is_whitespace())
                .filter(|f| !f.is_empty())
                .map(str::to_owned)
                .collect();
            (i + 1, fields)
        })
        .collect();
    Ok(Lines {
        path: path.to_path_buf(),
        rows,
    })
}

fn read_optional(path: &Path) -> Result<Option<Lines>, TuError> {
    if path.exists() {
        read_lines(path).map(Some)
    } else {
        Ok(None)
    }
}

impl Lines {
    fn malformed(&self, line: usize) -> TuError {
        TuError::MalformedLine {
            file: self.path.clone(),
            line,
        }
    }

    fn single<T: std::str::FromStr>(&self) -> Result<Vec<T>, TuError> {
        self.rows
            .iter()
            .map(|(line, f)| match f.as_slice() {
                [v] => v.parse().map_err(|_| self.malformed(*line)),
                _ => Err(self.malformed(*line)),
            })
            .collect()
    }
}

fn file(root: &Path, name: &str, suffix: &str) -> PathBuf {
    root.join(format!("{name}_{suffix}.txt"))
}

/// One-hot rows over the label range `min..=max`.
fn one_hot(values: &[i64]) -> Vec<Vec<f64>> {
    let lo = values.iter().copied().min().unwrap_or(0);
    let hi = values.iter().copied().max().unwrap_or(0);
    let width = (hi - lo + 1) as usize;
    values
        .iter()
        .map(|&v| {
            let mut row = vec![0.0; width];
            row[(v - lo) as usize] = 1.0;
            row
        })
        .collect()
}

fn anomaly_class(classes: &[i64], policy: ClassPolicy) -> Option<i64> {
    match policy {
        ClassPolicy::Explicit(c) => Some(c),
        ClassPolicy::Minority => {
            let mut counts: BTreeMap<i64, usize> = BTreeMap::new();
            for &c in classes {
                *counts.entry(c).or_default() += 1;
            }
            if counts.len() < 2 {
                return None;
            }
            counts.into_iter().min_by(|a, b| a.1.cmp(&b.1).then(b.0.cmp(&a.0))).map(|(c, _)| c)
        }
    }
}

/// Parses collection `name` under `root`.
pub fn parse_tudataset(root: &Path, name: &str, opts: &TuOptions) -> Result<TuDataset, TuError> {
    let edges = read_lines(&file(root, name, "A"))?;
    let indicator_lines = read_lines(&file(root, name, "graph_indicator"))?;
    let indicator: Vec<usize> = indicator_lines.single()?;
    let labels_file = read_optional(&file(root, name, "graph_labels"))?;
    let attrs_file = read_optional(&file(root, name, "node_attributes"))?;
    let node_labels_file = read_optional(&file(root, name, "node_labels"))?;

    let n_nodes = indicator.len();
    if let Some(pos) = indicator.iter().position(|&g| g == 0) {
        return Err(indicator_lines.malformed(indicator_lines.rows[pos].0));
    }
    let classes: Option<Vec<i64>> = labels_file.as_ref().map(Lines::single).transpose()?;
    let n_graphs = match &classes {
        Some(c) => {
            let max_id = indicator.iter().copied().max().unwrap_or(0);
            if max_id > c.len() {
                return Err(TuError::InconsistentCounts(format!(
                    "graph indicator references graph {max_id} but {} graph labels are given",
                    c.len()
                )));
            }
            c.len()
        }
        None => indicator.iter().copied().max().unwrap_or(0),
    };

    // global node -> (graph, local index)
    let mut sizes = vec![0usize; n_graphs];
    let mut local = Vec::with_capacity(n_nodes);
    for &g in &indicator {
        local.push(sizes[g - 1]);
        sizes[g - 1] += 1;
    }

    let mut graph_edges: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n_graphs];
    let mut self_loops = 0;
    for (line, fields) in &edges.rows {
        let [a, b] = fields.as_slice() else {
            return Err(edges.malformed(*line));
        };
        let mut ids = [0usize; 2];
        for (slot, f) in ids.iter_mut().zip([a, b]) {
            let id: usize = f.parse().map_err(|_| edges.malformed(*line))?;
            if id == 0 || id > n_nodes {
                return Err(TuError::DanglingNodeId {
                    file: edges.path.clone(),
                    line: *line,
                    id,
                });
            }
            *slot = id - 1;
        }
        let [a, b] = ids;
        if indicator[a] != indicator[b] {
            return Err(TuError::CrossGraphEdge {
                file: edges.path.clone(),
                line: *line,
            });
        }
        if a == b {
            self_loops += 1;
            continue;
        }
        graph_edges[indicator[a] - 1].push((local[a], local[b]));
    }

    let node_labels: Option<Vec<i64>> = node_labels_file.as_ref().map(Lines::single).transpose()?;
    if let Some(l) = &node_labels {
        if l.len() != n_nodes {
            return Err(TuError::InconsistentCounts(format!(
                "{} node labels for {n_nodes} nodes",
                l.len()
            )));
        }
    }
    let attr_rows: Option<Vec<Vec<f64>>> = match &attrs_file {
        Some(lines) => {
            if lines.rows.len() != n_nodes {
                return Err(TuError::InconsistentCounts(format!(
                    "{} attribute rows for {n_nodes} nodes",
                    lines.rows.len()
                )));
            }
            let width = lines.rows.first().map_or(0, |r| r.1.len());
            let rows = lines
                .rows
                .iter()
                .map(|(line, f)| {
                    if f.len() != width {
                        return Err(lines.malformed(*line));
                    }
                    f.iter().map(|v| v.parse::<f64>().map_err(|_| lines.malformed(*line))).collect()
                })
                .collect::<Result<Vec<Vec<f64>>, _>>()?;
            Some(rows)
        }
        None => None,
    };

    let (rows, source): (Option<Vec<Vec<f64>>>, AttrSource) = match (attr_rows, node_labels, opts.features) {
        (Some(mut rows), Some(l), NodeFeatures::Both) => {
            for (r, h) in rows.iter_mut().zip(one_hot(&l)) {
                r.extend(h);
            }
            (Some(rows), AttrSource::AttributesAndLabels)
        }
        (Some(rows), Some(_), NodeFeatures::Attributes) | (Some(rows), None, _) => (Some(rows), AttrSource::Attributes),
        (_, Some(l), _) => (Some(one_hot(&l)), AttrSource::NodeLabels),
        (None, None, _) => (None, AttrSource::Degrees),
    };

    let anomaly = classes.as_deref().and_then(|c| anomaly_class(c, opts.policy));
    let mut members: Vec<Vec<usize>> = sizes.iter().map(|&s| Vec::with_capacity(s)).collect();
    for (node, &g) in indicator.iter().enumerate() {
        members[g - 1].push(node);
    }
    let width = rows.as_ref().and_then(|r| r.first()).map_or(1, Vec::len).max(1);
    let mut graphs = Vec::with_capacity(n_graphs);
    for (gi, nodes) in members.iter().enumerate() {
        let mut data = Vec::with_capacity(nodes.len() * width);
        for &node in nodes {
            match &rows {
                Some(r) => data.extend_from_slice(&r[node]),
                None => data.push(0.0),
            }
        }
        let attrs = Matrix::from_vec(nodes.len(), width, data).map_err(|source| TuError::Graph { graph: gi, source })?;
        let label = match (&classes, anomaly) {
            (Some(c), Some(a)) if c[gi] == a => Label::Anomalous,
            _ => Label::Normal,
        };
        let g = Graph::new_allow_nonfinite(nodes.len(), &graph_edges[gi], attrs, label)
            .map_err(|source| TuError::Graph { graph: gi, source })?;
        graphs.push(g);
    }
    let mut dataset = Dataset::new(name, graphs).map_err(|source| TuError::Graph { graph: 0, source })?;
    if source == AttrSource::Degrees {
        dataset = dataset
            .with_degree_features(opts.max_degree)
            .map_err(|source| TuError::Graph { graph: 0, source })?;
    }
    Ok(TuDataset {
        dataset,
        graph_classes: classes,
        anomaly_class: anomaly,
        attr_source: source,
        directed_lines: edges.rows.len(),
        self_loops_dropped: self_loops,
    })
}

/// Writes `d` as collection `name` under `root`: edge, indicator, graph
/// label (`1` = anomalous) and node attribute files. Attributes use the
/// shortest round-trip float formatting, so parsing the output back
/// reproduces `d` exactly.
pub fn write_tudataset(d: &Dataset, root: &Path, name: &str) -> Result<(), TuError> {
    let mut a = String::new();
    let mut indicator = String::new();
    let mut labels = String::new();
    let mut attrs = String::new();
    let mut offset = 0;
    for (gi, g) in d.graphs().iter().enumerate() {
        for &(i, j) in g.edges() {
            let (i, j) = (offset + i + 1, offset + j + 1);
            a.push_str(&format!("{i}, {j}\n{j}, {i}\n"));
        }
        for r in 0..g.node_count() {
            indicator.push_str(&format!("{}\n", gi + 1));
            let row: Vec<String> = g.attrs().row(r).iter().map(f64::to_string).collect();
            attrs.push_str(&row.join(", "));
            attrs.push('\n');
        }
        labels.push_str(&format!("{}\n", g.label().as_u8()));
        offset += g.node_count();
    }
    fs::create_dir_all(root).map_err(|source| TuError::Io {
        path: root.to_path_buf(),
        source,
    })?;
    for (suffix, body) in [("A", a), ("graph_indicator", indicator), ("graph_labels", labels), ("node_attributes", attrs)] {
        let path = file(root, name, suffix);
        fs::write(&path, body).map_err(|source| TuError::Io { path, source })?;
    }
    Ok(())
}

/// Summary of a dataset plus anything that would stop training.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub name: String,
    pub graphs: usize,
    pub attr_dim: usize,
    /// `(normals, anomalies)`.
    pub class_counts: (usize, usize),
    pub mean_nodes: f64,
    pub mean_edges: f64,
    /// Per class, normal first.
    pub class_mean_nodes: [f64; 2],
    pub class_mean_edges: [f64; 2],
    pub nonfinite_graphs: Vec<usize>,
    pub empty_graphs: Vec<usize>,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.nonfinite_graphs.is_empty() && self.empty_graphs.is_empty()
    }
}

pub fn validate_dataset(d: &Dataset) -> ValidationReport {
    let mean = |f: &dyn Fn(&Graph) -> usize, filter: &dyn Fn(&Graph) -> bool| {
        let (sum, count) = d
            .graphs()
            .iter()
            .filter(|g| filter(g))
            .fold((0usize, 0usize), |(s, c), g| (s + f(g), c + 1));
        if count == 0 {
            0.0
        } else {
            sum as f64 / count as f64
        }
    };
    let nodes = |g: &Graph| g.node_count();
    let edges = |g: &Graph| g.edge_count();
    let any = |_: &Graph| true;
    let normal = |g: &Graph| !g.label().is_anomalous();
    let anomalous = |g: &Graph| g.label().is_anomalous();
    ValidationReport {
        name: d.name().to_owned(),
        graphs: d.len(),
        attr_dim: d.attr_dim(),
        class_counts: d.class_counts(),
        mean_nodes: mean(&nodes, &any),
        mean_edges: mean(&edges, &any),
        class_mean_nodes: [mean(&nodes, &normal), mean(&nodes, &anomalous)],
        class_mean_edges: [mean(&edges, &normal), mean(&edges, &anomalous)],
        nonfinite_graphs: (0..d.len()).filter(|&i| !d.graphs()[i].attrs().is_finite()).collect(),
        empty_graphs: (0..d.len()).filter(|&i| d.graphs()[i].node_count() == 0).collect(),
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "dataset      {}", self.name)?;
        writeln!(f, "graphs       {}", self.graphs)?;
        writeln!(f, "attr_dim     {}", self.attr_dim)?;
        writeln!(f, "normals      {}", self.class_counts.0)?;
        writeln!(f, "anomalies    {}", self.class_counts.1)?;
        writeln!(f, "mean nodes   {:.2} (normal {:.2}, anomalous {:.2})", self.mean_nodes, self.class_mean_nodes[0], self.class_mean_nodes[1])?;
        writeln!(f, "mean edges   {:.2} undirected (normal {:.2}, anomalous {:.2})", self.mean_edges, self.class_mean_edges[0], self.class_mean_edges[1])?;
        writeln!(f, "non-finite   {:?}", self.nonfinite_graphs)?;
        write!(f, "empty        {:?}", self.empty_graphs)
    }
}
