//! Undirected attributed graphs, datasets, and a seeded synthetic generator.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::matrix::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Label {
    Normal,
    Anomalous,
}

impl Label {
    pub fn as_u8(self) -> u8 {
        match self {
            Label::Normal => 0,
            Label::Anomalous => 1,
        }
    }

    pub fn from_u8(v: u8) -> Option<Self> {
        match v {
            0 => Some(Label::Normal),
            1 => Some(Label::Anomalous),
            _ => None,
        }
    }

    pub fn is_anomalous(self) -> bool {
        self == Label::Anomalous
    }
}

/// An undirected simple graph with a node-attribute matrix.
///
/// Edges are stored once as `(i, j)` with `i < j`, sorted.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    n: usize,
    edges: Vec<(usize, usize)>,
    attrs: Matrix,
    label: Label,
}

impl Graph {
    /// Validates and canonicalizes: symmetric duplicates collapse to one
    /// undirected edge, self-loops are rejected.
    pub fn new(n: usize, edges: &[(usize, usize)], attrs: Matrix, label: Label) -> Result<Self> {
        if !attrs.is_finite() {
            return Err(Error::NonFiniteResult("build_graph"));
        }
        Self::new_allow_nonfinite(n, edges, attrs, label)
    }

    /// Like [`Graph::new`] but keeps non-finite attributes, for loaders
    /// that report bad values instead of failing.
    pub fn new_allow_nonfinite(
        n: usize,
        edges: &[(usize, usize)],
        attrs: Matrix,
        label: Label,
    ) -> Result<Self> {
        if attrs.rows() != n || attrs.cols() == 0 {
            return Err(Error::ShapeMismatch {
                op: "build_graph",
                lhs: (n, attrs.cols().max(1)),
                rhs: attrs.shape(),
            });
        }
        let mut canon = Vec::with_capacity(edges.len());
        for &(a, b) in edges {
            for index in [a, b] {
                if index >= n {
                    return Err(Error::IndexOutOfRange { index, n });
                }
            }
            if a == b {
                return Err(Error::SelfLoop(a));
            }
            canon.push((a.min(b), a.max(b)));
        }
        canon.sort_unstable();
        canon.dedup();
        Ok(Graph {
            n,
            edges: canon,
            attrs,
            label,
        })
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn attrs(&self) -> &Matrix {
        &self.attrs
    }

    pub fn attr_dim(&self) -> usize {
        self.attrs.cols()
    }

    pub fn label(&self) -> Label {
        self.label
    }

    pub fn with_label(mut self, label: Label) -> Self {
        self.label = label;
        self
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.n];
        for &(a, b) in &self.edges {
            deg[a] += 1;
            deg[b] += 1;
        }
        deg
    }

    /// Dense symmetric 0/1 adjacency with zero diagonal.
    pub fn adjacency(&self) -> Matrix {
        adjacency_from_edges(self.n, self.edges.iter().copied())
    }

    /// Relabels node `i` as `perm[i]`.
    pub fn permute_nodes(&self, perm: &[usize]) -> Result<Graph> {
        if !is_permutation(perm, self.n) {
            return Err(Error::NotAPermutation(self.n));
        }
        let mut attrs = Matrix::zeros(self.n, self.attrs.cols());
        for (i, &p) in perm.iter().enumerate() {
            attrs.row_mut(p).copy_from_slice(self.attrs.row(i));
        }
        let edges: Vec<_> = self.edges.iter().map(|&(a, b)| (perm[a], perm[b])).collect();
        Graph::new(self.n, &edges, attrs, self.label)
    }

    /// Replaces the attributes with a one-hot encoding of
    /// `min(degree, max_deg)`, width `max_deg + 1`.
    pub fn degree_features(&self, max_deg: usize) -> Result<Graph> {
        if max_deg == 0 {
            return Err(Error::InvalidConfig("max_deg must be at least 1"));
        }
        let mut attrs = Matrix::zeros(self.n, max_deg + 1);
        for (i, d) in self.degrees().into_iter().enumerate() {
            attrs[(i, d.min(max_deg))] = 1.0;
        }
        Ok(Graph {
            n: self.n,
            edges: self.edges.clone(),
            attrs,
            label: self.label,
        })
    }
}

pub fn adjacency_from_edges(n: usize, edges: impl Iterator<Item = (usize, usize)>) -> Matrix {
    let mut a = Matrix::zeros(n, n);
    for (i, j) in edges {
        a[(i, j)] = 1.0;
        a[(j, i)] = 1.0;
    }
    a
}

pub fn is_permutation(perm: &[usize], n: usize) -> bool {
    if perm.len() != n {
        return false;
    }
    let mut seen = vec![false; n];
    for &p in perm {
        if p >= n || seen[p] {
            return false;
        }
        seen[p] = true;
    }
    true
}

pub fn invert_permutation(perm: &[usize]) -> Vec<usize> {
    let mut inv = vec![0; perm.len()];
    for (i, &p) in perm.iter().enumerate() {
        inv[p] = i;
    }
    inv
}

/// An ordered collection of graphs sharing one attribute width.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    name: String,
    graphs: Vec<Graph>,
    attr_dim: usize,
}

impl Dataset {
    pub fn new(name: impl Into<String>, graphs: Vec<Graph>) -> Result<Self> {
        let attr_dim = graphs.first().map_or(0, Graph::attr_dim);
        if let Some(g) = graphs.iter().find(|g| g.attr_dim() != attr_dim) {
            return Err(Error::ShapeMismatch {
                op: "dataset",
                lhs: (0, attr_dim),
                rhs: (0, g.attr_dim()),
            });
        }
        Ok(Dataset {
            name: name.into(),
            graphs,
            attr_dim,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn graphs(&self) -> &[Graph] {
        &self.graphs
    }

    pub fn into_graphs(self) -> Vec<Graph> {
        self.graphs
    }

    pub fn len(&self) -> usize {
        self.graphs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.graphs.is_empty()
    }

    pub fn attr_dim(&self) -> usize {
        self.attr_dim
    }

    pub fn labels(&self) -> Vec<Label> {
        self.graphs.iter().map(Graph::label).collect()
    }

    /// `(normals, anomalies)`.
    pub fn class_counts(&self) -> (usize, usize) {
        let anomalies = self.graphs.iter().filter(|g| g.label().is_anomalous()).count();
        (self.graphs.len() - anomalies, anomalies)
    }

    /// Applies [`Graph::degree_features`] to every graph.
    pub fn with_degree_features(&self, max_deg: usize) -> Result<Dataset> {
        let graphs = self
            .graphs
            .iter()
            .map(|g| g.degree_features(max_deg))
            .collect::<Result<Vec<_>>>()?;
        Dataset::new(self.name.clone(), graphs)
    }
}

/// Parameters of the Erdős–Rényi two-population generator.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub n_graphs: usize,
    pub nodes_lo: usize,
    pub nodes_hi: usize,
    pub p_normal: f64,
    pub p_anom: f64,
    pub attr_shift: f64,
    pub anom_frac: f64,
    pub attr_dim: usize,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_graphs: 300,
            nodes_lo: 10,
            nodes_hi: 30,
            p_normal: 0.1,
            p_anom: 0.3,
            attr_shift: 1.0,
            anom_frac: 0.2,
            attr_dim: 8,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let open_unit = |p: f64| p > 0.0 && p < 1.0;
        if !open_unit(self.p_normal) || !open_unit(self.p_anom) {
            return Err(Error::InvalidConfig("edge probabilities must lie in (0, 1)"));
        }
        if !(0.0..1.0).contains(&self.anom_frac) {
            return Err(Error::InvalidConfig("anom_frac must lie in [0, 1)"));
        }
        if self.nodes_lo == 0 || self.nodes_lo > self.nodes_hi {
            return Err(Error::InvalidConfig("need 1 <= nodes_lo <= nodes_hi"));
        }
        if self.attr_dim == 0 || !self.attr_shift.is_finite() {
            return Err(Error::InvalidConfig("attr_dim must be positive and attr_shift finite"));
        }
        Ok(())
    }
}

/// Normal graphs are G(n, p_normal) with standard Gaussian attributes;
/// anomalies are G(n, p_anom) with attributes shifted by `attr_shift` in
/// every coordinate. Bit-deterministic in `(cfg, seed)`.
pub fn gen_synthetic(cfg: &SynthConfig, seed: u64) -> Result<Dataset> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_anom = libm::round(cfg.anom_frac * cfg.n_graphs as f64) as usize;
    let mut labels: Vec<Label> = (0..cfg.n_graphs)
        .map(|i| if i < n_anom { Label::Anomalous } else { Label::Normal })
        .collect();
    labels.shuffle(&mut rng);

    let mut graphs = Vec::with_capacity(cfg.n_graphs);
    for label in labels {
        let n = rng.random_range(cfg.nodes_lo..=cfg.nodes_hi);
        let (p, shift) = match label {
            Label::Normal => (cfg.p_normal, 0.0),
            Label::Anomalous => (cfg.p_anom, cfg.attr_shift),
        };
        let mut edges = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                if rng.random_bool(p) {
                    edges.push((i, j));
                }
            }
        }
        let data = (0..n * cfg.attr_dim)
            .map(|_| rng.sample::<f64, _>(StandardNormal) + shift)
            .collect();
        let attrs = Matrix::from_vec(n, cfg.attr_dim, data)?;
        graphs.push(Graph::new(n, &edges, attrs, label)?);
    }
    Dataset::new("synthetic", graphs)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn attrs(n: usize) -> Matrix {
        Matrix::filled(n, 2, 1.0)
    }

    #[test]
    fn build_dedups_symmetric_pairs() {
        let g = Graph::new(3, &[(0, 1), (1, 0), (1, 2)], attrs(3), Label::Normal).unwrap();
        assert_eq!(g.edges(), &[(0, 1), (1, 2)]);
    }

    #[test]
    fn build_rejects_bad_input() {
        assert_eq!(
            Graph::new(2, &[(0, 0)], attrs(2), Label::Normal),
            Err(Error::SelfLoop(0))
        );
        assert_eq!(
            Graph::new(3, &[(0, 5)], attrs(3), Label::Normal),
            Err(Error::IndexOutOfRange { index: 5, n: 3 })
        );
        assert!(matches!(
            Graph::new(3, &[], attrs(2), Label::Normal),
            Err(Error::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn permutation_edge_cases() {
        let g = Graph::new(2, &[(0, 1)], attrs(2), Label::Anomalous).unwrap();
        assert_eq!(g.permute_nodes(&[0, 1]).unwrap(), g);
        let swapped = g.permute_nodes(&[1, 0]).unwrap();
        assert_eq!(swapped.edges(), &[(0, 1)]);
        assert_eq!(swapped.label(), Label::Anomalous);
        assert_eq!(g.permute_nodes(&[0, 0]), Err(Error::NotAPermutation(2)));
    }

    #[test]
    fn degree_one_hot() {
        let tri = Graph::new(3, &[(0, 1), (1, 2), (0, 2)], attrs(3), Label::Normal).unwrap();
        let f = tri.degree_features(3).unwrap();
        assert_eq!(f.attr_dim(), 4);
        for i in 0..3 {
            assert_eq!(f.attrs().row(i), &[0.0, 0.0, 1.0, 0.0]);
        }

        let iso = Graph::new(1, &[], attrs(1), Label::Normal).unwrap();
        assert_eq!(iso.degree_features(3).unwrap().attrs().row(0), &[1.0, 0.0, 0.0, 0.0]);

        let star_edges: Vec<_> = (1..=5).map(|i| (0, i)).collect();
        let star = Graph::new(6, &star_edges, attrs(6), Label::Normal).unwrap();
        let f = star.degree_features(3).unwrap();
        // center has degree 5, clamped into the last slot
        assert_eq!(f.attrs().row(0), &[0.0, 0.0, 0.0, 1.0]);
        assert_eq!(f.attrs().row(1), &[0.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn adjacency_symmetric_zero_diagonal() {
        let g = Graph::new(4, &[(0, 1), (2, 1), (3, 0)], attrs(4), Label::Normal).unwrap();
        let a = g.adjacency();
        assert_eq!(a, a.transpose());
        assert!((0..4).all(|i| a[(i, i)] == 0.0));
        assert_eq!(a.sum(), 6.0);
    }

    #[test]
    fn synthetic_validation_and_counts() {
        let bad = SynthConfig {
            p_normal: 1.0,
            ..SynthConfig::default()
        };
        assert!(matches!(gen_synthetic(&bad, 0), Err(Error::InvalidConfig(_))));
        let clean = SynthConfig {
            n_graphs: 40,
            anom_frac: 0.0,
            ..SynthConfig::default()
        };
        assert_eq!(gen_synthetic(&clean, 3).unwrap().class_counts(), (40, 0));
    }
}
