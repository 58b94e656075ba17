//! Graph container, adjacency normalization and sparse aggregation.
//!
//! Edges are stored as directed pairs. Undirected inputs carry both
//! directions. Normalized weights are kept in CSR form keyed by the
//! destination row `v`, so `aggregate` computes `out[v] = Σ_u e_vu · m[u]`.

use ndarray::{Array2, ArrayView2, Axis};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    num_nodes: usize,
    num_classes: usize,
    edges: Vec<(usize, usize)>,
    features: Array2<f64>,
    labels: Vec<usize>,
    train_mask: Vec<bool>,
    val_mask: Vec<bool>,
    test_mask: Vec<bool>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MaskKind {
    Train,
    Val,
    Test,
}

impl MaskKind {
    pub fn name(self) -> &'static str {
        match self {
            MaskKind::Train => "train",
            MaskKind::Val => "val",
            MaskKind::Test => "test",
        }
    }
}

/// Split masks over the nodes of one graph.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Masks {
    pub train: Vec<bool>,
    pub val: Vec<bool>,
    pub test: Vec<bool>,
}

impl Masks {
    pub fn empty(n: usize) -> Self {
        Masks { train: vec![false; n], val: vec![false; n], test: vec![false; n] }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        for (name, m) in [("train", &self.train), ("val", &self.val), ("test", &self.test)] {
            if m.len() != n {
                return Err(Error::RowCountMismatch { what: format!("{name} mask"), expected: n, found: m.len() });
            }
        }
        for v in 0..n {
            if self.train[v] && self.val[v] {
                return Err(Error::OverlappingMasks { node: v, first: "train", second: "val" });
            }
            if self.train[v] && self.test[v] {
                return Err(Error::OverlappingMasks { node: v, first: "train", second: "test" });
            }
            if self.val[v] && self.test[v] {
                return Err(Error::OverlappingMasks { node: v, first: "val", second: "test" });
            }
        }
        Ok(())
    }
}

impl Graph {
    /// Builds a graph from directed edge pairs. Duplicate pairs are collapsed.
    pub fn new(
        features: Array2<f64>,
        edges: Vec<(usize, usize)>,
        labels: Vec<usize>,
        num_classes: usize,
        masks: Masks,
    ) -> Result<Self> {
        let num_nodes = features.nrows();
        if labels.len() != num_nodes {
            return Err(Error::RowCountMismatch { what: "labels".into(), expected: num_nodes, found: labels.len() });
        }
        if num_classes == 0 {
            return Err(Error::invalid("num_classes must be positive"));
        }
        for &(u, v) in &edges {
            for idx in [u, v] {
                if idx >= num_nodes {
                    return Err(Error::IndexOutOfRange { what: "edge endpoint", index: idx, bound: num_nodes });
                }
            }
        }
        if let Some((v, &c)) = labels.iter().enumerate().find(|(_, &c)| c >= num_classes) {
            return Err(Error::invalid(format!("label {c} of node {v} outside [0, {num_classes})")));
        }
        masks.validate(num_nodes)?;
        let mut edges = edges;
        edges.sort_unstable();
        edges.dedup();
        Ok(Graph {
            num_nodes,
            num_classes,
            edges,
            features,
            labels,
            train_mask: masks.train,
            val_mask: masks.val,
            test_mask: masks.test,
        })
    }

    /// Builds a graph from undirected pairs, storing both directions.
    pub fn from_undirected(
        features: Array2<f64>,
        undirected: &[(usize, usize)],
        labels: Vec<usize>,
        num_classes: usize,
        masks: Masks,
    ) -> Result<Self> {
        let edges = undirected.iter().flat_map(|&(u, v)| [(u, v), (v, u)]).collect();
        Graph::new(features, edges, labels, num_classes, masks)
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn feature_dim(&self) -> usize {
        self.features.ncols()
    }

    /// Sorted, deduplicated directed pairs.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    /// Each undirected edge once (`u <= v`), assuming symmetric storage.
    pub fn undirected_edges(&self) -> Vec<(usize, usize)> {
        self.edges.iter().copied().filter(|&(u, v)| u <= v).collect()
    }

    pub fn features(&self) -> &Array2<f64> {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn mask(&self, kind: MaskKind) -> &[bool] {
        match kind {
            MaskKind::Train => &self.train_mask,
            MaskKind::Val => &self.val_mask,
            MaskKind::Test => &self.test_mask,
        }
    }

    pub fn masks(&self) -> Masks {
        Masks { train: self.train_mask.clone(), val: self.val_mask.clone(), test: self.test_mask.clone() }
    }

    pub fn with_masks(mut self, masks: Masks) -> Result<Self> {
        masks.validate(self.num_nodes)?;
        self.train_mask = masks.train;
        self.val_mask = masks.val;
        self.test_mask = masks.test;
        Ok(self)
    }

    pub fn with_features(mut self, features: Array2<f64>) -> Result<Self> {
        if features.nrows() != self.num_nodes {
            return Err(Error::RowCountMismatch {
                what: "features".into(),
                expected: self.num_nodes,
                found: features.nrows(),
            });
        }
        self.features = features;
        Ok(self)
    }

    /// Fraction of stored edges (excluding self-loops) joining same-label nodes.
    pub fn edge_homophily(&self) -> f64 {
        let (same, total) = self
            .edges
            .iter()
            .filter(|(u, v)| u != v)
            .fold((0usize, 0usize), |(s, t), &(u, v)| (s + usize::from(self.labels[u] == self.labels[v]), t + 1));
        if total == 0 {
            0.0
        } else {
            same as f64 / total as f64
        }
    }

    /// One-hot label matrix, `num_nodes × num_classes`.
    pub fn one_hot_labels(&self) -> Array2<f64> {
        let mut y = Array2::zeros((self.num_nodes, self.num_classes));
        for (v, &c) in self.labels.iter().enumerate() {
            y[[v, c]] = 1.0;
        }
        y
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NormScheme {
    /// `D^{-1} A`
    RowNormalized,
    /// `D^{-1/2} A D^{-1/2}`
    Symmetric,
}

impl NormScheme {
    pub fn name(self) -> &'static str {
        match self {
            NormScheme::RowNormalized => "row",
            NormScheme::Symmetric => "sym",
        }
    }
}

impl std::str::FromStr for NormScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "row" | "rw" | "row-normalized" => Ok(NormScheme::RowNormalized),
            "sym" | "symmetric" => Ok(NormScheme::Symmetric),
            other => Err(Error::invalid(format!("unknown normalization scheme `{other}`"))),
        }
    }
}

/// Per-edge mixing coefficients in CSR layout.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedWeights {
    scheme: NormScheme,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
    degrees: Vec<usize>,
}

impl NormalizedWeights {
    pub fn scheme(&self) -> NormScheme {
        self.scheme
    }

    pub fn num_nodes(&self) -> usize {
        self.degrees.len()
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn degrees(&self) -> &[usize] {
        &self.degrees
    }

    /// `(u, e_vu)` pairs of row `v`.
    pub fn row(&self, v: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.row_ptr[v]..self.row_ptr[v + 1];
        self.col_idx[span.clone()].iter().copied().zip(self.values[span].iter().copied())
    }

    pub fn weight(&self, v: usize, u: usize) -> Option<f64> {
        self.row(v).find(|&(w, _)| w == u).map(|(_, e)| e)
    }

    /// Dense `N × N` copy. Intended for tests and small graphs.
    pub fn to_dense(&self) -> Array2<f64> {
        let n = self.num_nodes();
        let mut a = Array2::zeros((n, n));
        for v in 0..n {
            for (u, e) in self.row(v) {
                a[[v, u]] += e;
            }
        }
        a
    }

    /// Identity weights: one self-loop of weight 1 per node.
    pub fn identity(n: usize, scheme: NormScheme) -> Self {
        NormalizedWeights {
            scheme,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
            values: vec![1.0; n],
            degrees: vec![1; n],
        }
    }
}

/// Builds mixing weights from the stored edges.
///
/// Nodes left without any edge receive a self-loop regardless of
/// `add_self_loops`, so every row carries at least one weight.
pub fn normalize_adjacency(graph: &Graph, scheme: NormScheme, add_self_loops: bool) -> NormalizedWeights {
    normalize_edges(graph.num_nodes(), graph.edges(), scheme, add_self_loops)
}

/// Same as [`normalize_adjacency`] over a raw directed edge list.
pub fn normalize_edges(
    n: usize,
    edges: &[(usize, usize)],
    scheme: NormScheme,
    add_self_loops: bool,
) -> NormalizedWeights {
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    for &(v, u) in edges {
        adj[v].push(u);
    }
    for (v, nbrs) in adj.iter_mut().enumerate() {
        if add_self_loops || nbrs.is_empty() {
            nbrs.push(v);
        }
        nbrs.sort_unstable();
        nbrs.dedup();
    }
    let degrees: Vec<usize> = adj.iter().map(Vec::len).collect();

    let mut row_ptr = Vec::with_capacity(n + 1);
    let mut col_idx = Vec::with_capacity(edges.len() + n);
    let mut values = Vec::with_capacity(edges.len() + n);
    row_ptr.push(0);
    for (v, nbrs) in adj.iter().enumerate() {
        for &u in nbrs {
            let e = match scheme {
                NormScheme::RowNormalized => 1.0 / degrees[v] as f64,
                NormScheme::Symmetric => 1.0 / ((degrees[v] * degrees[u]) as f64).sqrt(),
            };
            col_idx.push(u);
            values.push(e);
        }
        row_ptr.push(col_idx.len());
    }
    NormalizedWeights { scheme, row_ptr, col_idx, values, degrees }
}

fn check_rows(weights: &NormalizedWeights, m: &ArrayView2<f64>, op: &'static str) -> Result<()> {
    if m.nrows() != weights.num_nodes() {
        return Err(Error::dims(op, format!("{} rows", weights.num_nodes()), format!("{} rows", m.nrows())));
    }
    Ok(())
}

/// Sparse-times-dense product `out[v] = Σ_u e_vu · m[u]`, `O(nnz · d)`.
pub fn aggregate(weights: &NormalizedWeights, m: &Array2<f64>) -> Result<Array2<f64>> {
    aggregate_view(weights, m.view())
}

pub fn aggregate_view(weights: &NormalizedWeights, m: ArrayView2<f64>) -> Result<Array2<f64>> {
    check_rows(weights, &m, "aggregate")?;
    let mut out = Array2::zeros((m.nrows(), m.ncols()));
    for (v, mut row) in out.axis_iter_mut(Axis(0)).enumerate() {
        for (u, e) in weights.row(v) {
            row.scaled_add(e, &m.row(u));
        }
    }
    Ok(out)
}

/// Transposed product `out[u] = Σ_v e_vu · m[v]`, the adjoint of [`aggregate`].
pub fn aggregate_transpose(weights: &NormalizedWeights, m: &Array2<f64>) -> Result<Array2<f64>> {
    check_rows(weights, &m.view(), "aggregate_transpose")?;
    let mut out = Array2::zeros((m.nrows(), m.ncols()));
    for v in 0..weights.num_nodes() {
        let src = m.row(v);
        for (u, e) in weights.row(v) {
            out.row_mut(u).scaled_add(e, &src);
        }
    }
    Ok(out)
}


#[cfg(test)]
mod tests {
    use super::fixtures::path3;
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;
    use rand::{Rng, SeedableRng};

    #[test]
    fn path_row_normalized() {
        let w = normalize_adjacency(&path3(), NormScheme::RowNormalized, false);
        assert_eq!(w.weight(0, 1), Some(1.0));
        assert_eq!(w.weight(1, 0), Some(0.5));
        assert_eq!(w.weight(1, 2), Some(0.5));
        assert_eq!(w.weight(2, 1), Some(1.0));
        assert_eq!(w.nnz(), 4);
    }

    #[test]
    fn path_symmetric() {
        let w = normalize_adjacency(&path3(), NormScheme::Symmetric, false);
        let s = 1.0 / 2f64.sqrt();
        for (v, u) in [(0, 1), (1, 0), (1, 2), (2, 1)] {
            assert_abs_diff_eq!(w.weight(v, u).unwrap(), s, epsilon = 1e-15);
        }
    }

    #[test]
    fn isolated_node_gets_self_loop() {
        let g = Graph::new(array![[3.0]], vec![], vec![0], 1, Masks::empty(1)).unwrap();
        for scheme in [NormScheme::RowNormalized, NormScheme::Symmetric] {
            let w = normalize_adjacency(&g, scheme, false);
            assert_eq!(w.weight(0, 0), Some(1.0));
        }
    }

    #[test]
    fn self_loops_flag_inserts_diagonal() {
        let w = normalize_adjacency(&path3(), NormScheme::RowNormalized, true);
        assert_eq!(w.degrees(), &[2, 3, 2]);
        assert_abs_diff_eq!(w.weight(1, 1).unwrap(), 1.0 / 3.0);
    }

    #[test]
    fn aggregate_path() {
        let w = normalize_adjacency(&path3(), NormScheme::RowNormalized, false);
        let out = aggregate(&w, &array![[1.0], [2.0], [4.0]]).unwrap();
        assert_eq!(out, array![[2.0], [2.5], [2.0]]);
    }

    #[test]
    fn aggregate_identity() {
        let w = NormalizedWeights::identity(4, NormScheme::RowNormalized);
        let m = array![[1.0, -2.0], [0.5, 3.0], [7.0, 0.0], [1.0, 1.0]];
        assert_eq!(aggregate(&w, &m).unwrap(), m);
    }

    #[test]
    fn aggregate_dimension_mismatch() {
        let w = normalize_adjacency(&path3(), NormScheme::RowNormalized, false);
        let err = aggregate(&w, &Array2::zeros((2, 3))).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { .. }));
    }

    fn random_graph(rng: &mut impl Rng, n: usize, p: f64) -> Graph {
        let mut und = Vec::new();
        for u in 0..n {
            for v in (u + 1)..n {
                if rng.random::<f64>() < p {
                    und.push((u, v));
                }
            }
        }
        let x = Array2::from_shape_fn((n, 8), |_| rng.random_range(-1.0..1.0));
        Graph::from_undirected(x, &und, vec![0; n], 1, Masks::empty(n)).unwrap()
    }

    #[test]
    fn aggregate_matches_dense_product() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let g = random_graph(&mut rng, 50, 0.1);
        for scheme in [NormScheme::RowNormalized, NormScheme::Symmetric] {
            let w = normalize_adjacency(&g, scheme, false);
            // dense D^{-1}A / D^{-1/2}AD^{-1/2} built independently from edges
            let n = g.num_nodes();
            let mut a = Array2::<f64>::zeros((n, n));
            for &(u, v) in g.edges() {
                a[[u, v]] = 1.0;
            }
            for v in 0..n {
                if a.row(v).sum() == 0.0 {
                    a[[v, v]] = 1.0;
                }
            }
            let deg: Vec<f64> = (0..n).map(|v| a.row(v).sum()).collect();
            let dense = Array2::from_shape_fn((n, n), |(i, j)| match scheme {
                NormScheme::RowNormalized => a[[i, j]] / deg[i],
                NormScheme::Symmetric => a[[i, j]] / (deg[i] * deg[j]).sqrt(),
            });
            let m = g.features().clone();
            let diff = &aggregate(&w, &m).unwrap() - &dense.dot(&m);
            assert!(diff.iter().all(|d| d.abs() < 1e-9));
        }
    }

    #[test]
    fn transpose_is_adjoint() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let g = random_graph(&mut rng, 30, 0.15);
        let w = normalize_adjacency(&g, NormScheme::RowNormalized, false);
        let x = Array2::from_shape_fn((30, 3), |_| rng.random_range(-1.0..1.0));
        let y = Array2::from_shape_fn((30, 3), |_| rng.random_range(-1.0..1.0));
        let lhs = (&aggregate(&w, &x).unwrap() * &y).sum();
        let rhs = (&x * &aggregate_transpose(&w, &y).unwrap()).sum();
        assert_abs_diff_eq!(lhs, rhs, epsilon = 1e-10);
    }

    #[test]
    fn rejects_out_of_range_edge() {
        let err = Graph::new(array![[0.0], [1.0]], vec![(0, 2)], vec![0, 0], 1, Masks::empty(2)).unwrap_err();
        assert!(matches!(err, Error::IndexOutOfRange { index: 2, .. }));
    }

    #[test]
    fn rejects_overlapping_masks() {
        let mut m = Masks::empty(2);
        m.train[1] = true;
        m.test[1] = true;
        let err = Graph::new(array![[0.0], [1.0]], vec![], vec![0, 0], 1, m).unwrap_err();
        assert!(matches!(err, Error::OverlappingMasks { node: 1, .. }));
    }

    #[test]
    fn duplicate_edges_collapse() {
        let g = Graph::from_undirected(array![[0.0], [1.0]], &[(0, 1), (1, 0), (0, 1)], vec![0, 0], 1, Masks::empty(2))
            .unwrap();
        assert_eq!(g.edges(), &[(0, 1), (1, 0)]);
    }
}
