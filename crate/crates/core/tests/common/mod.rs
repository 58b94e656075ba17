#![allow(dead_code)]

use geomix::graph::Graph;
use ndarray::Array2;
use rand::Rng;

pub fn random_graph<R: Rng>(rng: &mut R, nodes: usize, edge_prob: f64, dim: usize, classes: usize) -> Graph {
    geomix::theory::erdos_renyi(rng, nodes, edge_prob, dim, classes).unwrap()
}

/// Random rows on the probability simplex.
pub fn random_simplex<R: Rng>(rng: &mut R, rows: usize, classes: usize) -> Array2<f64> {
    let mut y = Array2::from_shape_fn((rows, classes), |_| rng.random::<f64>() + 1e-3);
    for mut row in y.rows_mut() {
        let s = row.sum();
        row /= s;
    }
    y
}

/// Dense `N × N` weight matrix times `m`.
pub fn dense_aggregate(w: &Array2<f64>, m: &Array2<f64>) -> Array2<f64> {
    w.dot(m)
}

/// Quadratic all-pair attention: `a_vu ∝ 1 + q_vᵀ k_u`, uniform if the row
/// normalizer is degenerate.
pub fn dense_allpair(q: &Array2<f64>, k: &Array2<f64>, values: &Array2<f64>) -> Array2<f64> {
    let n = q.nrows();
    let mut out = Array2::zeros(values.dim());
    for v in 0..n {
        let scores: Vec<f64> = (0..n).map(|u| 1.0 + q.row(v).dot(&k.row(u))).collect();
        let total: f64 = scores.iter().sum();
        for u in 0..n {
            let a = if total < 1e-9 { 1.0 / n as f64 } else { scores[u] / total };
            out.row_mut(v).scaled_add(a, &values.row(u));
        }
    }
    out
}
