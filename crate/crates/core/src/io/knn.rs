use ndarray::{Array2, ArrayView1};
use rayon::prelude::*;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    Euclidean,
    /// `1 − cos`; a zero vector is at distance 1 from everything.
    Cosine,
}

impl Metric {
    pub fn name(self) -> &'static str {
        match self {
            Metric::Euclidean => "euclidean",
            Metric::Cosine => "cosine",
        }
    }
}

impl std::str::FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "euclidean" => Ok(Metric::Euclidean),
            "cosine" => Ok(Metric::Cosine),
            _ => Err(Error::invalid(format!("unknown metric {s:?} (expected euclidean or cosine)"))),
        }
    }
}

fn distance(metric: Metric, a: ArrayView1<f64>, b: ArrayView1<f64>, na: f64, nb: f64) -> f64 {
    match metric {
        // squared distance orders the same way
        Metric::Euclidean => a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum(),
        Metric::Cosine => {
            if na == 0.0 || nb == 0.0 {
                1.0
            } else {
                1.0 - a.dot(&b) / (na * nb)
            }
        }
    }
}

/// Undirected `k`-nearest-neighbor edges, each pair once as `(u, v)` with
/// `u < v`, sorted. Ties go to the lower node index.
pub fn knn_graph(features: &Array2<f64>, k: usize, metric: Metric) -> Result<Vec<(usize, usize)>> {
    let n = features.nrows();
    if k == 0 || k >= n {
        return Err(Error::invalid(format!("k = {k} must satisfy 0 < k < N = {n}")));
    }
    let norms: Vec<f64> = features.rows().into_iter().map(|r| r.dot(&r).sqrt()).collect();
    let lists: Vec<Vec<usize>> = (0..n)
        .into_par_iter()
        .map(|v| {
            let row = features.row(v);
            let mut cand: Vec<(f64, usize)> = (0..n)
                .filter(|&u| u != v)
                .map(|u| (distance(metric, row, features.row(u), norms[v], norms[u]), u))
                .collect();
            cand.select_nth_unstable_by(k - 1, |a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            cand.truncate(k);
            cand.into_iter().map(|(_, u)| u).collect()
        })
        .collect();
    let mut edges: Vec<(usize, usize)> =
        lists.iter().enumerate().flat_map(|(v, us)| us.iter().map(move |&u| (v.min(u), v.max(u)))).collect();
    edges.sort_unstable();
    edges.dedup();
    Ok(edges)
}
