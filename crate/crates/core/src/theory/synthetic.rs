//! Random neighborhoods and graphs with controlled homophily.

use ndarray::{Array1, Array2};
use rand::seq::IndexedRandom;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::graph::{Graph, Masks};
use crate::rng;

/// Parameters of a class-conditional neighborhood model.
///
/// A node of class `y` has `degree` neighbors. Each neighbor independently
/// shares `y` with probability `homophily` and otherwise takes one of the
/// other classes uniformly. Neighbor features are uniform per dimension on
/// `μ(c) ± half_width`; neighbor soft labels are one-hot rows that keep the
/// neighbor's class with probability `1 − label_noise`.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub num_classes: usize,
    pub homophily: f64,
    pub label_noise: f64,
    pub feature_bound: f64,
    /// `C × F`, every entry within `±feature_bound`.
    pub class_means: Array2<f64>,
    pub degree: usize,
    pub nodes_per_class: usize,
    /// Allow `homophily ≤ 1/C`.
    pub heterophilic: bool,
    pub seed: u64,
}

/// Half-width of the per-dimension feature noise.
pub const FEATURE_HALF_WIDTH: f64 = 0.5;

impl SyntheticSpec {
    /// Means uniform on `[−1, 1]`, bound `1.5`, so truncation never applies.
    pub fn with_random_means(
        num_classes: usize,
        feature_dim: usize,
        homophily: f64,
        label_noise: f64,
        degree: usize,
        seed: u64,
    ) -> Self {
        let mut r = rng::substream(seed, rng::SYNTHETIC);
        let class_means = Array2::from_shape_fn((num_classes, feature_dim), |_| r.random_range(-1.0..=1.0));
        SyntheticSpec {
            num_classes,
            homophily,
            label_noise,
            feature_bound: 1.5,
            class_means,
            degree,
            nodes_per_class: 100,
            heterophilic: homophily * num_classes as f64 <= 1.0,
            seed,
        }
    }

    pub fn feature_dim(&self) -> usize {
        self.class_means.ncols()
    }

    pub fn validate(&self) -> Result<()> {
        let c = self.num_classes;
        if c < 2 {
            return Err(Error::invalid("need at least two classes"));
        }
        if self.class_means.nrows() != c || self.class_means.ncols() == 0 {
            return Err(Error::dims(
                "SyntheticSpec",
                format!("{c} × F means"),
                format!("{:?}", self.class_means.dim()),
            ));
        }
        if !(self.homophily > 0.0 && self.homophily <= 1.0) {
            return Err(Error::invalid(format!("homophily {} outside (0, 1]", self.homophily)));
        }
        if self.homophily * c as f64 <= 1.0 && !self.heterophilic {
            return Err(Error::invalid(format!("homophily {} ≤ 1/C needs the heterophilic flag", self.homophily)));
        }
        if !(0.0..1.0).contains(&self.label_noise) {
            return Err(Error::invalid(format!("label noise {} outside [0, 1)", self.label_noise)));
        }
        if !(self.feature_bound > 0.0) {
            return Err(Error::invalid("feature bound must be positive"));
        }
        if self.class_means.iter().any(|m| m.abs() > self.feature_bound) {
            return Err(Error::invalid("class means exceed the feature bound"));
        }
        if self.degree == 0 {
            return Err(Error::invalid("degree must be positive"));
        }
        Ok(())
    }

    /// Largest half-width that keeps every support inside `±B`.
    pub fn half_width(&self) -> f64 {
        let max_mean = self.class_means.iter().fold(0.0f64, |a, m| a.max(m.abs()));
        FEATURE_HALF_WIDTH.min(self.feature_bound - max_mean)
    }
}

/// One sampled neighborhood of a center node.
#[derive(Debug, Clone, PartialEq)]
pub struct Neighborhood {
    pub labels: Vec<usize>,
    /// `d × F`
    pub features: Array2<f64>,
    /// `d × C`, one-hot rows
    pub soft_labels: Array2<f64>,
}

fn other_class<R: Rng>(c: usize, classes: usize, rng: &mut R) -> usize {
    let k = rng.random_range(0..classes - 1);
    if k >= c {
        k + 1
    } else {
        k
    }
}

pub(crate) fn sample_labels<R: Rng>(spec: &SyntheticSpec, center: usize, rng: &mut R, out: &mut Vec<usize>) {
    out.clear();
    out.extend((0..spec.degree).map(|_| {
        if rng.random::<f64>() < spec.homophily {
            center
        } else {
            other_class(center, spec.num_classes, rng)
        }
    }));
}

pub(crate) fn sample_feature<R: Rng>(spec: &SyntheticSpec, class: usize, dim: usize, half: f64, rng: &mut R) -> f64 {
    let mu = spec.class_means[[class, dim]];
    let x = if half > 0.0 { rng.random_range(mu - half..mu + half) } else { mu };
    x.clamp(-spec.feature_bound, spec.feature_bound)
}

pub(crate) fn sample_soft_class<R: Rng>(spec: &SyntheticSpec, class: usize, rng: &mut R) -> usize {
    if rng.random::<f64>() < spec.label_noise {
        other_class(class, spec.num_classes, rng)
    } else {
        class
    }
}

pub fn generate_neighborhood<R: Rng>(spec: &SyntheticSpec, center_class: usize, rng: &mut R) -> Result<Neighborhood> {
    spec.validate()?;
    if center_class >= spec.num_classes {
        return Err(Error::invalid(format!("center class {center_class} outside [0, {})", spec.num_classes)));
    }
    let mut labels = Vec::new();
    sample_labels(spec, center_class, rng, &mut labels);
    let (d, f, c) = (spec.degree, spec.feature_dim(), spec.num_classes);
    let half = spec.half_width();
    let mut features = Array2::zeros((d, f));
    let mut soft_labels = Array2::zeros((d, c));
    for (j, &y) in labels.iter().enumerate() {
        for k in 0..f {
            features[[j, k]] = sample_feature(spec, y, k, half, rng);
        }
        soft_labels[[j, sample_soft_class(spec, y, rng)]] = 1.0;
    }
    Ok(Neighborhood { labels, features, soft_labels })
}

/// `p μ(y) + (1 − p)/(C − 1) Σ_{c≠y} μ(c)`.
pub fn expected_mixed_feature(spec: &SyntheticSpec, class: usize) -> Array1<f64> {
    let c = spec.num_classes as f64;
    let p = spec.homophily;
    let total = spec.class_means.sum_axis(ndarray::Axis(0));
    let own = spec.class_means.row(class);
    &own * p + &((&total - &own) * ((1.0 - p) / (c - 1.0)))
}

/// Coefficient on the own class and on each other class of the expected mixed label.
pub fn expected_label_coefficients(num_classes: usize, homophily: f64, label_noise: f64) -> (f64, f64) {
    let c = num_classes as f64;
    let (p, e) = (homophily, label_noise);
    let own = p * (1.0 - e) + e * (1.0 - p) / (c - 1.0);
    let other = (p * e + (1.0 - p) * (1.0 - e)) / (c - 1.0) + e * (1.0 - p) * (c - 2.0) / ((c - 1.0) * (c - 1.0));
    (own, other)
}

pub fn expected_mixed_label(spec: &SyntheticSpec, class: usize) -> Array1<f64> {
    let (own, other) = expected_label_coefficients(spec.num_classes, spec.homophily, spec.label_noise);
    let mut out = Array1::from_elem(spec.num_classes, other);
    out[class] = own;
    out
}

/// Parameters of a planted-partition graph used for training experiments.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphSpec {
    pub nodes: usize,
    pub classes: usize,
    /// Probability that an edge stays inside its class.
    pub homophily: f64,
    pub avg_degree: f64,
    pub feature_dim: usize,
    /// Standard deviation of the Gaussian feature noise around the class mean.
    pub feature_noise: f64,
    pub seed: u64,
}

impl Default for GraphSpec {
    fn default() -> Self {
        GraphSpec {
            nodes: 1000,
            classes: 5,
            homophily: 0.85,
            avg_degree: 6.0,
            feature_dim: 32,
            feature_noise: 1.0,
            seed: 0,
        }
    }
}

impl GraphSpec {
    /// The small noisy benchmark graph used by the training checks: 1000
    /// nodes, 5 classes, 16 features with noise 4 and average degree 3.
    pub fn benchmark(homophily: f64) -> Self {
        GraphSpec { homophily, avg_degree: 3.0, feature_dim: 16, feature_noise: 4.0, ..GraphSpec::default() }
    }
}

/// Node `v` has class `v mod C`; class means are standard normal; each edge
/// starts at a uniform node and ends inside its class with probability
/// `homophily`, else in a uniformly chosen other class. Masks are empty.
pub fn generate_graph(spec: &GraphSpec) -> Result<Graph> {
    if spec.classes < 2 || spec.nodes < spec.classes {
        return Err(Error::invalid("need at least two classes and one node per class"));
    }
    if !(0.0..=1.0).contains(&spec.homophily) || !(spec.avg_degree > 0.0) || spec.feature_dim == 0 {
        return Err(Error::invalid("homophily in [0, 1], positive degree and feature width required"));
    }
    let mut r = rng::substream(spec.seed, rng::SYNTHETIC);
    let (n, c) = (spec.nodes, spec.classes);
    let labels: Vec<usize> = (0..n).map(|v| v % c).collect();
    let members: Vec<Vec<usize>> = (0..c).map(|k| (k..n).step_by(c).collect()).collect();
    let means: Array2<f64> = Array2::from_shape_fn((c, spec.feature_dim), |_| StandardNormal.sample(&mut r));
    let features = Array2::from_shape_fn((n, spec.feature_dim), |(v, j)| {
        let z: f64 = StandardNormal.sample(&mut r);
        means[[labels[v], j]] + spec.feature_noise * z
    });
    let target = (n as f64 * spec.avg_degree / 2.0).round() as usize;
    let mut edges = Vec::with_capacity(target);
    while edges.len() < target {
        let u = r.random_range(0..n);
        let k = if r.random::<f64>() < spec.homophily { labels[u] } else { other_class(labels[u], c, &mut r) };
        let &v = members[k].choose(&mut r).expect("every class has members");
        if u != v {
            edges.push((u, v));
        }
    }
    Graph::from_undirected(features, &edges, labels, c, Masks::empty(n))
}

/// Erdős–Rényi graph on `nodes` nodes, features uniform on `[−1, 1]`,
/// labels uniform over `classes`, empty masks.
pub fn erdos_renyi<R: Rng>(rng: &mut R, nodes: usize, edge_prob: f64, dim: usize, classes: usize) -> Result<Graph> {
    if !(0.0..=1.0).contains(&edge_prob) || classes == 0 {
        return Err(Error::invalid("edge probability in [0, 1] and at least one class required"));
    }
    let mut edges = Vec::new();
    for u in 0..nodes {
        for v in u + 1..nodes {
            if rng.random::<f64>() < edge_prob {
                edges.push((u, v));
            }
        }
    }
    let x = Array2::from_shape_fn((nodes, dim), |_| rng.random_range(-1.0..=1.0));
    let labels = (0..nodes).map(|_| rng.random_range(0..classes)).collect();
    Graph::from_undirected(x, &edges, labels, classes, Masks::empty(nodes))
}
