//! Central finite-difference checks for the hand-written reverse passes.

use ndarray::Array2;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::augment::{MixConfig, MixVariant};
use crate::error::Result;
use crate::graph::{Graph, Masks, NormScheme};
use crate::rng;
use crate::trainer::{init_params, loss_and_grads, softmax, ModelParams, TrainConfig, TrainContext};

/// Finite-difference step.
pub const STEP: f64 = 1e-5;
/// Magnitudes below this are compared absolutely.
pub const FLOOR: f64 = 1e-6;
/// Pass threshold on the relative error.
pub const TOLERANCE: f64 = 1e-4;

/// `|a − n| / max(|a|, |n|, floor)`.
pub fn relative_error(analytic: f64, numeric: f64, floor: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TensorCheck {
    pub tensor: String,
    pub entries: usize,
    pub max_rel_error: f64,
    pub max_abs_error: f64,
}

impl TensorCheck {
    pub fn passed(&self) -> bool {
        self.max_rel_error <= TOLERANCE
    }
}

/// A small random problem: graph, pseudo-labels and a training config.
#[derive(Debug, Clone)]
pub struct Instance {
    pub graph: Graph,
    pub pseudo: Array2<f64>,
    pub config: TrainConfig,
}

/// Random instance with `nodes` nodes, 5 features and 3 classes.
pub fn random_instance(seed: u64, nodes: usize, variant: MixVariant) -> Result<Instance> {
    let mut rng = rng::substream(seed, rng::SYNTHETIC);
    let (f, c) = (5, 3);
    let mut edges = Vec::new();
    for u in 0..nodes {
        for v in u + 1..nodes {
            if rng.random::<f64>() < 0.3 {
                edges.push((u, v));
            }
        }
    }
    let x = Array2::from_shape_fn((nodes, f), |_| rng.random_range(-1.0..1.0));
    let labels: Vec<usize> = (0..nodes).map(|_| rng.random_range(0..c)).collect();
    let mut masks = Masks::empty(nodes);
    for v in 0..nodes.min(4) {
        masks.train[v] = true;
    }
    let graph = Graph::from_undirected(x, &edges, labels, c, masks)?;
    let mut pseudo = softmax(&Array2::from_shape_fn((nodes, c), |_| rng.random_range(-2.0..2.0)));
    for v in 0..nodes.min(4) {
        pseudo.row_mut(v).fill(0.0);
        pseudo[[v, graph.labels()[v]]] = 1.0;
    }
    let scheme = if seed.is_multiple_of(2) { NormScheme::RowNormalized } else { NormScheme::Symmetric };
    let config = TrainConfig {
        dropout: 0.0,
        lambda: 0.7,
        hidden: 6,
        projection_dim: 3,
        seed,
        mix: MixConfig { variant, alpha: 0.4, eta: 0.3, hops: 2, scheme, self_loops: seed.is_multiple_of(3) },
        ..TrainConfig::default()
    };
    Ok(Instance { graph, pseudo, config })
}

/// Compares every parameter gradient of the mixed loss with central differences.
pub fn check_instance(inst: &Instance, params: &ModelParams) -> Result<Vec<TensorCheck>> {
    let ctx = TrainContext::new(&inst.graph, &inst.config.mix);
    let loss = |p: &ModelParams| -> Result<f64> {
        Ok(loss_and_grads::<ChaCha8Rng>(p, &ctx, &inst.pseudo, &inst.config, None)?.0)
    };
    let (_, grads) = loss_and_grads::<ChaCha8Rng>(params, &ctx, &inst.pseudo, &inst.config, None)?;
    let analytic: Vec<(String, Vec<f64>)> = grads
        .tensors()
        .iter()
        .enumerate()
        .map(|(i, (name, t, _))| (label(name, i), t.iter().copied().collect()))
        .collect();

    let mut out = Vec::new();
    let mut probe = params.clone();
    for (i, (name, grad)) in analytic.iter().enumerate() {
        let mut check =
            TensorCheck { tensor: name.clone(), entries: grad.len(), max_rel_error: 0.0, max_abs_error: 0.0 };
        for (j, &a) in grad.iter().enumerate() {
            let orig = entry(&mut probe, i, j);
            set(&mut probe, i, j, orig + STEP);
            let up = loss(&probe)?;
            set(&mut probe, i, j, orig - STEP);
            let down = loss(&probe)?;
            set(&mut probe, i, j, orig);
            let n = (up - down) / (2.0 * STEP);
            check.max_abs_error = check.max_abs_error.max((a - n).abs());
            check.max_rel_error = check.max_rel_error.max(relative_error(a, n, FLOOR));
        }
        out.push(check);
    }
    Ok(out)
}

fn label(name: &str, index: usize) -> String {
    if index < 4 {
        name.to_string()
    } else {
        format!("{name}[{}]", (index - 4) / 2)
    }
}

fn entry(p: &mut ModelParams, tensor: usize, j: usize) -> f64 {
    p.tensors_mut()[tensor].iter().nth(j).copied().unwrap_or_default()
}

fn set(p: &mut ModelParams, tensor: usize, j: usize, value: f64) {
    if let Some(x) = p.tensors_mut()[tensor].iter_mut().nth(j) {
        *x = value;
    }
}

/// GCN weights and biases, mixup with fixed weights.
pub fn check_gcn(seed: u64, nodes: usize) -> Result<Vec<TensorCheck>> {
    let inst = random_instance(seed, nodes, MixVariant::GeoMixI)?;
    let params = init_params(&inst.graph, &inst.config);
    check_instance(&inst, &params)
}

/// GCN plus every hop's attention projections.
pub fn check_geomix3(seed: u64, nodes: usize) -> Result<Vec<TensorCheck>> {
    let inst = random_instance(seed, nodes, MixVariant::GeoMixIII)?;
    let mut params = init_params(&inst.graph, &inst.config);
    // larger projections make the attention far from uniform
    if let Some(a) = params.attention.as_mut() {
        for h in a.hops_mut() {
            h.query.mapv_inplace(|w| 3.0 * w);
            h.key.mapv_inplace(|w| 3.0 * w);
        }
    }
    check_instance(&inst, &params)
}

/// Worst result per tensor name across `reps` seeds starting at `seed`.
pub fn worst_over_seeds(
    seed: u64,
    reps: u64,
    nodes: usize,
    check: fn(u64, usize) -> Result<Vec<TensorCheck>>,
) -> Result<Vec<TensorCheck>> {
    let mut worst: Vec<TensorCheck> = Vec::new();
    for s in seed..seed + reps {
        for c in check(s, nodes)? {
            match worst.iter_mut().find(|w| w.tensor == c.tensor) {
                Some(w) => {
                    w.max_rel_error = w.max_rel_error.max(c.max_rel_error);
                    w.max_abs_error = w.max_abs_error.max(c.max_abs_error);
                    w.entries = w.entries.max(c.entries);
                }
                None => worst.push(c),
            }
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relative_error_floor() {
        assert_eq!(relative_error(1.0, 1.0, FLOOR), 0.0);
        assert!((relative_error(2.0, 1.0, FLOOR) - 0.5).abs() < 1e-15);
        assert!((relative_error(1e-9, 0.0, FLOOR) - 1e-3).abs() < 1e-15);
    }

    #[test]
    fn gcn_gradients_match() {
        for c in worst_over_seeds(0, 3, 12, check_gcn).unwrap() {
            assert!(c.passed(), "{c:?}");
        }
    }

    #[test]
    fn geomix3_gradients_match() {
        let checks = worst_over_seeds(0, 3, 12, check_geomix3).unwrap();
        assert!(checks.iter().any(|c| c.tensor == "w_q[1]"));
        for c in checks {
            assert!(c.passed(), "{c:?}");
        }
    }
}
